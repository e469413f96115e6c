#include <charconv>
#include <cmath>
#include <string>

#include "dgm/error.hpp"
#include "dgm/mdp.hpp"
#include "dgm/probe.hpp"

namespace dgm {

std::vector<double> cell_midpoints(const ContinuousPlayer& player, std::size_t cells) {
  const double lo = player.lower(0), hi = player.upper(0);
  const double width = (hi - lo) / static_cast<double>(cells);
  std::vector<double> out(cells);
  for (std::size_t k = 0; k < cells; ++k) out[k] = lo + (static_cast<double>(k) + 0.5) * width;
  return out;
}

namespace {

std::string label(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

Environment discretize_world(const ContinuousWorld& world, const GridSpec& grid) {
  world.validate();
  if (grid.cells < 2) throw InputError("grid: need at least two cells per dimension");
  if (grid.noise_points < 1) throw InputError("grid: need at least one noise point");

  std::vector<std::string> actions;
  for (std::size_t a = 0; a < world.num_actions; ++a) actions.push_back(std::to_string(a));

  std::vector<PlayerSpec> specs;
  for (std::size_t i = 0; i < world.players.size(); ++i) {
    const auto& p = world.players[i];
    const std::string where = "grid: player " + p.name;
    if (p.lower.size() != 1) throw InputError(where + ": only one-dimensional types can be discretized");
    if (p.noise_dimension != 1) throw InputError(where + ": only one-dimensional noise can be discretized");
    const std::vector<double> mid = cell_midpoints(p, grid.cells);
    const double lo = p.lower(0), hi = p.upper(0);
    const double width = (hi - lo) / static_cast<double>(grid.cells);
    const auto m = static_cast<Eigen::Index>(grid.cells);

    PlayerSpec spec;
    spec.name = p.name;
    for (double x : mid) spec.types.push_back(label(x));
    spec.valuation.resize(m, static_cast<Eigen::Index>(world.num_actions));
    Eigen::VectorXd type(1), next(1);
    for (std::size_t a = 0; a < world.num_actions; ++a) {
      Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, m);
      for (Eigen::Index c = 0; c < m; ++c) {
        type(0) = mid[static_cast<std::size_t>(c)];
        spec.valuation(c, static_cast<Eigen::Index>(a)) = p.valuation(type, a);
        std::size_t landed = 0;
        for (std::size_t q = 0; q < grid.noise_points; ++q) {
          const double u = (static_cast<double>(q) + 0.5) / static_cast<double>(grid.noise_points);
          p.transition(type, a, &u, next);
          const double x = next(0);
          if (!(x > lo && x < hi)) continue;
          auto cell = static_cast<Eigen::Index>(std::floor((x - lo) / width));
          if (cell >= m) cell = m - 1;
          k(c, cell) += 1.0;
          ++landed;
        }
        if (landed == 0) {
          if (!grid.allow_empty)
            throw InputError(where + ": simulator leaves the domain from cell " + std::to_string(c) + " under action " +
                             std::to_string(a));
          k.row(c).setConstant(1.0 / static_cast<double>(m));
        } else {
          k.row(c) /= static_cast<double>(landed);
        }
      }
      spec.transition.push_back(std::move(k));
    }
    specs.push_back(std::move(spec));
  }
  return Environment(std::move(actions), std::move(specs), world.discount);
}

RefinementReport refinement_diagnostics(const ContinuousWorld& world, const GridSpec& coarse) {
  if (world.players.size() != 1) throw InputError("refinement: single-player worlds only");
  RefinementReport r;
  r.coarse_cells = coarse.cells;
  r.fine_cells = 2 * coarse.cells;
  GridSpec fine = coarse;
  fine.cells = r.fine_cells;

  const Environment ce = discretize_world(world, coarse);
  const Environment fe = discretize_world(world, fine);
  for (const auto& k : ce.player(0).transition)
    r.max_row_error = std::max(r.max_row_error, (k.rowwise().sum().array() - 1.0).abs().maxCoeff());
  const Eigen::VectorXd wc = solve_efficient(ce).welfare;
  const Eigen::VectorXd wf = solve_efficient(fe).welfare;
  for (Eigen::Index k = 1; k < wc.size(); ++k) {
    const double drop = wc(k - 1) - wc(k);
    if (drop > 0.0) {
      r.monotone = false;
      r.worst_drop = std::max(r.worst_drop, drop);
    }
  }
  // Coarse midpoint k sits halfway between fine midpoints 2k and 2k + 1.
  for (Eigen::Index k = 1; k + 1 < wc.size(); ++k) {
    const double fine_value = 0.5 * (wf(2 * k) + wf(2 * k + 1));
    r.cauchy_difference = std::max(r.cauchy_difference, std::abs(wc(k) - fine_value));
  }
  return r;
}

}  // namespace dgm
