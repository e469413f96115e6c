#include <cmath>
#include <cstdio>
#include <string>

#include "dgm/error.hpp"
#include "dgm/parallel.hpp"
#include "dgm/probe.hpp"

namespace dgm {

double example1_step(double theta, double gamma, double u) {
  double next = gamma * theta + (1.0 - gamma) * (2.0 * u - 1.0);
  if (next > 1.0) next -= 1.0;
  if (next < 0.0) next += 1.0;
  if (!(next > 0.0 && next < 1.0)) next = 0.5;
  return next;
}

ContinuousWorld example1_world(double cost, double gamma, double delta) {
  ContinuousWorld w;
  ContinuousPlayer p;
  p.name = "buyer";
  p.lower = Eigen::VectorXd::Constant(1, 0.0);
  p.upper = Eigen::VectorXd::Constant(1, 1.0);
  p.noise_dimension = 1;
  p.valuation = [](const Eigen::VectorXd& theta, std::size_t a) { return theta(0) * static_cast<double>(a); };
  p.transition = [gamma](const Eigen::VectorXd& theta, std::size_t, const double* u, Eigen::VectorXd& next) {
    next.resize(1);
    next(0) = example1_step(theta(0), gamma, u[0]);
  };
  w.players.push_back(std::move(p));
  w.num_actions = 2;
  w.discount = delta;
  w.decision = [cost](const Profile& prof) -> std::size_t { return prof[0](0) >= cost ? 1 : 0; };
  w.valuation_bound = 1.0;
  return w;
}

void Example1Params::validate() const {
  if (!(cost > 0.0 && cost < 1.0)) throw InputError("example1: cost must lie in (0, 1)");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError("example1: gamma must lie in [0, 1)");
  if (!(delta >= 0.0 && delta < 1.0)) throw InputError("example1: delta must lie in [0, 1)");
  if (paths < 1) throw InputError("example1: paths must be >= 1");
  for (double x : grid)
    if (!(x > 0.0 && x < 1.0)) throw InputError("example1: grid points must lie in (0, 1)");
  for (double x : reports)
    if (!(x > 0.0 && x < 1.0)) throw InputError("example1: reports must lie in (0, 1)");
}

namespace {

struct Moments {
  double mean = 0.0, se = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  const auto n = static_cast<double>(xs.size());
  for (double x : xs) m.mean += x;
  m.mean /= n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return m;
}

}  // namespace

bool Example1Report::linear() const {
  for (const auto& f : fits)
    if (!f.linear()) return false;
  return true;
}

Example1Report example1_run(const Example1Params& input) {
  Example1Params params = input;
  if (params.grid.empty())
    for (int k = 1; k <= 9; ++k) params.grid.push_back(k / 10.0);
  if (params.reports.empty()) params.reports = {params.cost / 2.0, (1.0 + params.cost) / 2.0};
  params.validate();

  const std::size_t K = params.grid.size();
  double mean_x = 0.0;
  for (double x : params.grid) mean_x += x;
  mean_x /= static_cast<double>(K);
  double sxx = 0.0;
  for (double x : params.grid) sxx += (x - mean_x) * (x - mean_x);
  if (!(sxx > 0.0)) throw InputError("example1: grid needs at least two distinct points");

  Example1Report report;
  report.params = params;
  report.horizon = params.horizon > 0 ? params.horizon : tail_horizon(params.delta, 1.0);
  report.tail_bound =
      params.delta == 0.0 ? 0.0 : std::pow(params.delta, static_cast<double>(report.horizon)) / (1.0 - params.delta);
  const std::size_t T = report.horizon;
  const std::size_t N = params.paths;
  const NoiseStream noise(params.seed);

  for (double bar : params.reports) {
    // values[p * K + k]: truncated V^D on path p from theta^0 = grid[k].
    std::vector<double> values(N * K), pathwise(N);
    detail::parallel_for(N, [&](std::size_t p) {
      std::vector<double> theta(params.grid);
      double* v = &values[p * K];
      for (std::size_t k = 0; k < K; ++k) v[k] = 0.0;
      double reported = bar, weight = 1.0, growth = 1.0, derivative = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        const bool on = reported >= params.cost;
        if (on) {
          for (std::size_t k = 0; k < K; ++k) v[k] += weight * theta[k];
          derivative += weight * growth;
        }
        weight *= params.delta;
        growth *= params.gamma;
        if (t + 1 == T) break;
        const double u = noise.uniform(p, 0, t + 1);
        for (std::size_t k = 0; k < K; ++k) theta[k] = example1_step(theta[k], params.gamma, u);
        reported = example1_step(reported, params.gamma, u);
      }
      pathwise[p] = derivative;
    });

    Example1Fit fit;
    fit.report = bar;
    fit.action = bar >= params.cost ? 1 : 0;
    // Per-path regression: every reported statistic is a linear functional of
    // the path's values, so its SE comes from the per-path spread.
    std::vector<double> slope(N), intercept(N), gap(N);
    std::vector<std::vector<double>> residual(K, std::vector<double>(N));
    for (std::size_t p = 0; p < N; ++p) {
      const double* v = &values[p * K];
      double mean_v = 0.0, sxy = 0.0;
      for (std::size_t k = 0; k < K; ++k) mean_v += v[k];
      mean_v /= static_cast<double>(K);
      for (std::size_t k = 0; k < K; ++k) sxy += (params.grid[k] - mean_x) * v[k];
      slope[p] = sxy / sxx;
      intercept[p] = mean_v - slope[p] * mean_x;
      for (std::size_t k = 0; k < K; ++k) residual[k][p] = v[k] - intercept[p] - slope[p] * params.grid[k];
      gap[p] = slope[p] - pathwise[p];
    }
    const Moments ms = moments(slope), mi = moments(intercept), mp = moments(pathwise), mg = moments(gap);
    fit.slope = ms.mean;
    fit.slope_se = ms.se;
    fit.intercept = mi.mean;
    fit.pathwise = mp.mean;
    fit.pathwise_se = mp.se;
    fit.slope_gap = mg.mean;
    fit.slope_gap_se = mg.se;
    fit.slope_ok = std::abs(mg.mean) <= 3.0 * mg.se + kExample1Floor;

    fit.residual_ok = true;
    std::vector<double> column(N);
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t p = 0; p < N; ++p) column[p] = values[p * K + k];
      const Moments mv = moments(column);
      const Moments mr = moments(residual[k]);
      Example1Row row;
      row.theta = params.grid[k];
      row.value = mv.mean;
      row.standard_error = mv.se;
      row.fitted = fit.intercept + fit.slope * row.theta;
      row.residual = mr.mean;
      row.residual_se = mr.se;
      fit.rows.push_back(row);
      const double r = std::abs(mr.mean);
      fit.max_abs_residual = std::max(fit.max_abs_residual, r);
      if (r > 3.0 * mr.se + kExample1Floor) fit.residual_ok = false;
      const double ratio = mr.se > 0.0 ? r / mr.se : (r <= kExample1Floor ? 0.0 : INFINITY);
      fit.worst_residual_ratio = std::max(fit.worst_residual_ratio, ratio);
    }
    report.fits.push_back(std::move(fit));
  }
  return report;
}

nlohmann::ordered_json to_json(const Example1Report& r) {
  nlohmann::ordered_json out;
  out["banner"] = kHeuristicBanner;
  out["params"] = {{"cost", r.params.cost},     {"gamma", r.params.gamma},     {"delta", r.params.delta},
                   {"paths", r.params.paths},   {"horizon", r.horizon},        {"seed", r.params.seed},
                   {"grid", r.params.grid},     {"reports", r.params.reports}, {"tail_bound", r.tail_bound},
                   {"floor", kExample1Floor}};
  out["linear"] = r.linear();
  auto& fits = out["fits"] = nlohmann::ordered_json::array();
  for (const auto& f : r.fits) {
    nlohmann::ordered_json j{{"report", f.report},
                             {"action", f.action},
                             {"slope", f.slope},
                             {"slope_se", f.slope_se},
                             {"intercept", f.intercept},
                             {"max_abs_residual", f.max_abs_residual},
                             {"worst_residual_ratio", std::isfinite(f.worst_residual_ratio)
                                                          ? nlohmann::ordered_json(f.worst_residual_ratio)
                                                          : nlohmann::ordered_json("inf")},
                             {"residual_ok", f.residual_ok},
                             {"pathwise", f.pathwise},
                             {"pathwise_se", f.pathwise_se},
                             {"slope_gap", f.slope_gap},
                             {"slope_gap_se", f.slope_gap_se},
                             {"slope_ok", f.slope_ok}};
    auto& rows = j["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : f.rows)
      rows.push_back({{"theta0", row.theta},
                      {"value", row.value},
                      {"se", row.standard_error},
                      {"fitted", row.fitted},
                      {"residual", row.residual},
                      {"residual_se", row.residual_se}});
    fits.push_back(std::move(j));
  }
  return out;
}

std::string example1_csv(const Example1Report& r) {
  std::string out = "report,theta0,value,se\n";
  char buf[128];
  for (const auto& f : r.fits)
    for (const auto& row : f.rows) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", f.report, row.theta, row.value,
                    row.standard_error);
      out += buf;
    }
  return out;
}

}  // namespace dgm
