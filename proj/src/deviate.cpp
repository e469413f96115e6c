#include "dgm/deviate.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dgm/error.hpp"
#include "dgm/parallel.hpp"

namespace dgm {

DeviationGain one_shot_gain(const Mechanism& mech, std::size_t player, std::size_t state, std::size_t report) {
  const Environment& env = mech.env();
  if (player >= env.num_players() || state >= env.num_states() || report >= env.num_types(player))
    throw std::out_of_range("one_shot_gain: index out of range");
  DeviationGain g{player, state, report, 0.0};
  const std::size_t truth = env.space().component(state, player);
  if (report == truth) return g;

  const std::size_t reported = env.space().with_component(state, player, report);
  const std::size_t a = mech.policy()(reported);
  const auto& terms = mech.player(player);
  const auto& continuation = terms.total_payoff;
  g.gain = env.valuation(player, truth, a) - terms.flow_transfer(static_cast<Eigen::Index>(reported)) +
           env.discount() * env.expect(state, a, continuation) -
           continuation(static_cast<Eigen::Index>(state));
  return g;
}

IcAudit verify_ic(const Mechanism& mech, double tolerance, bool keep_table) {
  if (!(tolerance > 0.0)) throw std::invalid_argument("verify_ic: tolerance must be > 0");
  const Environment& env = mech.env();
  IcAudit audit;
  audit.tolerance = tolerance;
  audit.max_gain = -std::numeric_limits<double>::infinity();
  bool any_misreport = false;
  for (std::size_t i = 0; i < env.num_players(); ++i)
    for (std::size_t s = 0; s < env.num_states(); ++s)
      for (std::size_t r = 0; r < env.num_types(i); ++r) {
        const DeviationGain g = one_shot_gain(mech, i, s, r);
        ++audit.checked;
        if (keep_table) audit.gains.push_back(g);
        if (r == env.space().component(s, i)) continue;
        any_misreport = true;
        if (g.gain > audit.max_gain) {
          audit.max_gain = g.gain;
          audit.worst = g;
        }
      }
  if (!any_misreport) {
    audit.max_gain = 0.0;
    audit.worst = DeviationGain{};
  }
  audit.pass = audit.max_gain <= tolerance;
  return audit;
}

BestResponse best_response_value(const Mechanism& mech, std::size_t player, const SolveOptions& options) {
  const Environment& env = mech.env();
  if (player >= env.num_players()) throw std::out_of_range("best_response_value: player");
  const auto& space = env.space();
  const std::size_t m = env.num_types(player);
  const auto& terms = mech.player(player);

  FiniteMdp mdp;
  mdp.num_states = env.num_states();
  mdp.discount = env.discount();
  mdp.reward.resize(static_cast<Eigen::Index>(env.num_states()), static_cast<Eigen::Index>(m));
  for (std::size_t r = 0; r < m; ++r) {
    std::vector<Eigen::Triplet<double>> entries;
    for (std::size_t s = 0; s < env.num_states(); ++s) {
      const std::size_t reported = space.with_component(s, player, r);
      const std::size_t a = mech.policy()(reported);
      mdp.reward(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(r)) =
          env.valuation(player, space.component(s, player), a) -
          terms.flow_transfer(static_cast<Eigen::Index>(reported));
      for (const auto& [next, prob] : env.joint_row(s, a))
        entries.emplace_back(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(next), prob);
    }
    SparseKernel k(static_cast<Eigen::Index>(env.num_states()), static_cast<Eigen::Index>(env.num_states()));
    k.setFromTriplets(entries.begin(), entries.end());
    mdp.transition.push_back(std::move(k));
  }
  auto sol = solve_mdp(mdp, options, [&](std::size_t s) { return space.component(s, player); });

  BestResponse out;
  out.player = player;
  out.value = std::move(sol.value);
  out.report = std::move(sol.policy.action);
  out.solve = sol.report;
  Eigen::Index worst = 0;
  out.max_gap = (out.value - terms.total_payoff).cwiseAbs().maxCoeff(&worst);
  out.worst_state = static_cast<std::size_t>(worst);
  out.truthful_optimal = out.max_gap <= 1e-8;
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(EvolutionVariant v) {
  return v == EvolutionVariant::actual_action ? "actual-action" : "truthful-action";
}

EvolutionVariant parse_variant(const std::string& text) {
  if (text == "actual-action") return EvolutionVariant::actual_action;
  if (text == "truthful-action" || text == "paper-literal") return EvolutionVariant::truthful_action;
  throw InputError("--variant: expected actual-action or paper-literal, got '" + text + "'");
}

namespace {

std::vector<double> kernel_row(const Environment& env, std::size_t player, std::size_t type, std::size_t action) {
  const Eigen::MatrixXd& k = env.player(player).transition[action];
  std::vector<double> row(env.num_types(player));
  for (std::size_t u = 0; u < row.size(); ++u)
    row[u] = k(static_cast<Eigen::Index>(type), static_cast<Eigen::Index>(u));
  return row;
}

}  // namespace

ConsistentValues consistent_values(const Mechanism& mech, std::size_t player, EvolutionVariant variant) {
  const Environment& env = mech.env();
  if (player >= env.num_players()) throw std::out_of_range("consistent_values: player");
  const auto& space = env.space();
  const Environment reduced = reduced_environment(env, player);
  const std::size_t m = env.num_types(player);
  const std::size_t others_n = reduced.num_states();

  ConsistentValues cv;
  cv.player = player;
  cv.variant = variant;
  cv.own_types = m;
  cv.others_states = others_n;

  const std::size_t n = m * m * others_n;
  std::vector<Eigen::Triplet<double>> entries;
  Eigen::VectorXd reward(static_cast<Eigen::Index>(n));
  for (std::size_t x = 0; x < m; ++x)
    for (std::size_t y = 0; y < m; ++y)
      for (std::size_t o = 0; o < others_n; ++o) {
        const std::size_t idx = cv.coupled_index(x, y, o);
        const std::size_t a = mech.policy()(space.insert(o, player, y));
        const std::size_t a_true =
            variant == EvolutionVariant::actual_action ? a : mech.policy()(space.insert(o, player, x));
        reward(static_cast<Eigen::Index>(idx)) = env.valuation(player, x, a);
        const Eigen::MatrixXd pair =
            couple_rows(kernel_row(env, player, x, a_true), kernel_row(env, player, y, a));
        const auto others_row = reduced.joint_row(o, a);
        for (std::size_t nx = 0; nx < m; ++nx)
          for (std::size_t ny = 0; ny < m; ++ny) {
            const double q = pair(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(ny));
            if (q <= 0.0) continue;
            for (const auto& [no, po] : others_row)
              entries.emplace_back(static_cast<Eigen::Index>(idx),
                                   static_cast<Eigen::Index>(cv.coupled_index(nx, ny, no)), q * po);
          }
      }
  SparseKernel kernel(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  kernel.setFromTriplets(entries.begin(), entries.end());
  cv.own = solve_discounted(kernel, reward, env.discount());

  // The reported process is indistinguishable from a truthful one started at
  // (bar theta_i, theta_{-i}), so these live on the ordinary joint chain.
  cv.others = evaluate_policy(env, mech.policy(),
                              [&](std::size_t s, std::size_t a) { return env.others_welfare(s, player, a); });
  cv.transfer = evaluate_flow(env, mech.policy(), mech.player(player).flow_transfer);
  return cv;
}

ConsistentPoint consistent_point(const Mechanism& mech, const ConsistentValues& cv, std::size_t state,
                                 std::size_t report) {
  const auto& space = mech.env().space();
  const std::size_t truth = space.component(state, cv.player);
  const std::size_t others = space.drop(state, cv.player);
  const auto reported = static_cast<Eigen::Index>(space.insert(others, cv.player, report));
  ConsistentPoint p;
  p.own = cv.own_value(truth, report, others);
  p.others = cv.others(reported);
  p.transfer = cv.transfer(reported);
  p.utility = p.own - p.transfer;
  p.welfare = p.own + p.others;
  return p;
}

// ---------------------------------------------------------------------------

std::size_t tail_horizon(double discount, double scale, double tail) {
  if (discount <= 0.0 || scale <= 0.0) return 1;
  std::size_t t = 1;
  double factor = discount;
  while (factor * scale / (1.0 - discount) > tail) {
    factor *= discount;
    ++t;
  }
  return t;
}

std::size_t default_horizon(const Mechanism& mech, double tail) {
  const Environment& env = mech.env();
  return tail_horizon(env.discount(), static_cast<double>(env.num_players()) * env.bound(), tail);
}

namespace {

struct PathTotals {
  double own = 0.0, others = 0.0, transfer = 0.0;
};

PathTotals run_path(const Mechanism& mech, const KernelSampler& sampler, const NoiseStream& noise,
                    std::size_t player, std::size_t state, std::size_t report, std::size_t horizon,
                    EvolutionVariant variant, std::uint64_t path, std::vector<ConsistentStep>* steps) {
  const Environment& env = mech.env();
  const auto& space = env.space();
  const auto& z = mech.player(player).flow_transfer;
  std::vector<std::size_t> profile = space.decode(state);
  std::size_t truth = profile[player];
  std::size_t reported_type = report;
  PathTotals totals;
  double weight = 1.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    profile[player] = reported_type;
    const std::size_t reported = space.encode(profile);
    const std::size_t a = mech.policy()(reported);
    std::size_t a_true = a;
    if (variant == EvolutionVariant::truthful_action) {
      profile[player] = truth;
      a_true = mech.policy()(space.encode(profile));
      profile[player] = reported_type;
    }
    const double own = env.valuation(player, truth, a);
    const double others = env.others_welfare(reported, player, a);
    const double transfer = z(static_cast<Eigen::Index>(reported));
    totals.own += weight * own;
    totals.others += weight * others;
    totals.transfer += weight * transfer;
    if (steps) steps->push_back({truth, reported_type, space.drop(reported, player), a, own, others, transfer});
    weight *= env.discount();

    for (std::size_t j = 0; j < env.num_players(); ++j) {
      const double u = noise.uniform(path, j, t + 1);
      if (j == player) {
        truth = sampler.next(j, truth, a_true, u);
        reported_type = sampler.next(j, reported_type, a, u);
      } else {
        profile[j] = sampler.next(j, profile[j], a, u);
      }
    }
  }
  return totals;
}

struct Tails {
  double own, others, transfer;
};

Tails tails(const Mechanism& mech, std::size_t player, std::size_t horizon) {
  const Environment& env = mech.env();
  const double d = env.discount();
  const double factor = d == 0.0 ? 0.0 : std::pow(d, static_cast<double>(horizon)) / (1.0 - d);
  const auto& z = mech.player(player).flow_transfer;
  const double zmax = z.size() ? z.cwiseAbs().maxCoeff() : 0.0;
  return {factor * env.bound(), factor * static_cast<double>(env.num_players() - 1) * env.bound(),
          factor * zmax};
}

MonteCarloEstimate summarize(const std::vector<double>& xs) {
  MonteCarloEstimate e;
  if (xs.empty()) return e;
  double sum = 0.0;
  for (double x : xs) sum += x;
  e.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - e.mean) * (x - e.mean);
    e.standard_error = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  }
  return e;
}

void check_args(const Mechanism& mech, std::size_t player, std::size_t state, std::size_t report,
                std::size_t horizon) {
  const Environment& env = mech.env();
  if (player >= env.num_players() || state >= env.num_states() || report >= env.num_types(player))
    throw std::out_of_range("consistent deviation: index out of range");
  if (horizon < 1) throw std::invalid_argument("consistent deviation: horizon must be >= 1");
}

}  // namespace

ConsistentTrajectory simulate_consistent(const Mechanism& mech, std::size_t player, std::size_t state,
                                         std::size_t report, std::uint64_t seed, std::size_t horizon,
                                         EvolutionVariant variant, std::uint64_t path) {
  check_args(mech, player, state, report, horizon);
  ConsistentTrajectory tr;
  tr.player = player;
  tr.initial_state = state;
  tr.initial_report = report;
  tr.seed = seed;
  tr.path = path;
  tr.horizon = horizon;
  tr.variant = variant;
  const KernelSampler sampler(mech.env());
  const NoiseStream noise(seed);
  const auto totals = run_path(mech, sampler, noise, player, state, report, horizon, variant, path, &tr.steps);
  tr.own_total = totals.own;
  tr.others_total = totals.others;
  tr.transfer_total = totals.transfer;
  const auto t = tails(mech, player, horizon);
  tr.own_tail = t.own;
  tr.others_tail = t.others;
  tr.transfer_tail = t.transfer;
  return tr;
}

ConsistentMonteCarlo monte_carlo_consistent(const Mechanism& mech, std::size_t player, std::size_t state,
                                            std::size_t report, std::uint64_t seed, std::size_t paths,
                                            std::size_t horizon, EvolutionVariant variant) {
  check_args(mech, player, state, report, horizon);
  if (paths < 2) throw std::invalid_argument("monte_carlo_consistent: need at least two paths");
  const KernelSampler sampler(mech.env());
  const NoiseStream noise(seed);
  std::vector<double> own(paths), others(paths), transfer(paths);
  detail::parallel_for(paths, [&](std::size_t p) {
    const auto t = run_path(mech, sampler, noise, player, state, report, horizon, variant, p, nullptr);
    own[p] = t.own;
    others[p] = t.others;
    transfer[p] = t.transfer;
  });
  ConsistentMonteCarlo mc;
  mc.player = player;
  mc.state = state;
  mc.report = report;
  mc.seed = seed;
  mc.paths = paths;
  mc.horizon = horizon;
  mc.variant = variant;
  mc.own = summarize(own);
  mc.others = summarize(others);
  mc.transfer = summarize(transfer);
  const auto t = tails(mech, player, horizon);
  mc.own_tail = t.own;
  mc.others_tail = t.others;
  mc.transfer_tail = t.transfer;
  return mc;
}

// ---------------------------------------------------------------------------

PhiExtraction extract_phi(const Environment& env, const SolvedEnvironment& solved,
                          const std::vector<Eigen::VectorXd>& flow_transfers) {
  if (flow_transfers.size() != env.num_players())
    throw std::invalid_argument("extract_phi: one transfer table per player");
  const auto& space = env.space();
  PhiExtraction out;
  for (std::size_t i = 0; i < env.num_players(); ++i) {
    if (static_cast<std::size_t>(flow_transfers[i].size()) != env.num_states())
      throw std::invalid_argument("extract_phi: transfer table must cover every state");
    const Eigen::VectorXd total_transfer = evaluate_flow(env, solved.policy, flow_transfers[i]);
    const Eigen::VectorXd others = evaluate_policy(
        env, solved.policy, [&](std::size_t s, std::size_t a) { return env.others_welfare(s, i, a); });
    Eigen::VectorXd phi = total_transfer + others;

    const std::size_t others_n = space.without(i).size();
    Eigen::VectorXd spread(static_cast<Eigen::Index>(others_n));
    for (std::size_t o = 0; o < others_n; ++o) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t y = 0; y < env.num_types(i); ++y) {
        const double v = phi(static_cast<Eigen::Index>(space.insert(o, i, y)));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      spread(static_cast<Eigen::Index>(o)) = hi - lo;
    }
    const double score = spread.size() ? spread.maxCoeff() : 0.0;
    out.max_score = std::max(out.max_score, score);
    out.phi.push_back(std::move(phi));
    out.spread.push_back(std::move(spread));
    out.score.push_back(score);
  }
  return out;
}

}  // namespace dgm
