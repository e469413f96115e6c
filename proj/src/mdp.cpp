#include "dgm/mdp.hpp"

#include <Eigen/SparseLU>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "dgm/error.hpp"

namespace dgm {

namespace {

constexpr std::size_t kDirectSolveLimit = 4096;
constexpr std::size_t kMaxPolicySteps = 1000;

double sup_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double tie_window(const Eigen::VectorXd& v) { return 1e-12 * (1.0 + sup_norm(v)); }

// One Bellman sweep: returns T V and fills the greedy action per state.
Eigen::VectorXd bellman(const FiniteMdp& mdp, const Eigen::VectorXd& value, Policy* greedy,
                        const TiePreference& prefer, double window) {
  const auto n = static_cast<Eigen::Index>(mdp.num_states);
  const std::size_t na = mdp.num_actions();
  Eigen::MatrixXd q(n, static_cast<Eigen::Index>(na));
  for (std::size_t a = 0; a < na; ++a) {
    const auto col = static_cast<Eigen::Index>(a);
    q.col(col) = mdp.reward.col(col) + mdp.discount * (mdp.transition[a] * value);
  }
  Eigen::VectorXd out(n);
  if (greedy) greedy->action.assign(mdp.num_states, 0);
  for (Eigen::Index s = 0; s < n; ++s) {
    const double best = q.row(s).maxCoeff();
    out(s) = best;
    if (!greedy) continue;
    std::size_t pick = na;
    if (prefer) {
      const std::size_t p = prefer(static_cast<std::size_t>(s));
      if (p < na && q(s, static_cast<Eigen::Index>(p)) >= best - window) pick = p;
    }
    if (pick == na)
      for (std::size_t a = 0; a < na; ++a)
        if (q(s, static_cast<Eigen::Index>(a)) >= best - window) {
          pick = a;
          break;
        }
    greedy->action[static_cast<std::size_t>(s)] = pick;
  }
  return out;
}

Eigen::VectorXd policy_reward(const FiniteMdp& mdp, const Policy& policy) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(mdp.num_states));
  for (std::size_t s = 0; s < mdp.num_states; ++s)
    r(static_cast<Eigen::Index>(s)) =
        mdp.reward(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(policy(s)));
  return r;
}

double fixed_point_residual(const SparseKernel& p, const Eigen::VectorXd& r, double discount,
                            const Eigen::VectorXd& x) {
  return sup_norm(r + discount * (p * x) - x);
}

}  // namespace

ValueFunction solve_discounted(const SparseKernel& transition, const Eigen::VectorXd& reward,
                               double discount) {
  const Eigen::Index n = reward.size();
  if (transition.rows() != n || transition.cols() != n)
    throw std::invalid_argument("solve_discounted: dimension mismatch");
  if (discount == 0.0 || n == 0) return reward;

  auto target = [&](const Eigen::VectorXd& x) { return 1e-12 * (1.0 + sup_norm(x)); };

  Eigen::VectorXd x;
  if (static_cast<std::size_t>(n) <= kDirectSolveLimit) {
    SparseKernel identity(n, n);
    identity.setIdentity();
    Eigen::SparseMatrix<double> system = identity - discount * transition;
    system.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(system);
    if (lu.info() != Eigen::Success) throw std::runtime_error("solve_discounted: factorization failed");
    x = lu.solve(reward);
    for (int refine = 0; refine < 5; ++refine) {
      const Eigen::VectorXd defect = reward + discount * (transition * x) - x;
      if (sup_norm(defect) <= target(x)) return x;
      x += lu.solve(defect);
    }
  } else {
    x = reward;
  }
  // Fixed-point iteration (large spaces, or LU refinement stalled).
  const std::size_t cap = 10'000'000;
  for (std::size_t k = 0; k < cap; ++k) {
    Eigen::VectorXd next = reward + discount * (transition * x);
    const double step = sup_norm(next - x);
    x.swap(next);
    if (step <= target(x) * (1.0 - discount)) break;
  }
  const double res = fixed_point_residual(transition, reward, discount, x);
  if (res > target(x)) throw SolveError("solve_discounted: residual not reached", res, cap);
  return x;
}

SparseKernel policy_kernel(const FiniteMdp& mdp, const Policy& policy) {
  const auto n = static_cast<Eigen::Index>(mdp.num_states);
  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t s = 0; s < mdp.num_states; ++s) {
    const SparseKernel& k = mdp.transition[policy(s)];
    for (SparseKernel::InnerIterator it(k, static_cast<Eigen::Index>(s)); it; ++it)
      entries.emplace_back(static_cast<Eigen::Index>(s), it.col(), it.value());
  }
  SparseKernel out(n, n);
  out.setFromTriplets(entries.begin(), entries.end());
  return out;
}

double bellman_residual(const FiniteMdp& mdp, const ValueFunction& value) {
  return sup_norm(bellman(mdp, value, nullptr, {}, 0.0) - value);
}

MdpSolution solve_mdp(const FiniteMdp& mdp, const SolveOptions& options, const TiePreference& prefer) {
  if (!(options.tolerance > 0.0)) throw std::invalid_argument("solve_mdp: tolerance must be > 0");
  if (mdp.num_actions() == 0) throw std::invalid_argument("solve_mdp: no actions");
  const auto start = std::chrono::steady_clock::now();
  const auto n = static_cast<Eigen::Index>(mdp.num_states);

  MdpSolution sol;
  sol.report.tolerance = options.tolerance;

  Eigen::VectorXd value = Eigen::VectorXd::Zero(n);
  double previous_step = std::numeric_limits<double>::infinity();
  bool converged = false;
  double residual = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= options.max_iterations; ++k) {
    Eigen::VectorXd next = bellman(mdp, value, nullptr, {}, 0.0);
    residual = sup_norm(next - value);
    sol.report.iterations = k;
    if (residual <= options.tolerance) {
      converged = true;
      break;
    }
    // Contraction in sup norm; a violation means a malformed kernel.
    if (residual > mdp.discount * previous_step + 1e-14 * (1.0 + sup_norm(next)))
      throw std::logic_error("solve_mdp: value iteration failed to contract (step " +
                             std::to_string(residual) + " after " + std::to_string(previous_step) + ")");
    previous_step = residual;
    value.swap(next);
  }
  if (!converged)
    throw SolveError("value iteration hit the iteration cap with residual " + std::to_string(residual),
                     residual, sol.report.iterations);

  Policy policy;
  bellman(mdp, value, &policy, prefer, tie_window(value));
  for (std::size_t step = 0; step < kMaxPolicySteps; ++step) {
    value = solve_discounted(policy_kernel(mdp, policy), policy_reward(mdp, policy), mdp.discount);
    sol.report.policy_steps = step + 1;
    Policy improved;
    bellman(mdp, value, &improved, prefer, tie_window(value));
    if (improved == policy) break;
    policy = std::move(improved);
  }
  sol.report.residual = bellman_residual(mdp, value);
  sol.policy = std::move(policy);
  sol.value = std::move(value);
  sol.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return sol;
}

// ---------------------------------------------------------------------------

FiniteMdp welfare_mdp(const Environment& env) {
  FiniteMdp mdp;
  mdp.num_states = env.num_states();
  mdp.discount = env.discount();
  mdp.reward.resize(static_cast<Eigen::Index>(env.num_states()), static_cast<Eigen::Index>(env.num_actions()));
  for (std::size_t a = 0; a < env.num_actions(); ++a) {
    mdp.transition.push_back(env.joint_kernel(a));
    for (std::size_t s = 0; s < env.num_states(); ++s)
      mdp.reward(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = env.welfare(s, a);
  }
  return mdp;
}

EfficientSolution solve_efficient(const Environment& env, const SolveOptions& options) {
  auto sol = solve_mdp(welfare_mdp(env), options);
  return {std::move(sol.policy), std::move(sol.value), sol.report};
}

namespace {

SparseKernel env_policy_kernel(const Environment& env, const Policy& policy) {
  const auto n = static_cast<Eigen::Index>(env.num_states());
  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t s = 0; s < env.num_states(); ++s)
    for (const auto& [next, prob] : env.joint_row(s, policy(s)))
      entries.emplace_back(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(next), prob);
  SparseKernel k(n, n);
  k.setFromTriplets(entries.begin(), entries.end());
  return k;
}

}  // namespace

ValueFunction evaluate_flow(const Environment& env, const Policy& policy, const Eigen::VectorXd& flow) {
  if (policy.size() != env.num_states() || static_cast<std::size_t>(flow.size()) != env.num_states())
    throw std::invalid_argument("evaluate_flow: policy/flow must cover every state");
  return solve_discounted(env_policy_kernel(env, policy), flow, env.discount());
}

ValueFunction evaluate_policy(const Environment& env, const Policy& policy, const RewardFn& reward) {
  if (policy.size() != env.num_states()) throw std::invalid_argument("evaluate_policy: policy size");
  Eigen::VectorXd flow(static_cast<Eigen::Index>(env.num_states()));
  for (std::size_t s = 0; s < env.num_states(); ++s) {
    if (policy(s) >= env.num_actions()) throw std::invalid_argument("evaluate_policy: invalid action");
    flow(static_cast<Eigen::Index>(s)) = reward(s, policy(s));
  }
  return evaluate_flow(env, policy, flow);
}

EfficientSolution solve_excluded(const Environment& env, std::size_t player, const SolveOptions& options) {
  return solve_efficient(reduced_environment(env, player), options);
}

SolvedEnvironment solve_all(const Environment& env, const SolveOptions& options) {
  SolvedEnvironment out;
  auto eff = solve_efficient(env, options);
  out.policy = std::move(eff.policy);
  out.welfare = std::move(eff.welfare);
  out.report = eff.report;
  for (std::size_t i = 0; i < env.num_players(); ++i) {
    out.own.push_back(evaluate_policy(env, out.policy, [&](std::size_t s, std::size_t a) {
      return env.valuation(i, env.space().component(s, i), a);
    }));
    out.others.push_back(evaluate_policy(
        env, out.policy, [&](std::size_t s, std::size_t a) { return env.others_welfare(s, i, a); }));
  }
  return out;
}

}  // namespace dgm
