#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <vector>

#include "dgm/environment.hpp"

namespace dgm {

/// Deterministic stationary decision rule: one action index per state.
struct Policy {
  std::vector<std::size_t> action;

  std::size_t operator()(std::size_t state) const { return action[state]; }
  std::size_t size() const { return action.size(); }
  bool operator==(const Policy&) const = default;
};

/// Real-valued function on a (joint or reduced) state space.
using ValueFunction = Eigen::VectorXd;

struct SolveReport {
  std::size_t iterations = 0;        ///< value-iteration sweeps
  std::size_t policy_steps = 0;      ///< exact evaluate-and-improve rounds after the sweeps
  double residual = 0.0;             ///< sup-norm Bellman residual of the returned values
  double tolerance = 0.0;
  double wall_seconds = 0.0;
};

struct SolveOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 1'000'000;
};

/// A finite discounted MDP in tabular form.
struct FiniteMdp {
  std::size_t num_states = 0;
  std::vector<SparseKernel> transition;  ///< one row-stochastic matrix per action
  Eigen::MatrixXd reward;                ///< states x actions
  double discount = 0.0;

  std::size_t num_actions() const { return transition.size(); }
};

struct MdpSolution {
  Policy policy;
  ValueFunction value;
  SolveReport report;
};

/// Optional per-state action that wins ties ahead of the lowest index.
using TiePreference = std::function<std::size_t(std::size_t state)>;

/// Value iteration to a sup-norm Bellman residual <= tolerance, followed by
/// exact policy evaluation and improvement so the returned value is the
/// exact value of the returned greedy policy. Ties go to `prefer` when given
/// and then to the lowest action index. Throws SolveError at the cap.
MdpSolution solve_mdp(const FiniteMdp& mdp, const SolveOptions& options,
                      const TiePreference& prefer = {});

/// Unique fixed point of F = reward + discount * P F. Direct sparse LU for
/// up to 4096 states, fixed-point iteration above; either way the residual is
/// <= 1e-12 * (1 + |F|_inf).
ValueFunction solve_discounted(const SparseKernel& transition, const Eigen::VectorXd& reward,
                               double discount);

/// Rows of `mdp.transition` selected by the policy.
SparseKernel policy_kernel(const FiniteMdp& mdp, const Policy& policy);

/// sup_s |max_a [r(s,a) + discount * P_a V(s)] - V(s)|
double bellman_residual(const FiniteMdp& mdp, const ValueFunction& value);

// ---------------------------------------------------------------------------
// Environment-level solves

/// The MDP whose reward is total welfare sum_j v_j(theta_j, a).
FiniteMdp welfare_mdp(const Environment& env);

struct EfficientSolution {
  Policy policy;         ///< a*
  ValueFunction welfare;  ///< W
  SolveReport report;
};

EfficientSolution solve_efficient(const Environment& env, const SolveOptions& options = {});

using RewardFn = std::function<double(std::size_t state, std::size_t action)>;

/// Value of following `policy` forever with per-period reward `reward`.
ValueFunction evaluate_policy(const Environment& env, const Policy& policy, const RewardFn& reward);
/// Same, with a reward already evaluated along the policy (one entry per state).
ValueFunction evaluate_flow(const Environment& env, const Policy& policy, const Eigen::VectorXd& flow);

/// a*_{-i} and W_{-i} on the environment without player i.
EfficientSolution solve_excluded(const Environment& env, std::size_t player,
                                 const SolveOptions& options = {});

/// a*, W, and every player's V_i and V_{-i} along a*.
struct SolvedEnvironment {
  Policy policy;
  ValueFunction welfare;
  std::vector<ValueFunction> own;     ///< V_i
  std::vector<ValueFunction> others;  ///< V_{-i}
  SolveReport report;
};

SolvedEnvironment solve_all(const Environment& env, const SolveOptions& options = {});

}  // namespace dgm
