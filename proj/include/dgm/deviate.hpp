#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dgm/groves.hpp"

namespace dgm {

/// Payoff change from misreporting once and reporting truthfully afterwards.
struct DeviationGain {
  std::size_t player = 0;
  std::size_t state = 0;   ///< true joint state
  std::size_t report = 0;  ///< reported own type
  double gain = 0.0;
};

/// v_i(theta_i, a) - z_i(r_i, theta_{-i}) + delta E[U_i(theta') | theta, a] - U_i(theta)
/// with a = a*(r_i, theta_{-i}) and the transition driven by the true profile.
/// Exactly zero for a truthful report.
DeviationGain one_shot_gain(const Mechanism& mech, std::size_t player, std::size_t state, std::size_t report);

struct IcAudit {
  bool pass = true;
  double tolerance = 0.0;
  double max_gain = 0.0;
  DeviationGain worst;
  std::size_t checked = 0;
  std::vector<DeviationGain> gains;  ///< filled only when requested
};

/// Exhaustive one-shot audit over every (player, state, report).
IcAudit verify_ic(const Mechanism& mech, double tolerance, bool keep_table = false);

struct BestResponse {
  std::size_t player = 0;
  ValueFunction value;               ///< U_i^BR
  std::vector<std::size_t> report;   ///< optimal report per true state
  double max_gap = 0.0;              ///< max_theta |U_i^BR - Y_i|
  std::size_t worst_state = 0;
  bool truthful_optimal = false;     ///< max_gap <= 1e-8
  SolveReport solve;
};

/// Optimal value of the deviator's MDP (truthful opponents): state theta,
/// action r_i, reward v_i(theta_i, a*(r_i, theta_{-i})) - z_i(r_i, theta_{-i}).
/// Ties favour the truthful report.
BestResponse best_response_value(const Mechanism& mech, std::size_t player, const SolveOptions& options = {});

// ---------------------------------------------------------------------------
// Consistent deviations

/// Which action drives the true type's transition while the player keeps
/// misreporting. `actual_action`: the action the mechanism plays on the
/// reports. `truthful_action`: the action it would play on the true profile.
/// The other players and the reported type always follow the played action.
enum class EvolutionVariant { actual_action, truthful_action };

std::string to_string(EvolutionVariant v);
/// Accepts "actual-action", "truthful-action" and "paper-literal" (alias of truthful-action).
EvolutionVariant parse_variant(const std::string& text);

/// Total functions along consistent deviations for one player. Coupled states
/// (theta_i, bar theta_i, theta_{-i}) are indexed (x * m + y) * |Theta_{-i}| + o.
/// V_{-i}^C and Z_i^C depend only on (bar theta_i, theta_{-i}) and are stored
/// on the joint state space with bar theta_i in player i's slot.
struct ConsistentValues {
  std::size_t player = 0;
  EvolutionVariant variant = EvolutionVariant::actual_action;
  std::size_t own_types = 0;
  std::size_t others_states = 0;
  Eigen::VectorXd own;       ///< V_i^C on the coupled space
  Eigen::VectorXd others;    ///< V_{-i}^C on Theta
  Eigen::VectorXd transfer;  ///< Z_i^C on Theta
  std::size_t coupled_index(std::size_t truth, std::size_t report, std::size_t others_state) const {
    return (truth * own_types + report) * others_states + others_state;
  }
  double own_value(std::size_t truth, std::size_t report, std::size_t others_state) const {
    return own(static_cast<Eigen::Index>(coupled_index(truth, report, others_state)));
  }
};

/// Values read off a ConsistentValues table at (true state, report).
struct ConsistentPoint {
  double own = 0.0;       ///< V_i^C
  double others = 0.0;    ///< V_{-i}^C
  double transfer = 0.0;  ///< Z_i^C
  double utility = 0.0;   ///< U_i^C = V_i^C - Z_i^C
  double welfare = 0.0;   ///< W^C = V_i^C + V_{-i}^C
};

ConsistentValues consistent_values(const Mechanism& mech, std::size_t player, EvolutionVariant variant);
ConsistentPoint consistent_point(const Mechanism& mech, const ConsistentValues& cv, std::size_t state,
                                 std::size_t report);

struct ConsistentStep {
  std::size_t true_type = 0;
  std::size_t report = 0;
  std::size_t others_state = 0;  ///< index in Theta_{-i}
  std::size_t action = 0;
  double own_value = 0.0;        ///< v_i(theta_i^t, a^t)
  double others_value = 0.0;     ///< sum_{j != i} v_j(theta_j^t, a^t)
  double transfer = 0.0;         ///< z_i(bar theta_i^t, theta_{-i}^t)
};

struct ConsistentTrajectory {
  std::size_t player = 0;
  std::size_t initial_state = 0;
  std::size_t initial_report = 0;
  std::uint64_t seed = 0;
  std::uint64_t path = 0;
  std::size_t horizon = 0;
  EvolutionVariant variant = EvolutionVariant::actual_action;
  std::vector<ConsistentStep> steps;
  double own_total = 0.0;       ///< truncated V_i^D
  double others_total = 0.0;    ///< truncated V_{-i}^D
  double transfer_total = 0.0;  ///< truncated Z_i^D
  double own_tail = 0.0;        ///< bound on the omitted tail of each sum
  double others_tail = 0.0;
  double transfer_tail = 0.0;
};

/// Smallest T with discount^T * scale / (1 - discount) <= tail (T >= 1).
std::size_t tail_horizon(double discount, double scale, double tail = 1e-6);
/// Default horizon for a mechanism: scale n * C.
std::size_t default_horizon(const Mechanism& mech, double tail = 1e-6);

/// One consistent-deviation path; noise for (path, player j, period t) comes
/// from NoiseStream(seed), shared by the true and reported type of player i.
ConsistentTrajectory simulate_consistent(const Mechanism& mech, std::size_t player, std::size_t state,
                                         std::size_t report, std::uint64_t seed, std::size_t horizon,
                                         EvolutionVariant variant, std::uint64_t path = 0);

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

struct ConsistentMonteCarlo {
  std::size_t player = 0;
  std::size_t state = 0;
  std::size_t report = 0;
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  std::size_t horizon = 0;
  EvolutionVariant variant = EvolutionVariant::actual_action;
  MonteCarloEstimate own, others, transfer;
  double own_tail = 0.0, others_tail = 0.0, transfer_tail = 0.0;
};

ConsistentMonteCarlo monte_carlo_consistent(const Mechanism& mech, std::size_t player, std::size_t state,
                                            std::size_t report, std::uint64_t seed, std::size_t paths,
                                            std::size_t horizon, EvolutionVariant variant);

/// Phi_i^C(bar theta_i, theta_{-i}) = Z_i^C + V_{-i}^C for arbitrary flow
/// transfers under the efficient policy, with its spread over bar theta_i.
struct PhiExtraction {
  std::vector<Eigen::VectorXd> phi;     ///< per player, on Theta (bar theta_i in slot i)
  std::vector<Eigen::VectorXd> spread;  ///< per player, on Theta_{-i}: max - min over bar theta_i
  std::vector<double> score;            ///< per player: max spread
  double max_score = 0.0;
};

PhiExtraction extract_phi(const Environment& env, const SolvedEnvironment& solved,
                          const std::vector<Eigen::VectorXd>& flow_transfers);

}  // namespace dgm
