#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dgm/environment.hpp"
#include "dgm/mdp.hpp"

namespace dgm {

enum class MechanismKind { team, pivot, custom, transfers };

std::string to_string(MechanismKind kind);

/// User-supplied flow distribution rule for one player, over Theta_{-i}
/// (indexed by the reduced environment's state space).
struct FlowRule {
  Eigen::VectorXd flow;                   ///< phi_i
  std::vector<std::size_t> reference;     ///< a-hat_i; empty means constant action 0
};

/// phi_i, a-hat_i, and the total rule Phi_i solved along a-hat_i.
struct DistributionRule {
  Eigen::VectorXd flow;
  Policy reference;
  ValueFunction total;
};

/// Per-player tables over the joint state space.
struct PlayerTerms {
  std::optional<DistributionRule> rule;  ///< present for mechanisms built in Groves form
  ValueFunction flow_transfer;           ///< z_i
  ValueFunction total_transfer;          ///< Z_i
  ValueFunction flow_payoff;             ///< y_i = v_i(theta_i, a*) - z_i
  ValueFunction total_payoff;            ///< Y_i (= U_i under truthful play)
};

/// An efficient policy together with stationary transfer tables. Immutable.
class Mechanism {
 public:
  Mechanism(std::shared_ptr<const Environment> env, SolvedEnvironment solved,
            std::vector<PlayerTerms> players, MechanismKind kind);

  const Environment& env() const { return *env_; }
  std::shared_ptr<const Environment> env_ptr() const { return env_; }
  const SolvedEnvironment& solved() const { return solved_; }
  const Policy& policy() const { return solved_.policy; }
  const ValueFunction& welfare() const { return solved_.welfare; }
  MechanismKind kind() const { return kind_; }
  std::size_t num_players() const { return players_.size(); }
  const PlayerTerms& player(std::size_t i) const { return players_.at(i); }
  bool groves_form() const;

  /// Phi_i(theta_{-i}) at a joint state; requires groves_form().
  double distribution(std::size_t i, std::size_t state) const;

 private:
  std::shared_ptr<const Environment> env_;
  SolvedEnvironment solved_;
  std::vector<PlayerTerms> players_;
  MechanismKind kind_;
};

/// Groves mechanism from per-player (phi_i, a-hat_i). Every Mechanism
/// identity is checked on construction (std::logic_error on violation).
Mechanism build_custom(std::shared_ptr<const Environment> env, const SolvedEnvironment& solved,
                       const std::vector<FlowRule>& rules, MechanismKind kind = MechanismKind::custom);
/// phi_i = 0: every player's total payoff is W.
Mechanism build_team(std::shared_ptr<const Environment> env, const SolvedEnvironment& solved);
/// a-hat_i = a*_{-i} and phi_i = sum_{j != i} v_j(theta_j, a*_{-i}), so Phi_i = W_{-i}.
Mechanism build_pivot(std::shared_ptr<const Environment> env, const SolvedEnvironment& solved,
                      const std::vector<EfficientSolution>& excluded);
/// Convenience: solves a*_{-i} for every player first.
Mechanism build_pivot(std::shared_ptr<const Environment> env, const SolvedEnvironment& solved,
                      const SolveOptions& options = {});

/// Arbitrary flow transfers z_i over Theta (no Groves structure assumed).
Mechanism build_from_transfers(std::shared_ptr<const Environment> env, const SolvedEnvironment& solved,
                               const std::vector<Eigen::VectorXd>& flow_transfers);

/// Adds bump(theta_i) to player i's flow transfer at every state.
Mechanism with_type_bump(const Mechanism& base, std::size_t player, const Eigen::VectorXd& bump);

/// Per-state table of z_i, Z_i, Y_i and the budget sum_i z_i, with extremes flagged.
nlohmann::ordered_json transfer_report(const Mechanism& mech);

/// Mechanism document: environment digest, policy, value and transfer tables.
nlohmann::ordered_json mechanism_to_json(const Mechanism& mech);
/// Rebuild from mechanism_to_json output. Groves mechanisms are rebuilt from
/// their stored rules; anything else from the stored flow transfers.
Mechanism mechanism_from_json(std::shared_ptr<const Environment> env, const SolvedEnvironment& solved,
                              const nlohmann::ordered_json& doc);

}  // namespace dgm
