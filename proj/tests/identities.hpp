// Mechanism identities checked against the oracles in support.hpp.
#pragma once

#include <string>
#include <vector>

#include "dgm/groves.hpp"
#include "support.hpp"

namespace testing {

struct IdentityCheck {
  std::string name;
  double error = 0.0;
};

inline double sup(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

/// Max violation of every identity that applies to `mech`.
inline std::vector<IdentityCheck> groves_identities(const dgm::Mechanism& mech) {
  const dgm::Environment& env = mech.env();
  const auto& space = env.space();
  const auto& solved = mech.solved();
  const Eigen::VectorXd& W = mech.welfare();
  std::vector<IdentityCheck> out{{"V_i + V_-i = W", 0.0},       {"Y_i = W - Phi_i", 0.0},
                                 {"Y_i = V_i - Z_i", 0.0},      {"Y_i = y_i + delta E[Y_i']", 0.0},
                                 {"accumulated z_i = Z_i", 0.0}, {"team: Y_i = W", 0.0},
                                 {"pivot: Phi_i = W_-i", 0.0},   {"z_i report-insensitive", 0.0}};
  auto bump = [&](std::size_t k, double e) { out[k].error = std::max(out[k].error, e); };

  for (std::size_t i = 0; i < env.num_players(); ++i) {
    const auto& t = mech.player(i);
    bump(0, sup(solved.own[i] + solved.others[i] - W));
    bump(2, sup(t.total_payoff - (solved.own[i] - t.total_transfer)));
    for (std::size_t s = 0; s < env.num_states(); ++s) {
      const auto k = static_cast<Eigen::Index>(s);
      const double rhs = t.flow_payoff(k) + env.discount() * env.expect(s, mech.policy()(s), t.total_payoff);
      bump(3, std::abs(t.total_payoff(k) - rhs));
    }
    std::vector<double> flow(t.flow_transfer.data(), t.flow_transfer.data() + t.flow_transfer.size());
    bump(4, max_abs_diff(t.total_transfer, oracle_accumulate(env, mech.policy().action, flow)));

    if (mech.groves_form()) {
      for (std::size_t s = 0; s < env.num_states(); ++s)
        bump(1, std::abs(t.total_payoff(static_cast<Eigen::Index>(s)) -
                         (W(static_cast<Eigen::Index>(s)) - mech.distribution(i, s))));
      for (std::size_t s = 0; s < env.num_states(); ++s)
        for (std::size_t r = 0; r < env.num_types(i); ++r) {
          const std::size_t rs = space.with_component(s, i, r);
          if (mech.policy()(rs) == mech.policy()(s))
            bump(7, std::abs(t.flow_transfer(static_cast<Eigen::Index>(rs)) -
                             t.flow_transfer(static_cast<Eigen::Index>(s))));
        }
    }
    if (mech.kind() == dgm::MechanismKind::team) bump(5, sup(t.total_payoff - W));
    if (mech.kind() == dgm::MechanismKind::pivot) {
      const auto excluded = oracle_value_iteration(dgm::reduced_environment(env, i));
      for (std::size_t s = 0; s < env.num_states(); ++s)
        bump(6, std::abs(mech.distribution(i, s) - excluded.value[space.drop(s, i)]));
    }
  }
  return out;
}

inline double max_identity_error(const dgm::Mechanism& mech) {
  double m = 0.0;
  for (const auto& c : groves_identities(mech)) m = std::max(m, c.error);
  return m;
}

}  // namespace testing
