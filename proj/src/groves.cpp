#include "dgm/groves.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dgm/error.hpp"

namespace dgm {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kIdentityTolerance = 1e-9;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::logic_error("mechanism invariant violated: " + what);
}

double max_gap(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

Eigen::VectorXd own_flow(const Environment& env, const Policy& policy, std::size_t i) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(env.num_states()));
  for (std::size_t s = 0; s < env.num_states(); ++s)
    v(static_cast<Eigen::Index>(s)) = env.valuation(i, env.space().component(s, i), policy(s));
  return v;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::string to_string(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::team: return "team";
    case MechanismKind::pivot: return "pivot";
    case MechanismKind::custom: return "custom";
    case MechanismKind::transfers: return "transfers";
  }
  return "unknown";
}

Mechanism::Mechanism(std::shared_ptr<const Environment> env, SolvedEnvironment solved,
                     std::vector<PlayerTerms> players, MechanismKind kind)
    : env_(std::move(env)), solved_(std::move(solved)), players_(std::move(players)), kind_(kind) {
  if (!env_) throw std::invalid_argument("Mechanism: null environment");
  const auto n = static_cast<Eigen::Index>(env_->num_states());
  if (players_.size() != env_->num_players()) throw std::invalid_argument("Mechanism: player count");
  if (solved_.policy.size() != env_->num_states() || solved_.welfare.size() != n)
    throw std::invalid_argument("Mechanism: solved tables do not match the environment");
  for (const auto& p : players_)
    if (p.flow_transfer.size() != n || p.total_transfer.size() != n || p.flow_payoff.size() != n ||
        p.total_payoff.size() != n)
      throw std::invalid_argument("Mechanism: transfer tables must cover every state");
}

bool Mechanism::groves_form() const {
  for (const auto& p : players_)
    if (!p.rule) return false;
  return true;
}

double Mechanism::distribution(std::size_t i, std::size_t state) const {
  const auto& rule = players_.at(i).rule;
  if (!rule) throw std::logic_error("Mechanism::distribution: not a Groves mechanism");
  return rule->total(static_cast<Eigen::Index>(env_->space().drop(state, i)));
}

Mechanism build_custom(std::shared_ptr<const Environment> env_ptr, const SolvedEnvironment& solved,
                       const std::vector<FlowRule>& rules, MechanismKind kind) {
  const Environment& env = *env_ptr;
  if (rules.size() != env.num_players()) throw std::invalid_argument("build_custom: one rule per player");
  const double delta = env.discount();
  const Policy& act = solved.policy;
  const auto& space = env.space();

  std::vector<PlayerTerms> terms;
  for (std::size_t i = 0; i < env.num_players(); ++i) {
    const Environment reduced = reduced_environment(env, i);
    const FlowRule& fr = rules[i];
    if (static_cast<std::size_t>(fr.flow.size()) != reduced.num_states())
      throw std::invalid_argument("build_custom: flow rule must cover Theta_{-i}");
    DistributionRule rule;
    rule.flow = fr.flow;
    rule.reference.action = fr.reference.empty() ? std::vector<std::size_t>(reduced.num_states(), 0)
                                                 : fr.reference;
    if (rule.reference.size() != reduced.num_states())
      throw std::invalid_argument("build_custom: reference rule must cover Theta_{-i}");
    for (auto a : rule.reference.action)
      if (a >= env.num_actions()) throw std::invalid_argument("build_custom: invalid reference action");
    rule.total = evaluate_flow(reduced, rule.reference, rule.flow);

    const auto n = static_cast<Eigen::Index>(env.num_states());
    PlayerTerms t;
    t.flow_transfer.resize(n);
    t.total_transfer.resize(n);
    t.total_payoff.resize(n);
    for (std::size_t s = 0; s < env.num_states(); ++s) {
      const auto k = static_cast<Eigen::Index>(s);
      const std::size_t others = space.drop(s, i);
      const auto o = static_cast<Eigen::Index>(others);
      const std::size_t a = act(s);
      const double phi_total = rule.total(o);
      t.flow_transfer(k) = rule.flow(o) - env.others_welfare(s, i, a) +
                           delta * (reduced.expect(others, rule.reference(others), rule.total) -
                                    reduced.expect(others, a, rule.total));
      t.total_transfer(k) = -solved.others[i](k) + phi_total;
      t.total_payoff(k) = solved.welfare(k) - phi_total;
    }
    t.flow_payoff.resize(n);
    for (std::size_t s = 0; s < env.num_states(); ++s)
      t.flow_payoff(static_cast<Eigen::Index>(s)) =
          t.total_payoff(static_cast<Eigen::Index>(s)) - delta * env.expect(s, act(s), t.total_payoff);

    const Eigen::VectorXd v = own_flow(env, act, i);
    require(max_gap(t.total_payoff, solved.own[i] - t.total_transfer) <= kIdentityTolerance,
            "Y_i = V_i - Z_i for player " + env.player(i).name);
    require(max_gap(t.flow_transfer, v - t.flow_payoff) <= kIdentityTolerance,
            "z_i = v_i - y_i for player " + env.player(i).name);
    require(max_gap(evaluate_flow(env, act, t.flow_transfer), t.total_transfer) <= kIdentityTolerance,
            "accumulated z_i = Z_i for player " + env.player(i).name);
    t.rule = std::move(rule);
    terms.push_back(std::move(t));
  }
  return Mechanism(std::move(env_ptr), solved, std::move(terms), kind);
}

Mechanism build_team(std::shared_ptr<const Environment> env, const SolvedEnvironment& solved) {
  std::vector<FlowRule> rules;
  for (std::size_t i = 0; i < env->num_players(); ++i)
    rules.push_back({Eigen::VectorXd::Zero(static_cast<Eigen::Index>(env->space().without(i).size())), {}});
  return build_custom(std::move(env), solved, rules, MechanismKind::team);
}

Mechanism build_pivot(std::shared_ptr<const Environment> env, const SolvedEnvironment& solved,
                      const std::vector<EfficientSolution>& excluded) {
  if (excluded.size() != env->num_players()) throw std::invalid_argument("build_pivot: one solve per player");
  std::vector<FlowRule> rules;
  for (std::size_t i = 0; i < env->num_players(); ++i) {
    const Environment reduced = reduced_environment(*env, i);
    const Policy& ref = excluded[i].policy;
    if (ref.size() != reduced.num_states()) throw std::invalid_argument("build_pivot: excluded policy size");
    FlowRule r;
    r.flow.resize(static_cast<Eigen::Index>(reduced.num_states()));
    for (std::size_t o = 0; o < reduced.num_states(); ++o)
      r.flow(static_cast<Eigen::Index>(o)) = reduced.welfare(o, ref(o));
    r.reference = ref.action;
    rules.push_back(std::move(r));
  }
  Mechanism mech = build_custom(env, solved, rules, MechanismKind::pivot);
  for (std::size_t i = 0; i < env->num_players(); ++i)
    require(max_gap(mech.player(i).rule->total, excluded[i].welfare) <= kIdentityTolerance,
            "pivot Phi_i = W_{-i} for player " + env->player(i).name);
  return mech;
}

Mechanism build_pivot(std::shared_ptr<const Environment> env, const SolvedEnvironment& solved,
                      const SolveOptions& options) {
  std::vector<EfficientSolution> excluded;
  for (std::size_t i = 0; i < env->num_players(); ++i) excluded.push_back(solve_excluded(*env, i, options));
  return build_pivot(std::move(env), solved, excluded);
}

Mechanism build_from_transfers(std::shared_ptr<const Environment> env_ptr, const SolvedEnvironment& solved,
                               const std::vector<Eigen::VectorXd>& flow_transfers) {
  const Environment& env = *env_ptr;
  if (flow_transfers.size() != env.num_players())
    throw std::invalid_argument("build_from_transfers: one table per player");
  std::vector<PlayerTerms> terms;
  for (std::size_t i = 0; i < env.num_players(); ++i) {
    const Eigen::VectorXd& z = flow_transfers[i];
    if (static_cast<std::size_t>(z.size()) != env.num_states())
      throw std::invalid_argument("build_from_transfers: table must cover every state");
    if (!z.allFinite()) throw InputError("transfers for player " + env.player(i).name + ": not finite");
    PlayerTerms t;
    t.flow_transfer = z;
    t.total_transfer = evaluate_flow(env, solved.policy, z);
    t.flow_payoff = own_flow(env, solved.policy, i) - z;
    t.total_payoff = solved.own[i] - t.total_transfer;
    terms.push_back(std::move(t));
  }
  return Mechanism(std::move(env_ptr), solved, std::move(terms), MechanismKind::transfers);
}

Mechanism with_type_bump(const Mechanism& base, std::size_t player, const Eigen::VectorXd& bump) {
  const Environment& env = base.env();
  if (static_cast<std::size_t>(bump.size()) != env.num_types(player))
    throw std::invalid_argument("with_type_bump: one entry per own type");
  std::vector<Eigen::VectorXd> z;
  for (std::size_t i = 0; i < base.num_players(); ++i) z.push_back(base.player(i).flow_transfer);
  for (std::size_t s = 0; s < env.num_states(); ++s)
    z[player](static_cast<Eigen::Index>(s)) += bump(static_cast<Eigen::Index>(env.space().component(s, player)));
  return build_from_transfers(base.env_ptr(), base.solved(), z);
}

// ---------------------------------------------------------------------------

ordered_json transfer_report(const Mechanism& mech) {
  const Environment& env = mech.env();
  ordered_json rows = ordered_json::array();
  double budget_min = std::numeric_limits<double>::infinity();
  double budget_max = -budget_min;
  std::size_t budget_min_state = 0, budget_max_state = 0, deficit_states = 0;
  for (std::size_t s = 0; s < env.num_states(); ++s) {
    const auto k = static_cast<Eigen::Index>(s);
    ordered_json row;
    row["state"] = env.state_label(s);
    row["action"] = env.actions()[mech.policy()(s)];
    double budget = 0.0;
    ordered_json per = ordered_json::object();
    for (std::size_t i = 0; i < mech.num_players(); ++i) {
      const auto& t = mech.player(i);
      per[env.player(i).name] = {{"flow_transfer", t.flow_transfer(k)},
                                 {"total_transfer", t.total_transfer(k)},
                                 {"total_payoff", t.total_payoff(k)}};
      budget += t.flow_transfer(k);
    }
    row["players"] = per;
    row["budget"] = budget;
    if (budget < budget_min) budget_min = budget, budget_min_state = s;
    if (budget > budget_max) budget_max = budget, budget_max_state = s;
    if (budget < 0.0) ++deficit_states;
    rows.push_back(row);
  }
  ordered_json extremes = ordered_json::object();
  for (std::size_t i = 0; i < mech.num_players(); ++i) {
    const auto& z = mech.player(i).flow_transfer;
    Eigen::Index lo = 0, hi = 0;
    z.minCoeff(&lo);
    z.maxCoeff(&hi);
    extremes[env.player(i).name] = {
        {"min_flow_transfer", {{"state", env.state_label(static_cast<std::size_t>(lo))}, {"value", z(lo)}}},
        {"max_flow_transfer", {{"state", env.state_label(static_cast<std::size_t>(hi))}, {"value", z(hi)}}}};
  }
  ordered_json out;
  out["kind"] = to_string(mech.kind());
  out["rows"] = rows;
  out["extremes"] = extremes;
  out["budget"] = {{"min", {{"state", env.state_label(budget_min_state)}, {"value", budget_min}}},
                   {"max", {{"state", env.state_label(budget_max_state)}, {"value", budget_max}}},
                   {"deficit_states", deficit_states}};
  return out;
}

ordered_json mechanism_to_json(const Mechanism& mech) {
  const Environment& env = mech.env();
  ordered_json doc;
  doc["environment_digest"] = environment_digest(env);
  doc["kind"] = to_string(mech.kind());
  std::vector<std::string> states, policy;
  for (std::size_t s = 0; s < env.num_states(); ++s) {
    states.push_back(env.state_label(s));
    policy.push_back(env.actions()[mech.policy()(s)]);
  }
  doc["states"] = states;
  doc["policy"] = policy;
  doc["welfare"] = to_vector(mech.welfare());
  doc["players"] = ordered_json::array();
  for (std::size_t i = 0; i < mech.num_players(); ++i) {
    const auto& t = mech.player(i);
    ordered_json pj;
    pj["name"] = env.player(i).name;
    pj["own_value"] = to_vector(mech.solved().own[i]);
    pj["others_value"] = to_vector(mech.solved().others[i]);
    pj["flow_transfer"] = to_vector(t.flow_transfer);
    pj["total_transfer"] = to_vector(t.total_transfer);
    pj["flow_payoff"] = to_vector(t.flow_payoff);
    pj["total_payoff"] = to_vector(t.total_payoff);
    if (t.rule) {
      const Environment reduced = reduced_environment(env, i);
      ordered_json flow = ordered_json::object(), ref = ordered_json::object(), total = ordered_json::object();
      for (std::size_t o = 0; o < reduced.num_states(); ++o) {
        const auto label = reduced.state_label(o);
        flow[label] = t.rule->flow(static_cast<Eigen::Index>(o));
        ref[label] = env.actions()[t.rule->reference(o)];
        total[label] = t.rule->total(static_cast<Eigen::Index>(o));
      }
      pj["rule"] = {{"flow", flow}, {"reference", ref}, {"total", total}};
    }
    doc["players"].push_back(pj);
  }
  return doc;
}

Mechanism mechanism_from_json(std::shared_ptr<const Environment> env, const SolvedEnvironment& solved,
                              const ordered_json& doc) {
  try {
    if (doc.at("environment_digest").get<std::string>() != environment_digest(*env))
      throw InputError("mechanism: environment digest does not match the environment");
    const auto policy = doc.at("policy").get<std::vector<std::string>>();
    if (policy.size() != env->num_states()) throw InputError("mechanism.policy: wrong length");
    for (std::size_t s = 0; s < policy.size(); ++s)
      if (policy[s] != env->actions()[solved.policy(s)])
        throw InputError("mechanism.policy[" + std::to_string(s) + "]: differs from the efficient policy");
    const auto& players = doc.at("players");
    if (players.size() != env->num_players()) throw InputError("mechanism.players: wrong count");
    const std::string kind = doc.at("kind").get<std::string>();
    bool all_rules = true;
    for (const auto& p : players) all_rules = all_rules && p.contains("rule");
    if (all_rules && kind != "transfers") {
      std::vector<FlowRule> rules;
      for (std::size_t i = 0; i < players.size(); ++i) {
        const Environment reduced = reduced_environment(*env, i);
        const auto& r = players[i].at("rule");
        FlowRule fr;
        fr.flow.resize(static_cast<Eigen::Index>(reduced.num_states()));
        fr.reference.resize(reduced.num_states());
        for (std::size_t o = 0; o < reduced.num_states(); ++o) {
          const auto label = reduced.state_label(o);
          fr.flow(static_cast<Eigen::Index>(o)) = r.at("flow").at(label).get<double>();
          const auto a = env->find_action(r.at("reference").at(label).get<std::string>());
          if (!a) throw InputError("mechanism.players[" + std::to_string(i) + "].rule.reference: unknown action");
          fr.reference[o] = *a;
        }
        rules.push_back(std::move(fr));
      }
      const MechanismKind k = kind == "team" ? MechanismKind::team
                              : kind == "pivot" ? MechanismKind::pivot
                                                : MechanismKind::custom;
      return build_custom(env, solved, rules, k);
    }
    std::vector<Eigen::VectorXd> z;
    for (const auto& p : players) {
      const auto v = p.at("flow_transfer").get<std::vector<double>>();
      if (v.size() != env->num_states()) throw InputError("mechanism.flow_transfer: wrong length");
      z.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    return build_from_transfers(env, solved, z);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("mechanism document: ") + e.what());
  }
}

}  // namespace dgm
