// Test-only helpers: fixture loading, a random environment generator, and
// oracles coded independently of the library's solvers.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dgm/environment.hpp"
#include "dgm/groves.hpp"
#include "dgm/mdp.hpp"

#ifndef DGM_FIXTURES
#error "DGM_FIXTURES must point at tests/fixtures"
#endif

namespace testing {

inline std::string fixture(const std::string& name) { return std::string(DGM_FIXTURES) + "/" + name; }

inline std::shared_ptr<const dgm::Environment> load_fixture(const std::string& name) {
  return std::make_shared<const dgm::Environment>(dgm::load_environment_file(fixture(name)));
}

struct RandomSpec {
  std::size_t min_players = 1, max_players = 3;
  std::size_t max_types = 4;
  std::size_t max_actions = 3;
  std::vector<double> discounts{0.0, 0.5, 0.9};
};

inline dgm::Environment random_environment(std::mt19937_64& rng, const RandomSpec& spec = {}) {
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  std::uniform_real_distribution<double> value(-2.0, 2.0), unit(0.0, 1.0);
  const std::size_t n = pick(spec.min_players, spec.max_players);
  const std::size_t na = pick(1, spec.max_actions);
  const double delta = spec.discounts[pick(0, spec.discounts.size() - 1)];
  std::vector<std::string> actions;
  for (std::size_t a = 0; a < na; ++a) actions.push_back("a" + std::to_string(a));
  std::vector<dgm::PlayerSpec> players;
  for (std::size_t i = 0; i < n; ++i) {
    dgm::PlayerSpec p;
    p.name = "p" + std::to_string(i);
    const std::size_t m = pick(1, spec.max_types);
    for (std::size_t t = 0; t < m; ++t) p.types.push_back("t" + std::to_string(t));
    p.valuation.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(na));
    for (Eigen::Index r = 0; r < p.valuation.rows(); ++r)
      for (Eigen::Index c = 0; c < p.valuation.cols(); ++c) p.valuation(r, c) = value(rng);
    for (std::size_t a = 0; a < na; ++a) {
      Eigen::MatrixXd k(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
      for (Eigen::Index r = 0; r < k.rows(); ++r) {
        for (Eigen::Index c = 0; c < k.cols(); ++c) k(r, c) = unit(rng) < 0.25 ? 0.0 : unit(rng);
        if (k.row(r).sum() <= 0.0) k(r, static_cast<Eigen::Index>(pick(0, m - 1))) = 1.0;
        k.row(r) /= k.row(r).sum();
      }
      p.transition.push_back(std::move(k));
    }
    players.push_back(std::move(p));
  }
  return dgm::Environment(std::move(actions), std::move(players), delta);
}

/// Random distribution rules: flows in [-3, 3], random reference actions.
inline std::vector<dgm::FlowRule> random_rules(std::mt19937_64& rng, const dgm::Environment& env) {
  std::uniform_real_distribution<double> value(-3.0, 3.0);
  std::uniform_int_distribution<std::size_t> action(0, env.num_actions() - 1);
  std::vector<dgm::FlowRule> rules;
  for (std::size_t i = 0; i < env.num_players(); ++i) {
    const std::size_t others = env.space().without(i).size();
    dgm::FlowRule r;
    r.flow.resize(static_cast<Eigen::Index>(others));
    for (Eigen::Index o = 0; o < r.flow.size(); ++o) r.flow(o) = value(rng);
    for (std::size_t o = 0; o < others; ++o) r.reference.push_back(action(rng));
    rules.push_back(std::move(r));
  }
  return rules;
}

// ---------------------------------------------------------------------------
// Oracles. These use only per-player primitives (valuation, kernel) and plain
// loops over decoded profiles; no library solver or sparse kernel is touched.

inline double joint_probability(const dgm::Environment& env, std::size_t s, std::size_t a, std::size_t next) {
  const auto x = env.space().decode(s), y = env.space().decode(next);
  double p = 1.0;
  for (std::size_t i = 0; i < env.num_players(); ++i) p *= env.kernel(i, x[i], a, y[i]);
  return p;
}

inline double flow_welfare(const dgm::Environment& env, std::size_t s, std::size_t a) {
  const auto x = env.space().decode(s);
  double w = 0.0;
  for (std::size_t i = 0; i < env.num_players(); ++i) w += env.valuation(i, x[i], a);
  return w;
}

struct OracleSolution {
  std::vector<double> value;
  std::vector<std::size_t> policy;
};

/// Plain value iteration to a 1e-13 step, greedy policy with lowest-index ties.
inline OracleSolution oracle_value_iteration(const dgm::Environment& env) {
  const std::size_t n = env.num_states(), na = env.num_actions();
  std::vector<std::vector<double>> prob(n * na, std::vector<double>(n));
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t t = 0; t < n; ++t) prob[s * na + a][t] = joint_probability(env, s, a, t);
  std::vector<double> v(n, 0.0), q(na);
  auto backup = [&](std::size_t s, const std::vector<double>& cur) {
    for (std::size_t a = 0; a < na; ++a) {
      double e = 0.0;
      for (std::size_t t = 0; t < n; ++t) e += prob[s * na + a][t] * cur[t];
      q[a] = flow_welfare(env, s, a) + env.discount() * e;
    }
  };
  for (int iter = 0; iter < 100000; ++iter) {
    std::vector<double> next(n);
    double step = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      backup(s, v);
      next[s] = *std::max_element(q.begin(), q.end());
      step = std::max(step, std::abs(next[s] - v[s]));
    }
    v.swap(next);
    if (step < 1e-13) break;
  }
  OracleSolution out;
  out.value = v;
  for (std::size_t s = 0; s < n; ++s) {
    backup(s, v);
    out.policy.push_back(static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin()));
  }
  return out;
}

/// Discounted accumulation of a flow along a policy by plain iteration.
inline std::vector<double> oracle_accumulate(const dgm::Environment& env, const std::vector<std::size_t>& policy,
                                             const std::vector<double>& flow) {
  const std::size_t n = env.num_states();
  std::vector<double> v(n, 0.0);
  for (int iter = 0; iter < 100000; ++iter) {
    std::vector<double> next(n);
    double step = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      double e = 0.0;
      for (std::size_t t = 0; t < n; ++t) e += joint_probability(env, s, policy[s], t) * v[t];
      next[s] = flow[s] + env.discount() * e;
      step = std::max(step, std::abs(next[s] - v[s]));
    }
    v.swap(next);
    if (step < 1e-14) break;
  }
  return v;
}

/// One-shot Clarke pivot: z_i = max_a sum_{j != i} v_j(a) - sum_{j != i} v_j(a*).
inline std::vector<std::vector<double>> oracle_static_pivot(const dgm::Environment& env) {
  const std::size_t n = env.num_players();
  std::vector<std::vector<double>> z(n, std::vector<double>(env.num_states()));
  for (std::size_t s = 0; s < env.num_states(); ++s) {
    const auto x = env.space().decode(s);
    std::size_t best = 0;
    double best_w = -INFINITY;
    for (std::size_t a = 0; a < env.num_actions(); ++a) {
      double w = 0.0;
      for (std::size_t j = 0; j < n; ++j) w += env.valuation(j, x[j], a);
      if (w > best_w) {
        best_w = w;
        best = a;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      double without = -INFINITY, at_best = 0.0;
      for (std::size_t a = 0; a < env.num_actions(); ++a) {
        double w = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          if (j != i) w += env.valuation(j, x[j], a);
        without = std::max(without, w);
        if (a == best) at_best = w;
      }
      z[i][s] = without - at_best;
    }
  }
  return z;
}

inline double max_abs_diff(const Eigen::VectorXd& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) m = std::max(m, std::abs(a(static_cast<Eigen::Index>(k)) - b[k]));
  return m;
}

}  // namespace testing
