#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dgm/state_space.hpp"

namespace dgm {

using SparseKernel = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// One player's primitives. Rows of every transition matrix are indexed by the
/// current type and columns by the next type, in declared type order.
struct PlayerSpec {
  std::string name;
  std::vector<std::string> types;
  Eigen::MatrixXd valuation;                ///< types x actions
  std::vector<Eigen::MatrixXd> transition;  ///< one types x types matrix per action
};

/// A finite Markovian environment: private-value valuations, per-player
/// transition kernels (the joint kernel is their product), and a discount
/// factor in [0, 1). Immutable once constructed; the constructor validates.
class Environment {
 public:
  /// Throws InputError naming the offending field. Rows whose sum is within
  /// 1e-9 of one are renormalized; anything further off is rejected.
  Environment(std::vector<std::string> actions, std::vector<PlayerSpec> players, double discount);

  std::size_t num_players() const { return players_.size(); }
  std::size_t num_actions() const { return actions_.size(); }
  std::size_t num_types(std::size_t player) const { return players_[player].types.size(); }
  std::size_t num_states() const { return space_.size(); }

  const std::vector<std::string>& actions() const { return actions_; }
  const std::vector<PlayerSpec>& players() const { return players_; }
  const PlayerSpec& player(std::size_t i) const { return players_.at(i); }
  const StateSpace& space() const { return space_; }
  double discount() const { return discount_; }

  /// C = max |v_i(type, action)| over all players, types and actions.
  double bound() const { return bound_; }

  double valuation(std::size_t player, std::size_t type, std::size_t action) const {
    return players_[player].valuation(static_cast<Eigen::Index>(type),
                                       static_cast<Eigen::Index>(action));
  }
  double kernel(std::size_t player, std::size_t type, std::size_t action, std::size_t next) const {
    return players_[player].transition[action](static_cast<Eigen::Index>(type),
                                               static_cast<Eigen::Index>(next));
  }

  /// Sum of all players' valuations at a joint state.
  double welfare(std::size_t state, std::size_t action) const;
  /// Sum of valuations of every player except `excluded`.
  double others_welfare(std::size_t state, std::size_t excluded, std::size_t action) const;

  /// Support of the joint kernel row p(. | state, action) as (next state, probability).
  std::vector<std::pair<std::size_t, double>> joint_row(std::size_t state, std::size_t action) const;
  /// Joint kernel for one action as a sparse row-stochastic matrix.
  SparseKernel joint_kernel(std::size_t action) const;
  /// Sum over next states of p(next | state, action) * f(next).
  double expect(std::size_t state, std::size_t action, const Eigen::VectorXd& f) const;

  std::optional<std::size_t> find_player(std::string_view name) const;
  std::optional<std::size_t> find_action(std::string_view label) const;
  std::optional<std::size_t> find_type(std::size_t player, std::string_view label) const;

  /// Type labels joined with ','; the empty profile is "".
  std::string state_label(std::size_t state) const;
  std::vector<std::string> state_labels(std::size_t state) const;
  /// Parse a ','-joined label into a joint state. Throws InputError.
  std::size_t parse_state(std::string_view label) const;

 private:
  std::vector<std::string> actions_;
  std::vector<PlayerSpec> players_;
  double discount_;
  double bound_ = 0.0;
  StateSpace space_;
};

/// Parse and validate an environment document (JSON). Throws InputError.
Environment load_environment(std::string_view document);
Environment load_environment_file(const std::string& path);
/// Serialize to the same document format; load(serialize(e)) is value-identical.
std::string serialize_environment(const Environment& env);
/// Stable 64-bit hex digest of the serialized environment.
std::string environment_digest(const Environment& env);

/// Environment with `excluded` deleted: same actions and discount, and the
/// remaining players' tables unchanged.
Environment reduced_environment(const Environment& env, std::size_t excluded);

/// Counter-based uniform noise: every (path, player, period, component)
/// coordinate maps to an independent draw in [0, 1), fixed by the seed.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed) : seed_(seed) {}
  std::uint64_t seed() const { return seed_; }
  double uniform(std::uint64_t path, std::uint64_t player, std::uint64_t period,
                 std::uint64_t component = 0) const;

 private:
  std::uint64_t seed_;
};

/// Cumulative distribution of a probability row in declared order; the last
/// entry is pinned to exactly 1.
std::vector<double> cumulative(std::span<const double> row);
/// Smallest index k with u < cdf[k]; zero-mass entries are never returned.
std::size_t inverse_cdf(std::span<const double> cdf, double u);

/// Joint law of (F_x^{-1}(U), F_y^{-1}(U)) for a shared U ~ Uniform[0,1):
/// entry (x', y') is the overlap length of the two inverse-CDF intervals.
Eigen::MatrixXd couple_rows(std::span<const double> row_x, std::span<const double> row_y);

/// Inverse-CDF coupling of player i's kernel with itself under one action.
/// Pair (x, y) is indexed x * types + y.
struct CoupledKernel {
  std::size_t player = 0;
  std::size_t action = 0;
  std::size_t types = 0;
  Eigen::MatrixXd probability;  ///< (types^2) x (types^2)

  double operator()(std::size_t x, std::size_t y, std::size_t next_x, std::size_t next_y) const {
    return probability(static_cast<Eigen::Index>(x * types + y),
                       static_cast<Eigen::Index>(next_x * types + next_y));
  }
};

CoupledKernel coupling_kernel(const Environment& env, std::size_t player, std::size_t action);

/// Per-player inverse-CDF sampler k_i(type, action, u) for simulation.
class KernelSampler {
 public:
  explicit KernelSampler(const Environment& env);
  std::size_t next(std::size_t player, std::size_t type, std::size_t action, double u) const;

 private:
  // [player][action][type] -> cdf
  std::vector<std::vector<std::vector<std::vector<double>>>> cdf_;
};

}  // namespace dgm
