#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dgm {

/// Mixed-radix indexing of joint type profiles. The last player varies
/// fastest. A space with zero players has exactly one (empty) profile.
class StateSpace {
 public:
  StateSpace() = default;
  explicit StateSpace(std::vector<std::size_t> radices);

  std::size_t size() const { return size_; }
  std::size_t players() const { return radices_.size(); }
  std::size_t radix(std::size_t player) const { return radices_.at(player); }
  const std::vector<std::size_t>& radices() const { return radices_; }

  std::size_t component(std::size_t state, std::size_t player) const;
  std::size_t with_component(std::size_t state, std::size_t player, std::size_t value) const;

  std::vector<std::size_t> decode(std::size_t state) const;
  std::size_t encode(std::span<const std::size_t> profile) const;

  /// Index of the profile with `player` removed, in without(player).
  std::size_t drop(std::size_t state, std::size_t player) const;
  /// Inverse of drop: re-insert `value` for `player` into a reduced index.
  std::size_t insert(std::size_t reduced, std::size_t player, std::size_t value) const;

  StateSpace without(std::size_t player) const;

 private:
  std::vector<std::size_t> radices_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 1;
};

}  // namespace dgm
