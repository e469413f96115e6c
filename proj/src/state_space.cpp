#include "dgm/state_space.hpp"

#include <stdexcept>

namespace dgm {

StateSpace::StateSpace(std::vector<std::size_t> radices) : radices_(std::move(radices)) {
  strides_.assign(radices_.size(), 1);
  size_ = 1;
  for (std::size_t k = radices_.size(); k-- > 0;) {
    if (radices_[k] == 0) throw std::invalid_argument("StateSpace: empty type set");
    strides_[k] = size_;
    size_ *= radices_[k];
  }
}

std::size_t StateSpace::component(std::size_t state, std::size_t player) const {
  return (state / strides_[player]) % radices_[player];
}

std::size_t StateSpace::with_component(std::size_t state, std::size_t player,
                                       std::size_t value) const {
  const std::size_t old = component(state, player);
  return state - old * strides_[player] + value * strides_[player];
}

std::vector<std::size_t> StateSpace::decode(std::size_t state) const {
  std::vector<std::size_t> out(radices_.size());
  for (std::size_t k = 0; k < radices_.size(); ++k) out[k] = component(state, k);
  return out;
}

std::size_t StateSpace::encode(std::span<const std::size_t> profile) const {
  if (profile.size() != radices_.size()) throw std::invalid_argument("StateSpace: profile arity");
  std::size_t idx = 0;
  for (std::size_t k = 0; k < radices_.size(); ++k) {
    if (profile[k] >= radices_[k]) throw std::out_of_range("StateSpace: type index");
    idx += profile[k] * strides_[k];
  }
  return idx;
}

std::size_t StateSpace::drop(std::size_t state, std::size_t player) const {
  const std::size_t stride = strides_[player];
  const std::size_t high = state / (stride * radices_[player]);
  const std::size_t low = state % stride;
  return high * stride + low;
}

std::size_t StateSpace::insert(std::size_t reduced, std::size_t player, std::size_t value) const {
  const std::size_t stride = strides_[player];
  const std::size_t high = reduced / stride;
  const std::size_t low = reduced % stride;
  return (high * radices_[player] + value) * stride + low;
}

StateSpace StateSpace::without(std::size_t player) const {
  std::vector<std::size_t> r;
  r.reserve(radices_.size());
  for (std::size_t k = 0; k < radices_.size(); ++k)
    if (k != player) r.push_back(radices_[k]);
  return StateSpace(std::move(r));
}

}  // namespace dgm
