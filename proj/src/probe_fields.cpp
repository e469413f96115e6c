#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dgm/error.hpp"
#include "dgm/parallel.hpp"
#include "dgm/probe.hpp"

namespace dgm {

void ContinuousWorld::validate() const {
  if (players.empty()) throw InputError("world: at least one player required");
  if (num_actions == 0) throw InputError("world: at least one action required");
  if (!(discount >= 0.0 && discount < 1.0)) throw InputError("world: discount must lie in [0, 1)");
  if (!decision) throw InputError("world: decision rule missing");
  if (!(valuation_bound >= 0.0) || !std::isfinite(valuation_bound))
    throw InputError("world: valuation bound must be finite and >= 0");
  for (std::size_t i = 0; i < players.size(); ++i) {
    const auto& p = players[i];
    const std::string where = "world.players[" + std::to_string(i) + "]";
    if (p.lower.size() == 0 || p.lower.size() != p.upper.size())
      throw InputError(where + ": bounds must be non-empty and of equal dimension");
    for (Eigen::Index k = 0; k < p.lower.size(); ++k)
      if (!std::isfinite(p.lower(k)) || !std::isfinite(p.upper(k)) || !(p.lower(k) < p.upper(k)))
        throw InputError(where + ": bounds must be finite with lower < upper");
    if (p.noise_dimension == 0) throw InputError(where + ": noise dimension must be >= 1");
    if (!p.valuation || !p.transition) throw InputError(where + ": valuation or transition missing");
  }
}

bool ContinuousWorld::inside(std::size_t player, const Eigen::VectorXd& type) const {
  const auto& p = players.at(player);
  if (type.size() != p.lower.size()) return false;
  return ((type.array() > p.lower.array()) && (type.array() < p.upper.array())).all();
}

std::size_t resolve_horizon(const ContinuousWorld& world, const MonteCarloSpec& mc) {
  if (mc.horizon > 0) return mc.horizon;
  return tail_horizon(world.discount, static_cast<double>(world.players.size()) * world.valuation_bound);
}

// ---------------------------------------------------------------------------

AnalyticField::AnalyticField(Eigen::VectorXd lower, Eigen::VectorXd upper,
                             std::function<double(const Eigen::VectorXd&)> f)
    : lower_(std::move(lower)), upper_(std::move(upper)), f_(std::move(f)) {
  if (lower_.size() == 0 || lower_.size() != upper_.size() || !((lower_.array() < upper_.array()).all()))
    throw std::invalid_argument("AnalyticField: bad domain");
  if (!f_) throw std::invalid_argument("AnalyticField: empty function");
}

bool AnalyticField::inside(const Eigen::VectorXd& point) const {
  return point.size() == lower_.size() && ((point.array() > lower_.array()) && (point.array() < upper_.array())).all();
}

Eigen::MatrixXd AnalyticField::sample(const std::vector<Eigen::VectorXd>& points) const {
  Eigen::MatrixXd out(1, static_cast<Eigen::Index>(points.size()));
  for (std::size_t k = 0; k < points.size(); ++k) out(0, static_cast<Eigen::Index>(k)) = f_(points[k]);
  return out;
}

GridField::GridField(std::vector<double> nodes, std::vector<double> values)
    : nodes_(std::move(nodes)), values_(std::move(values)) {
  if (nodes_.size() < 2 || nodes_.size() != values_.size())
    throw std::invalid_argument("GridField: need at least two nodes and one value per node");
  for (std::size_t k = 1; k < nodes_.size(); ++k)
    if (!(nodes_[k] > nodes_[k - 1])) throw std::invalid_argument("GridField: nodes must increase");
}

bool GridField::inside(const Eigen::VectorXd& point) const {
  return point.size() == 1 && point(0) > nodes_.front() && point(0) < nodes_.back();
}

double GridField::operator()(double x) const {
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
  std::size_t hi = static_cast<std::size_t>(it - nodes_.begin());
  hi = std::clamp<std::size_t>(hi, 1, nodes_.size() - 1);
  const std::size_t lo = hi - 1;
  const double w = (x - nodes_[lo]) / (nodes_[hi] - nodes_[lo]);
  return values_[lo] + w * (values_[hi] - values_[lo]);
}

Eigen::MatrixXd GridField::sample(const std::vector<Eigen::VectorXd>& points) const {
  Eigen::MatrixXd out(1, static_cast<Eigen::Index>(points.size()));
  for (std::size_t k = 0; k < points.size(); ++k) out(0, static_cast<Eigen::Index>(k)) = (*this)(points[k](0));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_profile(const ContinuousWorld& world, std::size_t player, const Profile& profile) {
  if (player >= world.players.size()) throw std::out_of_range("field: player");
  if (profile.size() != world.players.size()) throw std::invalid_argument("field: profile needs one type per player");
  for (std::size_t j = 0; j < profile.size(); ++j)
    if (j != player && !world.inside(j, profile[j])) throw ProbeError("field: profile type outside the domain");
}

void check_points(const ScalarField& field, const std::vector<Eigen::VectorXd>& points) {
  for (const auto& x : points)
    if (!field.inside(x)) throw ProbeError("field: evaluation point outside the domain");
}

void fill_noise(const NoiseStream& noise, std::uint64_t path, std::size_t player, std::size_t period,
                std::vector<double>& buffer) {
  for (std::size_t c = 0; c < buffer.size(); ++c) buffer[c] = noise.uniform(path, player, period, c);
}

}  // namespace

ConsistentValueField::ConsistentValueField(std::shared_ptr<const ContinuousWorld> world, std::size_t player,
                                           Profile profile, Eigen::VectorXd report, MonteCarloSpec mc,
                                           EvolutionVariant variant, ConsistentQuantity quantity)
    : world_(std::move(world)),
      player_(player),
      profile_(std::move(profile)),
      report_(std::move(report)),
      mc_(mc),
      variant_(variant),
      quantity_(quantity) {
  world_->validate();
  check_profile(*world_, player_, profile_);
  if (!world_->inside(player_, report_)) throw ProbeError("field: report outside the domain");
  if (mc_.paths == 0) throw std::invalid_argument("field: paths must be >= 1");
  if (quantity_ == ConsistentQuantity::utility && !world_->transfer)
    throw InputError("field: utility requires a transfer rule");
  horizon_ = resolve_horizon(*world_, mc_);
}

std::size_t ConsistentValueField::dimension() const {
  return static_cast<std::size_t>(world_->players[player_].lower.size());
}

bool ConsistentValueField::inside(const Eigen::VectorXd& point) const { return world_->inside(player_, point); }

Eigen::MatrixXd ConsistentValueField::sample(const std::vector<Eigen::VectorXd>& points) const {
  check_points(*this, points);
  const ContinuousWorld& w = *world_;
  const std::size_t K = points.size();
  const std::size_t i = player_;
  const NoiseStream noise(mc_.seed);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(mc_.paths), static_cast<Eigen::Index>(K));

  detail::parallel_for(mc_.paths, [&](std::size_t p) {
    Profile reported = profile_;
    reported[i] = report_;
    std::vector<Eigen::VectorXd> truth(points);
    std::vector<std::size_t> driving(K);
    std::vector<double> own(K, 0.0);
    double transfer = 0.0;
    double weight = 1.0;
    Profile scratch_profile;
    Eigen::VectorXd next;
    std::vector<std::vector<double>> buffers(w.players.size());
    for (std::size_t j = 0; j < w.players.size(); ++j) buffers[j].resize(w.players[j].noise_dimension);

    for (std::size_t t = 0; t < horizon_; ++t) {
      const std::size_t a = w.decision(reported);
      for (std::size_t k = 0; k < K; ++k) own[k] += weight * w.players[i].valuation(truth[k], a);
      if (quantity_ == ConsistentQuantity::utility) transfer += weight * w.transfer(i, reported);
      weight *= w.discount;
      if (t + 1 == horizon_) break;

      for (std::size_t k = 0; k < K; ++k) {
        if (variant_ == EvolutionVariant::actual_action) {
          driving[k] = a;
        } else {
          scratch_profile = reported;
          scratch_profile[i] = truth[k];
          driving[k] = w.decision(scratch_profile);
        }
      }
      for (std::size_t j = 0; j < w.players.size(); ++j) {
        fill_noise(noise, p, j, t + 1, buffers[j]);
        const auto& step = w.players[j].transition;
        if (j == i)
          for (std::size_t k = 0; k < K; ++k) {
            step(truth[k], driving[k], buffers[j].data(), next);
            truth[k].swap(next);
          }
        step(reported[j], a, buffers[j].data(), next);
        reported[j].swap(next);
      }
    }
    for (std::size_t k = 0; k < K; ++k)
      out(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) = own[k] - transfer;
  });
  return out;
}

WelfareField::WelfareField(std::shared_ptr<const ContinuousWorld> world, std::size_t player, Profile profile,
                           MonteCarloSpec mc)
    : world_(std::move(world)), player_(player), profile_(std::move(profile)), mc_(mc) {
  world_->validate();
  check_profile(*world_, player_, profile_);
  if (mc_.paths == 0) throw std::invalid_argument("field: paths must be >= 1");
  horizon_ = resolve_horizon(*world_, mc_);
}

std::size_t WelfareField::dimension() const {
  return static_cast<std::size_t>(world_->players[player_].lower.size());
}

bool WelfareField::inside(const Eigen::VectorXd& point) const { return world_->inside(player_, point); }

Eigen::MatrixXd WelfareField::sample(const std::vector<Eigen::VectorXd>& points) const {
  check_points(*this, points);
  const ContinuousWorld& w = *world_;
  const std::size_t K = points.size();
  const NoiseStream noise(mc_.seed);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(mc_.paths), static_cast<Eigen::Index>(K));

  detail::parallel_for(mc_.paths, [&](std::size_t p) {
    Eigen::VectorXd next;
    std::vector<std::vector<double>> buffers(w.players.size());
    for (std::size_t j = 0; j < w.players.size(); ++j) buffers[j].resize(w.players[j].noise_dimension);
    for (std::size_t k = 0; k < K; ++k) {
      Profile state = profile_;
      state[player_] = points[k];
      double total = 0.0, weight = 1.0;
      for (std::size_t t = 0; t < horizon_; ++t) {
        const std::size_t a = w.decision(state);
        for (std::size_t j = 0; j < w.players.size(); ++j) total += weight * w.players[j].valuation(state[j], a);
        weight *= w.discount;
        if (t + 1 == horizon_) break;
        for (std::size_t j = 0; j < w.players.size(); ++j) {
          fill_noise(noise, p, j, t + 1, buffers[j]);
          w.players[j].transition(state[j], a, buffers[j].data(), next);
          state[j].swap(next);
        }
      }
      out(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) = total;
    }
  });
  return out;
}

}  // namespace dgm
