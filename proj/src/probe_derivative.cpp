#include <cmath>
#include <limits>
#include <stdexcept>

#include "dgm/error.hpp"
#include "dgm/probe.hpp"

namespace dgm {

std::vector<double> StepGrid::steps() const {
  if (!(initial > 0.0) || levels == 0) throw ProbeError("step grid: need initial > 0 and at least one level");
  std::vector<double> out(levels);
  for (std::size_t m = 0; m < levels; ++m) out[m] = std::ldexp(initial, -static_cast<int>(m));
  return out;
}

double OneSided::uncertainty() const {
  const double bias = extrapolation_error + rounding;
  return std::sqrt(standard_error * standard_error + bias * bias);
}

namespace {

// Richardson tableau weights for quotients with first-order error and step
// ratio 2. Returns the final combination and the one before it.
std::pair<Eigen::VectorXd, Eigen::VectorXd> richardson_weights(std::size_t levels) {
  const auto L = static_cast<Eigen::Index>(levels);
  std::vector<Eigen::MatrixXd> table(levels, Eigen::MatrixXd::Zero(L, L));  // table[k].row(m)
  for (Eigen::Index m = 0; m < L; ++m) table[0](m, m) = 1.0;
  for (std::size_t k = 1; k < levels; ++k) {
    const double f = std::ldexp(1.0, static_cast<int>(k));
    for (Eigen::Index m = static_cast<Eigen::Index>(k); m < L; ++m)
      table[k].row(m) = (f * table[k - 1].row(m) - table[k - 1].row(m - 1)) / (f - 1.0);
  }
  Eigen::VectorXd last = table[levels - 1].row(L - 1).transpose();
  Eigen::VectorXd prev = levels > 1 ? Eigen::VectorXd(table[levels - 2].row(L - 1).transpose()) : last;
  return {last, prev};
}

double standard_error(const Eigen::VectorXd& xs) {
  const auto n = xs.size();
  if (n < 2) return 0.0;
  const double mean = xs.mean();
  return std::sqrt((xs.array() - mean).square().sum() / static_cast<double>(n - 1) / static_cast<double>(n));
}

double paired_standard_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::quiet_NaN();
  return standard_error(a - b);
}

}  // namespace

DerivativeEstimate estimate_directional(const ScalarField& field, const Eigen::VectorXd& location,
                                        const Eigen::VectorXd& direction, const StepGrid& grid) {
  const auto dim = static_cast<Eigen::Index>(field.dimension());
  if (location.size() != dim || direction.size() != dim) throw ProbeError("directional derivative: dimension mismatch");
  const double norm = direction.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw ProbeError("directional derivative: zero direction");
  DerivativeEstimate est;
  est.location = location;
  est.direction = direction / norm;
  est.steps = grid.steps();
  const std::size_t L = est.steps.size();

  if (!field.inside(location) || !field.inside(location + est.steps[0] * est.direction) ||
      !field.inside(location - est.steps[0] * est.direction))
    throw ProbeError("directional derivative: location within the largest step of the boundary");

  std::vector<Eigen::VectorXd> points{location};
  for (double l : est.steps) {
    points.push_back(location + l * est.direction);
    points.push_back(location - l * est.direction);
  }
  const Eigen::MatrixXd values = field.sample(points);
  if (!values.allFinite()) throw ProbeError("directional derivative: non-finite field value");

  const auto P = values.rows();
  Eigen::MatrixXd forward(P, static_cast<Eigen::Index>(L)), backward(P, static_cast<Eigen::Index>(L));
  for (std::size_t m = 0; m < L; ++m) {
    const auto c = static_cast<Eigen::Index>(m);
    forward.col(c) = (values.col(1 + 2 * c) - values.col(0)) / est.steps[m];
    backward.col(c) = (values.col(0) - values.col(2 + 2 * c)) / est.steps[m];
  }
  const auto [w, w_prev] = richardson_weights(L);
  const double scale = values.cwiseAbs().maxCoeff();
  double amplification = 0.0;
  for (std::size_t m = 0; m < L; ++m) amplification += std::abs(w(static_cast<Eigen::Index>(m))) / est.steps[m];
  const double rounding = 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + scale) * amplification;

  auto side = [&](const Eigen::MatrixXd& q, Eigen::VectorXd& per_path) {
    OneSided s;
    per_path = q * w;
    const Eigen::VectorXd mean_q = q.colwise().mean().transpose();
    s.value = per_path.mean();
    s.standard_error = standard_error(per_path);
    s.extrapolation_error = L > 1 ? std::abs(mean_q.dot(w - w_prev)) : 0.0;
    s.rounding = rounding;
    s.quotients.assign(mean_q.data(), mean_q.data() + mean_q.size());
    return s;
  };
  est.plus = side(forward, est.plus_paths);
  est.minus = side(backward, est.minus_paths);
  const double gap_se = paired_standard_error(est.plus_paths, est.minus_paths);
  const double bias = est.plus.extrapolation_error + est.minus.extrapolation_error + 2.0 * rounding;
  est.gap_standard_error = std::sqrt(gap_se * gap_se + bias * bias);
  return est;
}

namespace {

// Uncertainty of (a - b) for two estimates; paired per path when both come
// from the same number of simulated paths.
double difference_uncertainty(const OneSided& a, const Eigen::VectorXd& a_paths, const OneSided& b,
                              const Eigen::VectorXd& b_paths) {
  const double bias = a.extrapolation_error + a.rounding + b.extrapolation_error + b.rounding;
  double se;
  if (a_paths.size() > 1 && a_paths.size() == b_paths.size())
    se = paired_standard_error(a_paths, b_paths);
  else
    se = std::hypot(a.standard_error, b.standard_error);
  return std::sqrt(se * se + bias * bias);
}

}  // namespace

Lemma2Report check_lemma2(const ScalarField& value, const ScalarField& welfare, const Eigen::VectorXd& location,
                          const Eigen::VectorXd& direction, const StepGrid& grid) {
  Lemma2Report r;
  r.value = estimate_directional(value, location, direction, grid);
  r.welfare = estimate_directional(welfare, location, direction, grid);
  r.plus_margin = r.welfare.plus.value - r.value.plus.value;
  r.minus_margin = r.value.minus.value - r.welfare.minus.value;
  r.plus_error = kErrorBarWidth *
                 difference_uncertainty(r.welfare.plus, r.welfare.plus_paths, r.value.plus, r.value.plus_paths);
  r.minus_error = kErrorBarWidth *
                  difference_uncertainty(r.value.minus, r.value.minus_paths, r.welfare.minus, r.welfare.minus_paths);
  r.plus_holds = r.plus_margin >= -r.plus_error;
  r.minus_holds = r.minus_margin >= -r.minus_error;
  return r;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::violated: return "violated";
    case Verdict::excluded: return "excluded";
  }
  return "?";
}

PropertyAReport check_property_a(const FieldFamily& value, const ScalarField& welfare,
                                 const std::vector<SamplePoint>& samples, const StepGrid& grid) {
  PropertyAReport report;
  for (const auto& s : samples) {
    PropertyAPoint pt;
    pt.sample = s;
    const FieldPtr v = value(s.location);
    if (!v) throw ProbeError("property A: value family returned no field");
    pt.value = estimate_directional(*v, s.location, s.direction, grid);
    pt.welfare = estimate_directional(welfare, s.location, s.direction, grid);
    pt.margin = pt.value.gap();
    pt.error = kErrorBarWidth * pt.value.gap_standard_error;
    pt.two_sided = std::abs(pt.margin) <= pt.error;
    if (std::abs(pt.welfare.gap()) > kKinkScreenWidth * pt.welfare.gap_standard_error) {
      pt.verdict = Verdict::excluded;
      ++report.excluded;
    } else if (pt.margin >= -pt.error) {
      pt.verdict = Verdict::holds;
      ++report.holds;
    } else {
      pt.verdict = Verdict::violated;
      ++report.violated;
    }
    report.points.push_back(std::move(pt));
  }
  return report;
}

LipschitzEstimate estimate_lipschitz(const std::vector<FieldPtr>& fields, const std::vector<Eigen::VectorXd>& points) {
  if (points.size() < 2) throw ProbeError("lipschitz: need at least two sample points");
  LipschitzEstimate out;
  bool any = false;
  for (std::size_t f = 0; f < fields.size(); ++f) {
    const Eigen::MatrixXd values = fields[f]->sample(points);
    if (!values.allFinite()) throw ProbeError("lipschitz: non-finite field value");
    const Eigen::VectorXd mean = values.colwise().mean().transpose();
    for (std::size_t a = 0; a < points.size(); ++a)
      for (std::size_t b = a + 1; b < points.size(); ++b) {
        const double dist = (points[a] - points[b]).norm();
        if (dist == 0.0) {
          ++out.skipped;
          continue;
        }
        ++out.pairs;
        const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
        const double ratio = std::abs(mean(ia) - mean(ib)) / dist;
        if (!any || ratio > out.estimate) {
          any = true;
          out.estimate = ratio;
          out.field = f;
          out.first = a;
          out.second = b;
          out.standard_error = standard_error(values.col(ia) - values.col(ib)) / dist;
        }
      }
  }
  if (!any) throw ProbeError("lipschitz: no distinct sample pair");
  return out;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::ordered_json vec(const Eigen::VectorXd& v) {
  auto out = nlohmann::ordered_json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

nlohmann::ordered_json side_json(const OneSided& s) {
  return {{"value", s.value},
          {"standard_error", s.standard_error},
          {"extrapolation_error", s.extrapolation_error},
          {"rounding", s.rounding},
          {"error_bar", kErrorBarWidth * s.uncertainty()},
          {"quotients", s.quotients}};
}

}  // namespace

nlohmann::ordered_json to_json(const DerivativeEstimate& d) {
  return {{"location", vec(d.location)},
          {"direction", vec(d.direction)},
          {"steps", d.steps},
          {"paths", d.plus_paths.size()},
          {"plus", side_json(d.plus)},
          {"minus", side_json(d.minus)},
          {"gap", d.gap()},
          {"gap_standard_error", d.gap_standard_error}};
}

nlohmann::ordered_json to_json(const Lemma2Report& r) {
  return {{"banner", kHeuristicBanner},
          {"value", to_json(r.value)},
          {"welfare", to_json(r.welfare)},
          {"plus_margin", r.plus_margin},
          {"plus_error", r.plus_error},
          {"plus_holds", r.plus_holds},
          {"minus_margin", r.minus_margin},
          {"minus_error", r.minus_error},
          {"minus_holds", r.minus_holds}};
}

nlohmann::ordered_json to_json(const PropertyAReport& r) {
  nlohmann::ordered_json out;
  out["banner"] = kHeuristicBanner;
  out["holds"] = r.holds;
  out["violated"] = r.violated;
  out["excluded"] = r.excluded;
  out["pass"] = r.pass();
  auto& pts = out["points"] = nlohmann::ordered_json::array();
  for (const auto& p : r.points)
    pts.push_back({{"location", vec(p.sample.location)},
                   {"direction", vec(p.value.direction)},
                   {"verdict", to_string(p.verdict)},
                   {"D+V", p.value.plus.value},
                   {"D-V", p.value.minus.value},
                   {"margin", p.margin},
                   {"error_bar", p.error},
                   {"two_sided", p.two_sided},
                   {"D+W", p.welfare.plus.value},
                   {"D-W", p.welfare.minus.value},
                   {"welfare_gap_se", p.welfare.gap_standard_error}});
  return out;
}

nlohmann::ordered_json to_json(const LipschitzEstimate& l) {
  return {{"banner", kHeuristicBanner},
          {"lower_bound", l.estimate},
          {"standard_error", l.standard_error},
          {"field", l.field},
          {"first", l.first},
          {"second", l.second},
          {"pairs", l.pairs},
          {"skipped", l.skipped}};
}

}  // namespace dgm
