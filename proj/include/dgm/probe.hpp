#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dgm/deviate.hpp"
#include "dgm/environment.hpp"

namespace dgm {

inline constexpr const char* kHeuristicBanner =
    "heuristic: finite samples and step grids cannot certify properties that hold on open connected "
    "domains; verdicts are numerical evidence only";

// ---------------------------------------------------------------------------
// Worlds

/// One player of a parametric continuous world. Types live in the open box
/// (lower, upper); the transition maps (type, action, noise in [0,1)^q) to
/// the next type.
struct ContinuousPlayer {
  std::string name;
  Eigen::VectorXd lower, upper;
  std::size_t noise_dimension = 1;
  std::function<double(const Eigen::VectorXd& type, std::size_t action)> valuation;
  std::function<void(const Eigen::VectorXd& type, std::size_t action, const double* noise, Eigen::VectorXd& next)>
      transition;
};

using Profile = std::vector<Eigen::VectorXd>;

struct ContinuousWorld {
  std::vector<ContinuousPlayer> players;
  std::size_t num_actions = 0;
  double discount = 0.0;
  std::function<std::size_t(const Profile&)> decision;                  ///< a*(theta)
  std::function<double(std::size_t player, const Profile&)> transfer;   ///< optional flow transfer z_i
  double valuation_bound = 1.0;                                         ///< C, for the tail rule

  /// Throws InputError when bounds, discount or handles are malformed.
  void validate() const;
  bool inside(std::size_t player, const Eigen::VectorXd& type) const;
};

struct MonteCarloSpec {
  std::size_t paths = 10000;
  std::size_t horizon = 0;  ///< 0: tail rule on n * C
  std::uint64_t seed = 0;
};

std::size_t resolve_horizon(const ContinuousWorld& world, const MonteCarloSpec& mc);

// ---------------------------------------------------------------------------
// Fields

/// A scalar function of player i's type, sampled jointly at several points.
/// Row p of the result is path p; every point on a row sees the same noise.
class ScalarField {
 public:
  virtual ~ScalarField() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::size_t paths() const = 0;  ///< 1 for exact fields
  virtual bool inside(const Eigen::VectorXd& point) const = 0;
  virtual Eigen::MatrixXd sample(const std::vector<Eigen::VectorXd>& points) const = 0;
};

using FieldPtr = std::shared_ptr<const ScalarField>;

/// Exactly evaluated function on an open box.
class AnalyticField final : public ScalarField {
 public:
  AnalyticField(Eigen::VectorXd lower, Eigen::VectorXd upper, std::function<double(const Eigen::VectorXd&)> f);
  std::size_t dimension() const override { return static_cast<std::size_t>(lower_.size()); }
  std::size_t paths() const override { return 1; }
  bool inside(const Eigen::VectorXd& point) const override;
  Eigen::MatrixXd sample(const std::vector<Eigen::VectorXd>& points) const override;

 private:
  Eigen::VectorXd lower_, upper_;
  std::function<double(const Eigen::VectorXd&)> f_;
};

/// Piecewise-linear interpolant through (nodes[k], values[k]) on
/// (nodes.front(), nodes.back()); nodes strictly increasing.
class GridField final : public ScalarField {
 public:
  GridField(std::vector<double> nodes, std::vector<double> values);
  std::size_t dimension() const override { return 1; }
  std::size_t paths() const override { return 1; }
  bool inside(const Eigen::VectorXd& point) const override;
  Eigen::MatrixXd sample(const std::vector<Eigen::VectorXd>& points) const override;
  double operator()(double x) const;

 private:
  std::vector<double> nodes_, values_;
};

enum class ConsistentQuantity { own_value, utility };

/// theta_i -> V_i^C (or U_i^C = V_i^C - Z_i^C) with the report process
/// started at `report` and the others at `profile`, by Monte Carlo.
class ConsistentValueField final : public ScalarField {
 public:
  ConsistentValueField(std::shared_ptr<const ContinuousWorld> world, std::size_t player, Profile profile,
                       Eigen::VectorXd report, MonteCarloSpec mc, EvolutionVariant variant,
                       ConsistentQuantity quantity = ConsistentQuantity::own_value);
  std::size_t dimension() const override;
  std::size_t paths() const override { return mc_.paths; }
  bool inside(const Eigen::VectorXd& point) const override;
  Eigen::MatrixXd sample(const std::vector<Eigen::VectorXd>& points) const override;

 private:
  std::shared_ptr<const ContinuousWorld> world_;
  std::size_t player_;
  Profile profile_;
  Eigen::VectorXd report_;
  MonteCarloSpec mc_;
  std::size_t horizon_;
  EvolutionVariant variant_;
  ConsistentQuantity quantity_;
};

/// theta_i -> W(theta_i, theta_{-i}) under truthful play of the decision rule.
class WelfareField final : public ScalarField {
 public:
  WelfareField(std::shared_ptr<const ContinuousWorld> world, std::size_t player, Profile profile, MonteCarloSpec mc);
  std::size_t dimension() const override;
  std::size_t paths() const override { return mc_.paths; }
  bool inside(const Eigen::VectorXd& point) const override;
  Eigen::MatrixXd sample(const std::vector<Eigen::VectorXd>& points) const override;

 private:
  std::shared_ptr<const ContinuousWorld> world_;
  std::size_t player_;
  Profile profile_;
  MonteCarloSpec mc_;
  std::size_t horizon_;
};

// ---------------------------------------------------------------------------
// Directional derivatives

/// Steps initial * 2^-m, m = 0 .. levels-1 (2^-6 .. 2^-9 by default).
struct StepGrid {
  double initial = 0.015625;  // 2^-6
  std::size_t levels = 4;
  std::vector<double> steps() const;
};

struct OneSided {
  double value = 0.0;                 ///< Richardson-extrapolated mean
  double standard_error = 0.0;        ///< Monte Carlo SE across paths (0 for exact fields)
  double extrapolation_error = 0.0;   ///< |last two tableau entries|
  double rounding = 0.0;              ///< floating-point floor of the quotients
  std::vector<double> quotients;      ///< mean raw quotient per step
  /// Combined standard uncertainty.
  double uncertainty() const;
};

/// D+ uses (f(x + l d) - f(x)) / l and D- uses (f(x) - f(x - l d)) / l, l > 0.
struct DerivativeEstimate {
  Eigen::VectorXd location;
  Eigen::VectorXd direction;  ///< unit vector
  std::vector<double> steps;
  OneSided plus, minus;
  double gap_standard_error = 0.0;  ///< SE of per-path (D+ - D-), rounding included
  Eigen::VectorXd plus_paths, minus_paths;  ///< per-path extrapolated quotients
  double gap() const { return plus.value - minus.value; }
};

/// Throws ProbeError near the boundary (x +- initial * d outside the domain),
/// for a zero direction, and for non-finite field values.
DerivativeEstimate estimate_directional(const ScalarField& field, const Eigen::VectorXd& location,
                                        const Eigen::VectorXd& direction, const StepGrid& grid = {});

/// Error bars are this many combined standard uncertainties.
inline constexpr double kErrorBarWidth = 3.0;
/// W counts as non-differentiable when |D+W - D-W| exceeds this many SEs.
inline constexpr double kKinkScreenWidth = 5.0;

struct Lemma2Report {
  DerivativeEstimate value, welfare;
  double plus_margin = 0.0;   ///< D+W - D+V
  double minus_margin = 0.0;  ///< D-V - D-W
  double plus_error = 0.0, minus_error = 0.0;
  bool plus_holds = true, minus_holds = true;
  bool holds() const { return plus_holds && minus_holds; }
};

/// Checks D+V <= D+W and D-V >= D-W at `location`.
Lemma2Report check_lemma2(const ScalarField& value, const ScalarField& welfare, const Eigen::VectorXd& location,
                          const Eigen::VectorXd& direction, const StepGrid& grid = {});

struct SamplePoint {
  Eigen::VectorXd location, direction;
};

enum class Verdict { holds, violated, excluded };
std::string to_string(Verdict v);

struct PropertyAPoint {
  SamplePoint sample;
  DerivativeEstimate value, welfare;
  Verdict verdict = Verdict::holds;
  double margin = 0.0;           ///< D+V - D-V
  double error = 0.0;            ///< error bar on the margin
  bool two_sided = false;        ///< |D+V - D-V| within error bars
};

struct PropertyAReport {
  std::vector<PropertyAPoint> points;
  std::size_t holds = 0, violated = 0, excluded = 0;
  bool pass() const { return violated == 0; }
};

/// Value field anchored at a sample location (e.g. V_i^C with report = location).
using FieldFamily = std::function<FieldPtr(const Eigen::VectorXd& location)>;

PropertyAReport check_property_a(const FieldFamily& value, const ScalarField& welfare,
                                 const std::vector<SamplePoint>& samples, const StepGrid& grid = {});

struct LipschitzEstimate {
  double estimate = 0.0;  ///< lower bound on the Lipschitz constant
  double standard_error = 0.0;
  std::size_t field = 0;
  std::size_t first = 0, second = 0;
  std::size_t pairs = 0, skipped = 0;
};

/// max |f(x) - f(y)| / |x - y| over sampled pairs and fields. Identical points
/// are skipped; ProbeError if no pair remains.
LipschitzEstimate estimate_lipschitz(const std::vector<FieldPtr>& fields, const std::vector<Eigen::VectorXd>& points);

// ---------------------------------------------------------------------------
// Example 1

struct Example1Params {
  double cost = 0.5;
  double gamma = 0.5;
  double delta = 0.9;
  std::size_t paths = 100000;
  std::size_t horizon = 0;  ///< 0: tail rule with C = 1
  std::uint64_t seed = 0;
  std::vector<double> grid;     ///< theta^0 values; empty: 0.1, 0.2, ..., 0.9
  std::vector<double> reports;  ///< bar theta^0 values; empty: c/2 and (1+c)/2
  void validate() const;
};

/// Single player on (0,1), actions {0,1}, v = theta * a, a* = 1{theta >= c},
/// wrapped AR(1) transition driven by omega = 2u - 1.
ContinuousWorld example1_world(double cost, double gamma, double delta);
/// The wrapped transition for one uniform draw.
double example1_step(double theta, double gamma, double u);

struct Example1Row {
  double theta = 0.0, value = 0.0, standard_error = 0.0, fitted = 0.0, residual = 0.0, residual_se = 0.0;
};

struct Example1Fit {
  double report = 0.0;
  std::size_t action = 0;
  double slope = 0.0, intercept = 0.0;
  double slope_se = 0.0;
  double max_abs_residual = 0.0;
  double worst_residual_ratio = 0.0;  ///< max |r_k| / SE(r_k)
  bool residual_ok = false;
  double pathwise = 0.0, pathwise_se = 0.0;
  double slope_gap = 0.0, slope_gap_se = 0.0;  ///< slope - pathwise, paired per path
  bool slope_ok = false;
  std::vector<Example1Row> rows;
  bool linear() const { return residual_ok && slope_ok; }
};

struct Example1Report {
  Example1Params params;
  std::size_t horizon = 0;
  double tail_bound = 0.0;
  std::vector<Example1Fit> fits;
  bool linear() const;
};

/// Absolute floor added to the 3-SE tests for exactly linear cells.
inline constexpr double kExample1Floor = 1e-12;

Example1Report example1_run(const Example1Params& params);
nlohmann::ordered_json to_json(const Example1Report& report);
/// report,theta0,value,se rows.
std::string example1_csv(const Example1Report& report);

// ---------------------------------------------------------------------------
// Discretization

struct GridSpec {
  std::size_t cells = 64;        ///< per player, 1-D types only
  std::size_t noise_points = 256;  ///< stratified quadrature nodes
  bool allow_empty = false;      ///< replace empty rows by uniform instead of failing
};

/// Cell midpoints become types; rows come from stratified noise quadrature
/// of the simulator at each midpoint. Players need 1-D types and 1-D noise.
Environment discretize_world(const ContinuousWorld& world, const GridSpec& grid);
std::vector<double> cell_midpoints(const ContinuousPlayer& player, std::size_t cells);

struct RefinementReport {
  std::size_t coarse_cells = 0, fine_cells = 0;
  double max_row_error = 0.0;     ///< max |row sum - 1| on the coarse grid
  bool monotone = true;           ///< W nondecreasing across coarse cells
  double worst_drop = 0.0;
  double cauchy_difference = 0.0;  ///< max |W_coarse - W_fine| at interior coarse midpoints
};

/// Single-player worlds only.
RefinementReport refinement_diagnostics(const ContinuousWorld& world, const GridSpec& coarse);

// ---------------------------------------------------------------------------
// Reports

nlohmann::ordered_json to_json(const DerivativeEstimate& d);
nlohmann::ordered_json to_json(const Lemma2Report& r);
nlohmann::ordered_json to_json(const PropertyAReport& r);
nlohmann::ordered_json to_json(const LipschitzEstimate& l);

}  // namespace dgm
