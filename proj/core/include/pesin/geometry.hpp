#pragma once

#include "pesin/common.hpp"

#include <array>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace pesin::geometry {

// (component, arclength, reflection angle from the inward normal). For the
// linear fixture the two coordinates are the plane coordinates (x, y).
struct PhasePoint {
  int component = 0;
  double r = 0.0;
  double theta = 0.0;

  bool operator==(const PhasePoint&) const = default;
};

struct Segment {
  Vec2 a;
  Vec2 b;
};

// Points c + R(cos ψ, sin ψ) with ψ = start + sign(sweep)·r/R. A positive sweep
// runs counterclockwise around the center.
struct Arc {
  Vec2 center;
  double radius = 1.0;
  double start_angle = 0.0;
  double sweep = 2.0 * kPi;
  bool full_disc_inside = false;
};

// One smooth boundary piece. Every loop is oriented so the table lies to the
// left of the tangent, hence the inward normal is the tangent turned by +90°.
struct Component {
  std::variant<Segment, Arc> piece;
  int loop = 0;

  double length() const;
  Vec2 position(double r) const;
  Vec2 tangent(double r) const;
  Vec2 inward_normal(double r) const;
  // Positive on dispersing arcs, negative on focusing arcs, zero on segments.
  double curvature() const;
  bool closed() const;
  Vec2 start_point() const { return position(0.0); }
  Vec2 end_point() const;
};

enum class TableKind { Circle, Stadium, Sinai, Flower, LinearFixture, Custom };

const char* to_string(TableKind kind);
TableKind table_kind_from_string(const std::string& name);

struct TableSpec {
  TableKind kind = TableKind::Circle;
  std::map<std::string, double> params;
  std::vector<Component> components;
  // Junction points between pieces; all of them belong to D.
  std::vector<Vec2> corners;
  // Global factor c: the metric on each component chart is c²(dr² + dθ²).
  double metric_scale = 0.1;
};

TableSpec circle_table(double radius = 1.0);
TableSpec stadium_table(double flat_length = 2.0, double radius = 1.0);
TableSpec sinai_table(double half_width = 1.0, double obstacle_radius = 0.4);
TableSpec flower_table(int petals = 4, double center_distance = 1.0, double radius = 0.8);
TableSpec linear_fixture_spec(double lambda_s = std::exp(-1.0), double lambda_u = std::exp(1.0),
                              double half_width = 0.35);

// Recomputes corners, checks loop closure (1e-12) and, for flagged arcs, that
// the whole disc sits inside the table. Throws InvalidInput.
void finalize_table(TableSpec& spec);
// Largest metric scale keeping diam(M) < 1 with a 10% margin.
double default_metric_scale(const TableSpec& spec);

TableSpec parse_table(const std::string& text);
TableSpec load_table(const std::string& path);
std::string format_table(const TableSpec& spec);

// The phase space and dynamics seen by everything downstream. Coordinates on a
// component chart are (r, θ); metric coordinates are c·(r, θ), in which the
// metric is Euclidean, exp_x(v) = x + v and parallel transport is the identity.
// Derivatives are the same matrix in both coordinate systems.
class SurfaceMap {
 public:
  virtual ~SurfaceMap() = default;

  virtual std::string name() const = 0;
  virtual PhasePoint forward(const PhasePoint& x) const = 0;
  virtual PhasePoint backward(const PhasePoint& x) const = 0;
  virtual Mat2 derivative(const PhasePoint& x) const = 0;
  virtual Mat2 inverse_derivative(const PhasePoint& x) const = 0;
  virtual double dist_to_discontinuity(const PhasePoint& x) const = 0;
  virtual double metric_scale() const = 0;
  virtual int component_count() const = 0;
  virtual double component_length(int component) const = 0;
  virtual bool component_closed(int component) const = 0;
  // Uniform draw from the invariant (Liouville) measure.
  virtual PhasePoint sample_invariant(std::mt19937_64& rng) const = 0;

  // ρ(x) = d({f^{-1}x, x, fx}, D).
  double rho(const PhasePoint& x) const;
  Vec2 to_metric(const PhasePoint& x) const;
  // Metric-coordinate displacement from `from` to `to`, wrapping closed
  // components; NaN when the points lie on different components.
  Vec2 displacement(const PhasePoint& from, const PhasePoint& to) const;
  double distance(const PhasePoint& a, const PhasePoint& b) const;
  // exp_x(v) for a metric-coordinate vector v.
  PhasePoint translate(const PhasePoint& x, const Vec2& v) const;
  PhasePoint wrap(PhasePoint x) const;

  // Second derivatives in metric coordinates: H[k](i,j) = ∂²f_k/∂X_i∂X_j,
  // by central differences of the analytic derivative.
  std::array<Mat2, 2> hessian(const PhasePoint& x, bool inverse = false) const;
};

class BilliardTable final : public SurfaceMap {
 public:
  explicit BilliardTable(TableSpec spec);

  const TableSpec& spec() const { return spec_; }

  std::string name() const override;
  PhasePoint forward(const PhasePoint& x) const override;
  PhasePoint backward(const PhasePoint& x) const override;
  Mat2 derivative(const PhasePoint& x) const override;
  Mat2 inverse_derivative(const PhasePoint& x) const override;
  double dist_to_discontinuity(const PhasePoint& x) const override;
  double metric_scale() const override { return spec_.metric_scale; }
  int component_count() const override { return static_cast<int>(spec_.components.size()); }
  double component_length(int component) const override;
  bool component_closed(int component) const override;
  PhasePoint sample_invariant(std::mt19937_64& rng) const override;

  struct Flight {
    PhasePoint next;
    double tau = 0.0;
  };
  Flight flight(const PhasePoint& x) const;

  // Grazing tolerance on |cos θ|.
  static constexpr double kGrazing = 1e-8;

 private:
  // Angle of direction `dir` measured from the inward normal at r.
  double angle_at(int component, double r, const Vec2& dir) const;
  double distance_to_singular_curves(const PhasePoint& x) const;

  TableSpec spec_;
  double total_length_ = 0.0;
};

// (x, y) ↦ (λ_s x, λ_u y) on the square of the given half-width; D is the
// boundary of the square.
class LinearFixture final : public SurfaceMap {
 public:
  LinearFixture(double lambda_s, double lambda_u, double half_width, double metric_scale = 1.0);

  double lambda_s() const { return lambda_s_; }
  double lambda_u() const { return lambda_u_; }
  double half_width() const { return half_width_; }

  std::string name() const override { return "linear-fixture"; }
  PhasePoint forward(const PhasePoint& x) const override;
  PhasePoint backward(const PhasePoint& x) const override;
  Mat2 derivative(const PhasePoint& x) const override;
  Mat2 inverse_derivative(const PhasePoint& x) const override;
  double dist_to_discontinuity(const PhasePoint& x) const override;
  double metric_scale() const override { return scale_; }
  int component_count() const override { return 1; }
  double component_length(int) const override { return 2.0 * half_width_; }
  bool component_closed(int) const override { return false; }
  PhasePoint sample_invariant(std::mt19937_64& rng) const override;

 private:
  double lambda_s_;
  double lambda_u_;
  double half_width_;
  double scale_;
};

std::unique_ptr<SurfaceMap> make_map(const TableSpec& spec);

struct RegularityConstants {
  double a = 1.5;
  double beta = 0.9;
  double K = 1.0;

  void validate() const;
  // 𝔯(x) as a function of d(x, D): slightly above d^a.
  double r_map(double dist) const { return 1.001 * std::pow(dist, a); }
};

struct AssumptionMargin {
  std::string id;
  // log(bound) − log(measured); negative means violated.
  double worst_margin = std::numeric_limits<double>::infinity();
  long witness = -1;
  long checked = 0;
};

struct AssumptionReport {
  std::vector<AssumptionMargin> margins;
  bool ok() const;
  const AssumptionMargin* worst() const;
};

// Checks the derivative bound ‖df_y^{±1}‖ ≤ d(x,D)^{-a} on D_x, the Hölder
// bound with constant K on pairs in D_x, and the conorm bound
// m(df_x^{±1}) ≥ ρ(x)^a, over the sample. Throws
// AssumptionViolated on the first violated assumption when `strict`.
AssumptionReport verify_assumptions(const SurfaceMap& map, const RegularityConstants& consts,
                                    const std::vector<PhasePoint>& sample, std::uint64_t seed,
                                    bool strict = true);

struct PeriodicOrbit {
  std::vector<PhasePoint> points;
  // Residual |f^p(x_0) − x_0| in metric units after refinement.
  double residual = 0.0;
  // log|μ_u| / p for the monodromy eigenvalue outside the unit circle.
  double exponent = 0.0;
  double min_rho = 0.0;
};

struct PeriodicSearch {
  int min_period = 2;
  int max_period = 10;
  int target_orbits = 50;
  long max_steps = 400000;
  double min_exponent = 0.0;
  double min_rho = 1e-3;
  double return_radius = 0.05;
};

// Near-returns of long Liouville orbits refined by Newton's method on
// f^p(x) − x; orbits are deduplicated up to cyclic shift. Deterministic for a
// fixed seed.
std::vector<PeriodicOrbit> find_periodic_orbits(const SurfaceMap& map, const PeriodicSearch& opts,
                                                std::uint64_t seed);

}  // namespace pesin::geometry
