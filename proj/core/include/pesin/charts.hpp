#pragma once

#include "pesin/linear_pesin.hpp"

#include <array>
#include <span>
#include <vector>

namespace pesin::charts {

using geometry::PhasePoint;
using geometry::SurfaceMap;
using linear::HyperbolicFrame;

// Sizes live on the lattice I_ε = {e^{-εk/3} : k ≥ 0} and are stored as the
// integer k. Multiplying by e^{±ε} shifts k by ∓3, δ_ε shifts it by 3n.
struct EpsilonConfig {
  double eps = 0.01;
  // δ_ε = e^{-εn}, the unique n with e^{-εn} < ε ≤ e^{-ε(n-1)}.
  long delta_n = 0;

  static EpsilonConfig make(double eps);

  long delta_exponent() const { return 3 * delta_n; }
  double log_value(long k) const { return -eps * static_cast<double>(k) / 3.0; }
  double value(long k) const { return bounded_exp(log_value(k)); }
  double log_delta() const { return -eps * static_cast<double>(delta_n); }
};

// Largest lattice element ≤ value, as its exponent. Values ≥ 1 give 0.
long i_eps_floor(const EpsilonConfig& cfg, double value);
long i_eps_floor_log(const EpsilonConfig& cfg, double log_value);

// Everything the chart constructions need besides the map.
struct ChartContext {
  EpsilonConfig eps = EpsilonConfig::make(0.01);
  double beta = 0.9;
  double a = 1.5;
  double chi = 0.5;

  static ChartContext make(double eps, const geometry::RegularityConstants& consts, double chi);
};

// log Q̃_ε(x) from the frames at x and f(x) and ρ(x).
double log_q_tilde(const ChartContext& ctx, const HyperbolicFrame& x, const HyperbolicFrame& fx, double rho);
inline double q_tilde(const ChartContext& ctx, const HyperbolicFrame& x, const HyperbolicFrame& fx, double rho) {
  return bounded_exp(log_q_tilde(ctx, x, fx, rho));
}
long compute_Q(const ChartContext& ctx, const HyperbolicFrame& x, const HyperbolicFrame& fx, double rho);

struct PesinChart {
  PhasePoint x;
  HyperbolicFrame frame;
  long q_exp = 0;
  // Domain half-width η ≤ Q, as a lattice exponent ≥ q_exp.
  long eta_exp = 0;
  double dist = 1.0;
  double rho = 1.0;
  // log 𝔯(x), the half-width on which Ψ_x itself is defined.
  double log_r = 0.0;

  double log_Q(const EpsilonConfig& cfg) const { return cfg.log_value(q_exp); }
  double log_eta(const EpsilonConfig& cfg) const { return cfg.log_value(eta_exp); }
};

// Q from the frames; η = Q. Throws BoundViolated if a chart bound fails.
PesinChart make_chart(const ChartContext& ctx, const geometry::RegularityConstants& consts, const PhasePoint& x,
                      const HyperbolicFrame& frame, const HyperbolicFrame& frame_fx, double dist, double rho);
// Throws InvalidInput when η > Q.
PesinChart with_eta(const PesinChart& chart, long eta_exp);

// Largest log-margin by which the chart violates Q ≤ ε^{3/β},
// ‖C^{-1}‖Q^{β/24} ≤ ε^{1/8} or ρ^{-a}Q^{β/72} < ε^{1/24}; ≤ 0 when all hold.
double chart_bound_excess(const ChartContext& ctx, const PesinChart& chart);

// Charts at every n with frames at n and n + 1.
std::vector<PesinChart> charts_along(const ChartContext& ctx, const geometry::RegularityConstants& consts,
                                     const linear::OrbitSegment& seg, const linear::FrameSequence& frames);

struct GreedyResult {
  std::vector<long> q;
  std::vector<long> qs;
  std::vector<long> qu;
  // Farther than window/2 from both ends of the sequence.
  std::vector<bool> converged;
};

// q^s by the backward recursion from δQ at the right end, q^u forward from δQ
// at the left end, q = q^s ∧ q^u. All arguments and results are exponents.
// Throws InequalityViolated if q(fx)/q(x) leaves e^{±ε} or q ≥ εQ.
GreedyResult greedy_q(const EpsilonConfig& cfg, std::span<const long> q_exps, long window);

// Least-squares slope of log Q(f^n x) against |n| over |n| ≥ window/2, the
// worse of the two sides. base is the index of x.
double temperedness_slope(const EpsilonConfig& cfg, std::span<const long> q_exps, std::size_t base, long window);

// Ψ_x(v) = x + C v in metric coordinates. Throws OutOfDomain when ‖v‖_∞ > η.
PhasePoint chart_apply(const SurfaceMap& map, const EpsilonConfig& cfg, const PesinChart& chart, const Vec2& v);
// Throws OutOfDomain when y is on another component or outside R[η].
Vec2 chart_invert(const SurfaceMap& map, const EpsilonConfig& cfg, const PesinChart& chart, const PhasePoint& y);

// Second-order expansion of Ψ_target^{-1} ∘ g ∘ Ψ_source at 0, g = f or f^{-1}:
// offset + linear·v + ½(vᵀ quad[0] v, vᵀ quad[1] v), in chart coordinates.
// The image chart sits at g(source); the part of the map between the source
// and image charts carries the exact diagonal of the reduced cocycle.
struct ChartJet {
  Vec2 offset = Vec2::Zero();
  Mat2 linear = Mat2::Identity();
  std::array<Mat2, 2> quad{Mat2::Zero(), Mat2::Zero()};

  // F(e^{log_in}·u) / e^{log_out} without forming the tiny scales.
  Vec2 eval_scaled(const Vec2& u, double log_in, double log_out) const;
  // dF at e^{log_in}·u.
  Mat2 gradient_scaled(const Vec2& u, double log_in) const;
};

enum class Direction { Forward, Backward };

ChartJet chart_jet(const SurfaceMap& map, const PesinChart& source, const PesinChart& image, const PesinChart& target,
                   Direction dir);

struct ChartMapDecomposition {
  double A = 0.0;
  double B = 0.0;
  // d(f_x)_0 as the plain matrix product, before reading off A and B.
  Mat2 d0 = Mat2::Zero();
  int grid = 33;
  // Half-width L of the sampled domain R[L], L = 10Q.
  double log_half_width = 0.0;
  // Sampled through the second-order jet rather than the map.
  bool normalized = false;
  double gamma = 0.0;
  // h(L u) / L at the grid points, row-major, u ∈ [-1, 1]².
  std::vector<Vec2> h_scaled;
  double log_h_sup = kNegInf;
  double log_grad_sup = kNegInf;
  // Hölder-γ constant of ∇h, max over grid pairs at dyadic separations. A
  // lower bound for the analytic constant.
  double log_holder = kNegInf;
  double log_h0 = kNegInf;
  double log_grad0 = kNegInf;
  // log(‖h‖_0 + ‖∇h‖_0 + Hol_γ(∇h)).
  double log_norm = kNegInf;
  double log_df_sup = 0.0;
  // log sup ‖g(v)‖_∞ over the domain, g the chart-coordinate map.
  double log_image_sup = kNegInf;
};

struct DecompositionOptions {
  int grid = 33;
  // Sample the map directly once L exceeds this; below it the jet is used.
  double direct_threshold = 1e-7;
  // Override of the domain half-width L (log), for testing.
  std::optional<double> log_half_width;
  bool check_bounds = true;
};

// f_x = Ψ_{fx}^{-1} ∘ f ∘ Ψ_x on R[10Q(x)]. Throws DomainEscape,
// BoundViolated.
ChartMapDecomposition chart_map_fx(const SurfaceMap& map, const ChartContext& ctx, const PesinChart& x,
                                   const PesinChart& fx, const DecompositionOptions& opts = {});

// Forward: f_{x,y} = Ψ_y^{-1} ∘ f ∘ Ψ_x with image = chart at f(x), requires
// Ψ_{f(x)} ≈ Ψ_y. Backward: f^{-1}_{x,y} = Ψ_x^{-1} ∘ f^{-1} ∘ Ψ_y with
// source = y, image = chart at f^{-1}(y), target = x, requires Ψ_x ≈
// Ψ_{f^{-1}(y)}. Throws OverlapMissing, DomainEscape, BoundViolated.
ChartMapDecomposition chart_map_fxy(const SurfaceMap& map, const ChartContext& ctx, const PesinChart& source,
                                    const PesinChart& image, const PesinChart& target, Direction dir,
                                    const DecompositionOptions& opts = {});

// log(d(x₁,x₂) + ‖C(x₁) − C(x₂)‖); -inf for identical data, +inf across components.
double log_chart_distance(const SurfaceMap& map, const PesinChart& c1, const PesinChart& c2);
bool overlap_test(const SurfaceMap& map, const EpsilonConfig& cfg, const PesinChart& c1, const PesinChart& c2);

struct ChangeOfCoordinates {
  // Ψ₂^{-1} ∘ Ψ₁(v) = offset + linear·v.
  Vec2 offset = Vec2::Zero();
  Mat2 linear = Mat2::Identity();
  double log_domain = 0.0;
  // log ‖Ψ₂^{-1}Ψ₁ − Id‖_{1+β/2} on R[d(x₁,D)^{2a}], and its bound ε(η₁η₂)².
  double log_norm = kNegInf;
  double log_bound = 0.0;
  // log |log ratio| for s, u and |sin α|, against 3 log(η₁η₂).
  double log_s_ratio = kNegInf;
  double log_u_ratio = kNegInf;
  double log_alpha_ratio = kNegInf;
  bool inclusion = true;

  Vec2 apply(const Vec2& v) const { return offset + linear * v; }
};

// Throws OverlapMissing without overlap and BoundViolated when a conclusion
// of the overlap proposition fails.
ChangeOfCoordinates change_of_coordinates(const SurfaceMap& map, const ChartContext& ctx, const PesinChart& c1,
                                          const PesinChart& c2);

// Per-point record for orbit dumps.
struct ChartRecord {
  long n = 0;
  long q_exp = 0;
  long q_eps_exp = 0;
  long qs_exp = 0;
  long qu_exp = 0;
  double log_Q = 0.0;
  double log_q = 0.0;
  double log_qs = 0.0;
  double log_qu = 0.0;
  bool converged = false;
};

std::vector<ChartRecord> chart_records(const EpsilonConfig& cfg, long first_n, std::span<const long> q_exps,
                                       const GreedyResult& greedy);

}  // namespace pesin::charts
