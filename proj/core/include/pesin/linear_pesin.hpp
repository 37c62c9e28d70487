#pragma once

#include "pesin/geometry.hpp"

#include <optional>
#include <span>
#include <vector>

namespace pesin::linear {

using geometry::PhasePoint;
using geometry::SurfaceMap;

// Points f^n(x) for n in [-back, fwd], with df at each point and ρ.
struct OrbitSegment {
  long back = 0;
  long fwd = 0;
  std::vector<PhasePoint> points;
  std::vector<Mat2> df;
  std::vector<double> rho;
  // d(f^n x, D), one entry per point.
  std::vector<double> dist;

  std::size_t size() const { return points.size(); }
  std::size_t index(long n) const { return static_cast<std::size_t>(n + back); }
  const PhasePoint& at(long n) const { return points[index(n)]; }
  const PhasePoint& base() const { return at(0); }
  bool contains(long n) const { return n >= -back && n <= fwd; }
};

// Minimum metric distance to D for a point to be accepted on a segment.
inline constexpr double kOrbitTolerance = 1e-10;

// Throws OrbitHitsDiscontinuity with the offending n.
OrbitSegment orbit_segment(const SurfaceMap& map, const PhasePoint& x, long back, long fwd);
// Segment that cycles through stored periodic points, so that f^p(x) is the
// stored x exactly rather than a recomputed approximation of it.
OrbitSegment periodic_segment(const SurfaceMap& map, const std::vector<PhasePoint>& cycle, long back, long fwd);

struct SplittingOptions {
  long burn_in = 200;
  // Largest accepted sine of the angle between two independent pushes.
  double tolerance = 1e-8;
};

struct Splitting {
  std::vector<Vec2> e_s;
  std::vector<Vec2> e_u;
  // Both directions are converged on [valid_from, valid_to].
  long valid_from = 0;
  long valid_to = 0;
  double convergence = 0.0;

  bool valid(long n) const { return n >= valid_from && n <= valid_to; }
};

// e_u pushes a generic vector forward from the past end, e_s pulls one back
// from the future end. Throws SplittingNotConverged.
Splitting oseledets_splitting(const OrbitSegment& seg, const SplittingOptions& opts = {});

// sin of the angle between span(df e_s(x_n)) and span(e_s(x_{n+1})), worst
// over the valid range, and likewise for e_u.
double equivariance_residual(const OrbitSegment& seg, const Splitting& split);

struct LyapunovEstimate {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  // QR cocycle over the whole segment.
  double qr1 = 0.0;
  double qr2 = 0.0;
  double radius = 0.0;
  bool agree = false;
};

LyapunovEstimate lyapunov_exponents(const OrbitSegment& seg, long burn_in = 200);

struct SUParameters {
  std::vector<double> s;
  std::vector<double> u;
  // Last included series term relative to the sum; 0 once it underflows.
  std::vector<double> s_tail;
  std::vector<double> u_tail;
  // Number of series terms summed at each point.
  std::vector<long> s_terms;
  std::vector<long> u_terms;
  double rel_tol = 1e-14;

  bool resolved(std::size_t i) const { return s_tail[i] <= rel_tol && u_tail[i] <= rel_tol; }
};

struct SeriesOptions {
  double rel_tol = 1e-14;
  long max_terms = 10000;
  double sum_cap = 1e200;
};

// s(x)² = 2Σ e^{2nχ}‖df^n e_s‖² through s(x)² = 2 + e^{2χ}‖df e_s‖²s(fx)²
// run backwards from the future end, u(x) the same way from the past end.
// Throws SeriesDiverging.
SUParameters s_u_parameters(const OrbitSegment& seg, const Splitting& split, double chi, const SeriesOptions& opts = {});

// s from the sequence log‖df^n e_s‖, n = 1, 2, ..., summed in log space.
double s_from_log_norms(std::span<const double> log_norms, double chi);

struct HyperbolicFrame {
  Vec2 e_s = Vec2::UnitX();
  Vec2 e_u = Vec2::UnitY();
  double alpha = kHalfPi;
  double s = std::sqrt(2.0);
  double u = std::sqrt(2.0);
  double chi = 0.0;
  Mat2 C = Mat2::Identity() / std::sqrt(2.0);

  Mat2 C_inv() const { return C.inverse(); }
  double c_inv_frob() const { return std::hypot(s, u) / std::abs(std::sin(alpha)); }
  double log_c_inv_frob() const { return std::log(c_inv_frob()); }
};

// Throws DegenerateAngle when |sin α| < 1e-12, InvalidInput when s or u < √2.
HyperbolicFrame build_frame(const Vec2& e_s, const Vec2& e_u, double s, double u, double chi);

// Frames on the points where the splitting is valid and s, u are resolved.
struct FrameSequence {
  long first = 0;
  std::vector<HyperbolicFrame> frames;

  long last() const { return first + static_cast<long>(frames.size()) - 1; }
  bool contains(long n) const { return n >= first && n <= last(); }
  const HyperbolicFrame& at(long n) const { return frames[static_cast<std::size_t>(n - first)]; }
};

FrameSequence frames_along(const OrbitSegment& seg, const Splitting& split, const SUParameters& su, double chi);

// C_χ(fx)^{-1} df_x C_χ(x). Throws NotDiagonal or NotHyperbolic.
Mat2 reduced_cocycle(const HyperbolicFrame& x, const HyperbolicFrame& fx, const Mat2& df);

struct GrowthReport {
  // Smallest log(bound) − log(measured).
  double worst_margin = std::numeric_limits<double>::infinity();
  long witness = 0;
  long checked = 0;
};

// ‖C(f^{-1}x)^{-1}‖ ≤ 2ρ(x)^{-2a}(1 + e^χ ρ(x)^{-a})‖C(x)^{-1}‖ on every
// interior point of the frame sequence. Throws InequalityViolated.
GrowthReport c_inverse_growth_check(const FrameSequence& frames, const OrbitSegment& seg, double a);

struct NuhOptions {
  // Tail of the window used for limit proxies, as a fraction of its length.
  double tail_fraction = 0.5;
  double reg_threshold = 0.01;
  double slope_threshold = 0.01;
};

struct NuhReport {
  // max |log ρ(f^n x)| / |n| over the tail.
  double reg_ratio = 0.0;
  bool reg_ok = false;
  // min over n ≠ 0 of ‖C(f^n x) − C(x)‖_Frob, with its n.
  double best_return = std::numeric_limits<double>::infinity();
  long best_return_index = 0;
  // Largest |least-squares slope| of log‖C(f^n x)^{±1}‖ against |n|.
  double c_slope = 0.0;
  bool slopes_ok = false;
  // max over the tail of log q^s(f^n x) forward and log q^u(f^{-n} x)
  // backward, when chart sizes were supplied.
  std::optional<double> log_qs_limsup;
  std::optional<double> log_qu_limsup;
};

// Base point is n = 0. log_qs / log_qu, if given, are indexed like the frames.
NuhReport nuh_diagnostics(const OrbitSegment& seg, const FrameSequence& frames, const NuhOptions& opts = {},
                          std::span<const double> log_qs = {}, std::span<const double> log_qu = {});

struct AdaptednessEstimate {
  double mean_log_dist = 0.0;
  double stderr_log_dist = 0.0;
  double mean_log_rho = 0.0;
  // Running means of log d at doubling sample counts.
  std::vector<std::pair<long, double>> running;
  // |last − previous| of the running mean.
  double stabilization = 0.0;
  long skipped = 0;
};

// Monte Carlo estimate of ∫ log d(x, D) dμ and ∫ log ρ dμ over Liouville draws.
AdaptednessEstimate adaptedness_estimate(const SurfaceMap& map, long samples, std::uint64_t seed);

}  // namespace pesin::linear
