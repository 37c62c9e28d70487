#pragma once

#include "pesin/double_chart.hpp"

#include <random>
#include <vector>

namespace pesin::manifolds {

using charts::ChartContext;
using charts::EpsilonConfig;
using charts::PesinChart;
using coding::DoubleChart;
using geometry::PhasePoint;
using geometry::SurfaceMap;

inline constexpr int kGrid = 65;

enum class Kind { Stable, Unstable };

// Sampled graph over the s-axis (Stable: {(t, F(t))}) or the u-axis
// (Unstable: {(F(t), t)}) on |t| ≤ p. In units of p,
//   F(pτ)/p = a + bτ + e^{log_sigma} r(τ),   τ ∈ [-1, 1],
// so that the curvature part, typically of relative size p, survives when p
// itself is far below double range. r and dr = r' are O(1) samples on the
// uniform grid; between nodes they are interpolated by cubic Hermite.
struct AdmissibleManifold {
  Kind kind = Kind::Stable;
  // Domain half-width p and the owner's p^s∧p^u, as lattice exponents.
  long p_exp = 0;
  long pmin_exp = 0;
  double a = 0.0;
  double b = 0.0;
  double log_sigma = kNegInf;
  std::vector<double> r = std::vector<double>(kGrid, 0.0);
  std::vector<double> dr = std::vector<double>(kGrid, 0.0);

  // F(pτ)/p and F'(pτ).
  double value(double tau) const;
  double slope(double tau) const;
  // The remainder r and r' at τ.
  double remainder(double tau) const;
  double remainder_slope(double tau) const;
};

double grid_node(int i);

// F ≡ 0 on the domain of kind at v.
AdmissibleManifold zero_manifold(const EpsilonConfig& cfg, const DoubleChart& v, Kind kind);
// F ≡ c for an absolute constant c = e^{log_c}·sign.
AdmissibleManifold constant_manifold(const EpsilonConfig& cfg, const DoubleChart& v, Kind kind, double log_c,
                                     double sign = 1.0);
// Random graph with AM1–AM3 at half their bounds: offset, slope and a smooth
// remainder of Hölder size 0.1.
AdmissibleManifold random_manifold(const ChartContext& ctx, const DoubleChart& v, Kind kind, std::mt19937_64& rng);

struct AdmissibilityReport {
  double log_f0 = kNegInf;
  double log_slope0 = kNegInf;
  double log_slope_sup = kNegInf;
  double log_holder = kNegInf;
  // log(bound) − log(measured) for AM1, AM2, AM3.
  double margin1 = 0.0;
  double margin2 = 0.0;
  double margin3 = 0.0;

  bool ok() const { return margin1 >= 0.0 && margin2 >= 0.0 && margin3 >= 0.0; }
};

// Hölder constant of F' pairwise on the grid. Throws AdmissibilityViolated
// naming the first failed condition when strict.
AdmissibilityReport validate_admissible(const ChartContext& ctx, const AdmissibleManifold& m, bool strict = true);

// log sup|F₁ − F₂| and log sup|F₁' − F₂'| on the common domain (the smaller
// of the two), in absolute chart units.
struct ManifoldDistance {
  double log_c0 = kNegInf;
  double log_slope = kNegInf;

  double log_c1() const { return log_add(log_c0, log_slope); }
};
ManifoldDistance distance(const EpsilonConfig& cfg, const AdmissibleManifold& m1, const AdmissibleManifold& m2);
// Same, with the value part in units of the common domain, so scale-free.
double normalized_distance(const EpsilonConfig& cfg, const AdmissibleManifold& m1, const AdmissibleManifold& m2);

struct TransformReport {
  // 1 − max |τ| over the preimages of the output samples, τ in input units.
  double containment_margin = 0.0;
  // Largest |s(τ_j) − s_j| when the preimages are mapped forward again.
  double reprojection_residual = 0.0;
  AdmissibilityReport admissibility;
};

// F^u_{v,w}: V^u at v to V^u at w through f_{x,y}. Throws GraphFolded,
// DomainEscape, AdmissibilityViolated.
AdmissibleManifold graph_transform_u(const SurfaceMap& map, const ChartContext& ctx, const DoubleChart& v,
                                     const DoubleChart& w, const AdmissibleManifold& in,
                                     TransformReport* report = nullptr);
// F^s_{v,w}: V^s at w to V^s at v through f_{x,y}^{-1}.
AdmissibleManifold graph_transform_s(const SurfaceMap& map, const ChartContext& ctx, const DoubleChart& v,
                                     const DoubleChart& w, const AdmissibleManifold& in,
                                     TransformReport* report = nullptr);

struct Contraction {
  double log_c0_in = kNegInf;
  double log_c0_out = kNegInf;
  double log_c1_in = kNegInf;
  double log_c1_out = kNegInf;
  // d_{C⁰} ratio, and d_{C¹}(out) / (d_{C¹}(in) + d_{C⁰}(in)^{β/3}).
  double c0 = 0.0;
  double c1 = 0.0;
};

// Both inputs at the source end of the edge (v for Unstable, w for Stable).
// Throws ContractionViolated when c₀ or c₁ exceeds e^{-χ/2}.
Contraction contraction_measurement(const SurfaceMap& map, const ChartContext& ctx, const DoubleChart& v,
                                    const DoubleChart& w, const AdmissibleManifold& m1, const AdmissibleManifold& m2,
                                    bool strict = true);

struct ManifoldOptions {
  int max_iterations = 200;
  double tolerance = 1e-10;
  double seed_agreement = 1e-8;
  std::uint64_t seed = 1;
  bool strict = true;
};

struct ManifoldResult {
  AdmissibleManifold manifold;
  // Iterations used: V at the base from a seed this many vertices away.
  int depth = 0;
  // Normalized d_{C¹} between depth and depth − 1.
  double successive = 0.0;
  // Normalized d_{C¹} between the limits from F ≡ 0 and a random seed.
  double seed_distance = 0.0;
  // Normalized d_{C¹} of the two seed sequences, one entry per step.
  std::vector<double> log_seed_gap;
  // Least-squares slope of log_seed_gap per step.
  double rate = 0.0;
  bool converged = false;
};

// path[0] is the base; Stable uses path[0..], Unstable reads the path as
// v_0, v_{-1}, ... (use the reversed negative half). Throws NotConverged when
// strict and neither cutoff is reached.
ManifoldResult stable_manifold(const SurfaceMap& map, const ChartContext& ctx, const std::vector<DoubleChart>& path,
                               const ManifoldOptions& opts = {});
ManifoldResult unstable_manifold(const SurfaceMap& map, const ChartContext& ctx,
                                 const std::vector<DoubleChart>& backward_path, const ManifoldOptions& opts = {});

// One sweep with seed F ≡ 0 at the far end; V at every vertex of the path.
std::vector<AdmissibleManifold> stable_sweep(const SurfaceMap& map, const ChartContext& ctx,
                                             const std::vector<DoubleChart>& path);
std::vector<AdmissibleManifold> unstable_sweep(const SurfaceMap& map, const ChartContext& ctx,
                                               const std::vector<DoubleChart>& path);

// A point w of the chart of a double chart, w = e^{log_scale}·u.
struct ChartPoint {
  double log_scale = 0.0;
  Vec2 u = Vec2::Zero();

  double log_sup() const { return log_scale + safe_log(u.cwiseAbs().maxCoeff()); }
};

struct Intersection {
  // In units of p^s∧p^u.
  ChartPoint w;
  int iterations = 0;
  // Largest ratio of successive fixed-point residuals.
  double residual_ratio = 0.0;
  // log ‖w‖_∞ − log(10^{-2}(p^s∧p^u)).
  double bound_margin = 0.0;
  // log|log(sin∠/sin α)| and log|cos∠ − cos α| with their bounds.
  double log_sin_ratio = kNegInf;
  double log_cos_diff = kNegInf;
  double log_angle_bound = 0.0;
};

// V^s ∩ V^u at the same double chart. Throws NoIntersection,
// MultipleIntersections, BoundViolated.
Intersection intersect(const ChartContext& ctx, const DoubleChart& v, const AdmissibleManifold& vs,
                       const AdmissibleManifold& vu, bool strict = true);
// Grid scan of t − G(F(t)) for sign changes, the oracle for intersect. Returns
// every bracketed root, in units of p^s∧p^u.
std::vector<double> intersect_scan(const EpsilonConfig& cfg, const AdmissibleManifold& vs,
                                   const AdmissibleManifold& vu, int samples);

PhasePoint chart_point_apply(const SurfaceMap& map, const PesinChart& chart, const ChartPoint& w);

struct ShadowResult {
  PhasePoint x;
  // Chart coordinates of π(σ^n v̄) at every window index, n = -window..window.
  std::vector<ChartPoint> points;
  std::vector<Intersection> intersections;
  // log ‖w_n‖_∞ − log(p^s_n∧p^u_n), and the same against 10Q(x_n).
  std::vector<double> log_window_ratio;
  std::vector<double> log_q_ratio;
  // Equivariance f_{x_n,x_{n+1}}(w_n) vs w_{n+1}, in units of p^s∧p^u at n + 1.
  std::vector<double> step_error;
  // Physical |f(Ψ_{x_n}(w_n)) − Ψ_{x_{n+1}}(w_{n+1})|.
  std::vector<double> physical_error;
  // V^s and V^u at every window index.
  std::vector<AdmissibleManifold> stable;
  std::vector<AdmissibleManifold> unstable;
  long window = 0;
};

// path covers indices -(window + depth)..(window + depth) with anchor at
// path[window + depth]. Throws ShadowEscape with the first bad index.
ShadowResult shadow(const SurfaceMap& map, const ChartContext& ctx, const std::vector<DoubleChart>& path, long window,
                    long depth, bool strict = true);

struct HolderFit {
  std::vector<long> depths;
  std::vector<double> log_distance;
  double log_K = kNegInf;
  double theta = 0.0;
};

// pairs[i] are two paths that agree on their first depths[i] vertices. V^s at
// their common base from random seeds at the far ends; fits d ≤ Kθ^N.
HolderFit holder_dependence(const SurfaceMap& map, const ChartContext& ctx,
                            const std::vector<std::pair<std::vector<DoubleChart>, std::vector<DoubleChart>>>& pairs,
                            const std::vector<long>& depths);

}  // namespace pesin::manifolds
