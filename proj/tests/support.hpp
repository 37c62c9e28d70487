#pragma once

#include "pesin/double_chart.hpp"

#include <cmath>

namespace pesin::testing {

inline constexpr double kChi = 0.5;

inline geometry::LinearFixture fixture() { return geometry::LinearFixture(std::exp(-1.0), std::exp(1.0), 0.35); }

// s(x) = u(x) at the fixture's fixed point, from the geometric sum.
inline double fixture_s() { return std::sqrt(2.0 / (1.0 - std::exp(2.0 * (kChi - 1.0)))); }

inline linear::HyperbolicFrame fixture_frame() {
  return linear::build_frame(Vec2(1, 0), Vec2(0, 1), fixture_s(), fixture_s(), kChi);
}

inline charts::ChartContext fixture_context(double eps = 0.01) {
  return charts::ChartContext::make(eps, geometry::RegularityConstants{}, kChi);
}

// Ψ at the fixed point with p^s = p^u = δ_ε Q shifted by the given lattice steps.
inline coding::DoubleChart fixed_point_chart(const geometry::SurfaceMap& map, const charts::ChartContext& ctx,
                                             long ds = 0, long du = 0) {
  const geometry::PhasePoint x{0, 0.0, 0.0};
  const double d = map.dist_to_discontinuity(x);
  const auto frame = fixture_frame();
  coding::DoubleChart v;
  v.center = 0;
  v.chart = charts::make_chart(ctx, geometry::RegularityConstants{}, x, frame, frame, d, map.rho(x));
  v.next = v.chart;
  v.prev = v.chart;
  v.ps_exp = v.chart.q_exp + ctx.eps.delta_exponent() + ds;
  v.pu_exp = v.chart.q_exp + ctx.eps.delta_exponent() + du;
  v.bin.j = coding::size_scale(ctx.eps, v.pmin_exp());
  return v;
}

}  // namespace pesin::testing
