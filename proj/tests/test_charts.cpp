#include "pesin/charts.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace pesin;
using namespace pesin::geometry;
using namespace pesin::linear;
using namespace pesin::charts;

namespace {

const double kChi = 0.5;

LinearFixture fixture() { return LinearFixture(std::exp(-1.0), std::exp(1.0), 0.35); }

double fixture_s() { return std::sqrt(2.0 / (1.0 - std::exp(2.0 * (kChi - 1.0)))); }

HyperbolicFrame fixture_frame() { return build_frame(Vec2(1, 0), Vec2(0, 1), fixture_s(), fixture_s(), kChi); }

// A chart with a hand-picked size, for checks that need η far above the
// sizes Q_ε produces.
PesinChart sized_chart(const PhasePoint& x, const HyperbolicFrame& frame, long k, double dist = 0.35) {
  PesinChart c;
  c.x = x;
  c.frame = frame;
  c.q_exp = k;
  c.eta_exp = k;
  c.dist = dist;
  c.rho = dist;
  c.log_r = std::log(RegularityConstants{}.r_map(dist));
  return c;
}

struct OrbitCharts {
  OrbitSegment seg;
  FrameSequence frames;
  std::vector<PesinChart> charts;

  const PesinChart& at(long n) const { return charts[static_cast<std::size_t>(n - frames.first)]; }
};

OrbitCharts orbit_charts(const SurfaceMap& map, const ChartContext& ctx, std::uint64_t seed, long half) {
  std::mt19937_64 rng(seed);
  for (;;) {
    try {
      OrbitCharts oc;
      oc.seg = orbit_segment(map, map.sample_invariant(rng), half, half);
      const auto sp = oseledets_splitting(oc.seg);
      oc.frames = frames_along(oc.seg, sp, s_u_parameters(oc.seg, sp, ctx.chi), ctx.chi);
      oc.charts = charts_along(ctx, RegularityConstants{}, oc.seg, oc.frames);
      return oc;
    } catch (const Error&) {
    }
  }
}

// q^s, q^u, q straight from the min definitions over the window.
void brute_force_q(const EpsilonConfig& cfg, const std::vector<long>& Q, std::vector<long>& qs, std::vector<long>& qu,
                   std::vector<long>& q) {
  const long n = static_cast<long>(Q.size());
  const long d = cfg.delta_exponent();
  qs.assign(Q.size(), 0);
  qu.assign(Q.size(), 0);
  q.assign(Q.size(), 0);
  for (long i = 0; i < n; ++i) {
    long best_s = std::numeric_limits<long>::min(), best_u = best_s;
    for (long k = i; k < n; ++k) best_s = std::max(best_s, Q[k] + d - 3 * (k - i));
    for (long k = 0; k <= i; ++k) best_u = std::max(best_u, Q[k] + d - 3 * (i - k));
    qs[i] = best_s;
    qu[i] = best_u;
    q[i] = std::max(best_s, best_u);
  }
}

}  // namespace

TEST(Lattice, DeltaBracketsEpsilon) {
  for (double eps : {0.5, 0.1, 0.05, 0.01, 0.003}) {
    const auto cfg = EpsilonConfig::make(eps);
    const double n = static_cast<double>(cfg.delta_n);
    EXPECT_LT(-eps * n, std::log(eps)) << eps;
    EXPECT_LE(std::log(eps), -eps * (n - 1)) << eps;
    EXPECT_EQ(cfg.delta_exponent(), 3 * cfg.delta_n);
  }
}

TEST(Lattice, FloorExamples) {
  const auto cfg = EpsilonConfig::make(0.01);
  EXPECT_EQ(i_eps_floor(cfg, 1.0), 0);
  EXPECT_EQ(i_eps_floor(cfg, 7.5), 0);
  EXPECT_EQ(i_eps_floor(cfg, std::exp(-0.01 / 3) * 1.0000001), 1);
  EXPECT_EQ(i_eps_floor(cfg, std::exp(-0.01 / 3) * (1 - 1e-10)), 2);
  EXPECT_EQ(i_eps_floor(cfg, std::exp(-0.01 / 3)), 1);
  EXPECT_THROW(i_eps_floor(cfg, 0.0), Error);
}

TEST(Lattice, FloorIsLargestElementBelow) {
  const auto cfg = EpsilonConfig::make(0.01);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> lv(-2000.0, 0.0);
  for (int t = 0; t < 10000; ++t) {
    const double l = lv(rng);
    const long k = i_eps_floor_log(cfg, l);
    EXPECT_LE(cfg.log_value(k), l + 1e-12);
    EXPECT_GT(cfg.log_value(k - 1), l);
  }
}

TEST(QTilde, FixtureClosedForm) {
  const auto ctx = ChartContext::make(0.01, RegularityConstants{}, kChi);
  const auto fr = fixture_frame();
  const double b = 0.9, a = 1.5, rho = 0.35;
  // Oracle: the defining formula with ‖C^{-1}‖_F = √2·s for the orthogonal frame.
  const double cinv = std::sqrt(2.0) * fixture_s();
  const double expected = std::pow(0.01, 3 / b) *
                          std::min(std::pow(cinv, -24 / b), std::pow(cinv, -12 / b) * std::pow(rho, 72 * a / b));
  EXPECT_NEAR(q_tilde(ctx, fr, fr, rho) / expected, 1.0, 1e-12);
  const long k = compute_Q(ctx, fr, fr, rho);
  EXPECT_EQ(k, static_cast<long>(std::ceil(-3.0 * std::log(expected) / 0.01)));
  EXPECT_LE(ctx.eps.value(k), expected);
  EXPECT_GT(ctx.eps.value(k - 1), expected);
}

TEST(QTilde, DoublingCInverseScalesFirstTerm) {
  const auto ctx = ChartContext::make(0.01, RegularityConstants{}, kChi);
  const auto fr = build_frame(Vec2(1, 0), Vec2(0.6, 0.8), 3.0, 4.0, kChi);
  const auto fr2 = build_frame(Vec2(1, 0), Vec2(0.6, 0.8), 6.0, 8.0, kChi);
  // ρ = 1 keeps the first term of the min active.
  const double diff = log_q_tilde(ctx, fr2, fr, 1.0) - log_q_tilde(ctx, fr, fr, 1.0);
  EXPECT_NEAR(diff, -(24 / 0.9) * std::log(2.0), 1e-10);
}

TEST(QTilde, ChartBoundsOnFlowerOrbit) {
  BilliardTable fl(flower_table());
  const auto ctx = ChartContext::make(0.01, RegularityConstants{}, 0.45);
  const auto oc = orbit_charts(fl, ctx, 3, 500);
  ASSERT_GT(oc.charts.size(), 500u);
  const double cap = (3 / 0.9) * std::log(0.01);
  for (const auto& c : oc.charts) {
    EXPECT_LE(c.log_Q(ctx.eps), cap);
    EXPECT_LT(chart_bound_excess(ctx, c), 0.0);
  }
}

TEST(Greedy, ConstantSequence) {
  const auto cfg = EpsilonConfig::make(0.01);
  const std::vector<long> Q(50, 1234);
  const auto r = greedy_q(cfg, Q, 10);
  for (std::size_t i = 0; i < Q.size(); ++i) {
    EXPECT_EQ(r.qs[i], 1234 + cfg.delta_exponent());
    EXPECT_EQ(r.qu[i], 1234 + cfg.delta_exponent());
    EXPECT_EQ(r.q[i], 1234 + cfg.delta_exponent());
  }
}

TEST(Greedy, SingleDip) {
  const auto cfg = EpsilonConfig::make(0.01);
  std::vector<long> Q(80, 500);
  const long m = 60;
  Q[m] = 500 + 90;
  const auto r = greedy_q(cfg, Q, 10);
  const long d = cfg.delta_exponent();
  for (long n = 0; n <= m; ++n) {
    EXPECT_EQ(r.qs[static_cast<std::size_t>(n)], std::max(Q[n] + d, Q[m] + d - 3 * (m - n))) << n;
  }
}

TEST(Greedy, MatchesDefinitionOnRandomWindows) {
  const auto cfg = EpsilonConfig::make(0.01);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<long> base(1000, 400000);
  std::uniform_int_distribution<long> jump(0, 9);
  for (int t = 0; t < 40; ++t) {
    std::vector<long> Q(300);
    for (auto& k : Q) k = jump(rng) == 0 ? base(rng) : 1000 + jump(rng) * 7;
    const auto r = greedy_q(cfg, Q, 100);
    std::vector<long> qs, qu, q;
    brute_force_q(cfg, Q, qs, qu, q);
    EXPECT_EQ(r.qs, qs);
    EXPECT_EQ(r.qu, qu);
    EXPECT_EQ(r.q, q);
  }
}

TEST(Greedy, ConvergedFlagsAwayFromEdges) {
  const auto cfg = EpsilonConfig::make(0.01);
  const std::vector<long> Q(101, 10);
  const auto r = greedy_q(cfg, Q, 60);
  for (std::size_t i = 0; i < Q.size(); ++i) {
    const long edge = std::min<long>(static_cast<long>(i), 100 - static_cast<long>(i));
    EXPECT_EQ(r.converged[i], edge > 30) << i;
  }
}

TEST(Greedy, TemperedAlongFlowerOrbit) {
  BilliardTable fl(flower_table());
  const auto ctx = ChartContext::make(0.01, RegularityConstants{}, 0.45);
  const auto oc = orbit_charts(fl, ctx, 8, 5000);
  std::vector<long> Q;
  for (const auto& c : oc.charts) Q.push_back(c.q_exp);
  const auto base = static_cast<std::size_t>(-oc.frames.first);
  EXPECT_LT(temperedness_slope(ctx.eps, Q, base, 400), 2 * ctx.eps.eps);

  const auto r = greedy_q(ctx.eps, Q, 400);
  const auto rec = chart_records(ctx.eps, oc.frames.first, Q, r);
  ASSERT_EQ(rec.size(), Q.size());
  EXPECT_EQ(rec.front().n, oc.frames.first);
  for (const auto& x : rec) {
    EXPECT_EQ(x.q_eps_exp, std::max(x.qs_exp, x.qu_exp));
    EXPECT_LT(x.log_q, std::log(ctx.eps.eps) + x.log_Q);
  }
}

TEST(ChartApply, OriginAndRoundTrip) {
  BilliardTable fl(flower_table());
  const auto ctx = ChartContext::make(0.01, RegularityConstants{}, 0.45);
  const auto oc = orbit_charts(fl, ctx, 11, 400);
  const auto& base = oc.at(0);
  const auto chart = sized_chart(base.x, base.frame, 3000, base.dist);
  EXPECT_EQ(chart_apply(fl, ctx.eps, chart, Vec2::Zero()), chart.x);
  std::mt19937_64 rng(2);
  const double eta = ctx.eps.value(chart.eta_exp);
  std::uniform_real_distribution<double> U(-eta, eta);
  for (int t = 0; t < 1000; ++t) {
    const Vec2 v(U(rng), U(rng));
    const Vec2 back = chart_invert(fl, ctx.eps, chart, chart_apply(fl, ctx.eps, chart, v));
    EXPECT_LT((back - v).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_THROW(chart_apply(fl, ctx.eps, chart, Vec2(1.01 * eta, 0)), Error);
}

TEST(ChartApply, LipschitzConstants) {
  BilliardTable fl(flower_table());
  const auto ctx = ChartContext::make(0.01, RegularityConstants{}, 0.45);
  const auto oc = orbit_charts(fl, ctx, 12, 400);
  std::mt19937_64 rng(3);
  for (long n : {-50L, 0L, 50L}) {
    const auto& c = oc.at(n);
    const auto chart = sized_chart(c.x, c.frame, 3000, c.dist);
    const double eta = ctx.eps.value(chart.eta_exp);
    std::uniform_real_distribution<double> U(-eta, eta);
    const double inv_bound = 2.0 * c.frame.c_inv_frob();
    for (int t = 0; t < 1000; ++t) {
      const Vec2 v(U(rng), U(rng)), w(U(rng), U(rng));
      const auto p = chart_apply(fl, ctx.eps, chart, v), q = chart_apply(fl, ctx.eps, chart, w);
      const double d = fl.distance(p, q);
      EXPECT_LE(d, 2.0 * (v - w).norm());
      EXPECT_LE((v - w).norm(), inv_bound * d * (1 + 1e-9));
    }
  }
}

TEST(ChartMapFx, FixtureIsExactlyLinear) {
  const auto map = fixture();
  const auto ctx = ChartContext::make(0.01, RegularityConstants{}, kChi);
  const auto fr = fixture_frame();
  const PhasePoint o{0, 0.0, 0.0};
  const auto chart = make_chart(ctx, RegularityConstants{}, o, fr, fr, 0.35, 0.35);
  const auto dec = chart_map_fx(map, ctx, chart, chart);
  EXPECT_TRUE(dec.normalized);
  EXPECT_NEAR(dec.A, std::exp(-1.0), 1e-12);
  EXPECT_NEAR(dec.B, std::exp(1.0), 1e-12);
  EXPECT_LT(std::abs(dec.d0(0, 1)) + std::abs(dec.d0(1, 0)), 1e-12);
  EXPECT_EQ(dec.log_h_sup, kNegInf);
  EXPECT_EQ(dec.log_holder, kNegInf);

  // Directly sampled on a visible domain, h is rounding noise.
  DecompositionOptions opts;
  opts.log_half_width = std::log(0.01);
  opts.check_bounds = false;
  const auto direct = chart_map_fx(map, ctx, chart, chart, opts);
  EXPECT_FALSE(direct.normalized);
  for (const auto& h : direct.h_scaled) EXPECT_LT(h.cwiseAbs().maxCoeff(), 1e-13);
}

TEST(ChartMapFx, FlowerBoundsAndCocycleConsistency) {
  BilliardTable fl(flower_table());
  const auto ctx = ChartContext::make(0.01, RegularityConstants{}, 0.45);
  const auto oc = orbit_charts(fl, ctx, 13, 500);
  for (long n = -200; n <= 200; n += 40) {
    const auto dec = chart_map_fx(fl, ctx, oc.at(n), oc.at(n + 1));
    const Mat2 red = reduced_cocycle(oc.at(n).frame, oc.at(n + 1).frame, oc.seg.df[oc.seg.index(n)]);
    EXPECT_NEAR(dec.A, red(0, 0), 1e-6 * std::abs(red(0, 0)));
    EXPECT_NEAR(dec.B, red(1, 1), 1e-6 * std::abs(red(1, 1)));
    EXPECT_NEAR(dec.d0(0, 0), dec.A, 1e-6 * std::abs(dec.A));
    EXPECT_NEAR(dec.d0(1, 1), dec.B, 1e-6 * std::abs(dec.B));
    EXPECT_LT(std::max(std::abs(dec.d0(0, 1)), std::abs(dec.d0(1, 0))), 1e-8 * operator_norm(dec.d0));
    EXPECT_LT(dec.log_norm, std::log(0.01));
    EXPECT_EQ(dec.log_h0, kNegInf);
    EXPECT_EQ(dec.log_grad0, kNegInf);
  }
}

TEST(ChartMapFx, StadiumNormBelowEpsilon) {
  BilliardTable st(stadium_table());
  const auto ctx = ChartContext::make(0.01, RegularityConstants{}, 0.45);
  const auto oc = orbit_charts(st, ctx, 21, 700);
  int checked = 0;
  for (long n = oc.frames.first; n < oc.frames.last() - 1; n += 25) {
    const auto dec = chart_map_fx(st, ctx, oc.at(n), oc.at(n + 1));
    EXPECT_LT(dec.log_norm, std::log(0.01));
    ++checked;
  }
  EXPECT_GT(checked, 20);
}

TEST(ChartMapFx, JetAgreesWithDirectSampling) {
  BilliardTable fl(flower_table());
  const auto ctx = ChartContext::make(0.01, RegularityConstants{}, 0.45);
  const auto oc = orbit_charts(fl, ctx, 14, 400);
  DecompositionOptions opts;
  opts.check_bounds = false;
  opts.log_half_width = std::log(2e-4);
  opts.grid = 9;
  const auto direct = chart_map_fx(fl, ctx, oc.at(0), oc.at(1), opts);
  opts.direct_threshold = 1e-3;
  const auto jet = chart_map_fx(fl, ctx, oc.at(0), oc.at(1), opts);
  ASSERT_FALSE(direct.normalized);
  ASSERT_TRUE(jet.normalized);
  double sup = 0.0;
  for (const auto& h : jet.h_scaled) sup = std::max(sup, h.cwiseAbs().maxCoeff());
  ASSERT_GT(sup, 0.0);
  // The direct samples carry the cubic remainder, O(L) relative to the
  // quadratic term, plus rounding of order 1e-16/L.
  for (std::size_t p = 0; p < jet.h_scaled.size(); ++p) {
    EXPECT_LT((jet.h_scaled[p] - direct.h_scaled[p]).cwiseAbs().maxCoeff(), 0.05 * sup) << p;
  }
  EXPECT_NEAR(jet.log_h_sup, direct.log_h_sup, 0.05);
}

TEST(Overlap, LatticeAndDistanceExamples) {
  const auto map = fixture();
  const auto cfg = EpsilonConfig::make(0.01);
  const auto fr = fixture_frame();
  const long k = 690;  // η ≈ 0.1
  const auto c1 = sized_chart({0, 0.0, 0.0}, fr, k);
  EXPECT_TRUE(overlap_test(map, cfg, c1, c1));
  EXPECT_FALSE(overlap_test(map, cfg, c1, sized_chart({0, 0.0, 0.0}, fr, k + 6)));
  EXPECT_TRUE(overlap_test(map, cfg, c1, sized_chart({0, 0.0, 0.0}, fr, k + 3)));

  const double bound = std::pow(cfg.value(k) * cfg.value(k), 4);
  EXPECT_TRUE(overlap_test(map, cfg, c1, sized_chart({0, bound / 2, 0.0}, fr, k)));
  EXPECT_FALSE(overlap_test(map, cfg, c1, sized_chart({0, 2 * bound, 0.0}, fr, k)));
}

TEST(ChangeOfCoordinates, IdenticalChartsGiveIdentity) {
  const auto map = fixture();
  const auto ctx = ChartContext::make(0.01, RegularityConstants{}, kChi);
  const auto c = sized_chart({0, 0.01, -0.02}, fixture_frame(), 690);
  const auto cc = change_of_coordinates(map, ctx, c, c);
  EXPECT_EQ(cc.linear, Mat2::Identity());
  EXPECT_EQ(cc.offset, Vec2::Zero());
  EXPECT_EQ(cc.log_norm, kNegInf);
  EXPECT_TRUE(cc.inclusion);
}

TEST(ChangeOfCoordinates, FixtureAffineClosedForm) {
  const auto map = fixture();
  const auto ctx = ChartContext::make(0.01, RegularityConstants{}, kChi);
  const long k = 690;
  const double eta = ctx.eps.value(k);
  const double tiny = 0.1 * std::pow(eta * eta, 4);
  const auto f1 = fixture_frame();
  const auto f2 = build_frame(Vec2(1, 0), Vec2(0, 1), fixture_s() * (1 + tiny), fixture_s(), kChi);
  const auto c1 = sized_chart({0, 0.0, 0.0}, f1, k);
  const auto c2 = sized_chart({0, tiny, -tiny}, f2, k);
  ASSERT_TRUE(overlap_test(map, ctx.eps, c1, c2));
  const auto cc = change_of_coordinates(map, ctx, c1, c2);

  // Oracle: explicit inverse of the diagonal C₂.
  const double s1 = fixture_s() * (1 + tiny), u1 = fixture_s();
  const Vec2 offset(s1 * (0.0 - tiny), u1 * (0.0 + tiny));
  const Mat2 lin = (Mat2() << s1 / fixture_s(), 0, 0, 1).finished();
  EXPECT_NEAR(cc.offset(0), offset(0), 1e-12 * std::abs(offset(0)));
  EXPECT_NEAR(cc.offset(1), offset(1), 1e-12 * std::abs(offset(1)));
  EXPECT_NEAR(cc.linear(0, 0), lin(0, 0), 1e-15);
  EXPECT_NEAR(cc.linear(1, 1), 1.0, 1e-15);

  const double w = std::pow(0.35, 2 * 1.5);
  const Mat2 N = lin - Mat2::Identity();
  double sup = 0.0;
  for (double a : {-1.0, 1.0})
    for (double b : {-1.0, 1.0}) sup = std::max(sup, (offset + N * Vec2(a * w, b * w)).cwiseAbs().maxCoeff());
  const double norm = sup + std::abs(N(0, 0));
  EXPECT_NEAR(cc.log_norm, std::log(norm), 1e-6);
  EXPECT_LT(cc.log_norm, cc.log_bound);
  EXPECT_LT(cc.log_s_ratio, 3 * 2 * ctx.eps.log_value(k));
}

TEST(ChangeOfCoordinates, RatioControlOnAcceptedPairs) {
  const auto map = fixture();
  const auto ctx = ChartContext::make(0.01, RegularityConstants{}, kChi);
  const long k = 690;
  const double eta = ctx.eps.value(k);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  int accepted = 0;
  for (int t = 0; t < 200; ++t) {
    const double scale = std::pow(eta * eta, 4);
    const auto f2 = build_frame(Vec2(1, 0), Vec2(0, 1), fixture_s() * (1 + scale * U(rng)),
                                fixture_s() * (1 + scale * U(rng)), kChi);
    const auto c1 = sized_chart({0, 0.0, 0.0}, fixture_frame(), k);
    const auto c2 = sized_chart({0, scale * U(rng), scale * U(rng)}, f2, k);
    if (!overlap_test(map, ctx.eps, c1, c2)) continue;
    ++accepted;
    const auto cc = change_of_coordinates(map, ctx, c1, c2);
    EXPECT_LE(std::abs(std::log(c1.frame.s / c2.frame.s)), std::pow(eta * eta, 3));
    EXPECT_LE(std::abs(std::log(c1.frame.u / c2.frame.u)), std::pow(eta * eta, 3));
    EXPECT_TRUE(cc.inclusion);
  }
  EXPECT_GT(accepted, 20);
}

TEST(ChangeOfCoordinates, RequiresOverlap) {
  const auto map = fixture();
  const auto ctx = ChartContext::make(0.01, RegularityConstants{}, kChi);
  const auto c1 = sized_chart({0, 0.0, 0.0}, fixture_frame(), 690);
  const auto c2 = sized_chart({0, 0.01, 0.0}, fixture_frame(), 690);
  try {
    change_of_coordinates(map, ctx, c1, c2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OverlapMissing);
  }
}

TEST(ChartMapFxy, SameTargetReducesToFx) {
  BilliardTable fl(flower_table());
  const auto ctx = ChartContext::make(0.01, RegularityConstants{}, 0.45);
  const auto oc = orbit_charts(fl, ctx, 15, 400);
  const auto fx = chart_map_fx(fl, ctx, oc.at(0), oc.at(1));
  const auto fxy = chart_map_fxy(fl, ctx, oc.at(0), oc.at(1), oc.at(1), Direction::Forward);
  EXPECT_EQ(fxy.log_h0, kNegInf);
  EXPECT_DOUBLE_EQ(fxy.A, fx.A);
  EXPECT_DOUBLE_EQ(fxy.B, fx.B);
  EXPECT_LT(fxy.log_grad0, std::log(1e-8 * std::abs(fx.B)));
  const auto back = chart_map_fxy(fl, ctx, oc.at(1), oc.at(0), oc.at(0), Direction::Backward);
  EXPECT_NEAR(back.A, 1.0 / fx.A, 1e-12 * std::abs(back.A));
  EXPECT_NEAR(back.B, 1.0 / fx.B, 1e-12 * std::abs(back.B));
}

TEST(ChartMapFxy, FixtureTranslatedTargetGivesConstantH) {
  const auto map = fixture();
  const auto ctx = ChartContext::make(0.01, RegularityConstants{}, kChi);
  const auto fr = fixture_frame();
  const long k = 690;
  const double eta = ctx.eps.value(k);
  const double t = 0.25 * std::pow(eta * eta, 4);
  const auto x = sized_chart({0, 0.0, 0.0}, fr, k);
  const auto y = sized_chart({0, t, -t}, fr, k);
  DecompositionOptions opts;
  opts.log_half_width = std::log(1e-3);
  const auto dec = chart_map_fxy(map, ctx, x, x, y, Direction::Forward, opts);
  // Oracle: h ≡ C^{-1}(f(x) − y) = (−s·t, s·t).
  const Vec2 h(-fixture_s() * t, fixture_s() * t);
  EXPECT_NEAR(dec.log_h0, std::log(fixture_s() * t), 1e-9);
  for (const auto& hs : dec.h_scaled) {
    EXPECT_NEAR(hs(0) * 1e-3, h(0), 1e-3 * std::abs(h(0)));
    EXPECT_NEAR(hs(1) * 1e-3, h(1), 1e-3 * std::abs(h(1)));
  }
  EXPECT_LT(dec.log_h0, std::log(0.01 * eta));
}

TEST(ChartMapFxy, FirstCoordinateContractsOnGridLines) {
  BilliardTable fl(flower_table());
  const auto ctx = ChartContext::make(0.01, RegularityConstants{}, 0.45);
  const auto oc = orbit_charts(fl, ctx, 16, 400);
  for (long n = -100; n <= 100; n += 50) {
    const auto dec = chart_map_fxy(fl, ctx, oc.at(n), oc.at(n + 1), oc.at(n + 1), Direction::Forward);
    EXPECT_LT(std::abs(dec.A), std::exp(-ctx.chi));
    EXPECT_GT(std::abs(dec.B), std::exp(ctx.chi));
    const auto jet = chart_jet(fl, oc.at(n), oc.at(n + 1), oc.at(n + 1), Direction::Forward);
    const double lq = std::log(10.0) + oc.at(n).log_Q(ctx.eps);
    for (double v2 : {-1.0, 0.0, 1.0}) {
      const Vec2 a = jet.eval_scaled(Vec2(-1.0, v2), lq, lq), b = jet.eval_scaled(Vec2(1.0, v2), lq, lq);
      EXPECT_LT(std::abs(a(0) - b(0)), 2.0 * std::exp(-ctx.chi));
    }
  }
}

TEST(ChartMapFxy, MissingOverlapIsReported) {
  const auto map = fixture();
  const auto ctx = ChartContext::make(0.01, RegularityConstants{}, kChi);
  const auto x = sized_chart({0, 0.0, 0.0}, fixture_frame(), 690);
  const auto y = sized_chart({0, 0.02, 0.0}, fixture_frame(), 690);
  try {
    chart_map_fxy(map, ctx, x, x, y, Direction::Forward);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OverlapMissing);
  }
}
