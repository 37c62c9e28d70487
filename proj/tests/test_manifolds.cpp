#include "pesin/manifolds.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace pesin;
using namespace pesin::manifolds;
using pesin::testing::fixed_point_chart;
using pesin::testing::fixture;
using pesin::testing::fixture_context;

namespace {

const double kA = std::exp(-1.0);

double log_p(const ChartContext& ctx, long k) { return ctx.eps.log_value(k); }

// The fixed point followed by n copies of itself.
std::vector<DoubleChart> constant_path(const DoubleChart& v, std::size_t n) { return std::vector<DoubleChart>(n, v); }

}  // namespace

TEST(Admissibility, ZeroHasUnboundedMargins) {
  const auto map = fixture();
  const auto ctx = fixture_context();
  const auto v = fixed_point_chart(map, ctx);
  const auto rep = validate_admissible(ctx, zero_manifold(ctx.eps, v, Kind::Stable));
  EXPECT_EQ(rep.margin1, std::numeric_limits<double>::infinity());
  EXPECT_EQ(rep.margin2, std::numeric_limits<double>::infinity());
  EXPECT_EQ(rep.margin3, std::numeric_limits<double>::infinity());
}

TEST(Admissibility, ConstantAtTheOffsetBoundPasses) {
  const auto map = fixture();
  const auto ctx = fixture_context();
  const auto v = fixed_point_chart(map, ctx, 2, 0);
  const double log_c = std::log(1e-3) + log_p(ctx, v.pmin_exp()) - 1e-12;
  const auto rep = validate_admissible(ctx, constant_manifold(ctx.eps, v, Kind::Unstable, log_c));
  EXPECT_GE(rep.margin1, 0.0);
  EXPECT_LT(rep.margin1, 1e-9);
  const auto over = constant_manifold(ctx.eps, v, Kind::Unstable, log_c + 1e-6);
  EXPECT_LT(validate_admissible(ctx, over, false).margin1, 0.0);
  try {
    validate_admissible(ctx, over);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AdmissibilityViolated);
  }
}

TEST(Admissibility, IdentityGraphFailsSlopeBounds) {
  const auto map = fixture();
  const auto ctx = fixture_context();
  auto m = zero_manifold(ctx.eps, fixed_point_chart(map, ctx), Kind::Stable);
  m.b = 1.0;
  const auto rep = validate_admissible(ctx, m, false);
  EXPECT_NEAR(rep.log_slope_sup, 0.0, 1e-15);
  EXPECT_LT(rep.margin3, 0.0);
  EXPECT_LT(rep.margin2, 0.0);
  EXPECT_THROW(validate_admissible(ctx, m), Error);
}

TEST(Admissibility, RandomSeedsAreAdmissible) {
  const auto map = fixture();
  const auto ctx = fixture_context();
  std::mt19937_64 rng(7);
  for (long ds : {0L, 3L, 40L}) {
    const auto v = fixed_point_chart(map, ctx, ds, 0);
    for (int i = 0; i < 20; ++i) {
      for (Kind k : {Kind::Stable, Kind::Unstable}) {
        const auto rep = validate_admissible(ctx, random_manifold(ctx, v, k, rng));
        EXPECT_GT(rep.margin1, std::log(1.9));
        EXPECT_GT(rep.margin2, std::log(1.9));
        EXPECT_GT(rep.margin3, 0.0);
      }
    }
  }
}

TEST(Admissibility, HermiteReproducesCubics) {
  AdmissibleManifold m;
  m.log_sigma = 0.0;
  for (int i = 0; i < kGrid; ++i) {
    const double t = grid_node(i);
    m.r[i] = t * t * t - 0.5 * t;
    m.dr[i] = 3 * t * t - 0.5;
  }
  for (double t : {-0.99, -0.4, 0.013, 0.77}) {
    EXPECT_NEAR(m.remainder(t), t * t * t - 0.5 * t, 1e-14);
    EXPECT_NEAR(m.remainder_slope(t), 3 * t * t - 0.5, 1e-13);
  }
}

TEST(GraphTransform, FixtureInvariantAxes) {
  const auto map = fixture();
  const auto ctx = fixture_context();
  const auto v = fixed_point_chart(map, ctx);
  const auto gu = graph_transform_u(map, ctx, v, v, zero_manifold(ctx.eps, v, Kind::Unstable));
  EXPECT_EQ(gu.a, 0.0);
  EXPECT_EQ(gu.b, 0.0);
  EXPECT_EQ(gu.log_sigma, kNegInf);
  const auto gs = graph_transform_s(map, ctx, v, v, zero_manifold(ctx.eps, v, Kind::Stable));
  EXPECT_EQ(gs.a, 0.0);
  EXPECT_EQ(gs.log_sigma, kNegInf);
}

TEST(GraphTransform, FixtureConstantsScaleByTheCocycle) {
  const auto map = fixture();
  const auto ctx = fixture_context();
  const auto v = fixed_point_chart(map, ctx);
  const double lp = log_p(ctx, v.pu_exp);
  const double log_c = std::log(4e-4) + log_p(ctx, v.pmin_exp());
  TransformReport rep;
  const auto gu = graph_transform_u(map, ctx, v, v, constant_manifold(ctx.eps, v, Kind::Unstable, log_c), &rep);
  // Direct linear image: {(c, t)} ↦ {(λ_s c, λ_u t)}, so G ≡ λ_s c.
  EXPECT_NEAR(std::log(gu.a) + lp, log_c - 1.0, 1e-12);
  EXPECT_EQ(gu.b, 0.0);
  EXPECT_NEAR(rep.containment_margin, 1.0 - kA, 1e-12);
  EXPECT_LT(rep.reprojection_residual, 1e-15);
  EXPECT_GT(rep.admissibility.margin1, 0.0);

  const auto gs = graph_transform_s(map, ctx, v, v, constant_manifold(ctx.eps, v, Kind::Stable, log_c, -1.0));
  EXPECT_NEAR(std::log(-gs.a) + lp, log_c - 1.0, 1e-12);
}

TEST(GraphTransform, FixtureSlopeContractsByTheRatio) {
  const auto map = fixture();
  const auto ctx = fixture_context();
  const auto v = fixed_point_chart(map, ctx);
  auto m = zero_manifold(ctx.eps, v, Kind::Unstable);
  m.b = 0.1 * std::exp(ctx.beta / 3.0 * log_p(ctx, v.pmin_exp()));
  const auto g = graph_transform_u(map, ctx, v, v, m);
  EXPECT_NEAR(g.b / m.b, std::exp(-2.0), 1e-14);
}

TEST(GraphTransform, RemainderIsTransportedExactly) {
  // On the fixture the output remainder at s is λ_s r(s/λ_u) relative to its
  // own scale; compare at output nodes, where no interpolation enters.
  const auto map = fixture();
  const auto ctx = fixture_context();
  const auto v = fixed_point_chart(map, ctx);
  std::mt19937_64 rng(3);
  const auto m = random_manifold(ctx, v, Kind::Unstable, rng);
  const auto g = graph_transform_u(map, ctx, v, v, m);
  const double rel = g.log_sigma - m.log_sigma;
  for (double s : {-1.0, grid_node(20), 0.0, grid_node(50), 1.0}) {
    EXPECT_NEAR(std::exp(rel) * g.remainder(s), kA * m.remainder(s * kA), 1e-12);
  }
}

TEST(GraphTransform, RejectsNonEdges) {
  const auto map = fixture();
  const auto ctx = fixture_context();
  const auto v = fixed_point_chart(map, ctx);
  const auto w = fixed_point_chart(map, ctx, 1, 0);
  // w → v: p^s(w) must equal min{e^ε p^s(v), δQ}, which is δQ, not δQ e^{-ε/3}.
  EXPECT_THROW(graph_transform_u(map, ctx, w, v, zero_manifold(ctx.eps, w, Kind::Unstable)), Error);
}

TEST(Contraction, FixtureRatioIsTheStableEntry) {
  const auto map = fixture();
  const auto ctx = fixture_context();
  const auto v = fixed_point_chart(map, ctx);
  const double lpm = log_p(ctx, v.pmin_exp());
  const auto m1 = constant_manifold(ctx.eps, v, Kind::Unstable, std::log(3e-4) + lpm);
  const auto m2 = constant_manifold(ctx.eps, v, Kind::Unstable, std::log(1e-4) + lpm, -1.0);
  const auto c = contraction_measurement(map, ctx, v, v, m1, m2);
  EXPECT_NEAR(c.c0, kA, 1e-12);
  EXPECT_LE(c.c0, std::exp(-ctx.chi));

  const auto same = contraction_measurement(map, ctx, v, v, m1, m1);
  EXPECT_EQ(same.log_c0_in, kNegInf);
  EXPECT_EQ(same.log_c0_out, kNegInf);
  EXPECT_EQ(same.c0, 0.0);
}

TEST(Contraction, RandomPairsContract) {
  const auto map = fixture();
  const auto ctx = fixture_context();
  const auto v = fixed_point_chart(map, ctx);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    for (Kind k : {Kind::Stable, Kind::Unstable}) {
      const auto c = contraction_measurement(map, ctx, v, v, random_manifold(ctx, v, k, rng), random_manifold(ctx, v, k, rng));
      EXPECT_LE(c.c0, kA * (1 + 1e-12));
      EXPECT_LE(c.c1, std::exp(-ctx.chi / 2.0));
    }
  }
}

TEST(Limits, FixtureStableManifoldIsTheAxis) {
  const auto map = fixture();
  const auto ctx = fixture_context();
  const auto v = fixed_point_chart(map, ctx);
  const auto res = stable_manifold(map, ctx, constant_path(v, 80));
  EXPECT_TRUE(res.converged);
  EXPECT_EQ(res.depth, 79);
  EXPECT_EQ(res.manifold.a, 0.0);
  EXPECT_EQ(res.manifold.b, 0.0);
  EXPECT_LT(res.seed_distance, 1e-8);
  // Offsets contract by λ_s per step, slopes by λ_s/λ_u.
  EXPECT_LE(res.rate, -ctx.chi / 2.0);
  EXPECT_NEAR(res.rate, -1.0, 0.1);
}

TEST(Limits, FixtureUnstableManifoldIsTheAxis) {
  const auto map = fixture();
  const auto ctx = fixture_context();
  const auto v = fixed_point_chart(map, ctx);
  ManifoldOptions opts;
  opts.seed = 5;
  const auto res = unstable_manifold(map, ctx, constant_path(v, 80), opts);
  EXPECT_TRUE(res.converged);
  EXPECT_EQ(res.manifold.a, 0.0);
  EXPECT_LT(res.seed_distance, 1e-8);
  EXPECT_LE(res.rate, -ctx.chi / 2.0);
}

TEST(Limits, ShortPathDoesNotConverge) {
  const auto map = fixture();
  const auto ctx = fixture_context();
  const auto v = fixed_point_chart(map, ctx);
  try {
    stable_manifold(map, ctx, constant_path(v, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotConverged);
  }
}

TEST(Intersect, AxesMeetAtTheOrigin) {
  const auto map = fixture();
  const auto ctx = fixture_context();
  const auto v = fixed_point_chart(map, ctx);
  const auto I = intersect(ctx, v, zero_manifold(ctx.eps, v, Kind::Stable), zero_manifold(ctx.eps, v, Kind::Unstable));
  EXPECT_EQ(I.w.u, Vec2::Zero());
  EXPECT_EQ(I.log_sin_ratio, kNegInf);
}

TEST(Intersect, ConstantsMeetAtTheSwappedPair) {
  const auto map = fixture();
  const auto ctx = fixture_context();
  const auto v = fixed_point_chart(map, ctx, 3, 0);
  const double lpm = log_p(ctx, v.pmin_exp());
  // F ≡ a over the s-axis and G ≡ b over the u-axis meet at (b, a).
  const auto vs = constant_manifold(ctx.eps, v, Kind::Stable, std::log(7e-4) + lpm);
  const auto vu = constant_manifold(ctx.eps, v, Kind::Unstable, std::log(2e-4) + lpm, -1.0);
  const auto I = intersect(ctx, v, vs, vu);
  EXPECT_EQ(I.w.log_scale, lpm);
  EXPECT_NEAR(I.w.u(0), -2e-4, 1e-17);
  EXPECT_NEAR(I.w.u(1), 7e-4, 1e-17);
  EXPECT_LT(I.bound_margin, 0.0);
}

TEST(Intersect, AgreesWithGridScan) {
  const auto map = fixture();
  const auto ctx = fixture_context(0.2);
  std::mt19937_64 rng(21);
  for (int i = 0; i < 30; ++i) {
    const auto v = fixed_point_chart(map, ctx, i % 4, (i / 4) % 3);
    const auto vs = random_manifold(ctx, v, Kind::Stable, rng);
    const auto vu = random_manifold(ctx, v, Kind::Unstable, rng);
    const auto I = intersect(ctx, v, vs, vu);
    const auto roots = intersect_scan(ctx.eps, vs, vu, 20001);
    ASSERT_EQ(roots.size(), 1u);
    EXPECT_NEAR(I.w.u(0), roots[0], 1e-10);
    EXPECT_LE(I.residual_ratio, 0.25);
  }
}

TEST(Shadow, ConstantGpoShadowsTheFixedPoint) {
  const auto map = fixture();
  const auto ctx = fixture_context();
  const auto v = fixed_point_chart(map, ctx);
  const auto res = shadow(map, ctx, constant_path(v, 2 * (5 + 40) + 1), 5, 40);
  EXPECT_EQ(res.x, v.chart.x);
  ASSERT_EQ(res.log_window_ratio.size(), 11u);
  for (double r : res.log_window_ratio) EXPECT_LE(r, 0.0);
  for (double e : res.physical_error) EXPECT_EQ(e, 0.0);
}

TEST(Holder, IdenticalPathsHaveZeroDistance) {
  const auto map = fixture();
  const auto ctx = fixture_context();
  const auto v = fixed_point_chart(map, ctx);
  const auto p = constant_path(v, 30);
  // Different seeds at the same far vertex still converge; same seeds give 0.
  std::mt19937_64 r1(4), r2(4);
  const auto a = random_manifold(ctx, v, Kind::Stable, r1);
  const auto b = random_manifold(ctx, v, Kind::Stable, r2);
  EXPECT_EQ(normalized_distance(ctx.eps, a, b), 0.0);
  const auto fit = holder_dependence(map, ctx, {{p, p}}, {30});
  EXPECT_LT(fit.log_distance[0], std::log(1e-10));
}

TEST(Holder, BranchingPathsDecayGeometrically) {
  const auto map = fixture();
  const auto ctx = fixture_context();
  const auto v = fixed_point_chart(map, ctx);
  // v → v' with p^s one lattice step smaller is an edge; beyond it p^s keeps
  // shrinking by e^{-ε} per step.
  std::vector<DoubleChart> tail;
  for (long k = 0; k < 6; ++k) tail.push_back(fixed_point_chart(map, ctx, 1 + 3 * k, 0));
  std::vector<std::pair<std::vector<DoubleChart>, std::vector<DoubleChart>>> pairs;
  std::vector<long> depths;
  for (long n = 2; n <= 14; n += 2) {
    auto a = constant_path(v, static_cast<std::size_t>(n + 6));
    auto b = constant_path(v, static_cast<std::size_t>(n));
    b.insert(b.end(), tail.begin(), tail.end());
    pairs.emplace_back(a, b);
    depths.push_back(n);
  }
  const auto fit = holder_dependence(map, ctx, pairs, depths);
  EXPECT_LT(fit.theta, std::exp(-ctx.chi / 2.0));
  // Offsets contract by λ_s and slopes by λ_s/λ_u, so θ lies between the two.
  EXPECT_LE(std::log(fit.theta), -1.0 + 0.05);
  EXPECT_GE(std::log(fit.theta), -2.0 - 0.05);
}
