#include "pesin/geometry.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace pesin;
using namespace pesin::geometry;

namespace {

// Central differences of the forward map in (r, θ) coordinates.
Mat2 fd_jacobian(const SurfaceMap& map, const PhasePoint& x, double h = 1e-6) {
  Mat2 J;
  for (int j = 0; j < 2; ++j) {
    PhasePoint p = x, m = x;
    (j == 0 ? p.r : p.theta) += h;
    (j == 0 ? m.r : m.theta) -= h;
    const PhasePoint fp = map.forward(map.wrap(p));
    const PhasePoint fm = map.forward(map.wrap(m));
    const Vec2 diff = map.displacement(fm, fp) / map.metric_scale();
    J.col(j) = diff / (2 * h);
  }
  return J;
}

std::vector<PhasePoint> away_from_d(const SurfaceMap& map, int count, double min_gap, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<PhasePoint> out;
  while (static_cast<int>(out.size()) < count) {
    const PhasePoint x = map.sample_invariant(rng);
    try {
      if (map.rho(x) / map.metric_scale() > min_gap) out.push_back(x);
    } catch (const Error&) {
    }
  }
  return out;
}

}  // namespace

TEST(Table, PresetsCloseAndCarryCorners) {
  EXPECT_TRUE(circle_table().corners.empty());
  EXPECT_EQ(stadium_table().corners.size(), 4u);
  EXPECT_EQ(sinai_table().corners.size(), 4u);
  EXPECT_EQ(flower_table(4, 1.0, 0.8).corners.size(), 4u);
  const auto s = stadium_table();
  EXPECT_LT(s.metric_scale * std::hypot(kPi, kPi), 1.0);
}

TEST(Table, OpenLoopRejected) {
  TableSpec spec;
  spec.kind = TableKind::Custom;
  spec.components.push_back({Segment{Vec2(0, 0), Vec2(1, 0)}, 0});
  spec.components.push_back({Segment{Vec2(1, 0), Vec2(1, 1)}, 0});
  EXPECT_THROW(finalize_table(spec), Error);
}

TEST(Table, ParseFormatRoundTrip) {
  const auto spec = parse_table("kind = stadium\nflat_length = 1.5\nradius = 1\n");
  EXPECT_EQ(spec.kind, TableKind::Stadium);
  const auto again = parse_table(format_table(spec));
  EXPECT_EQ(again.components.size(), 4u);
  EXPECT_DOUBLE_EQ(again.metric_scale, spec.metric_scale);
  EXPECT_DOUBLE_EQ(again.components[1].length(), kPi);

  const std::string custom =
      "kind = custom\n"
      "segment 0 0 1 0\nsegment 1 0 1 1\nsegment 1 1 0 1\nsegment 0 1 0 0\n";
  const auto box = parse_table(custom);
  EXPECT_EQ(box.corners.size(), 4u);
  EXPECT_EQ(parse_table(format_table(box)).components.size(), 4u);
}

TEST(BilliardMap, CircleClosedForms) {
  BilliardTable circle(circle_table(1.0));
  auto y = circle.forward({0, 0.0, 0.0});
  EXPECT_NEAR(y.r, kPi, 1e-12);
  EXPECT_NEAR(y.theta, 0.0, 1e-12);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ur(0.0, 2 * kPi);
  for (int i = 0; i < 100; ++i) {
    const double r = ur(rng);
    y = circle.forward({0, r, kPi / 4});
    EXPECT_NEAR(std::remainder(y.r - (r + kPi / 2), 2 * kPi), 0.0, 1e-9);
    EXPECT_NEAR(y.theta, kPi / 4, 1e-12);
  }
  y = circle.backward({0, kPi, 0.0});
  EXPECT_NEAR(std::remainder(y.r, 2 * kPi), 0.0, 1e-12);
}

TEST(BilliardMap, StadiumBouncingPair) {
  BilliardTable st(stadium_table(2.0, 1.0));
  const auto y = st.forward({0, 1.0, 0.0});
  EXPECT_EQ(y.component, 2);
  EXPECT_NEAR(y.r, 1.0, 1e-12);
  EXPECT_NEAR(y.theta, 0.0, 1e-12);
  const auto back = st.backward(y);
  EXPECT_EQ(back.component, 0);
  EXPECT_NEAR(back.r, 1.0, 1e-12);
  EXPECT_NEAR(st.forward(y).r, 1.0, 1e-12);
}

TEST(BilliardMap, GrazingAndCornerErrors) {
  BilliardTable st(stadium_table());
  try {
    st.forward({0, 1.0, kHalfPi});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GrazingCollision);
  }
  // Aim from the bottom flat side straight at the junction (1, 1).
  const Vec2 p(0.0, -1.0);
  const Vec2 d = Vec2(1.0, 1.0) - p;
  const double theta = std::atan2(d.x(), d.y());
  try {
    st.forward({0, 1.0, theta});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CornerHit);
  }
}

TEST(BilliardMap, InverseRoundTrip) {
  for (const auto& spec : {circle_table(), stadium_table(), sinai_table(), flower_table()}) {
    BilliardTable t(spec);
    std::mt19937_64 rng(11);
    int checked = 0;
    for (int i = 0; i < 10000; ++i) {
      const auto x = t.sample_invariant(rng);
      try {
        const auto back = t.backward(t.forward(x));
        ASSERT_EQ(back.component, x.component);
        EXPECT_LT(t.distance(back, x) / t.metric_scale(), 1e-9);
        ++checked;
      } catch (const Error&) {
      }
    }
    EXPECT_GT(checked, 9000) << t.name();
  }
}

TEST(BilliardMap, DerivativeMatchesFiniteDifferences) {
  for (const auto& spec : {circle_table(), stadium_table(), sinai_table(), flower_table()}) {
    BilliardTable t(spec);
    for (const auto& x : away_from_d(t, 300, 0.05, 5)) {
      const Mat2 a = t.derivative(x);
      const Mat2 fd = fd_jacobian(t, x);
      EXPECT_LT((a - fd).norm() / a.norm(), 1e-5) << t.name() << " r=" << x.r << " th=" << x.theta;
      const Mat2 ai = t.inverse_derivative(t.forward(x));
      EXPECT_LT((ai * a - Mat2::Identity()).norm(), 1e-9);
    }
  }
}

TEST(BilliardMap, LiouvilleDeterminant) {
  for (const auto& spec : {circle_table(), stadium_table(), sinai_table(), flower_table()}) {
    BilliardTable t(spec);
    std::mt19937_64 rng(7);
    for (int i = 0; i < 2000; ++i) {
      const auto x = t.sample_invariant(rng);
      try {
        const auto y = t.forward(x);
        // Invariance of cos θ dr dθ: det df_x · cos θ' = cos θ.
        EXPECT_NEAR(t.derivative(x).determinant() * std::cos(y.theta), std::cos(x.theta), 1e-8);
      } catch (const Error&) {
      }
    }
  }
}

TEST(Discontinuity, ClosedFormValues) {
  BilliardTable circle(circle_table());
  const double c = circle.metric_scale();
  EXPECT_NEAR(circle.dist_to_discontinuity({0, 1.0, 0.0}) / c, kHalfPi, 1e-12);
  EXPECT_EQ(circle.dist_to_discontinuity({0, 1.0, kHalfPi}), 0.0);
  BilliardTable st(stadium_table());
  EXPECT_EQ(st.dist_to_discontinuity({0, 0.0, 0.3}), 0.0);
  EXPECT_EQ(st.dist_to_discontinuity({1, kPi, -0.3}), 0.0);

  LinearFixture fx(std::exp(-1.0), std::exp(1.0), 0.35);
  EXPECT_NEAR(fx.rho({0, 0.0, 0.0}), 0.35, 1e-15);
}

TEST(Discontinuity, RhoBoundsAndCircleInvariance) {
  BilliardTable circle(circle_table());
  PhasePoint x{0, 0.3, kPi / 4};
  const double r0 = circle.rho(x);
  for (int n = 0; n < 50; ++n) {
    x = circle.forward(x);
    EXPECT_NEAR(circle.rho(x), r0, 1e-12);
  }
  BilliardTable st(stadium_table());
  std::mt19937_64 rng(2);
  for (int i = 0; i < 500; ++i) {
    const auto y = st.sample_invariant(rng);
    try {
      EXPECT_LE(st.rho(y), st.dist_to_discontinuity(y));
    } catch (const Error&) {
    }
  }
}

TEST(Discontinuity, CornerRayPointIsOnD) {
  BilliardTable st(stadium_table());
  const Vec2 p(0.0, -1.0);
  const Vec2 d = Vec2(1.0, 1.0) - p;
  const double theta = std::atan2(d.x(), d.y());
  EXPECT_LT(st.dist_to_discontinuity({0, 1.0, theta}), 1e-9);
  EXPECT_LT(st.dist_to_discontinuity({0, 1.0, -theta}), 1e-9);
}

TEST(Discontinuity, OneLipschitzAlongSegments) {
  for (const auto& spec : {stadium_table(), sinai_table(), flower_table()}) {
    BilliardTable t(spec);
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 60; ++i) {
      const auto x = t.sample_invariant(rng);
      const Vec2 dir = Vec2(u(rng), u(rng)).normalized() * 0.3 * t.metric_scale();
      double prev = t.dist_to_discontinuity(x);
      PhasePoint prev_pt = x;
      for (int k = 1; k <= 40; ++k) {
        PhasePoint y = t.translate(x, dir * (k / 40.0));
        if (!t.component_closed(y.component) && (y.r < 0 || y.r > t.component_length(y.component))) break;
        if (std::abs(y.theta) > kHalfPi) break;
        const double d = t.dist_to_discontinuity(y);
        EXPECT_LE(std::abs(d - prev), t.distance(y, prev_pt) * (1 + 1e-6) + 1e-12) << t.name();
        prev = d;
        prev_pt = y;
      }
    }
  }
}

TEST(Assumptions, FixturePasses) {
  LinearFixture fx(std::exp(-1.0), std::exp(1.0), 0.35);
  std::mt19937_64 rng(1);
  std::vector<PhasePoint> sample;
  for (int i = 0; i < 500; ++i) sample.push_back(fx.sample_invariant(rng));
  const auto rep = verify_assumptions(fx, {1.5, 0.9, 1.0}, sample, 3);
  EXPECT_TRUE(rep.ok());
}

TEST(Assumptions, CircleHasValidExponent) {
  BilliardTable circle(circle_table());
  std::mt19937_64 rng(4);
  std::vector<PhasePoint> sample;
  for (int i = 0; i < 10000; ++i) sample.push_back(circle.sample_invariant(rng));
  // Scan for the smallest exponent on a coarse grid that passes.
  double found = 0.0;
  for (double a = 1.05; a < 4.0; a += 0.05) {
    if (verify_assumptions(circle, {a, 0.9, 1.0}, sample, 5, false).ok()) {
      found = a;
      break;
    }
  }
  ASSERT_GT(found, 1.0);
  EXPECT_GT(verify_assumptions(circle, {found, 0.9, 1.0}, sample, 5, false).worst()->worst_margin, 0.0);
}

TEST(Assumptions, TinyExponentFailsOnDispersingTable) {
  BilliardTable fl(flower_table());
  std::mt19937_64 rng(8);
  std::vector<PhasePoint> sample;
  for (int i = 0; i < 3000; ++i) sample.push_back(fl.sample_invariant(rng));
  try {
    verify_assumptions(fl, {1.01, 0.9, 1.0}, sample, 2);
    FAIL() << "expected a violation";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AssumptionViolated);
  }
}

TEST(PeriodicOrbits, StadiumSearchFindsClosedHyperbolicCycles) {
  BilliardTable st(stadium_table());
  PeriodicSearch opts;
  opts.target_orbits = 8;
  opts.max_period = 8;
  const auto orbits = find_periodic_orbits(st, opts, 42);
  ASSERT_GE(orbits.size(), 4u);
  for (const auto& o : orbits) {
    PhasePoint z = o.points.front();
    for (std::size_t k = 0; k < o.points.size(); ++k) z = st.forward(z);
    EXPECT_LT(st.distance(z, o.points.front()), 1e-11);
    EXPECT_GT(o.exponent, 0.0);
  }
}
