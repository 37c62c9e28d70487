#include "pesin/markov.hpp"
#include "stadium_fixture.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <numeric>
#include <random>
#include <set>

using namespace pesin;
using namespace pesin::markov;
using pesin::testing::fixture;
using pesin::testing::fixture_context;
using pesin::testing::stadium;

namespace {

ShiftGraph graph_from(std::size_t n, const std::vector<std::pair<int, int>>& edges) {
  ShiftGraph g;
  g.out.resize(n);
  g.in.resize(n);
  for (auto [a, b] : edges) {
    g.out[static_cast<std::size_t>(a)].push_back(b);
    g.in[static_cast<std::size_t>(b)].push_back(a);
  }
  return g;
}

ShiftGraph random_graph(std::mt19937_64& rng, std::size_t n, double density) {
  std::bernoulli_distribution edge(density);
  std::vector<std::pair<int, int>> edges;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (edge(rng)) edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
    }
  }
  return graph_from(n, edges);
}

// Every member its own singleton fibre.
std::vector<std::vector<int>> singleton_fibres(const std::vector<int>& set) {
  std::vector<std::vector<int>> f;
  for (int p : set) f.push_back({p});
  return f;
}

SetSystem random_system(std::mt19937_64& rng, std::size_t points, std::size_t sets) {
  SetSystem sys;
  sys.points = points;
  std::bernoulli_distribution pick(0.3);
  for (std::size_t i = 0; i < sets; ++i) {
    std::vector<int> z;
    for (std::size_t p = 0; p < points; ++p) {
      if (pick(rng)) z.push_back(static_cast<int>(p));
    }
    if (z.empty()) z.push_back(static_cast<int>(i % points));
    std::vector<std::vector<int>> sf, uf;
    for (int p : z) {
      std::vector<int> s, u;
      for (int q : z) {
        if (q == p || pick(rng)) s.push_back(q);
        if (q == p || pick(rng)) u.push_back(q);
      }
      sf.push_back(s);
      uf.push_back(u);
    }
    sys.sets.push_back(z);
    sys.s_fibre.push_back(sf);
    sys.u_fibre.push_back(uf);
  }
  return sys;
}

// Signature groups computed with plain set algebra.
std::set<std::set<int>> brute_force_rectangles(const SetSystem& sys) {
  auto as_set = [](const std::vector<int>& v) { return std::set<int>(v.begin(), v.end()); };
  auto meets = [](const std::set<int>& a, const std::set<int>& b) {
    for (int x : a) {
      if (b.count(x)) return true;
    }
    return false;
  };
  std::map<std::vector<std::array<int, 3>>, std::set<int>> groups;
  for (std::size_t p = 0; p < sys.points; ++p) {
    std::vector<std::array<int, 3>> sig;
    for (std::size_t i = 0; i < sys.sets.size(); ++i) {
      const auto zi = as_set(sys.sets[i]);
      if (!zi.count(static_cast<int>(p))) continue;
      const std::size_t k = static_cast<std::size_t>(
          std::find(sys.sets[i].begin(), sys.sets[i].end(), static_cast<int>(p)) - sys.sets[i].begin());
      for (std::size_t j = 0; j < sys.sets.size(); ++j) {
        const auto zj = as_set(sys.sets[j]);
        if (!meets(zi, zj)) continue;
        const int code = (meets(as_set(sys.s_fibre[i][k]), zj) ? 2 : 0) + (meets(as_set(sys.u_fibre[i][k]), zj) ? 1 : 0);
        sig.push_back({static_cast<int>(i), static_cast<int>(j), code});
      }
    }
    if (!sig.empty()) groups[sig].insert(static_cast<int>(p));
  }
  std::set<std::set<int>> out;
  for (const auto& [sig, pts] : groups) out.insert(pts);
  return out;
}

std::set<std::set<int>> as_sets(const Partition& p) {
  std::set<std::set<int>> out;
  for (const auto& r : p.rectangles) out.emplace(r.begin(), r.end());
  return out;
}

struct FixtureCoding {
  geometry::LinearFixture map = fixture();
  ChartContext ctx = fixture_context();
  coding::CenterDatabase db;
  Alphabet alphabet;
  Itinerary word;

  FixtureCoding() {
    geometry::PeriodicOrbit fixed;
    fixed.points = {geometry::PhasePoint{0, 0.0, 0.0}};
    db = coding::build_centers(map, ctx, {}, {fixed});
    alphabet = coding::coarse_grain(map, ctx, db);
    word = coding::sufficiency_itinerary(map, ctx, db, alphabet, coding::orbit_window(db, 0, 50));
  }
};

const std::vector<Itinerary>& stadium_words() {
  static const std::vector<Itinerary> words = [] {
    const auto& s = stadium();
    std::vector<Itinerary> w;
    for (const auto& c : s.db.centers) {
      w.push_back(coding::sufficiency_itinerary(s.map, s.ctx, s.db, s.alphabet, coding::orbit_window(s.db, c.id, 50)));
    }
    return w;
  }();
  return words;
}

const Corpus& stadium_corpus() {
  static const Corpus c = [] {
    const auto& s = stadium();
    return build_corpus(s.map, s.ctx, s.alphabet, stadium_words());
  }();
  return c;
}

}  // namespace

TEST(Counting, FullTwoShiftIsExact) {
  const auto g = graph_from(2, {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  const auto N = count_periodic_words(g, 60);
  for (int n = 1; n <= 60; ++n) EXPECT_EQ(N[static_cast<std::size_t>(n)], BigInt(1) << n) << n;
  const auto est = entropy_estimate(g, 60);
  EXPECT_NEAR(est.h, std::log(2.0), 1e-12);
  EXPECT_EQ(est.period, 1);
  EXPECT_LT(est.variation, 1e-12);
}

TEST(Counting, SelfLoopHasZeroEntropy) {
  const auto g = graph_from(1, {{0, 0}});
  const auto N = count_periodic_words(g, 20);
  for (int n = 1; n <= 20; ++n) EXPECT_EQ(N[static_cast<std::size_t>(n)], 1);
  const auto est = entropy_estimate(g, 20);
  EXPECT_EQ(est.h, 0.0);
  EXPECT_EQ(est.period, 1);
}

TEST(Counting, CyclesCountOnlyAtMultiplesOfTheirLength) {
  for (int p : {2, 3, 7}) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < p; ++i) edges.emplace_back(i, (i + 1) % p);
    const auto g = graph_from(static_cast<std::size_t>(p), edges);
    const auto N = count_periodic_words(g, 30);
    for (int n = 1; n <= 30; ++n) EXPECT_EQ(N[static_cast<std::size_t>(n)], n % p == 0 ? p : 0);
    const auto est = entropy_estimate(g, 30);
    EXPECT_EQ(est.period, p);
    EXPECT_EQ(est.h, 0.0);
    EXPECT_EQ(est.variation, kInf);
  }
}

TEST(Counting, ClosedWalksMatchDenseMatrixPowers) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + trial % 7;
    const auto g = random_graph(rng, n, 0.35);
    Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> A =
        Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>::Zero(static_cast<long>(n), static_cast<long>(n));
    for (std::size_t a = 0; a < n; ++a) {
      for (int b : g.out[a]) A(static_cast<long>(a), b) += 1;
    }
    const auto N = count_periodic_words(g, 12);
    auto P = A;
    for (int k = 1; k <= 12; ++k) {
      EXPECT_EQ(N[static_cast<std::size_t>(k)], P.trace()) << trial << " " << k;
      P = P * A;
    }
  }
}

TEST(Counting, ComponentsMatchTransitiveClosure) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + trial % 10;
    const auto g = random_graph(rng, n, 0.15);
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (std::size_t a = 0; a < n; ++a) {
      reach[a][a] = true;
      for (int b : g.out[a]) reach[a][static_cast<std::size_t>(b)] = true;
    }
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) reach[a][b] = reach[a][b] || (reach[a][k] && reach[k][b]);
      }
    }
    const auto comps = strongly_connected_components(g);
    std::vector<int> comp_of(n, -1);
    std::size_t total = 0;
    for (std::size_t c = 0; c < comps.size(); ++c) {
      total += comps[c].size();
      for (int v : comps[c]) comp_of[static_cast<std::size_t>(v)] = static_cast<int>(c);
    }
    EXPECT_EQ(total, n);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) EXPECT_EQ(comp_of[a] == comp_of[b], reach[a][b] && reach[b][a]);
    }
  }
}

TEST(Counting, PeriodIsTheGcdOfCycleLengths) {
  // A 2-cycle and a 3-cycle through vertex 0.
  const auto g = graph_from(4, {{0, 1}, {1, 0}, {0, 2}, {2, 3}, {3, 0}});
  EXPECT_EQ(component_period(g, {0, 1, 2, 3}), 1);
  const auto h = graph_from(4, {{0, 1}, {1, 0}, {0, 2}, {2, 3}, {3, 2}, {3, 0}, {1, 3}});
  EXPECT_EQ(component_period(h, {0, 1, 2, 3}), 1);
  // Bipartite: only even cycles.
  const auto b = graph_from(4, {{0, 1}, {1, 0}, {1, 2}, {2, 3}, {3, 2}, {2, 1}});
  EXPECT_EQ(component_period(b, {0, 1, 2, 3}), 2);
}

TEST(Counting, LogOfBigIntegers) {
  EXPECT_EQ(log_big(BigInt(0)), kNegInf);
  EXPECT_DOUBLE_EQ(log_big(BigInt(12345)), std::log(12345.0));
  EXPECT_NEAR(log_big(BigInt(1) << 500), 500 * std::log(2.0), 1e-12);
  EXPECT_NEAR(log_big(BigInt(3) * (BigInt(1) << 300)), std::log(3.0) + 300 * std::log(2.0), 1e-12);
}

TEST(Refine, SingleSetIsItsOwnRectangle) {
  SetSystem sys;
  sys.points = 4;
  sys.sets = {{0, 1, 2, 3}};
  sys.s_fibre = {{{0, 1}, {0, 1}, {2, 3}, {2, 3}}};
  sys.u_fibre = {{{0, 2}, {1, 3}, {0, 2}, {1, 3}}};
  const auto p = refine(sys);
  ASSERT_EQ(p.rectangles.size(), 1u);
  EXPECT_EQ(p.rectangles[0], sys.sets[0]);
}

TEST(Refine, NestedSetsSplitIntoTwoRectangles) {
  SetSystem sys;
  sys.points = 4;
  sys.sets = {{0, 1, 2, 3}, {2, 3}};
  sys.s_fibre = {{{0, 2}, {1, 3}, {0, 2}, {1, 3}}, singleton_fibres({2, 3})};
  sys.u_fibre = {{{0, 1}, {0, 1}, {2, 3}, {2, 3}}, singleton_fibres({2, 3})};
  const auto p = refine(sys);
  EXPECT_EQ(as_sets(p), (std::set<std::set<int>>{{0, 1}, {2, 3}}));
  EXPECT_EQ(as_sets(p), brute_force_rectangles(sys));
  EXPECT_EQ(p.max_sets_per_rectangle, 2u);
  EXPECT_EQ(p.max_rectangles_per_set, 2u);
}

TEST(Refine, DisjointSetsAreAlreadyAPartition) {
  SetSystem sys;
  sys.points = 5;
  sys.sets = {{0, 1}, {2}, {3, 4}};
  for (const auto& z : sys.sets) {
    sys.s_fibre.push_back(singleton_fibres(z));
    sys.u_fibre.push_back(singleton_fibres(z));
  }
  EXPECT_EQ(as_sets(refine(sys)), (std::set<std::set<int>>{{0, 1}, {2}, {3, 4}}));
}

TEST(Refine, RandomSystemsMatchSetAlgebraAndAreIdempotent) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const auto sys = random_system(rng, 6 + trial % 9, 2 + trial % 4);
    const auto p = refine(sys);
    EXPECT_EQ(as_sets(p), brute_force_rectangles(sys));
    std::size_t covered = 0;
    for (const auto& r : p.rectangles) covered += r.size();
    std::set<int> uni;
    for (const auto& z : sys.sets) uni.insert(z.begin(), z.end());
    EXPECT_EQ(covered, uni.size());
    EXPECT_TRUE(same_partition(p, refine(p.system)));
  }
}

TEST(Refine, FibresMustContainTheirMember) {
  SetSystem sys;
  sys.points = 2;
  sys.sets = {{0, 1}};
  sys.s_fibre = {{{1}, {1}}};
  sys.u_fibre = {singleton_fibres({0, 1})};
  EXPECT_THROW(refine(sys), Error);
}

TEST(Bracket, FibreBookkeeping) {
  const auto map = fixture();
  const auto ctx = fixture_context(0.2);
  const auto v = pesin::testing::fixed_point_chart(map, ctx);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto vs = manifolds::random_manifold(ctx, v, manifolds::Kind::Stable, rng);
    const auto vu_x = manifolds::random_manifold(ctx, v, manifolds::Kind::Unstable, rng);
    const auto vu_y = manifolds::random_manifold(ctx, v, manifolds::Kind::Unstable, rng);
    const auto x = manifolds::intersect(ctx, v, vs, vu_x);
    const auto y = manifolds::intersect(ctx, v, vs, vu_y);
    // [x, x] = x, and with y on the s-fibre of x, [x, y] = y and [y, x] = x.
    EXPECT_EQ(smale_bracket(ctx, v, vs, vu_x).w.u, x.w.u);
    EXPECT_EQ(smale_bracket(ctx, v, vs, vu_y).w.u, y.w.u);
    EXPECT_NE(x.w.u, y.w.u);
  }
}

TEST(Bracket, CompatibleWithTheDynamics) {
  const auto map = fixture();
  for (double eps : {0.01, 0.2}) {
    const auto ctx = fixture_context(eps);
    const auto v = pesin::testing::fixed_point_chart(map, ctx);
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const auto vs1 = manifolds::random_manifold(ctx, v, manifolds::Kind::Stable, rng);
      const auto vu0 = manifolds::random_manifold(ctx, v, manifolds::Kind::Unstable, rng);
      const auto vs0 = manifolds::graph_transform_s(map, ctx, v, v, vs1);
      const auto vu1 = manifolds::graph_transform_u(map, ctx, v, v, vu0);
      EXPECT_LT(bracket_step_error(map, ctx, v, v, vs0, vu0, vs1, vu1), 1e-6);
    }
  }
}

TEST(Corpus, EmptyCorpusIsRejected) {
  const FixtureCoding f;
  try {
    build_corpus(f.map, f.ctx, f.alphabet, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyCover);
  }
}

TEST(Cover, FixtureCoverIsTheFixedPoint) {
  const FixtureCoding f;
  const auto corpus = build_corpus(f.map, f.ctx, f.alphabet, {f.word}, {10, 40});
  ASSERT_EQ(corpus.points.size(), 1u);
  EXPECT_EQ(corpus.points[0], (geometry::PhasePoint{0, 0.0, 0.0}));
  const auto cover = build_cover(f.map, f.ctx, f.alphabet, corpus);
  ASSERT_EQ(cover.system.sets.size(), 1u);
  EXPECT_EQ(cover.system.sets[0], std::vector<int>{0});
  EXPECT_EQ(refine(cover.system).rectangles.size(), 1u);
  const auto rep = markov_property_check(f.map, f.ctx, f.alphabet, corpus);
  EXPECT_EQ(rep.checks, 40u);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_EQ(rep.worst, 0.0);
}

TEST(PiHat, FixtureConstantWordGivesTheFixedPoint) {
  const FixtureCoding f;
  const auto tr = pi_hat(f.map, f.ctx, f.alphabet, f.word);
  EXPECT_TRUE(tr.converged);
  EXPECT_EQ(tr.x, (geometry::PhasePoint{0, 0.0, 0.0}));
  // Both fibre directions contract by exactly e^{-1}.
  EXPECT_NEAR(tr.rate, -1.0, 1e-9);
  const auto eq = pi_hat_equivariance(f.map, f.ctx, f.alphabet, f.word);
  EXPECT_EQ(eq.chart_error, 0.0);
  EXPECT_EQ(eq.physical_error, 0.0);
}

TEST(PiHat, ShortWordsAreRejected) {
  const FixtureCoding f;
  Itinerary w = f.word;
  w.vertices.resize(static_cast<std::size_t>(w.anchor) + 3);
  EXPECT_THROW(pi_hat(f.map, f.ctx, f.alphabet, w), Error);
}

TEST(Multiplicity, InjectiveAndDoubleCodings) {
  const auto map = fixture();
  std::vector<std::pair<geometry::PhasePoint, Itinerary>> coded;
  for (int i = 0; i < 5; ++i) coded.push_back({{0, 0.01 * i, 0.0}, Itinerary{{i, i, i}, 1}});
  auto rep = multiplicity_check(map, coded);
  EXPECT_EQ(rep.max_multiplicity, 1u);
  EXPECT_EQ(rep.histogram.at(1), 5u);
  // Second word for the first point, differing in its last letter.
  coded.push_back({{0, 0.0, 0.0}, Itinerary{{0, 0, 7}, 1}});
  // The same word again adds nothing.
  coded.push_back({{0, 1e-12, 0.0}, Itinerary{{0, 0, 0}, 1}});
  rep = multiplicity_check(map, coded);
  EXPECT_EQ(rep.max_multiplicity, 2u);
  EXPECT_EQ(rep.histogram.at(2), 1u);
  EXPECT_EQ(rep.bound_exceeded, 0u);
}

TEST(Stadium, CoverIsLocallyFiniteAndRefinementIdempotent) {
  const auto& s = stadium();
  const auto& corpus = stadium_corpus();
  EXPECT_LT(corpus.equivariance, 1e-6);
  const auto cover = build_cover(s.map, s.ctx, s.alphabet, corpus);
  EXPECT_EQ(cover.system.sets.size(), s.alphabet.stats.relevant);
  EXPECT_GE(cover.max_neighbours, 1u);
  EXPECT_LT(cover.brackets.worst_margin, 0.0);
  const auto part = refine(cover.system);
  EXPECT_TRUE(same_partition(part, refine(part.system)));
  EXPECT_EQ(as_sets(part), brute_force_rectangles(cover.system));
  const auto ext = build_extension(part, corpus);
  EXPECT_EQ(ext.valid_words, ext.words);
  EXPECT_EQ(ext.words, stadium_words().size());
  EXPECT_GE(ext.graph.max_out_degree(), 1u);
}

TEST(Stadium, GeometricMarkovPropertyAndShuffledControl) {
  const auto& s = stadium();
  const auto& corpus = stadium_corpus();
  const auto rep = markov_property_check(s.map, s.ctx, s.alphabet, corpus);
  EXPECT_GT(rep.checks, 1000u);
  EXPECT_LT(rep.rate(), 0.01);
  std::vector<int> owner(corpus.samples.size());
  std::iota(owner.begin(), owner.end(), 0);
  std::mt19937_64 rng(3);
  std::shuffle(owner.begin(), owner.end(), rng);
  EXPECT_GT(markov_property_check(s.map, s.ctx, s.alphabet, corpus, {}, &owner).rate(), 0.5);
}

TEST(Stadium, PiHatReturnsThePeriodicPoint) {
  const auto& s = stadium();
  const auto& words = stadium_words();
  const double bound = -s.ctx.chi / 2 + s.ctx.eps.eps;
  for (std::size_t c = 0; c < words.size(); c += 11) {
    const auto tr = pi_hat(s.map, s.ctx, s.alphabet, words[c]);
    EXPECT_TRUE(tr.converged);
    EXPECT_LT(s.map.distance(tr.x, s.db.centers[c].chart.x), 1e-12);
    EXPECT_LE(tr.rate, bound);
    const auto eq = pi_hat_equivariance(s.map, s.ctx, s.alphabet, words[c]);
    EXPECT_LT(eq.chart_error, 1e-6);
    EXPECT_LT(eq.physical_error, 1e-6);
  }
}

TEST(Stadium, MultiplicityIsFinite) {
  const auto& s = stadium();
  std::vector<std::pair<geometry::PhasePoint, Itinerary>> coded;
  const auto& words = stadium_words();
  for (std::size_t c = 0; c < words.size(); c += 5) {
    Itinerary w = words[c];
    w.vertices.assign(words[c].vertices.begin() + 35, words[c].vertices.end() - 35);
    w.anchor = 15;
    const auto x = coding::project_pi(s.map, s.ctx, s.alphabet, w, 5, 10).x;
    coded.push_back({x, w});
    for (const auto& other : coding::window_end_recodings(s.map, s.ctx, s.alphabet, w)) coded.push_back({x, other});
  }
  const auto rep = multiplicity_check(s.map, coded);
  EXPECT_GE(rep.max_multiplicity, 1u);
  EXPECT_LT(rep.max_multiplicity, 10u);
  EXPECT_EQ(rep.bound_exceeded, 0u);
}
