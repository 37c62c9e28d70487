#include "pesin/markov.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace pesin::markov {

namespace {

double lattice_log(const charts::EpsilonConfig& cfg, long k) { return cfg.log_value(k); }

double scale_by(double x, double log_scale) { return x == 0.0 ? 0.0 : x * std::exp(log_scale); }

Vec2 in_units(const ChartPoint& w, double log_unit) {
  return {scale_by(w.u(0), w.log_scale - log_unit), scale_by(w.u(1), w.log_scale - log_unit)};
}

double slope_of(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() < 2) return 0.0;
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

bool contains_sorted(const std::vector<int>& v, int x) { return std::binary_search(v.begin(), v.end(), x); }

bool meets(const std::vector<int>& a, const std::vector<int>& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return true;
    if (*i < *j) ++i;
    else ++j;
  }
  return false;
}

std::vector<int> intersection_of(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

const DoubleChart& vertex_of(const Alphabet& alphabet, int v) { return alphabet.vertices.at(static_cast<std::size_t>(v)); }

// Whether the chart point w at v lies on the graph m, within tol in units of
// the graph's domain.
bool on_graph(const charts::EpsilonConfig& cfg, const AdmissibleManifold& m, const ChartPoint& w, double tol) {
  const Vec2 u = in_units(w, lattice_log(cfg, m.p_exp));
  const double t = m.kind == manifolds::Kind::Stable ? u(0) : u(1);
  const double s = m.kind == manifolds::Kind::Stable ? u(1) : u(0);
  if (!(std::abs(t) <= 1.0)) return false;
  return std::abs(s - m.value(t)) <= tol;
}

}  // namespace

Corpus build_corpus(const SurfaceMap& map, const ChartContext& ctx, const Alphabet& alphabet,
                    const std::vector<Itinerary>& words, const CorpusOptions& opts) {
  if (words.empty()) fail(ErrorKind::EmptyCover, "empty itinerary corpus");
  Corpus c;
  c.window = opts.window;
  c.depth = opts.depth;
  c.words = words;
  for (std::size_t wi = 0; wi < words.size(); ++wi) {
    const Itinerary& it = words[wi];
    const auto pr = coding::project_pi(map, ctx, alphabet, it, opts.window, opts.depth, opts.strict);
    c.equivariance = std::max(c.equivariance, pr.equivariance);
    for (double e : pr.shadow.step_error) c.step_error = std::max(c.step_error, e);
    for (long n = -opts.window; n <= opts.window; ++n) {
      const std::size_t k = static_cast<std::size_t>(n + opts.window);
      Sample s;
      s.word = static_cast<int>(wi);
      s.time = n;
      s.vertex = it.vertices[static_cast<std::size_t>(it.anchor + n)];
      s.w = pr.shadow.points[k];
      s.x = manifolds::chart_point_apply(map, vertex_of(alphabet, s.vertex).chart, s.w);
      s.vs = pr.shadow.stable[k];
      s.vu = pr.shadow.unstable[k];
      for (std::size_t p = 0; p < c.points.size(); ++p) {
        if (c.points[p].component == s.x.component && map.distance(c.points[p], s.x) <= opts.point_tolerance) {
          s.point = static_cast<int>(p);
          break;
        }
      }
      if (s.point < 0) {
        s.point = static_cast<int>(c.points.size());
        c.points.push_back(s.x);
      }
      if (n > -opts.window) c.samples.back().next = static_cast<int>(c.samples.size());
      c.samples.push_back(std::move(s));
    }
  }
  return c;
}

int SetSystem::member_index(std::size_t i, int p) const {
  const auto& s = sets[i];
  const auto it = std::lower_bound(s.begin(), s.end(), p);
  return it != s.end() && *it == p ? static_cast<int>(it - s.begin()) : -1;
}

void validate_set_system(const SetSystem& sys) {
  if (sys.s_fibre.size() != sys.sets.size() || sys.u_fibre.size() != sys.sets.size()) {
    fail(ErrorKind::InvalidInput, "one fibre list per set");
  }
  for (std::size_t i = 0; i < sys.sets.size(); ++i) {
    const auto& s = sys.sets[i];
    if (!std::is_sorted(s.begin(), s.end()) || std::adjacent_find(s.begin(), s.end()) != s.end()) {
      fail(ErrorKind::InvalidInput, "sets must be sorted and duplicate free");
    }
    if (sys.s_fibre[i].size() != s.size() || sys.u_fibre[i].size() != s.size()) {
      fail(ErrorKind::InvalidInput, "one fibre per member");
    }
    for (std::size_t k = 0; k < s.size(); ++k) {
      for (const auto* f : {&sys.s_fibre[i][k], &sys.u_fibre[i][k]}) {
        if (!std::is_sorted(f->begin(), f->end()) || !contains_sorted(*f, s[k])) {
          fail(ErrorKind::InvalidInput, "a fibre must be sorted and contain its member");
        }
        if (!std::includes(s.begin(), s.end(), f->begin(), f->end())) {
          fail(ErrorKind::InvalidInput, "fibre leaves its set");
        }
      }
      if (s[k] < 0 || static_cast<std::size_t>(s[k]) >= sys.points) fail(ErrorKind::InvalidInput, "point id");
    }
  }
}

std::vector<std::vector<int>> intersecting_sets(const SetSystem& sys) {
  std::vector<std::vector<int>> by_point(sys.points);
  for (std::size_t i = 0; i < sys.sets.size(); ++i) {
    for (int p : sys.sets[i]) by_point[static_cast<std::size_t>(p)].push_back(static_cast<int>(i));
  }
  std::vector<std::set<int>> nb(sys.sets.size());
  for (const auto& owners : by_point) {
    for (int a : owners) nb[static_cast<std::size_t>(a)].insert(owners.begin(), owners.end());
  }
  std::vector<std::vector<int>> out;
  for (const auto& s : nb) out.emplace_back(s.begin(), s.end());
  return out;
}

manifolds::Intersection smale_bracket(const ChartContext& ctx, const DoubleChart& v, const AdmissibleManifold& vs_x,
                                      const AdmissibleManifold& vu_y, bool strict) {
  return manifolds::intersect(ctx, v, vs_x, vu_y, strict);
}

double bracket_step_error(const SurfaceMap& map, const ChartContext& ctx, const DoubleChart& v0,
                          const DoubleChart& v1, const AdmissibleManifold& vs0, const AdmissibleManifold& vu0,
                          const AdmissibleManifold& vs1, const AdmissibleManifold& vu1) {
  const auto b0 = smale_bracket(ctx, v0, vs0, vu0);
  const auto b1 = smale_bracket(ctx, v1, vs1, vu1);
  const double lpm = lattice_log(ctx.eps, v1.pmin_exp());
  const auto jet = charts::chart_jet(map, v0.chart, v0.next, v1.chart, charts::Direction::Forward);
  const Vec2 img = jet.eval_scaled(b0.w.u, b0.w.log_scale, lpm);
  return (img - in_units(b1.w, lpm)).cwiseAbs().maxCoeff();
}

Cover build_cover(const SurfaceMap& map, const ChartContext& ctx, const Alphabet& alphabet, const Corpus& corpus,
                  const CoverOptions& opts) {
  (void)map;
  if (corpus.samples.empty()) fail(ErrorKind::EmptyCover, "no samples");
  // One representative sample per (vertex, point).
  std::map<int, std::map<int, int>> members;
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    const Sample& s = corpus.samples[i];
    members[s.vertex].emplace(s.point, static_cast<int>(i));
  }
  Cover cover;
  cover.system.points = corpus.points.size();
  for (const auto& [v, pts] : members) {
    cover.vertex.push_back(v);
    std::vector<int> set, reps;
    for (const auto& [p, rep] : pts) {
      set.push_back(p);
      reps.push_back(rep);
    }
    std::vector<std::vector<int>> sf(set.size()), uf(set.size());
    for (std::size_t a = 0; a < set.size(); ++a) {
      const Sample& x = corpus.samples[static_cast<std::size_t>(reps[a])];
      for (std::size_t b = 0; b < set.size(); ++b) {
        const Sample& y = corpus.samples[static_cast<std::size_t>(reps[b])];
        if (a == b || on_graph(ctx.eps, x.vs, y.w, opts.fibre_tolerance)) sf[a].push_back(set[b]);
        if (a == b || on_graph(ctx.eps, x.vu, y.w, opts.fibre_tolerance)) uf[a].push_back(set[b]);
      }
    }
    cover.system.sets.push_back(std::move(set));
    cover.system.s_fibre.push_back(std::move(sf));
    cover.system.u_fibre.push_back(std::move(uf));
    cover.representative.push_back(std::move(reps));
  }
  validate_set_system(cover.system);
  cover.neighbours = intersecting_sets(cover.system);
  for (const auto& nb : cover.neighbours) cover.max_neighbours = std::max(cover.max_neighbours, nb.size());

  // Product structure: [x, y] is a single point inside the chart box.
  for (std::size_t i = 0; i < cover.system.sets.size(); ++i) {
    const DoubleChart& v = vertex_of(alphabet, cover.vertex[i]);
    const auto& reps = cover.representative[i];
    std::size_t done = 0;
    for (std::size_t a = 0; a < reps.size() && done < opts.bracket_pairs; ++a) {
      for (std::size_t b = 0; b < reps.size() && done < opts.bracket_pairs; ++b, ++done) {
        const auto I = smale_bracket(ctx, v, corpus.samples[static_cast<std::size_t>(reps[a])].vs,
                                     corpus.samples[static_cast<std::size_t>(reps[b])].vu, opts.strict);
        ++cover.brackets.checked;
        cover.brackets.worst_margin = std::max(cover.brackets.worst_margin, I.bound_margin);
      }
    }
  }
  return cover;
}

Signature point_signature(const SetSystem& sys, const std::vector<std::vector<int>>& neighbours, int p) {
  Signature sig;
  for (std::size_t i = 0; i < sys.sets.size(); ++i) {
    const int k = sys.member_index(i, p);
    if (k < 0) continue;
    const auto& sf = sys.s_fibre[i][static_cast<std::size_t>(k)];
    const auto& uf = sys.u_fibre[i][static_cast<std::size_t>(k)];
    for (int j : neighbours[i]) {
      const auto& zj = sys.sets[static_cast<std::size_t>(j)];
      const int code = (meets(sf, zj) ? 2 : 0) + (meets(uf, zj) ? 1 : 0);
      sig.push_back({static_cast<int>(i), j, code});
    }
  }
  return sig;
}

Partition refine(const SetSystem& sys) {
  validate_set_system(sys);
  const auto nb = intersecting_sets(sys);
  Partition part;
  part.rectangle_of.assign(sys.points, -1);
  std::map<Signature, int> index;
  for (std::size_t p = 0; p < sys.points; ++p) {
    Signature sig = point_signature(sys, nb, static_cast<int>(p));
    if (sig.empty()) continue;
    auto [it, fresh] = index.emplace(sig, static_cast<int>(part.rectangles.size()));
    if (fresh) {
      part.rectangles.emplace_back();
      part.signatures.push_back(std::move(sig));
    }
    part.rectangles[static_cast<std::size_t>(it->second)].push_back(static_cast<int>(p));
    part.rectangle_of[p] = it->second;
  }

  part.system.points = sys.points;
  part.system.sets = part.rectangles;
  for (std::size_t r = 0; r < part.rectangles.size(); ++r) {
    const auto& R = part.rectangles[r];
    std::vector<std::vector<int>> sf, uf;
    for (int p : R) {
      // Any set containing p induces the same trace on R.
      const std::size_t i = static_cast<std::size_t>(part.signatures[r].front()[0]);
      const std::size_t k = static_cast<std::size_t>(sys.member_index(i, p));
      sf.push_back(intersection_of(sys.s_fibre[i][k], R));
      uf.push_back(intersection_of(sys.u_fibre[i][k], R));
    }
    part.system.s_fibre.push_back(std::move(sf));
    part.system.u_fibre.push_back(std::move(uf));
    std::set<int> owners;
    for (const auto& t : part.signatures[r]) owners.insert(t[0]);
    part.max_sets_per_rectangle = std::max(part.max_sets_per_rectangle, owners.size());
  }
  for (const auto& Z : sys.sets) {
    std::set<int> rs;
    for (int p : Z) rs.insert(part.rectangle_of[static_cast<std::size_t>(p)]);
    part.max_rectangles_per_set = std::max(part.max_rectangles_per_set, rs.size());
  }
  return part;
}

bool same_partition(const Partition& a, const Partition& b) {
  auto ra = a.rectangles, rb = b.rectangles;
  std::sort(ra.begin(), ra.end());
  std::sort(rb.begin(), rb.end());
  return ra == rb;
}

Extension build_extension(const Partition& partition, const Corpus& corpus) {
  Extension ext;
  ext.graph.out.resize(partition.rectangles.size());
  ext.graph.in.resize(partition.rectangles.size());
  for (const Sample& s : corpus.samples) {
    ext.rectangle_of_sample.push_back(partition.rectangle_of.at(static_cast<std::size_t>(s.point)));
  }
  std::set<std::pair<int, int>> edges;
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    const int t = corpus.samples[i].next;
    if (t < 0) continue;
    const int a = ext.rectangle_of_sample[i], b = ext.rectangle_of_sample[static_cast<std::size_t>(t)];
    if (a >= 0 && b >= 0) edges.emplace(a, b);
  }
  for (const auto& [a, b] : edges) {
    ext.graph.out[static_cast<std::size_t>(a)].push_back(b);
    ext.graph.in[static_cast<std::size_t>(b)].push_back(a);
  }
  // Chains start at samples nobody points to.
  std::vector<bool> has_prev(corpus.samples.size(), false);
  for (const Sample& s : corpus.samples) {
    if (s.next >= 0) has_prev[static_cast<std::size_t>(s.next)] = true;
  }
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    if (has_prev[i]) continue;
    ++ext.words;
    bool ok = ext.rectangle_of_sample[i] >= 0;
    for (std::size_t k = i; ok && corpus.samples[k].next >= 0; k = static_cast<std::size_t>(corpus.samples[k].next)) {
      const int b = ext.rectangle_of_sample[static_cast<std::size_t>(corpus.samples[k].next)];
      ok = b >= 0 && ext.graph.has_edge(ext.rectangle_of_sample[k], b);
    }
    if (ok) ++ext.valid_words;
  }
  return ext;
}

CylinderTrace pi_hat(const SurfaceMap& map, const ChartContext& ctx, const Alphabet& alphabet, const Itinerary& it,
                     const CylinderOptions& opts) {
  const auto& cfg = ctx.eps;
  const long a = it.anchor;
  const long size = static_cast<long>(it.vertices.size());
  auto at = [&](long i) -> const DoubleChart& { return vertex_of(alphabet, it.vertices[static_cast<std::size_t>(i)]); };
  const DoubleChart& v0 = at(a);
  const double lpm = lattice_log(cfg, v0.pmin_exp());
  const double log_c = std::log(0.5e-3);

  auto pull_s = [&](long n, AdmissibleManifold m) {
    for (long k = a + n - 1; k >= a; --k) m = manifolds::graph_transform_s(map, ctx, at(k), at(k + 1), m);
    return m;
  };
  auto push_u = [&](long n, AdmissibleManifold m) {
    for (long k = a - n; k < a; ++k) m = manifolds::graph_transform_u(map, ctx, at(k), at(k + 1), m);
    return m;
  };
  auto corner = [&](const AdmissibleManifold& s, const AdmissibleManifold& u) {
    try {
      return manifolds::intersect(ctx, v0, s, u);
    } catch (const Error& e) {
      fail(ErrorKind::CylinderEmpty, std::string("cylinder hull corner: ") + e.what(), a);
    }
  };

  CylinderTrace tr;
  std::vector<double> xs, ys;
  long n = 1;
  for (;; ++n) {
    if (a - n < 0 || a + n >= size) fail(ErrorKind::InvalidInput, "word too short for the cylinder depth", n);
    const DoubleChart& vs_end = at(a + n);
    const DoubleChart& vu_end = at(a - n);
    std::array<AdmissibleManifold, 2> S, U;
    for (int k = 0; k < 2; ++k) {
      const double sign = k == 0 ? 1.0 : -1.0;
      S[static_cast<std::size_t>(k)] = pull_s(n, manifolds::constant_manifold(
          cfg, vs_end, manifolds::Kind::Stable, log_c + lattice_log(cfg, vs_end.pmin_exp()), sign));
      U[static_cast<std::size_t>(k)] = push_u(n, manifolds::constant_manifold(
          cfg, vu_end, manifolds::Kind::Unstable, log_c + lattice_log(cfg, vu_end.pmin_exp()), sign));
    }
    std::vector<Vec2> corners;
    for (const auto& s : S) {
      for (const auto& u : U) corners.push_back(in_units(corner(s, u).w, lpm));
    }
    double diam = 0.0;
    for (std::size_t i = 0; i < corners.size(); ++i) {
      for (std::size_t j = i + 1; j < corners.size(); ++j) {
        diam = std::max(diam, (corners[i] - corners[j]).cwiseAbs().maxCoeff());
      }
    }
    tr.depth.push_back(n);
    tr.log_diameter.push_back(safe_log(diam));
    if (diam > 0.0) {
      xs.push_back(static_cast<double>(n));
      ys.push_back(std::log(diam));
    }
    if (diam <= opts.stop_diameter) {
      tr.converged = true;
      break;
    }
    if (n >= opts.max_depth) break;
  }
  tr.rate = slope_of(xs, ys);
  const auto z = corner(pull_s(n, manifolds::zero_manifold(cfg, at(a + n), manifolds::Kind::Stable)),
                        push_u(n, manifolds::zero_manifold(cfg, at(a - n), manifolds::Kind::Unstable)));
  tr.point = z.w;
  tr.x = manifolds::chart_point_apply(map, v0.chart, z.w);
  return tr;
}

PiHatEquivariance pi_hat_equivariance(const SurfaceMap& map, const ChartContext& ctx, const Alphabet& alphabet,
                                      const Itinerary& it, const CylinderOptions& opts) {
  Itinerary shifted = it;
  ++shifted.anchor;
  const auto t0 = pi_hat(map, ctx, alphabet, it, opts);
  const auto t1 = pi_hat(map, ctx, alphabet, shifted, opts);
  const DoubleChart& v0 = vertex_of(alphabet, it.vertices[static_cast<std::size_t>(it.anchor)]);
  const DoubleChart& v1 = vertex_of(alphabet, it.vertices[static_cast<std::size_t>(shifted.anchor)]);
  const double lpm = lattice_log(ctx.eps, v1.pmin_exp());
  const auto jet = charts::chart_jet(map, v0.chart, v0.next, v1.chart, charts::Direction::Forward);
  const Vec2 img = jet.eval_scaled(t0.point.u, t0.point.log_scale, lpm);
  PiHatEquivariance eq;
  eq.chart_error = (img - in_units(t1.point, lpm)).cwiseAbs().maxCoeff();
  eq.physical_error = map.distance(map.forward(t0.x), t1.x);
  return eq;
}

MarkovReport markov_property_check(const SurfaceMap& map, const ChartContext& ctx, const Alphabet& alphabet,
                                   const Corpus& corpus, const MarkovOptions& opts, const std::vector<int>* owner) {
  const auto& cfg = ctx.eps;
  if (owner && owner->size() != corpus.samples.size()) fail(ErrorKind::InvalidInput, "one owner per sample");
  auto owner_of = [&](std::size_t i) { return owner ? static_cast<std::size_t>((*owner)[i]) : i; };
  MarkovReport rep;
  const int nodes = std::max(opts.nodes, 2);

  // Pushes the fibre of sample src through g into the chart of sample dst and
  // compares with dst's fibre of the same kind.
  auto check = [&](std::size_t src, std::size_t dst, manifolds::Kind kind) {
    const Sample& a = corpus.samples[src];
    const Sample& b = corpus.samples[dst];
    const AdmissibleManifold& in = kind == manifolds::Kind::Stable ? a.vs : a.vu;
    const AdmissibleManifold& target = kind == manifolds::Kind::Stable ? b.vs : b.vu;
    const DoubleChart& va = vertex_of(alphabet, a.vertex);
    const DoubleChart& vb = vertex_of(alphabet, b.vertex);
    ++rep.checks;
    double worst = 0.0;
    try {
      const auto jet = kind == manifolds::Kind::Stable
                           ? charts::chart_jet(map, va.chart, va.next, vb.chart, charts::Direction::Forward)
                           : charts::chart_jet(map, va.chart, va.prev, vb.chart, charts::Direction::Backward);
      const double lin = lattice_log(cfg, in.p_exp), lout = lattice_log(cfg, target.p_exp);
      for (int k = 0; k < nodes; ++k) {
        const double tau = -1.0 + 2.0 * k / (nodes - 1);
        const double f = in.value(tau);
        const Vec2 u = kind == manifolds::Kind::Stable ? Vec2(tau, f) : Vec2(f, tau);
        const Vec2 img = jet.eval_scaled(u, lin, lout);
        const double t = kind == manifolds::Kind::Stable ? img(0) : img(1);
        const double s = kind == manifolds::Kind::Stable ? img(1) : img(0);
        const double r = std::abs(t) <= 1.0 ? std::abs(s - target.value(t)) : kInf;
        worst = std::max(worst, std::isnan(r) ? kInf : r);
      }
    } catch (const Error&) {
      worst = kInf;
    }
    rep.worst = std::max(rep.worst, worst);
    if (!(worst <= opts.tolerance)) ++rep.violations;
  };

  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    const int t = corpus.samples[i].next;
    if (t < 0) continue;
    check(owner_of(i), static_cast<std::size_t>(t), manifolds::Kind::Stable);
    check(owner_of(static_cast<std::size_t>(t)), i, manifolds::Kind::Unstable);
  }
  return rep;
}

MultiplicityReport multiplicity_check(const SurfaceMap& map,
                                      const std::vector<std::pair<PhasePoint, Itinerary>>& coded, double tolerance) {
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<PhasePoint> centers;
  for (std::size_t i = 0; i < coded.size(); ++i) {
    const PhasePoint& x = coded[i].first;
    std::size_t c = 0;
    for (; c < centers.size(); ++c) {
      if (centers[c].component == x.component && map.distance(centers[c], x) <= tolerance) break;
    }
    if (c == centers.size()) {
      centers.push_back(x);
      clusters.emplace_back();
    }
    clusters[c].push_back(i);
  }
  MultiplicityReport rep;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    long half = std::numeric_limits<long>::max();
    for (std::size_t i : clusters[c]) {
      const auto& it = coded[i].second;
      half = std::min({half, it.anchor, static_cast<long>(it.vertices.size()) - 1 - it.anchor});
    }
    std::set<std::vector<int>> words;
    std::set<int> first, last;
    for (std::size_t i : clusters[c]) {
      const auto& it = coded[i].second;
      const auto b = it.vertices.begin() + (it.anchor - half);
      std::vector<int> w(b, b + 2 * half + 1);
      first.insert(w.front());
      last.insert(w.back());
      words.insert(std::move(w));
    }
    MultiplicityCluster mc{centers[c], words.size(), first.size() * last.size()};
    ++rep.histogram[mc.words];
    rep.max_multiplicity = std::max(rep.max_multiplicity, mc.words);
    if (mc.words > mc.end_bound) ++rep.bound_exceeded;
    rep.clusters.push_back(mc);
  }
  return rep;
}

std::vector<std::vector<int>> strongly_connected_components(const ShiftGraph& g) {
  const int n = static_cast<int>(g.size());
  std::vector<int> index(static_cast<std::size_t>(n), -1), low(static_cast<std::size_t>(n), 0);
  std::vector<bool> on_stack(static_cast<std::size_t>(n), false);
  std::vector<int> stack;
  std::vector<std::vector<int>> comps;
  int counter = 0;
  // Iterative Tarjan: frames of (vertex, next out-edge position).
  std::vector<std::pair<int, std::size_t>> frames;
  for (int root = 0; root < n; ++root) {
    if (index[static_cast<std::size_t>(root)] >= 0) continue;
    frames.emplace_back(root, 0);
    while (!frames.empty()) {
      auto& [v, pos] = frames.back();
      const std::size_t vi = static_cast<std::size_t>(v);
      if (pos == 0 && index[vi] < 0) {
        index[vi] = low[vi] = counter++;
        stack.push_back(v);
        on_stack[vi] = true;
      }
      if (pos < g.out[vi].size()) {
        const int w = g.out[vi][pos++];
        const std::size_t wi = static_cast<std::size_t>(w);
        if (index[wi] < 0) {
          frames.emplace_back(w, 0);
        } else if (on_stack[wi]) {
          low[vi] = std::min(low[vi], index[wi]);
        }
        continue;
      }
      if (low[vi] == index[vi]) {
        std::vector<int> comp;
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[static_cast<std::size_t>(w)] = false;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
      }
      const int done = v;
      frames.pop_back();
      if (!frames.empty()) {
        const std::size_t parent = static_cast<std::size_t>(frames.back().first);
        low[parent] = std::min(low[parent], low[static_cast<std::size_t>(done)]);
      }
    }
  }
  return comps;
}

long component_period(const ShiftGraph& g, const std::vector<int>& component) {
  if (component.empty()) return 0;
  std::map<int, long> level;
  std::vector<int> queue{component.front()};
  level[component.front()] = 0;
  for (std::size_t q = 0; q < queue.size(); ++q) {
    const int v = queue[q];
    for (int w : g.out[static_cast<std::size_t>(v)]) {
      if (!contains_sorted(component, w) || level.count(w)) continue;
      level[w] = level[v] + 1;
      queue.push_back(w);
    }
  }
  long p = 0;
  for (int v : component) {
    for (int w : g.out[static_cast<std::size_t>(v)]) {
      if (!contains_sorted(component, w)) continue;
      p = std::gcd(p, std::abs(level[v] + 1 - level[w]));
    }
  }
  return p;
}

std::vector<BigInt> count_periodic_words(const ShiftGraph& g, int n_max) {
  std::vector<BigInt> N(static_cast<std::size_t>(std::max(n_max, 0)) + 1, 0);
  N[0] = g.size();
  for (const auto& comp : strongly_connected_components(g)) {
    // Closed walks never leave a strongly connected component.
    std::vector<int> local(g.size(), -1);
    for (std::size_t i = 0; i < comp.size(); ++i) local[static_cast<std::size_t>(comp[i])] = static_cast<int>(i);
    std::vector<std::vector<int>> out(comp.size());
    std::size_t edges = 0;
    for (std::size_t i = 0; i < comp.size(); ++i) {
      for (int w : g.out[static_cast<std::size_t>(comp[i])]) {
        const int lw = local[static_cast<std::size_t>(w)];
        if (lw >= 0) {
          out[i].push_back(lw);
          ++edges;
        }
      }
    }
    if (edges == 0) continue;
    for (std::size_t s = 0; s < comp.size(); ++s) {
      std::vector<BigInt> cur(comp.size(), 0), nxt(comp.size(), 0);
      cur[s] = 1;
      for (int n = 1; n <= n_max; ++n) {
        std::fill(nxt.begin(), nxt.end(), 0);
        for (std::size_t v = 0; v < comp.size(); ++v) {
          if (cur[v] == 0) continue;
          for (int w : out[v]) nxt[static_cast<std::size_t>(w)] += cur[v];
        }
        std::swap(cur, nxt);
        N[static_cast<std::size_t>(n)] += cur[s];
      }
    }
  }
  return N;
}

double log_big(const BigInt& x) {
  if (x <= 0) return kNegInf;
  const unsigned bits = boost::multiprecision::msb(x);
  if (bits < 53) return std::log(x.convert_to<double>());
  const unsigned shift = bits - 52;
  const BigInt top = x >> shift;
  return std::log(top.convert_to<double>()) + static_cast<double>(shift) * std::log(2.0);
}

EntropyEstimate entropy_estimate(const ShiftGraph& g, int n_max) {
  EntropyEstimate est;
  const auto comps = strongly_connected_components(g);
  const std::vector<int>* best = nullptr;
  std::size_t best_edges = 0;
  for (const auto& comp : comps) {
    std::size_t edges = 0;
    for (int v : comp) {
      for (int w : g.out[static_cast<std::size_t>(v)]) edges += contains_sorted(comp, w) ? 1 : 0;
    }
    if (edges == 0) continue;
    if (!best || comp.size() > best->size() || (comp.size() == best->size() && edges > best_edges)) {
      best = &comp;
      best_edges = edges;
    }
  }
  if (best) {
    std::vector<bool> keep(g.size(), false);
    for (int v : *best) keep[static_cast<std::size_t>(v)] = true;
    const ShiftGraph sub = g.induced(keep);
    est.component_size = best->size();
    est.period = component_period(g, *best);
    est.component_counts = count_periodic_words(sub, n_max);
    std::vector<double> xs, ys;
    for (int n = std::max(1, n_max / 2); n <= n_max; ++n) {
      if (n % est.period != 0 || est.component_counts[static_cast<std::size_t>(n)] == 0) continue;
      xs.push_back(n);
      ys.push_back(log_big(est.component_counts[static_cast<std::size_t>(n)]));
    }
    est.h = slope_of(xs, ys);
  }
  const auto all = count_periodic_words(g, n_max);
  est.growth.assign(all.size(), kNegInf);
  for (int n = 1; n <= n_max; ++n) est.growth[static_cast<std::size_t>(n)] = log_big(all[static_cast<std::size_t>(n)]) / n;
  double lo = kInf, hi = -kInf, sum = 0.0;
  int cnt = 0;
  for (int n = std::max(1, n_max - 9); n <= n_max; ++n) {
    const double v = est.growth[static_cast<std::size_t>(n)];
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
    ++cnt;
  }
  if (cnt == 0 || !std::isfinite(lo)) {
    est.variation = kInf;
  } else {
    const double mean = sum / cnt;
    est.variation = hi == lo ? 0.0 : (mean != 0.0 ? (hi - lo) / std::abs(mean) : kInf);
  }
  return est;
}

}  // namespace pesin::markov
