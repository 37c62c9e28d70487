#include "pesin/coding.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>

namespace pesin::coding {

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  // splitmix64 finaliser over the running hash.
  std::uint64_t z = h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

long floor_log(double x) { return static_cast<long>(std::floor(std::log(x))); }

}  // namespace

std::uint64_t cover_cell(const SurfaceMap& map, const geometry::RegularityConstants& consts, const PhasePoint& x,
                         double dist) {
  const double r = consts.r_map(dist);
  const long level = std::clamp(static_cast<long>(std::ceil(std::log2(1.0 / (2.0 * r)))), 0L, 60L);
  const double side = std::ldexp(1.0, static_cast<int>(-level));
  const Vec2 X = map.to_metric(x);
  std::uint64_t h = mix(0, static_cast<std::uint64_t>(x.component));
  h = mix(h, static_cast<std::uint64_t>(level));
  h = mix(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(X(0) / side))));
  return mix(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(X(1) / side))));
}

CenterDatabase build_centers(const SurfaceMap& map, const ChartContext& ctx,
                             const geometry::RegularityConstants& consts,
                             const std::vector<geometry::PeriodicOrbit>& cycles, const CenterOptions& opts) {
  CenterDatabase db;
  for (std::size_t ci = 0; ci < cycles.size(); ++ci) {
    const auto& pts = cycles[ci].points;
    const long p = static_cast<long>(pts.size());
    std::vector<PesinChart> charts;
    try {
      const auto seg = linear::periodic_segment(map, pts, opts.half_window, opts.half_window + p);
      const auto split = linear::oseledets_splitting(seg);
      const auto su = linear::s_u_parameters(seg, split, ctx.chi);
      const auto frames = linear::frames_along(seg, split, su, ctx.chi);
      if (!frames.contains(0) || !frames.contains(p)) fail(ErrorKind::SplittingNotConverged, "frames do not cover a period");
      // One frame per cycle point, reused around the cycle so that the data at
      // x_{p} is bitwise the data at x_0.
      for (long i = 0; i < p; ++i) {
        const std::size_t k = seg.index(i);
        const auto& fx = frames.at((i + 1) % p);
        linear::reduced_cocycle(frames.at(i), fx, seg.df[k]);
        charts.push_back(charts::make_chart(ctx, consts, seg.points[k], frames.at(i), fx, seg.dist[k], seg.rho[k]));
      }
    } catch (const Error& e) {
      db.rejected.push_back("cycle " + std::to_string(ci) + ": " + e.what());
      continue;
    }
    const int base = static_cast<int>(db.centers.size());
    std::vector<int> ids;
    for (long i = 0; i < p; ++i) {
      Center c;
      c.id = base + static_cast<int>(i);
      c.cycle = static_cast<int>(db.cycles.size());
      c.index = static_cast<int>(i);
      c.chart = charts[static_cast<std::size_t>(i)];
      c.next = base + static_cast<int>((i + 1) % p);
      c.prev = base + static_cast<int>((i + p - 1) % p);
      db.centers.push_back(c);
      ids.push_back(c.id);
    }
    for (int id : ids) {
      Center& c = db.centers[static_cast<std::size_t>(id)];
      const std::array<int, 3> nb{c.prev, c.id, c.next};
      for (int i = 0; i < 3; ++i) {
        const PesinChart& ch = db.centers[static_cast<std::size_t>(nb[i])].chart;
        c.k[i] = -floor_log(ch.dist) - 1;
        c.l[i] = floor_log(ch.frame.c_inv_frob());
        c.a[i] = cover_cell(map, consts, ch.x, ch.dist);
      }
      c.m = static_cast<long>(std::ceil(-c.chart.log_Q(ctx.eps))) - 1;
    }
    db.cycles.push_back(ids);
  }
  return db;
}

void periodic_greedy(const EpsilonConfig& cfg, const std::vector<long>& q_exps, std::vector<long>& ps,
                     std::vector<long>& pu) {
  const long p = static_cast<long>(q_exps.size());
  const long d = cfg.delta_exponent();
  ps.assign(q_exps.size(), 0);
  pu.assign(q_exps.size(), 0);
  auto at = [&](long n) { return q_exps[static_cast<std::size_t>(((n % p) + p) % p)] + d; };
  for (long n = 0; n < p; ++n) {
    long s = at(n), u = at(n);
    for (long k = 1; k < p; ++k) {
      s = std::max(s, at(n + k) - 3 * k);
      u = std::max(u, at(n - k) - 3 * k);
    }
    ps[static_cast<std::size_t>(n)] = s;
    pu[static_cast<std::size_t>(n)] = u;
  }
}

std::size_t ShiftGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& o : out) n += o.size();
  return n;
}

bool ShiftGraph::has_edge(int a, int b) const {
  if (a < 0 || static_cast<std::size_t>(a) >= out.size()) return false;
  const auto& o = out[static_cast<std::size_t>(a)];
  return std::find(o.begin(), o.end(), b) != o.end();
}

std::size_t ShiftGraph::max_out_degree() const {
  std::size_t m = 0;
  for (const auto& o : out) m = std::max(m, o.size());
  return m;
}

std::size_t ShiftGraph::max_in_degree() const {
  std::size_t m = 0;
  for (const auto& i : in) m = std::max(m, i.size());
  return m;
}

ShiftGraph ShiftGraph::induced(const std::vector<bool>& keep, std::vector<int>* map) const {
  std::vector<int> renum(size(), -1);
  std::vector<int> old;
  for (std::size_t i = 0; i < size(); ++i) {
    if (keep[i]) {
      renum[i] = static_cast<int>(old.size());
      old.push_back(static_cast<int>(i));
    }
  }
  ShiftGraph g;
  g.out.resize(old.size());
  g.in.resize(old.size());
  for (std::size_t i = 0; i < old.size(); ++i) {
    for (int b : out[static_cast<std::size_t>(old[i])]) {
      const int nb = renum[static_cast<std::size_t>(b)];
      if (nb < 0) continue;
      g.out[i].push_back(nb);
      g.in[static_cast<std::size_t>(nb)].push_back(static_cast<int>(i));
    }
  }
  if (map) *map = old;
  return g;
}

std::vector<bool> trim(const ShiftGraph& g) {
  const std::size_t n = g.size();
  std::vector<bool> keep(n, true);
  std::vector<std::size_t> indeg(n), outdeg(n);
  std::deque<int> queue;
  for (std::size_t i = 0; i < n; ++i) {
    indeg[i] = g.in[i].size();
    outdeg[i] = g.out[i].size();
    if (indeg[i] == 0 || outdeg[i] == 0) {
      keep[i] = false;
      queue.push_back(static_cast<int>(i));
    }
  }
  while (!queue.empty()) {
    const auto v = static_cast<std::size_t>(queue.front());
    queue.pop_front();
    for (int w : g.out[v]) {
      const auto k = static_cast<std::size_t>(w);
      if (keep[k] && --indeg[k] == 0) {
        keep[k] = false;
        queue.push_back(w);
      }
    }
    for (int u : g.in[v]) {
      const auto k = static_cast<std::size_t>(u);
      if (keep[k] && --outdeg[k] == 0) {
        keep[k] = false;
        queue.push_back(u);
      }
    }
  }
  return keep;
}

int Alphabet::find(int center, long ps_exp, long pu_exp) const {
  const auto it = index_.find({center, ps_exp, pu_exp});
  return it == index_.end() ? -1 : it->second;
}

ShiftGraph Alphabet::relevant_graph(std::vector<int>* map) const { return graph.induced(relevant, map); }

void reindex(Alphabet& alphabet) {
  alphabet.index_.clear();
  for (std::size_t i = 0; i < alphabet.vertices.size(); ++i) {
    const auto& v = alphabet.vertices[i];
    alphabet.index_[{v.center, v.ps_exp, v.pu_exp}] = static_cast<int>(i);
  }
}

BinKey bin_of(const Center& c) { return BinKey{c.k, c.l, c.a, c.m}; }

namespace {

// (a) at i = -1, 0, 1 with radius e^{-8(j+2)} and (b) Q ratio within e^{±ε/3}.
bool net_close(const SurfaceMap& map, const CenterDatabase& db, int x, int y, long j) {
  const Center& cx = db.centers[static_cast<std::size_t>(x)];
  const Center& cy = db.centers[static_cast<std::size_t>(y)];
  if (std::abs(cx.chart.q_exp - cy.chart.q_exp) > 1) return false;
  const double log_radius = -8.0 * static_cast<double>(j + 2);
  const std::array<std::pair<int, int>, 3> pairs{{{cx.prev, cy.prev}, {x, y}, {cx.next, cy.next}}};
  for (const auto& [a, b] : pairs) {
    const double d = charts::log_chart_distance(map, db.centers[static_cast<std::size_t>(a)].chart,
                                                db.centers[static_cast<std::size_t>(b)].chart);
    if (!(d < log_radius)) return false;
  }
  return true;
}

struct Labels {
  std::vector<long> ps;
  std::vector<long> pu;
};

// Greedy labels of every center from its own cycle.
Labels natural_labels(const EpsilonConfig& cfg, const CenterDatabase& db) {
  Labels L;
  L.ps.assign(db.centers.size(), 0);
  L.pu.assign(db.centers.size(), 0);
  for (const auto& ids : db.cycles) {
    std::vector<long> q, ps, pu;
    for (int id : ids) q.push_back(db.centers[static_cast<std::size_t>(id)].chart.q_exp);
    periodic_greedy(cfg, q, ps, pu);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      L.ps[static_cast<std::size_t>(ids[i])] = ps[i];
      L.pu[static_cast<std::size_t>(ids[i])] = pu[i];
    }
  }
  return L;
}

}  // namespace

Alphabet coarse_grain(const SurfaceMap& map, const ChartContext& ctx, const CenterDatabase& db,
                      const AlphabetOptions& opts) {
  const EpsilonConfig& cfg = ctx.eps;
  const long d = cfg.delta_exponent();
  const long K = opts.label_window;
  const Labels nat = natural_labels(cfg, db);

  std::map<BinKey, std::vector<int>> bins;
  for (const auto& c : db.centers) bins[bin_of(c)].push_back(c.id);

  // Candidate (p^s, p^u) of each center: at least δ_ε Q and within the label window.
  auto candidates = [&](int id) {
    std::vector<std::pair<long, long>> out;
    const long floor = db.centers[static_cast<std::size_t>(id)].chart.q_exp + d;
    for (long ds = -K; ds <= K; ++ds) {
      for (long du = -K; du <= K; ++du) {
        const long ps = nat.ps[static_cast<std::size_t>(id)] + ds, pu = nat.pu[static_cast<std::size_t>(id)] + du;
        if (ps >= floor && pu >= floor) out.emplace_back(ps, pu);
      }
    }
    return out;
  };

  Alphabet A;
  A.eps = cfg.eps;
  A.label_window = K;
  for (const auto& [key, members] : bins) {
    std::map<long, std::vector<int>> by_j;
    for (int id : members) {
      for (const auto& [ps, pu] : candidates(id)) {
        auto& list = by_j[size_scale(cfg, std::max(ps, pu))];
        if (list.empty() || list.back() != id) list.push_back(id);
      }
    }
    for (const auto& [j, ids] : by_j) {
      std::vector<int> net;
      for (int id : ids) {
        const bool covered =
            std::any_of(net.begin(), net.end(), [&](int s) { return net_close(map, db, id, s, j); });
        if (!covered) net.push_back(id);
      }
      A.nets[{key, j}] = net;
      for (int id : net) {
        const Center& c = db.centers[static_cast<std::size_t>(id)];
        for (const auto& [ps, pu] : candidates(id)) {
          if (size_scale(cfg, std::max(ps, pu)) != j) continue;
          DoubleChart v;
          v.center = id;
          v.chart = c.chart;
          v.next = db.centers[static_cast<std::size_t>(c.next)].chart;
          v.prev = db.centers[static_cast<std::size_t>(c.prev)].chart;
          v.ps_exp = ps;
          v.pu_exp = pu;
          v.bin = BinSignature{c.k, c.l, c.a, c.m, j};
          validate_double_chart(cfg, v);
          A.vertices.push_back(v);
        }
      }
    }
  }
  A.stats.bins = bins.size();
  for (const auto& [k, net] : A.nets) A.stats.net_centers += net.size();
  A.stats.candidates = A.vertices.size();

  std::unordered_map<std::uint64_t, std::vector<int>> by_cell;
  for (std::size_t i = 0; i < A.vertices.size(); ++i) by_cell[A.vertices[i].bin.a[1]].push_back(static_cast<int>(i));
  A.graph.out.assign(A.vertices.size(), {});
  A.graph.in.assign(A.vertices.size(), {});
  for (std::size_t i = 0; i < A.vertices.size(); ++i) {
    const auto it = by_cell.find(A.vertices[i].bin.a[2]);
    if (it == by_cell.end()) continue;
    for (int w : it->second) {
      ++A.stats.edge_tests;
      if (edge_test(map, cfg, A.vertices[i], A.vertices[static_cast<std::size_t>(w)])) {
        A.graph.out[i].push_back(w);
        A.graph.in[static_cast<std::size_t>(w)].push_back(static_cast<int>(i));
      }
    }
  }
  A.relevant = trim(A.graph);
  A.stats.edges = A.graph.edge_count();
  A.stats.relevant = static_cast<std::size_t>(std::count(A.relevant.begin(), A.relevant.end(), true));
  const ShiftGraph rg = A.relevant_graph();
  A.stats.max_out_degree = rg.max_out_degree();
  A.stats.max_in_degree = rg.max_in_degree();
  if (A.stats.relevant == 0) fail(ErrorKind::EmptyAlphabet, "no vertex lies on a bi-infinite path");
  reindex(A);
  return A;
}

std::size_t count_above(const Alphabet& alphabet, long t_exp) {
  std::vector<long> sizes;
  for (std::size_t i = 0; i < alphabet.vertices.size(); ++i) {
    if (alphabet.relevant[i]) sizes.push_back(alphabet.vertices[i].pmin_exp());
  }
  std::sort(sizes.begin(), sizes.end());
  return static_cast<std::size_t>(std::lower_bound(sizes.begin(), sizes.end(), t_exp) - sizes.begin());
}

std::size_t count_above_scan(const Alphabet& alphabet, long t_exp) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < alphabet.vertices.size(); ++i) {
    const auto& v = alphabet.vertices[i];
    if (alphabet.relevant[i] && v.ps_exp < t_exp && v.pu_exp < t_exp) ++n;
  }
  return n;
}

bool is_path(const ShiftGraph& g, const Itinerary& it) {
  for (std::size_t i = 0; i + 1 < it.vertices.size(); ++i) {
    if (!g.has_edge(it.vertices[i], it.vertices[i + 1])) return false;
  }
  return true;
}

std::vector<int> orbit_window(const CenterDatabase& db, int center, long half) {
  int c = center;
  for (long k = 0; k < half; ++k) c = db.centers[static_cast<std::size_t>(c)].prev;
  std::vector<int> out;
  for (long k = 0; k <= 2 * half; ++k) {
    out.push_back(c);
    c = db.centers[static_cast<std::size_t>(c)].next;
  }
  return out;
}

Itinerary sufficiency_itinerary(const SurfaceMap& map, const ChartContext& ctx, const CenterDatabase& db,
                                const Alphabet& alphabet, const std::vector<int>& orbit) {
  const EpsilonConfig& cfg = ctx.eps;
  const long anchor = static_cast<long>(orbit.size() / 2);
  Itinerary it;
  it.anchor = anchor;
  for (std::size_t i = 0; i < orbit.size(); ++i) {
    const long n = static_cast<long>(i) - anchor;
    const Center& x = db.centers[static_cast<std::size_t>(orbit[i])];
    if (i > 0 && db.centers[static_cast<std::size_t>(orbit[i - 1])].next != x.id) {
      fail(ErrorKind::InvalidInput, "orbit window is not an orbit", n);
    }
    // p^s_n, p^u_n by the min formulas along x's own (periodic) orbit.
    std::vector<long> q, ps, pu;
    const auto& cyc = db.cycles[static_cast<std::size_t>(x.cycle)];
    for (int id : cyc) q.push_back(db.centers[static_cast<std::size_t>(id)].chart.q_exp);
    periodic_greedy(cfg, q, ps, pu);
    const long ps_n = ps[static_cast<std::size_t>(x.index)], pu_n = pu[static_cast<std::size_t>(x.index)];
    const long j = size_scale(cfg, std::max(ps_n, pu_n));
    const auto net = alphabet.nets.find({bin_of(x), j});
    int y = -1;
    if (net != alphabet.nets.end()) {
      for (int cand : net->second) {
        if (net_close(map, db, x.id, cand, j)) {
          y = cand;
          break;
        }
      }
    }
    if (y < 0) fail(ErrorKind::NoBinCenter, "no net center in the bin of x_n at scale j = " + std::to_string(j), n);
    const int v = alphabet.find(y, ps_n, pu_n);
    if (v < 0) fail(ErrorKind::NoBinCenter, "labels (p^s, p^u) of x_n not in the alphabet", n);
    if (!it.vertices.empty() &&
        !edge_test(map, cfg, alphabet.vertices[static_cast<std::size_t>(it.vertices.back())],
                   alphabet.vertices[static_cast<std::size_t>(v)])) {
      fail(ErrorKind::InvalidInput, "consecutive double charts fail the edge test", n);
    }
    it.vertices.push_back(v);
  }
  return it;
}

bool sigma_sharp_filter(const Itinerary& it) {
  const std::size_t n = it.vertices.size();
  const std::size_t third = n / 3;
  auto repeats = [&](std::size_t from, std::size_t to) {
    std::vector<int> seen(it.vertices.begin() + static_cast<long>(from), it.vertices.begin() + static_cast<long>(to));
    std::sort(seen.begin(), seen.end());
    return std::adjacent_find(seen.begin(), seen.end()) != seen.end();
  };
  return third > 0 && repeats(0, third) && repeats(n - third, n);
}

Projection project_pi(const SurfaceMap& map, const ChartContext& ctx, const Alphabet& alphabet, const Itinerary& it,
                      long window, long depth, bool strict) {
  if (it.anchor != window + depth) fail(ErrorKind::InvalidInput, "anchor must sit at window + depth");
  std::vector<DoubleChart> path;
  for (int v : it.vertices) path.push_back(alphabet.vertices[static_cast<std::size_t>(v)]);
  Projection p;
  p.shadow = manifolds::shadow(map, ctx, path, window, depth, strict);
  p.x = p.shadow.x;
  for (double e : p.shadow.physical_error) p.equivariance = std::max(p.equivariance, e);
  return p;
}

bool DiagnosticReport::ok() const {
  return maximality && std::all_of(items.begin(), items.end(), [](const auto& i) { return i.worst_margin >= 0.0; });
}

DiagnosticReport inverse_diagnostics(const SurfaceMap& map, const ChartContext& ctx, const Alphabet& alphabet,
                                     const Itinerary& a, const Itinerary& b, long window, bool strict) {
  const EpsilonConfig& cfg = ctx.eps;
  const double eps = cfg.eps;
  const double sq = std::sqrt(eps), cb = std::cbrt(eps);
  DiagnosticReport rep;
  const std::vector<std::string> ids{"distance",  "angle-sin",     "angle-cos",        "s-ratio", "u-ratio",
                                     "Q-ratio",   "ps-ratio",      "pu-ratio",         "affine-offset",
                                     "affine-derivative"};
  for (const auto& id : ids) rep.items.push_back({id});
  auto record = [&](std::size_t item, double margin, long n) {
    DiagnosticItem& it = rep.items[item];
    ++it.checked;
    if (margin < it.worst_margin) {
      it.worst_margin = margin;
      it.witness = n;
    }
    if (strict && !(margin >= 0.0)) fail(ErrorKind::DiagnosticFailed, it.id, n);
  };
  auto log_abs_log_ratio = [](double x, double y) { return safe_log(std::abs(std::log(std::abs(x) / std::abs(y)))); };
  const long d = cfg.delta_exponent();
  bool max_a = false, max_b = false;
  for (long n = -window; n <= window; ++n) {
    const long ia = a.anchor + n, ib = b.anchor + n;
    if (ia < 0 || ib < 0 || ia >= static_cast<long>(a.vertices.size()) || ib >= static_cast<long>(b.vertices.size())) {
      fail(ErrorKind::InvalidInput, "window exceeds the words", n);
    }
    const DoubleChart& v = alphabet.vertices[static_cast<std::size_t>(a.vertices[static_cast<std::size_t>(ia)])];
    const DoubleChart& w = alphabet.vertices[static_cast<std::size_t>(b.vertices[static_cast<std::size_t>(ib)])];
    const auto& fx = v.chart.frame;
    const auto& fy = w.chart.frame;
    const double lpv = cfg.log_value(v.pmin_exp()), lpw = cfg.log_value(w.pmin_exp());
    record(0, -std::log(25.0) + std::max(lpv, lpw) - safe_log(map.distance(v.chart.x, w.chart.x)), n);
    record(1, std::log(sq) - log_abs_log_ratio(std::sin(fx.alpha), std::sin(fy.alpha)), n);
    record(2, std::log(sq) - safe_log(std::abs(std::cos(fx.alpha) - std::cos(fy.alpha))), n);
    record(3, std::log(4.0 * sq) - log_abs_log_ratio(fx.s, fy.s), n);
    record(4, std::log(4.0 * sq) - log_abs_log_ratio(fx.u, fy.u), n);
    auto lattice_ratio = [&](long k1, long k2) { return safe_log(eps / 3.0 * static_cast<double>(std::abs(k1 - k2))); };
    record(5, std::log(cb) - lattice_ratio(v.chart.q_exp, w.chart.q_exp), n);
    record(6, std::log(cb) - lattice_ratio(v.ps_exp, w.ps_exp), n);
    record(7, std::log(cb) - lattice_ratio(v.pu_exp, w.pu_exp), n);
    // Ψ_y^{-1}∘Ψ_x(u) = C_y^{-1}(x − y) + C_y^{-1}C_x u, exactly, since exp is a translation.
    const Mat2 L = fy.C_inv() * fx.C;
    const Vec2 offset = fy.C_inv() * map.displacement(w.chart.x, v.chart.x);
    const int sigma = L.trace() >= 0.0 ? 0 : 1;
    const Mat2 dDelta = L - (sigma == 0 ? 1.0 : -1.0) * Mat2::Identity();
    rep.sigma.push_back(sigma);
    record(8, std::log(0.1) + lpw - safe_log(offset.cwiseAbs().maxCoeff()), n);
    record(9, std::log(cb) - safe_log(dDelta.isZero(0.0) ? 0.0 : operator_norm(dDelta)), n);
    if (n > 0) {
      max_a = max_a || v.ps_exp == v.chart.q_exp + d;
      max_b = max_b || w.ps_exp == w.chart.q_exp + d;
    }
  }
  rep.maximality = max_a && max_b;
  if (strict && !rep.maximality) fail(ErrorKind::DiagnosticFailed, "no forward index with p^s = δ_ε Q");
  return rep;
}

std::vector<Itinerary> window_end_recodings(const SurfaceMap& map, const ChartContext& ctx, const Alphabet& alphabet,
                                            const Itinerary& it) {
  std::vector<Itinerary> out;
  const std::size_t n = it.vertices.size();
  if (n < 2) return out;
  const long K = alphabet.label_window;
  auto variants = [&](int v) {
    std::vector<int> ids;
    const DoubleChart& x = alphabet.vertices[static_cast<std::size_t>(v)];
    for (long k = -K; k <= K; ++k) {
      if (k == 0) continue;
      for (int id : {alphabet.find(x.center, x.ps_exp + k, x.pu_exp), alphabet.find(x.center, x.ps_exp, x.pu_exp + k)}) {
        if (id >= 0) ids.push_back(id);
      }
    }
    return ids;
  };
  auto edge = [&](int a, int b) {
    return edge_test(map, ctx.eps, alphabet.vertices[static_cast<std::size_t>(a)],
                     alphabet.vertices[static_cast<std::size_t>(b)]);
  };
  for (int u : variants(it.vertices[n - 1])) {
    if (!edge(it.vertices[n - 2], u)) continue;
    Itinerary r = it;
    r.vertices[n - 1] = u;
    out.push_back(r);
  }
  for (int u : variants(it.vertices[0])) {
    if (!edge(u, it.vertices[1])) continue;
    Itinerary r = it;
    r.vertices[0] = u;
    out.push_back(r);
  }
  return out;
}

}  // namespace pesin::coding
