#include "pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace pesin::pipeline {

namespace fs = std::filesystem;
using geometry::PhasePoint;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(ErrorKind::InvalidInput, where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(ErrorKind::InvalidInput, "unknown config key '" + where + "." + key + "'");
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

void read_number(const json& j, const char* key, double& into) {
  if (j.contains(key)) into = io::number(j.at(key));
}

std::string num(double x) {
  if (std::isfinite(x)) return json(x).dump();
  return std::isnan(x) ? "nan" : (x > 0.0 ? "inf" : "-inf");
}

std::string out_path(const RunConfig& cfg, const std::string& name) { return (fs::path(cfg.out) / name).string(); }

json input(const RunConfig& cfg, const std::string& name) {
  const auto p = out_path(cfg, name);
  if (!fs::exists(p)) throw MissingInput("missing input " + p);
  return io::read_json(p);
}

// Runs fn(0..n-1) on the worker pool; each index writes only its own slot, so
// the results do not depend on scheduling. The error of the lowest failing
// index is rethrown.
template <class F>
void parallel_for(std::size_t n, unsigned workers, F&& fn) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto work = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < std::min<std::size_t>(workers, n); ++w) pool.emplace_back(work);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

io::Manifest start(const std::string& stage, const RunConfig& cfg) {
  io::Manifest m;
  m.stage = stage;
  m.config = cfg.to_json();
  return m;
}

void emit(io::Manifest& m, const RunConfig& cfg, const std::string& name, const json& j) {
  io::write_json(out_path(cfg, name), j);
  m.outputs.push_back(name);
}

void emit(io::Manifest& m, const RunConfig& cfg, const std::string& name, const std::string& text) {
  io::write_text(out_path(cfg, name), text);
  m.outputs.push_back(name);
}

charts::ChartContext context(const RunConfig& cfg) {
  return charts::ChartContext::make(cfg.eps, cfg.regularity, cfg.chi);
}

std::vector<geometry::PeriodicOrbit> load_cycles(const RunConfig& cfg) {
  const auto j = input(cfg, "periodic.json");
  std::vector<geometry::PeriodicOrbit> cycles;
  for (const auto& c : j.at("cycles")) cycles.push_back(io::orbit_from_json(c));
  return cycles;
}

coding::Alphabet load_alphabet(const RunConfig& cfg) { return io::alphabet_from_json(input(cfg, "alphabet.json")); }

coding::CenterDatabase load_centers(const RunConfig& cfg) { return io::centers_from_json(input(cfg, "centers.json")); }

// Residual, exponent and ρ of a user-supplied cycle.
geometry::PeriodicOrbit describe_cycle(const geometry::SurfaceMap& map, const std::vector<PhasePoint>& points) {
  geometry::PeriodicOrbit o;
  o.points = points;
  Mat2 mono = Mat2::Identity();
  PhasePoint x = points.front();
  o.min_rho = kInf;
  for (std::size_t i = 0; i < points.size(); ++i) {
    mono = map.derivative(x) * mono;
    o.min_rho = std::min(o.min_rho, map.rho(points[i]));
    x = map.forward(x);
  }
  o.residual = map.distance(x, points.front());
  const double tr = mono.trace(), det = mono.determinant();
  const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
  const double mu = std::max(std::abs(tr / 2.0 + disc), std::abs(tr / 2.0 - disc));
  o.exponent = std::log(mu) / static_cast<double>(points.size());
  return o;
}

// ---------------------------------------------------------------- simulate

io::Manifest simulate(const RunConfig& cfg, unsigned) {
  auto m = start("simulate", cfg);
  const auto map = make_table(cfg);
  const auto* billiard = dynamic_cast<const geometry::BilliardTable*>(map.get());
  std::mt19937_64 rng(cfg.seed);

  json orbits = json::array();
  std::ostringstream csv;
  csv << "orbit,n,component,r,theta\n";
  std::vector<PhasePoint> sample;
  long attempts = 0, skipped = 0;
  double inverse_error = 0.0, liouville_error = 0.0;
  while (static_cast<long>(orbits.size()) < cfg.orbit_count && attempts < 50 * cfg.orbit_count) {
    ++attempts;
    const auto x0 = map->sample_invariant(rng);
    linear::OrbitSegment seg;
    try {
      seg = linear::orbit_segment(*map, x0, cfg.orbit_back, cfg.orbit_forward);
    } catch (const Error&) {
      ++skipped;
      continue;
    }
    if (*std::min_element(seg.dist.begin(), seg.dist.end()) < cfg.tol.grazing) {
      ++skipped;
      continue;
    }
    const auto id = orbits.size();
    orbits.push_back({{"x0", io::to_json(x0)}, {"back", cfg.orbit_back}, {"forward", cfg.orbit_forward}});
    for (long n = -seg.back; n <= seg.fwd; ++n) {
      const auto& x = seg.at(n);
      csv << id << ',' << n << ',' << x.component << ',' << num(x.r) << ',' << num(x.theta) << '\n';
    }
    for (long n = -seg.back; n < seg.fwd; n += 7) {
      const auto& x = seg.at(n);
      const auto& y = seg.at(n + 1);
      inverse_error = std::max(inverse_error, map->distance(map->backward(y), x));
      if (billiard) {
        liouville_error = std::max(
            liouville_error, std::abs(seg.df[seg.index(n)].determinant() * std::cos(y.theta) - std::cos(x.theta)));
      }
      sample.push_back(x);
    }
  }
  m.checks.push_back(io::check_at_least("orbits_generated", static_cast<double>(orbits.size()),
                                        static_cast<double>(cfg.orbit_count)));
  m.checks.push_back(io::check_at_most("inverse_consistency", inverse_error, 1e-9, "|f^{-1}(f x) - x|"));
  if (billiard) {
    m.checks.push_back(io::check_at_most("liouville_determinant", liouville_error, 1e-8, "det df cos θ' vs cos θ"));
  }

  std::vector<geometry::PeriodicOrbit> cycles;
  if (!cfg.cycles.empty()) {
    for (const auto& c : cfg.cycles) cycles.push_back(describe_cycle(*map, c));
  } else {
    cycles = geometry::find_periodic_orbits(*map, cfg.periodic, cfg.seed);
  }
  double worst_residual = 0.0, weakest = kInf;
  json cj = json::array();
  for (const auto& c : cycles) {
    worst_residual = std::max(worst_residual, c.residual);
    weakest = std::min(weakest, c.exponent);
    cj.push_back(io::to_json(c));
    for (const auto& x : c.points) sample.push_back(x);
  }
  m.checks.push_back(io::check_at_least("periodic_cycles", static_cast<double>(cycles.size()), 1.0));
  m.checks.push_back(io::check_at_most("periodic_residual", worst_residual, 1e-9));
  m.checks.push_back(io::check_at_least("periodic_chi_hyperbolic", weakest, cfg.chi, "smallest cycle exponent"));

  const auto rep = geometry::verify_assumptions(*map, cfg.regularity, sample, cfg.seed, false);
  for (const auto& a : rep.margins) {
    m.checks.push_back(io::check_at_least("assumption_" + a.id, a.worst_margin, 0.0));
  }
  const auto adapted = linear::adaptedness_estimate(*map, 30000, cfg.seed);
  m.checks.push_back(io::check_true("adapted_log_distance_finite", std::isfinite(adapted.mean_log_dist)));

  emit(m, cfg, "orbits.json", json{{"orbits", orbits}});
  emit(m, cfg, "orbits.csv", csv.str());
  emit(m, cfg, "periodic.json", json{{"cycles", cj}});
  m.summary = {{"attempts", attempts},
               {"skipped", skipped},
               {"cycles", cycles.size()},
               {"mean_log_dist", io::number(adapted.mean_log_dist)},
               {"adaptedness_stabilization", io::number(adapted.stabilization)}};
  return m;
}

// ---------------------------------------------------------------- spectrum

struct OrbitSpectrum {
  linear::LyapunovEstimate ly;
  double splitting = 0.0;
  double growth = kInf;
  bool frames = false;
};

OrbitSpectrum spectrum_of(const linear::OrbitSegment& seg, double chi, double a) {
  OrbitSpectrum s;
  s.ly = linear::lyapunov_exponents(seg);
  try {
    const auto split = linear::oseledets_splitting(seg);
    s.splitting = linear::equivariance_residual(seg, split);
    const auto frames = linear::frames_along(seg, split, linear::s_u_parameters(seg, split, chi), chi);
    s.growth = linear::c_inverse_growth_check(frames, seg, a).worst_margin;
    s.frames = true;
  } catch (const Error&) {
    // Orbits that are not χ-hyperbolic over the window have no frames.
  }
  return s;
}

io::Manifest spectrum(const RunConfig& cfg, unsigned workers) {
  auto m = start("spectrum", cfg);
  const auto map = make_table(cfg);
  const auto orbits = input(cfg, "orbits.json").at("orbits");
  const auto cycles = load_cycles(cfg);

  std::vector<OrbitSpectrum> os(orbits.size());
  parallel_for(orbits.size(), workers, [&](std::size_t i) {
    const auto& o = orbits[i];
    const auto seg = linear::orbit_segment(*map, io::point_from_json(o.at("x0")), o.at("back").get<long>(),
                                           o.at("forward").get<long>());
    os[i] = spectrum_of(seg, cfg.chi, cfg.regularity.a);
  });
  std::vector<OrbitSpectrum> cs(cycles.size());
  parallel_for(cycles.size(), workers, [&](std::size_t i) {
    const auto seg = linear::periodic_segment(*map, cycles[i].points, cfg.half_window, cfg.half_window);
    cs[i] = spectrum_of(seg, cfg.chi, cfg.regularity.a);
  });

  std::ostringstream csv;
  csv << "kind,index,lambda1,lambda2,qr1,qr2,splitting_residual,frames,growth_margin\n";
  auto row = [&](const char* kind, std::size_t i, const OrbitSpectrum& s) {
    csv << kind << ',' << i << ',' << num(s.ly.lambda1) << ',' << num(s.ly.lambda2) << ',' << num(s.ly.qr1) << ','
        << num(s.ly.qr2) << ',' << num(s.splitting) << ',' << (s.frames ? 1 : 0) << ',' << num(s.growth) << '\n';
  };
  double min_l2 = kInf, asym = 0.0, splitting = 0.0, growth = kInf, cycle_gap = 0.0;
  std::size_t disagree = 0, framed = 0;
  for (std::size_t i = 0; i < os.size(); ++i) {
    const auto& s = os[i];
    row("orbit", i, s);
    min_l2 = std::min(min_l2, s.ly.lambda2);
    asym = std::max(asym, std::abs(s.ly.lambda1 + s.ly.lambda2) / std::abs(s.ly.lambda2));
    if (!s.ly.agree) ++disagree;
    if (s.frames) {
      ++framed;
      splitting = std::max(splitting, s.splitting);
      growth = std::min(growth, s.growth);
    }
  }
  std::size_t cycle_frames = 0;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const auto& s = cs[i];
    row("cycle", i, s);
    cycle_gap = std::max(cycle_gap, std::abs(s.ly.lambda2 - cycles[i].exponent) / cycles[i].exponent);
    if (s.frames) {
      ++cycle_frames;
      splitting = std::max(splitting, s.splitting);
      growth = std::min(growth, s.growth);
    }
  }
  if (!os.empty()) {
    m.checks.push_back(io::check_at_least("orbit_lambda2_positive", min_l2, 0.0));
    m.checks.push_back(io::check_at_most("orbit_exponent_symmetry", asym, 0.05, "|λ1 + λ2| / λ2"));
    m.checks.push_back(io::check_at_most("orbit_qr_disagreements", static_cast<double>(disagree), 0.0));
  }
  m.checks.push_back(io::check_at_least("cycle_frames", static_cast<double>(cycle_frames),
                                        static_cast<double>(cycles.size())));
  m.checks.push_back(io::check_at_most("cycle_exponent_gap", cycle_gap, 0.05, "relative to the monodromy exponent"));
  m.checks.push_back(io::check_at_most("splitting_equivariance", splitting, 1e-8));
  m.checks.push_back(io::check_at_least("c_inverse_growth", growth, 0.0));
  emit(m, cfg, "spectrum.csv", csv.str());
  m.summary = {{"orbits", os.size()}, {"orbits_with_frames", framed}, {"cycles", cs.size()}};
  return m;
}

// ---------------------------------------------------------------- charts

struct CycleCharts {
  double excess = kNegInf;
  std::size_t decompositions = 0;
  std::size_t bound_failures = 0;
  double log_norm = kNegInf;
  std::size_t unconverged = 0;
  long worst_step = 0;
  bool q_below_Q = true;
  std::vector<charts::ChartRecord> records;
};

io::Manifest charts_stage(const RunConfig& cfg, unsigned workers) {
  auto m = start("charts", cfg);
  const auto map = make_table(cfg);
  const auto ctx = context(cfg);
  const auto cycles = load_cycles(cfg);
  const long trace = 50;

  std::vector<CycleCharts> out(cycles.size());
  parallel_for(cycles.size(), workers, [&](std::size_t i) {
    auto& cc = out[i];
    const auto seg = linear::periodic_segment(*map, cycles[i].points, cfg.half_window, cfg.half_window);
    const auto split = linear::oseledets_splitting(seg);
    const auto frames = linear::frames_along(seg, split, linear::s_u_parameters(seg, split, cfg.chi), cfg.chi);
    const auto cs = charts::charts_along(ctx, cfg.regularity, seg, frames);
    std::vector<long> q;
    for (const auto& c : cs) {
      cc.excess = std::max(cc.excess, charts::chart_bound_excess(ctx, c));
      q.push_back(c.q_exp);
    }
    const auto at = [&](long n) -> const charts::PesinChart& { return cs[static_cast<std::size_t>(n - frames.first)]; };
    const long p = static_cast<long>(cycles[i].points.size());
    for (long n = 0; n < p; ++n) {
      ++cc.decompositions;
      try {
        cc.log_norm = std::max(cc.log_norm, charts::chart_map_fx(*map, ctx, at(n), at(n + 1)).log_norm);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::BoundViolated) throw;
        ++cc.bound_failures;
      }
    }
    const auto greedy = charts::greedy_q(ctx.eps, q, static_cast<long>(q.size() / 4));
    const auto recs = charts::chart_records(ctx.eps, frames.first, q, greedy);
    for (const auto& r : recs) {
      if (std::abs(r.n) > trace) continue;
      if (!r.converged) ++cc.unconverged;
      if (r.q_eps_exp < r.q_exp) cc.q_below_Q = false;
      cc.records.push_back(r);
    }
    for (std::size_t k = 1; k < cc.records.size(); ++k) {
      cc.worst_step = std::max(cc.worst_step, std::abs(cc.records[k].q_eps_exp - cc.records[k - 1].q_eps_exp));
    }
  });

  std::ostringstream csv;
  csv << "cycle,n,Q_exp,q_exp,qs_exp,qu_exp,log_Q,log_q,log_qs,log_qu,converged\n";
  double excess = kNegInf, log_norm = kNegInf;
  std::size_t decompositions = 0, failures = 0, unconverged = 0;
  long worst_step = 0;
  bool q_below_Q = true;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& cc = out[i];
    excess = std::max(excess, cc.excess);
    log_norm = std::max(log_norm, cc.log_norm);
    decompositions += cc.decompositions;
    failures += cc.bound_failures;
    unconverged += cc.unconverged;
    worst_step = std::max(worst_step, cc.worst_step);
    q_below_Q = q_below_Q && cc.q_below_Q;
    for (const auto& r : cc.records) {
      csv << i << ',' << r.n << ',' << r.q_exp << ',' << r.q_eps_exp << ',' << r.qs_exp << ',' << r.qu_exp << ','
          << num(r.log_Q) << ',' << num(r.log_q) << ',' << num(r.log_qs) << ',' << num(r.log_qu) << ','
          << (r.converged ? 1 : 0) << '\n';
    }
  }
  m.checks.push_back(io::check_at_most("chart_bound_excess", excess, 0.0));
  m.checks.push_back(io::check_at_most("decomposition_bound_failures", static_cast<double>(failures), 0.0));
  m.checks.push_back(io::check_at_most("decomposition_log_norm", log_norm, std::log(cfg.eps), "log‖d0 - diag‖ vs log ε"));
  m.checks.push_back(io::check_at_most("greedy_unconverged", static_cast<double>(unconverged), 0.0));
  m.checks.push_back(io::check_at_most("greedy_step", static_cast<double>(worst_step), 3.0, "q(fx)/q(x) ∈ e^{±ε}"));
  m.checks.push_back(io::check_true("greedy_q_below_Q", q_below_Q));
  emit(m, cfg, "charts.csv", csv.str());
  m.summary = {{"cycles", out.size()}, {"decompositions", decompositions}};
  return m;
}

// ---------------------------------------------------------------- alphabet

io::Manifest alphabet_stage(const RunConfig& cfg, unsigned) {
  auto m = start("alphabet", cfg);
  const auto map = make_table(cfg);
  const auto ctx = context(cfg);
  const auto cycles = load_cycles(cfg);
  const auto db = coding::build_centers(*map, ctx, cfg.regularity, cycles, coding::CenterOptions{cfg.half_window});
  const auto A = coding::coarse_grain(*map, ctx, db, coding::AlphabetOptions{cfg.label_window});

  std::vector<int> index;
  const auto rel = A.relevant_graph(&index);
  std::size_t isolated = 0;
  std::ostringstream deg;
  deg << "vertex,center,ps_exp,pu_exp,out,in\n";
  for (std::size_t i = 0; i < A.vertices.size(); ++i) {
    if (!A.relevant[i]) continue;
    const auto& v = A.vertices[i];
    deg << i << ',' << v.center << ',' << v.ps_exp << ',' << v.pu_exp << ',' << A.graph.out[i].size() << ','
        << A.graph.in[i].size() << '\n';
  }
  for (std::size_t i = 0; i < rel.size(); ++i) {
    if (rel.out[i].empty() || rel.in[i].empty()) ++isolated;
  }

  long lo = std::numeric_limits<long>::max(), hi = std::numeric_limits<long>::min();
  for (const auto& v : A.vertices) {
    lo = std::min(lo, v.pmin_exp());
    hi = std::max(hi, v.pmin_exp());
  }
  std::ostringstream disc;
  disc << "t_exp,log_t,count_above\n";
  std::size_t count_mismatch = 0;
  if (!A.vertices.empty()) {
    const long step = std::max(1L, (hi - lo + 2) / 64);
    for (long t = lo - 1; t <= hi + 1; t += step) {
      const auto c = coding::count_above(A, t);
      if (c != coding::count_above_scan(A, t)) ++count_mismatch;
      disc << t << ',' << num(ctx.eps.log_value(t)) << ',' << c << '\n';
    }
  }
  std::size_t edges = 0, bad_edges = 0;
  for (std::size_t i = 0; i < A.vertices.size(); ++i) {
    for (int w : A.graph.out[i]) {
      ++edges;
      if (!coding::edge_test(*map, ctx.eps, A.vertices[i], A.vertices[static_cast<std::size_t>(w)])) ++bad_edges;
    }
  }

  m.checks.push_back(io::check_at_least("centers", static_cast<double>(db.centers.size()), 1.0));
  m.checks.push_back(io::check_at_least("relevant_vertices", static_cast<double>(rel.size()), 1.0));
  m.checks.push_back(io::check_at_most("relevant_dead_ends", static_cast<double>(isolated), 0.0));
  m.checks.push_back(io::check_at_most("edge_retest_failures", static_cast<double>(bad_edges), 0.0));
  m.checks.push_back(io::check_at_most("count_above_mismatch", static_cast<double>(count_mismatch), 0.0));
  emit(m, cfg, "centers.json", io::to_json(db));
  emit(m, cfg, "alphabet.json", io::to_json(A));
  emit(m, cfg, "degrees.csv", deg.str());
  emit(m, cfg, "discreteness.csv", disc.str());
  m.summary = {{"centers", db.centers.size()},
               {"rejected_cycles", db.rejected.size()},
               {"vertices", A.vertices.size()},
               {"relevant", rel.size()},
               {"edges", edges},
               {"max_out_degree", rel.max_out_degree()},
               {"max_in_degree", rel.max_in_degree()}};
  return m;
}

// ---------------------------------------------------------------- code

struct CodedWord {
  coding::Itinerary word;
  coding::Projection proj;
  double center_distance = 0.0;
  bool path = false;
  bool sharp = false;
  std::size_t recodings = 0;
  std::size_t confirmed = 0;
  std::size_t violations = 0;
  std::vector<std::pair<std::size_t, coding::DiagnosticItem>> items;
};

double max_of(const std::vector<double>& v) {
  return v.empty() ? kNegInf : *std::max_element(v.begin(), v.end());
}

io::Manifest code(const RunConfig& cfg, unsigned workers) {
  auto m = start("code", cfg);
  const auto map = make_table(cfg);
  const auto ctx = context(cfg);
  const auto db = load_centers(cfg);
  const auto A = load_alphabet(cfg);
  const long reach = cfg.code_window + cfg.code_depth;
  const long trim = cfg.orbit_half - reach;

  std::vector<CodedWord> out(db.centers.size());
  parallel_for(db.centers.size(), workers, [&](std::size_t i) {
    auto& cw = out[i];
    const auto full = coding::sufficiency_itinerary(*map, ctx, db, A,
                                                    coding::orbit_window(db, static_cast<int>(i), cfg.orbit_half));
    cw.word.vertices.assign(full.vertices.begin() + trim, full.vertices.end() - trim);
    cw.word.anchor = full.anchor - trim;
    cw.path = coding::is_path(A.graph, cw.word);
    cw.sharp = coding::sigma_sharp_filter(cw.word);
    cw.proj = coding::project_pi(*map, ctx, A, cw.word, cfg.code_window, cfg.code_depth, false);
    cw.center_distance = map->distance(cw.proj.x, db.centers[i].chart.x);
    const auto others = coding::window_end_recodings(*map, ctx, A, cw.word);
    cw.recodings = others.size();
    for (std::size_t k = 0; k < others.size(); ++k) {
      const auto p = coding::project_pi(*map, ctx, A, others[k], cfg.code_window, cfg.code_depth, false);
      if (map->distance(p.x, cw.proj.x) > cfg.tol.point) continue;
      ++cw.confirmed;
      const auto rep = coding::inverse_diagnostics(*map, ctx, A, cw.word, others[k], reach, false);
      if (!rep.ok()) ++cw.violations;
      for (const auto& item : rep.items) cw.items.emplace_back(k, item);
    }
  });

  json words = json::array();
  std::ostringstream proj, shadow, diag;
  proj << "word,center,component,r,theta,equivariance,center_distance,max_log_window_ratio,max_step_error\n";
  shadow << "word,n,log_window_ratio,log_q_ratio,step_error,physical_error\n";
  diag << "word,recoding,item,worst_margin,checked\n";
  std::size_t not_path = 0, not_sharp = 0, recodings = 0, confirmed = 0, violations = 0;
  double equivariance = 0.0, step = 0.0, physical = 0.0, containment = kNegInf, center = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& cw = out[i];
    const auto& s = cw.proj.shadow;
    words.push_back(io::to_json(cw.word));
    if (!cw.path) ++not_path;
    if (!cw.sharp) ++not_sharp;
    recodings += cw.recodings;
    confirmed += cw.confirmed;
    violations += cw.violations;
    equivariance = std::max(equivariance, cw.proj.equivariance);
    step = std::max(step, max_of(s.step_error));
    physical = std::max(physical, max_of(s.physical_error));
    containment = std::max(containment, max_of(s.log_window_ratio));
    center = std::max(center, cw.center_distance);
    proj << i << ',' << db.centers[i].id << ',' << cw.proj.x.component << ',' << num(cw.proj.x.r) << ','
         << num(cw.proj.x.theta) << ',' << num(cw.proj.equivariance) << ',' << num(cw.center_distance) << ','
         << num(max_of(s.log_window_ratio)) << ',' << num(max_of(s.step_error)) << '\n';
    for (std::size_t k = 0; k < s.log_window_ratio.size(); ++k) {
      shadow << i << ',' << static_cast<long>(k) - s.window << ',' << num(s.log_window_ratio[k]) << ','
             << num(s.log_q_ratio[k]) << ',' << num(k < s.step_error.size() ? s.step_error[k] : 0.0) << ','
             << num(k < s.physical_error.size() ? s.physical_error[k] : 0.0) << '\n';
    }
    for (const auto& [k, item] : cw.items) {
      diag << i << ',' << k << ',' << item.id << ',' << num(item.worst_margin) << ',' << item.checked << '\n';
    }
  }
  m.checks.push_back(io::check_at_least("itineraries", static_cast<double>(out.size()), 1.0));
  m.checks.push_back(io::check_at_most("non_paths", static_cast<double>(not_path), 0.0));
  m.checks.push_back(io::check_at_most("sigma_sharp_rejections", static_cast<double>(not_sharp), 0.0));
  m.checks.push_back(io::check_at_most("equivariance", equivariance, cfg.tol.shadowing, "π∘σ vs f∘π"));
  m.checks.push_back(io::check_at_most("chart_step_error", step, cfg.tol.shadowing));
  m.checks.push_back(io::check_at_most("containment", containment, cfg.tol.containment,
                                       "log‖w_n‖ - log(p^s∧p^u) at every window index"));
  m.checks.push_back(io::check_at_most("coded_point_vs_orbit", center, cfg.tol.shadowing));
  m.checks.push_back(io::check_at_least("double_codings", static_cast<double>(confirmed), 1.0));
  m.checks.push_back(io::check_at_most("inverse_diagnostic_violations", static_cast<double>(violations), 0.0));
  emit(m, cfg, "corpus.json",
       json{{"window", cfg.code_window}, {"depth", cfg.code_depth}, {"words", words}});
  emit(m, cfg, "projections.csv", proj.str());
  emit(m, cfg, "shadow.csv", shadow.str());
  emit(m, cfg, "diagnostics.csv", diag.str());
  m.summary = {{"itineraries", out.size()},
               {"recodings", recodings},
               {"double_codings", confirmed},
               {"max_physical_error", io::number(physical)}};
  return m;
}

// ---------------------------------------------------------------- markov

void entropy_outputs(io::Manifest& m, const RunConfig& cfg, const coding::ShiftGraph& g,
                     const markov::EntropyEstimate& est) {
  const auto counts = markov::count_periodic_words(g, static_cast<int>(cfg.n_max));
  std::ostringstream csv;
  csv << "n,N,log_N_over_n\n";
  for (std::size_t n = 1; n < counts.size(); ++n) {
    csv << n << ',' << counts[n].str() << ',' << num(est.growth[n]) << '\n';
  }
  emit(m, cfg, "entropy.csv", csv.str());
}

io::Manifest two_shift(const RunConfig& cfg) {
  auto m = start("markov", cfg);
  coding::ShiftGraph g;
  g.out = {{0, 1}, {0, 1}};
  g.in = {{0, 1}, {0, 1}};
  const auto counts = markov::count_periodic_words(g, static_cast<int>(cfg.n_max));
  std::size_t wrong = 0;
  for (std::size_t n = 1; n < counts.size(); ++n) {
    if (counts[n] != markov::BigInt(1) << n) ++wrong;
  }
  const auto est = markov::entropy_estimate(g, static_cast<int>(cfg.n_max));
  m.checks.push_back(io::check_at_most("periodic_words_vs_2^n", static_cast<double>(wrong), 0.0));
  m.checks.push_back(io::check_at_most("entropy_vs_log2", std::abs(est.h - std::log(2.0)), 1e-12));
  m.checks.push_back(io::check_at_most("growth_variation", est.variation, 0.1));
  entropy_outputs(m, cfg, g, est);
  m.summary = {{"shift", cfg.shift}, {"h", io::number(est.h)}, {"variation", io::number(est.variation)}};
  return m;
}

io::Manifest markov_stage(const RunConfig& cfg, unsigned workers) {
  if (cfg.shift == "full_two_shift") return two_shift(cfg);
  auto m = start("markov", cfg);
  const auto map = make_table(cfg);
  const auto ctx = context(cfg);
  const auto A = load_alphabet(cfg);
  const auto cycles = load_cycles(cfg);
  const auto cj = input(cfg, "corpus.json");
  std::vector<coding::Itinerary> words;
  for (const auto& w : cj.at("words")) words.push_back(io::itinerary_from_json(w));

  markov::CorpusOptions co;
  co.window = cj.at("window").get<long>();
  co.depth = cj.at("depth").get<long>();
  co.point_tolerance = cfg.tol.point;
  const auto corpus = markov::build_corpus(*map, ctx, A, words, co);
  markov::CoverOptions cover_opts;
  cover_opts.fibre_tolerance = cfg.tol.markov;
  const auto cover = markov::build_cover(*map, ctx, A, corpus, cover_opts);
  const auto part = markov::refine(cover.system);
  const bool idempotent = markov::same_partition(part, markov::refine(part.system));
  const auto ext = markov::build_extension(part, corpus);

  markov::MarkovOptions mo;
  mo.tolerance = cfg.tol.markov;
  const auto rep = markov::markov_property_check(*map, ctx, A, corpus, mo);
  std::vector<int> owner(corpus.samples.size());
  std::iota(owner.begin(), owner.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(owner.begin(), owner.end(), rng);
  const auto control = markov::markov_property_check(*map, ctx, A, corpus, mo, &owner);

  // π̂ on words spread evenly over the corpus.
  const std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(cfg.pi_hat_words), words.size());
  markov::CylinderOptions cyl{cfg.stop_diameter, cfg.max_cylinder_depth};
  std::vector<markov::CylinderTrace> traces(nw);
  std::vector<markov::PiHatEquivariance> eqs(nw);
  std::vector<std::size_t> picked(nw);
  for (std::size_t k = 0; k < nw; ++k) picked[k] = k * words.size() / nw;
  parallel_for(nw, workers, [&](std::size_t k) {
    traces[k] = markov::pi_hat(*map, ctx, A, words[picked[k]], cyl);
    eqs[k] = markov::pi_hat_equivariance(*map, ctx, A, words[picked[k]], cyl);
  });
  std::ostringstream cyl_csv;
  cyl_csv << "word,depth,log_diameter\n";
  double worst_rate = kNegInf, pi_eq = 0.0, pi_phys = 0.0, pi_vs_pi = 0.0;
  std::size_t unconverged = 0;
  std::vector<std::pair<PhasePoint, coding::Itinerary>> coded;
  for (std::size_t k = 0; k < nw; ++k) {
    const auto& t = traces[k];
    worst_rate = std::max(worst_rate, t.rate);
    pi_eq = std::max(pi_eq, eqs[k].chart_error);
    pi_phys = std::max(pi_phys, eqs[k].physical_error);
    if (!t.converged) ++unconverged;
    // The anchor sample of the word is π of the same word.
    for (const auto& s : corpus.samples) {
      if (s.word == static_cast<int>(picked[k]) && s.time == 0) pi_vs_pi = std::max(pi_vs_pi, map->distance(s.x, t.x));
    }
    for (std::size_t d = 0; d < t.depth.size(); ++d) {
      cyl_csv << picked[k] << ',' << t.depth[d] << ',' << num(t.log_diameter[d]) << '\n';
    }
  }
  for (const auto& s : corpus.samples) {
    if (s.time == 0) coded.emplace_back(s.x, corpus.words[static_cast<std::size_t>(s.word)]);
  }
  const auto mult = markov::multiplicity_check(*map, coded, cfg.tol.point);

  const auto est = markov::entropy_estimate(ext.graph, static_cast<int>(cfg.n_max));
  const auto base = markov::entropy_estimate(A.relevant_graph(), static_cast<int>(cfg.n_max));
  double top = 0.0;
  for (const auto& c : cycles) top = std::max(top, c.exponent);

  m.checks.push_back(io::check_true("refinement_idempotent", idempotent));
  m.checks.push_back(io::check_at_most("bracket_margin", cover.brackets.worst_margin, 0.0));
  m.checks.push_back(io::check_at_least("extension_valid_words", static_cast<double>(ext.valid_words),
                                        static_cast<double>(ext.words)));
  m.checks.push_back(io::check_at_most("markov_violation_rate", rep.rate(), 0.01));
  // With a single distinct point every owner carries the same fibres and
  // the control has nothing to reject.
  if (corpus.points.size() > 1) {
    m.checks.push_back(io::check_at_least("shuffled_control_rate", control.rate(), 0.5,
                                          "the check must reject mismatched fibres"));
  }
  m.checks.push_back(io::check_at_most("pi_hat_equivariance", pi_eq, 1e-6));
  m.checks.push_back(io::check_at_most("pi_hat_vs_pi", pi_vs_pi, cfg.tol.shadowing));
  m.checks.push_back(io::check_at_most("cylinder_rate", worst_rate, -cfg.chi / 2.0 + cfg.eps));
  m.checks.push_back(io::check_at_most("cylinder_unconverged", static_cast<double>(unconverged), 0.0));
  m.checks.push_back(io::check_at_most("multiplicity_bound_exceeded", static_cast<double>(mult.bound_exceeded), 0.0));
  m.checks.push_back(io::check_at_most("entropy_extension_vs_cover", est.h, base.h + 1e-9));
  m.checks.push_back(io::check_at_most("entropy_vs_exponent", base.h, top + cfg.eps));

  emit(m, cfg, "partition.json", io::to_json(part));
  entropy_outputs(m, cfg, ext.graph, est);
  emit(m, cfg, "cylinders.csv", cyl_csv.str());

  std::ostringstream rect;
  rect << "rectangle,point,component,r,theta\n";
  for (std::size_t r = 0; r < part.rectangles.size(); ++r) {
    for (int p : part.rectangles[r]) {
      const auto& x = corpus.points[static_cast<std::size_t>(p)];
      rect << r << ',' << p << ',' << x.component << ',' << num(x.r) << ',' << num(x.theta) << '\n';
    }
  }
  emit(m, cfg, "rectangles.csv", rect.str());

  // Stable and unstable graphs at the anchor of the first few words, in chart
  // coordinates scaled by p^s∧p^u.
  std::ostringstream traces_csv;
  traces_csv << "word,kind,tau,value\n";
  for (const auto& s : corpus.samples) {
    if (s.time != 0 || s.word >= 8) continue;
    for (int i = 0; i < manifolds::kGrid; ++i) {
      const double tau = manifolds::grid_node(i);
      traces_csv << s.word << ",s," << num(tau) << ',' << num(s.vs.value(tau)) << '\n';
      traces_csv << s.word << ",u," << num(tau) << ',' << num(s.vu.value(tau)) << '\n';
    }
  }
  emit(m, cfg, "manifolds.csv", traces_csv.str());

  m.summary = {{"samples", corpus.samples.size()},
               {"points", corpus.points.size()},
               {"sets", cover.system.sets.size()},
               {"rectangles", part.rectangles.size()},
               {"extension_edges", ext.graph.edge_count()},
               {"markov_checks", rep.checks},
               {"max_multiplicity", mult.max_multiplicity},
               {"h_extension", io::number(est.h)},
               {"h_cover", io::number(base.h)},
               {"period", est.period},
               {"growth_variation", io::number(est.variation)}};
  return m;
}

// ---------------------------------------------------------------- report

io::Manifest report(const RunConfig& cfg, unsigned) {
  auto m = start("report", cfg);
  json stages = json::object();
  std::ostringstream csv;
  csv << "stage,check,measured,bound,margin,pass\n";
  std::vector<std::string> missing;
  for (const auto& name : stage_names()) {
    if (name == "report") continue;
    const auto p = out_path(cfg, name + ".manifest.json");
    if (!fs::exists(p)) {
      missing.push_back(name);
      continue;
    }
    const auto sm = io::manifest_from_json(io::read_json(p));
    stages[name] = sm.to_json();
    for (const auto& c : sm.checks) {
      csv << name << ',' << c.id << ',' << num(c.measured) << ',' << num(c.bound) << ',' << num(c.margin) << ','
          << (c.pass ? 1 : 0) << '\n';
    }
    const auto* f = sm.first_failure();
    m.checks.push_back(io::check_true(name, f == nullptr, f ? "first failure: " + f->id : ""));
  }
  if (stages.empty()) throw MissingInput("no stage manifests in " + cfg.out);
  emit(m, cfg, "report.json", json{{"stages", stages}, {"missing", missing}});
  emit(m, cfg, "report.csv", csv.str());
  m.summary = {{"stages", stages.size()}, {"missing", missing}};
  return m;
}

}  // namespace

void RunConfig::validate() const {
  auto positive = [](double x, const char* what) {
    if (!(x > 0.0)) fail(ErrorKind::InvalidInput, std::string(what) + " must be > 0");
  };
  positive(tol.grazing, "tolerances.grazing");
  positive(tol.shadowing, "tolerances.shadowing");
  positive(tol.containment, "tolerances.containment");
  positive(tol.markov, "tolerances.markov");
  positive(tol.point, "tolerances.point");
  positive(stop_diameter, "markov.stop_diameter");
  positive(chi, "chi");
  if (!(eps >= kEpsMin && eps <= kEpsMax)) {
    fail(ErrorKind::InvalidInput, "eps outside the validated range [" + num(kEpsMin) + ", " + num(kEpsMax) + "]");
  }
  if (!(eps < chi)) fail(ErrorKind::InvalidInput, "eps must be below chi");
  regularity.validate();
  if (orbit_count < 0 || orbit_back < 0 || orbit_forward < 1) fail(ErrorKind::InvalidInput, "bad orbit lengths");
  if (half_window < 1 || label_window < 0) fail(ErrorKind::InvalidInput, "bad chart windows");
  if (code_window < 1 || code_depth < 1) fail(ErrorKind::InvalidInput, "bad coding window");
  if (orbit_half < code_window + code_depth) {
    fail(ErrorKind::InvalidInput, "coding.orbit_half must be at least window + depth");
  }
  if (n_max < 1 || max_cylinder_depth < 1 || pi_hat_words < 0) fail(ErrorKind::InvalidInput, "bad markov caps");
  if (!shift.empty() && shift != "full_two_shift") fail(ErrorKind::InvalidInput, "unknown shift '" + shift + "'");
  for (const auto& c : cycles) {
    if (c.empty()) fail(ErrorKind::InvalidInput, "empty periodic cycle");
  }
  if (out.empty()) fail(ErrorKind::InvalidInput, "empty output directory");
}

json RunConfig::to_json() const {
  json cj = json::array();
  for (const auto& c : cycles) {
    json pts = json::array();
    for (const auto& x : c) pts.push_back(io::to_json(x));
    cj.push_back(pts);
  }
  return {{"table", table},
          {"chi", io::number(chi)},
          {"eps", io::number(eps)},
          {"regularity", {{"a", io::number(regularity.a)}, {"beta", io::number(regularity.beta)},
                          {"K", io::number(regularity.K)}}},
          {"orbits", {{"count", orbit_count}, {"back", orbit_back}, {"forward", orbit_forward}}},
          {"periodic",
           {{"target", periodic.target_orbits},
            {"min_period", periodic.min_period},
            {"max_period", periodic.max_period},
            {"max_steps", periodic.max_steps},
            {"min_exponent", io::number(periodic.min_exponent)},
            {"min_rho", io::number(periodic.min_rho)},
            {"return_radius", io::number(periodic.return_radius)},
            {"cycles", cj}}},
          {"charts", {{"half_window", half_window}}},
          {"alphabet", {{"label_window", label_window}}},
          {"coding", {{"window", code_window}, {"depth", code_depth}, {"orbit_half", orbit_half}}},
          {"markov",
           {{"n_max", n_max},
            {"stop_diameter", io::number(stop_diameter)},
            {"max_depth", max_cylinder_depth},
            {"pi_hat_words", pi_hat_words},
            {"shift", shift}}},
          {"tolerances",
           {{"grazing", io::number(tol.grazing)},
            {"shadowing", io::number(tol.shadowing)},
            {"containment", io::number(tol.containment)},
            {"markov", io::number(tol.markov)},
            {"point", io::number(tol.point)}}},
          {"seed", seed},
          {"out", out}};
}

RunConfig config_from_json(const json& j, const std::string& base_dir) {
  check_keys(j, "config",
             {"table", "chi", "eps", "regularity", "orbits", "periodic", "charts", "alphabet", "coding", "markov",
              "tolerances", "seed", "out"});
  RunConfig c;
  c.base_dir = base_dir;
  // χ-hyperbolic cycles only unless the config says otherwise.
  read(j, "table", c.table);
  read_number(j, "chi", c.chi);
  c.periodic.min_exponent = c.chi;
  read_number(j, "eps", c.eps);
  if (j.contains("regularity")) {
    const auto& r = j.at("regularity");
    check_keys(r, "regularity", {"a", "beta", "K"});
    read_number(r, "a", c.regularity.a);
    read_number(r, "beta", c.regularity.beta);
    read_number(r, "K", c.regularity.K);
  }
  if (j.contains("orbits")) {
    const auto& o = j.at("orbits");
    check_keys(o, "orbits", {"count", "back", "forward"});
    read(o, "count", c.orbit_count);
    read(o, "back", c.orbit_back);
    read(o, "forward", c.orbit_forward);
  }
  if (j.contains("periodic")) {
    const auto& p = j.at("periodic");
    check_keys(p, "periodic",
               {"target", "min_period", "max_period", "max_steps", "min_exponent", "min_rho", "return_radius",
                "cycles"});
    read(p, "target", c.periodic.target_orbits);
    read(p, "min_period", c.periodic.min_period);
    read(p, "max_period", c.periodic.max_period);
    read(p, "max_steps", c.periodic.max_steps);
    read_number(p, "min_exponent", c.periodic.min_exponent);
    read_number(p, "min_rho", c.periodic.min_rho);
    read_number(p, "return_radius", c.periodic.return_radius);
    if (p.contains("cycles")) {
      for (const auto& cyc : p.at("cycles")) {
        std::vector<PhasePoint> pts;
        for (const auto& x : cyc) pts.push_back(io::point_from_json(x));
        c.cycles.push_back(pts);
      }
    }
  }
  if (j.contains("charts")) {
    check_keys(j.at("charts"), "charts", {"half_window"});
    read(j.at("charts"), "half_window", c.half_window);
  }
  if (j.contains("alphabet")) {
    check_keys(j.at("alphabet"), "alphabet", {"label_window"});
    read(j.at("alphabet"), "label_window", c.label_window);
  }
  if (j.contains("coding")) {
    const auto& k = j.at("coding");
    check_keys(k, "coding", {"window", "depth", "orbit_half"});
    read(k, "window", c.code_window);
    read(k, "depth", c.code_depth);
    read(k, "orbit_half", c.orbit_half);
  }
  if (j.contains("markov")) {
    const auto& k = j.at("markov");
    check_keys(k, "markov", {"n_max", "stop_diameter", "max_depth", "pi_hat_words", "shift"});
    read(k, "n_max", c.n_max);
    read_number(k, "stop_diameter", c.stop_diameter);
    read(k, "max_depth", c.max_cylinder_depth);
    read(k, "pi_hat_words", c.pi_hat_words);
    read(k, "shift", c.shift);
  }
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    check_keys(t, "tolerances", {"grazing", "shadowing", "containment", "markov", "point"});
    read_number(t, "grazing", c.tol.grazing);
    read_number(t, "shadowing", c.tol.shadowing);
    read_number(t, "containment", c.tol.containment);
    read_number(t, "markov", c.tol.markov);
    read_number(t, "point", c.tol.point);
  }
  read(j, "seed", c.seed);
  read(j, "out", c.out);
  return c;
}

RunConfig load_config(const std::string& path) {
  if (!fs::exists(path)) throw MissingInput("missing config " + path);
  const auto dir = fs::path(path).parent_path().string();
  try {
    return config_from_json(io::read_json(path), dir.empty() ? "." : dir);
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidInput, path + ": " + e.what());
  }
}

std::unique_ptr<geometry::SurfaceMap> make_table(const RunConfig& cfg) {
  static const std::map<std::string, geometry::TableSpec (*)()> builtin = {
      {"circle", [] { return geometry::circle_table(); }},
      {"stadium", [] { return geometry::stadium_table(); }},
      {"sinai", [] { return geometry::sinai_table(); }},
      {"flower", [] { return geometry::flower_table(); }},
      {"linear-fixture", [] { return geometry::linear_fixture_spec(); }},
  };
  if (auto it = builtin.find(cfg.table); it != builtin.end()) return geometry::make_map(it->second());
  auto p = fs::path(cfg.table);
  if (p.is_relative()) p = fs::path(cfg.base_dir) / p;
  if (!fs::exists(p)) throw MissingInput("missing table file " + p.string());
  return geometry::make_map(geometry::load_table(p.string()));
}

unsigned worker_count() {
  const char* env = std::getenv("PESIN_WORKERS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) fail(ErrorKind::InvalidInput, std::string("bad PESIN_WORKERS '") + env + "'");
  return static_cast<unsigned>(std::min(n, 256L));
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"simulate", "spectrum", "charts", "alphabet",
                                                 "code",     "markov",   "report"};
  return names;
}

io::Manifest run_stage(const std::string& stage, const RunConfig& cfg, unsigned workers) {
  cfg.validate();
  fs::create_directories(cfg.out);
  io::Manifest m;
  if (stage == "simulate") m = simulate(cfg, workers);
  else if (stage == "spectrum") m = spectrum(cfg, workers);
  else if (stage == "charts") m = charts_stage(cfg, workers);
  else if (stage == "alphabet") m = alphabet_stage(cfg, workers);
  else if (stage == "code") m = code(cfg, workers);
  else if (stage == "markov") m = markov_stage(cfg, workers);
  else if (stage == "report") m = report(cfg, workers);
  else fail(ErrorKind::InvalidInput, "unknown stage '" + stage + "'");
  io::write_json(out_path(cfg, stage + ".manifest.json"), m.to_json());
  return m;
}

}  // namespace pesin::pipeline
