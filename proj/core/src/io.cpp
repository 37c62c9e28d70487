#include "pesin/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace pesin::io {

json number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double number(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return kNegInf;
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    fail(ErrorKind::InvalidInput, "not a number: " + s);
  }
  return j.get<double>();
}

namespace {

json vec(const Vec2& v) { return json::array({number(v.x()), number(v.y())}); }
Vec2 vec_from(const json& j) { return {number(j.at(0)), number(j.at(1))}; }

json mat(const Mat2& m) { return json::array({number(m(0, 0)), number(m(0, 1)), number(m(1, 0)), number(m(1, 1))}); }
Mat2 mat_from(const json& j) {
  Mat2 m;
  m << number(j.at(0)), number(j.at(1)), number(j.at(2)), number(j.at(3));
  return m;
}

json bin(const coding::BinSignature& b) {
  return {{"k", b.k}, {"l", b.l}, {"a", b.a}, {"m", b.m}, {"j", b.j}};
}
coding::BinSignature bin_from(const json& j) {
  coding::BinSignature b;
  b.k = j.at("k").get<std::array<long, 3>>();
  b.l = j.at("l").get<std::array<long, 3>>();
  b.a = j.at("a").get<std::array<std::uint64_t, 3>>();
  b.m = j.at("m").get<long>();
  b.j = j.at("j").get<long>();
  return b;
}

}  // namespace

json to_json(const geometry::PhasePoint& x) { return json::array({x.component, number(x.r), number(x.theta)}); }

geometry::PhasePoint point_from_json(const json& j) {
  return {j.at(0).get<int>(), number(j.at(1)), number(j.at(2))};
}

json to_json(const linear::HyperbolicFrame& f) {
  return {{"e_s", vec(f.e_s)}, {"e_u", vec(f.e_u)}, {"alpha", number(f.alpha)}, {"s", number(f.s)},
          {"u", number(f.u)},  {"chi", number(f.chi)}, {"C", mat(f.C)}};
}

linear::HyperbolicFrame frame_from_json(const json& j) {
  linear::HyperbolicFrame f;
  f.e_s = vec_from(j.at("e_s"));
  f.e_u = vec_from(j.at("e_u"));
  f.alpha = number(j.at("alpha"));
  f.s = number(j.at("s"));
  f.u = number(j.at("u"));
  f.chi = number(j.at("chi"));
  f.C = mat_from(j.at("C"));
  return f;
}

json to_json(const charts::PesinChart& c) {
  return {{"x", to_json(c.x)},       {"frame", to_json(c.frame)}, {"q", c.q_exp},
          {"eta", c.eta_exp},        {"dist", number(c.dist)},    {"rho", number(c.rho)},
          {"log_r", number(c.log_r)}};
}

charts::PesinChart chart_from_json(const json& j) {
  charts::PesinChart c;
  c.x = point_from_json(j.at("x"));
  c.frame = frame_from_json(j.at("frame"));
  c.q_exp = j.at("q").get<long>();
  c.eta_exp = j.at("eta").get<long>();
  c.dist = number(j.at("dist"));
  c.rho = number(j.at("rho"));
  c.log_r = number(j.at("log_r"));
  return c;
}

json to_json(const geometry::PeriodicOrbit& o) {
  json pts = json::array();
  for (const auto& p : o.points) pts.push_back(to_json(p));
  return {{"points", pts}, {"residual", number(o.residual)}, {"exponent", number(o.exponent)},
          {"min_rho", number(o.min_rho)}};
}

geometry::PeriodicOrbit orbit_from_json(const json& j) {
  geometry::PeriodicOrbit o;
  for (const auto& p : j.at("points")) o.points.push_back(point_from_json(p));
  o.residual = number(j.at("residual"));
  o.exponent = number(j.at("exponent"));
  o.min_rho = number(j.at("min_rho"));
  return o;
}

json to_json(const coding::CenterDatabase& db) {
  json centers = json::array();
  for (const auto& c : db.centers) {
    centers.push_back({{"id", c.id},
                       {"cycle", c.cycle},
                       {"index", c.index},
                       {"chart", to_json(c.chart)},
                       {"next", c.next},
                       {"prev", c.prev},
                       {"k", c.k},
                       {"l", c.l},
                       {"a", c.a},
                       {"m", c.m}});
  }
  return {{"centers", centers}, {"cycles", db.cycles}, {"rejected", db.rejected}};
}

coding::CenterDatabase centers_from_json(const json& j) {
  coding::CenterDatabase db;
  for (const auto& e : j.at("centers")) {
    coding::Center c;
    c.id = e.at("id").get<int>();
    c.cycle = e.at("cycle").get<int>();
    c.index = e.at("index").get<int>();
    c.chart = chart_from_json(e.at("chart"));
    c.next = e.at("next").get<int>();
    c.prev = e.at("prev").get<int>();
    c.k = e.at("k").get<std::array<long, 3>>();
    c.l = e.at("l").get<std::array<long, 3>>();
    c.a = e.at("a").get<std::array<std::uint64_t, 3>>();
    c.m = e.at("m").get<long>();
    if (c.id != static_cast<int>(db.centers.size())) fail(ErrorKind::InvalidInput, "center ids must be 0..n-1");
    db.centers.push_back(c);
  }
  db.cycles = j.at("cycles").get<std::vector<std::vector<int>>>();
  db.rejected = j.at("rejected").get<std::vector<std::string>>();
  return db;
}

json to_json(const coding::Alphabet& a) {
  std::map<std::string, int> chart_ids;
  json charts = json::array();
  auto chart_id = [&](const charts::PesinChart& c) {
    json cj = to_json(c);
    auto [it, fresh] = chart_ids.emplace(cj.dump(), static_cast<int>(charts.size()));
    if (fresh) charts.push_back(std::move(cj));
    return it->second;
  };
  json vertices = json::array();
  for (const auto& v : a.vertices) {
    vertices.push_back({{"center", v.center},
                        {"chart", chart_id(v.chart)},
                        {"next", chart_id(v.next)},
                        {"prev", chart_id(v.prev)},
                        {"ps", v.ps_exp},
                        {"pu", v.pu_exp},
                        {"bin", bin(v.bin)}});
  }
  json nets = json::array();
  for (const auto& [key, members] : a.nets) {
    coding::BinSignature b{key.first.k, key.first.l, key.first.a, key.first.m, key.second};
    nets.push_back({{"bin", bin(b)}, {"members", members}});
  }
  const auto& s = a.stats;
  json stats = {{"bins", s.bins},       {"net_centers", s.net_centers}, {"candidates", s.candidates},
                {"edge_tests", s.edge_tests}, {"edges", s.edges},   {"relevant", s.relevant},
                {"max_out_degree", s.max_out_degree}, {"max_in_degree", s.max_in_degree}};
  std::vector<int> relevant;
  for (std::size_t i = 0; i < a.relevant.size(); ++i) {
    if (a.relevant[i]) relevant.push_back(static_cast<int>(i));
  }
  return {{"eps", number(a.eps)}, {"label_window", a.label_window}, {"charts", charts}, {"vertices", vertices},
          {"out", a.graph.out},   {"relevant", relevant},            {"nets", nets},     {"stats", stats}};
}

coding::Alphabet alphabet_from_json(const json& j) {
  coding::Alphabet a;
  a.eps = number(j.at("eps"));
  a.label_window = j.at("label_window").get<long>();
  std::vector<charts::PesinChart> charts;
  for (const auto& c : j.at("charts")) charts.push_back(chart_from_json(c));
  auto chart_at = [&](const json& id) {
    const auto i = id.get<std::size_t>();
    if (i >= charts.size()) fail(ErrorKind::InvalidInput, "chart index out of range");
    return charts[i];
  };
  for (const auto& e : j.at("vertices")) {
    coding::DoubleChart v;
    v.center = e.at("center").get<int>();
    v.chart = chart_at(e.at("chart"));
    v.next = chart_at(e.at("next"));
    v.prev = chart_at(e.at("prev"));
    v.ps_exp = e.at("ps").get<long>();
    v.pu_exp = e.at("pu").get<long>();
    v.bin = bin_from(e.at("bin"));
    a.vertices.push_back(v);
  }
  a.graph.out = j.at("out").get<std::vector<std::vector<int>>>();
  if (a.graph.out.size() != a.vertices.size()) fail(ErrorKind::InvalidInput, "one adjacency list per vertex");
  a.graph.in.assign(a.vertices.size(), {});
  for (std::size_t v = 0; v < a.graph.out.size(); ++v) {
    for (int w : a.graph.out[v]) {
      if (w < 0 || static_cast<std::size_t>(w) >= a.vertices.size()) fail(ErrorKind::InvalidInput, "edge target");
      a.graph.in[static_cast<std::size_t>(w)].push_back(static_cast<int>(v));
    }
  }
  a.relevant.assign(a.vertices.size(), false);
  for (int v : j.at("relevant").get<std::vector<int>>()) a.relevant.at(static_cast<std::size_t>(v)) = true;
  for (const auto& e : j.at("nets")) {
    const auto b = bin_from(e.at("bin"));
    a.nets[{coding::BinKey{b.k, b.l, b.a, b.m}, b.j}] = e.at("members").get<std::vector<int>>();
  }
  const auto& s = j.at("stats");
  a.stats.bins = s.at("bins");
  a.stats.net_centers = s.at("net_centers");
  a.stats.candidates = s.at("candidates");
  a.stats.edge_tests = s.at("edge_tests");
  a.stats.edges = s.at("edges");
  a.stats.relevant = s.at("relevant");
  a.stats.max_out_degree = s.at("max_out_degree");
  a.stats.max_in_degree = s.at("max_in_degree");
  coding::reindex(a);
  return a;
}

json to_json(const coding::Itinerary& it) { return {{"anchor", it.anchor}, {"vertices", it.vertices}}; }

coding::Itinerary itinerary_from_json(const json& j) {
  coding::Itinerary it;
  it.anchor = j.at("anchor").get<long>();
  it.vertices = j.at("vertices").get<std::vector<int>>();
  if (it.anchor < 0 || it.anchor >= static_cast<long>(it.vertices.size())) {
    fail(ErrorKind::InvalidInput, "anchor outside the word");
  }
  return it;
}

json to_json(const markov::Partition& p) {
  auto system = [](const markov::SetSystem& s) {
    return json{{"points", s.points}, {"sets", s.sets}, {"s_fibre", s.s_fibre}, {"u_fibre", s.u_fibre}};
  };
  return {{"rectangles", p.rectangles},
          {"signatures", p.signatures},
          {"rectangle_of", p.rectangle_of},
          {"system", system(p.system)},
          {"max_sets_per_rectangle", p.max_sets_per_rectangle},
          {"max_rectangles_per_set", p.max_rectangles_per_set}};
}

markov::Partition partition_from_json(const json& j) {
  markov::Partition p;
  p.rectangles = j.at("rectangles").get<std::vector<std::vector<int>>>();
  p.signatures = j.at("signatures").get<std::vector<markov::Signature>>();
  p.rectangle_of = j.at("rectangle_of").get<std::vector<int>>();
  const auto& s = j.at("system");
  p.system.points = s.at("points");
  p.system.sets = s.at("sets").get<std::vector<std::vector<int>>>();
  p.system.s_fibre = s.at("s_fibre").get<std::vector<std::vector<std::vector<int>>>>();
  p.system.u_fibre = s.at("u_fibre").get<std::vector<std::vector<std::vector<int>>>>();
  p.max_sets_per_rectangle = j.at("max_sets_per_rectangle");
  p.max_rectangles_per_set = j.at("max_rectangles_per_set");
  return p;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidInput, "cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidInput, path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::InvalidInput, "cannot write " + path);
  out << text;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

namespace {

Check make(std::string id, double measured, double bound, double margin, std::string note) {
  Check c;
  c.id = std::move(id);
  c.measured = measured;
  c.bound = bound;
  c.margin = margin;
  c.pass = margin >= 0.0;
  c.note = std::move(note);
  return c;
}

}  // namespace

Check check_at_most(std::string id, double measured, double bound, std::string note) {
  return make(std::move(id), measured, bound, std::isnan(measured) ? kNegInf : bound - measured, std::move(note));
}

Check check_at_least(std::string id, double measured, double bound, std::string note) {
  return make(std::move(id), measured, bound, std::isnan(measured) ? kNegInf : measured - bound, std::move(note));
}

Check check_true(std::string id, bool ok, std::string note) {
  return make(std::move(id), ok ? 1.0 : 0.0, 1.0, ok ? 0.0 : -1.0, std::move(note));
}

bool Manifest::ok() const { return first_failure() == nullptr; }

const Check* Manifest::first_failure() const {
  for (const auto& c : checks) {
    if (!c.pass) return &c;
  }
  return nullptr;
}

json Manifest::to_json() const {
  json cs = json::array();
  for (const auto& c : checks) {
    json e = {{"id", c.id},
              {"measured", number(c.measured)},
              {"bound", number(c.bound)},
              {"margin", number(c.margin)},
              {"pass", c.pass}};
    if (!c.note.empty()) e["note"] = c.note;
    cs.push_back(std::move(e));
  }
  return {{"stage", stage}, {"ok", ok()},           {"config", config},
          {"checks", cs},   {"outputs", outputs}, {"summary", summary}};
}

Manifest manifest_from_json(const json& j) {
  Manifest m;
  m.stage = j.at("stage").get<std::string>();
  m.config = j.at("config");
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  m.summary = j.value("summary", json::object());
  for (const auto& e : j.at("checks")) {
    Check c;
    c.id = e.at("id").get<std::string>();
    c.measured = number(e.at("measured"));
    c.bound = number(e.at("bound"));
    c.margin = number(e.at("margin"));
    c.pass = e.at("pass").get<bool>();
    c.note = e.value("note", "");
    m.checks.push_back(std::move(c));
  }
  return m;
}

}  // namespace pesin::io
