#include "pesin/geometry.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pesin::geometry {

namespace {

Vec2 left_normal(const Vec2& t) { return Vec2(-t.y(), t.x()); }

double sign_of(double v) { return v < 0.0 ? -1.0 : 1.0; }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Crossing-number test against every loop, with arcs flattened to polylines.
bool inside_table(const TableSpec& spec, const Vec2& p) {
  int crossings = 0;
  auto edge = [&](const Vec2& a, const Vec2& b) {
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (x > p.x()) ++crossings;
    }
  };
  for (const auto& c : spec.components) {
    const int pieces = std::holds_alternative<Segment>(c.piece) ? 1 : 512;
    const double len = c.length();
    for (int i = 0; i < pieces; ++i) {
      edge(c.position(len * i / pieces), c.position(len * (i + 1) / pieces));
    }
  }
  return crossings % 2 == 1;
}

}  // namespace

double Component::length() const {
  if (const auto* s = std::get_if<Segment>(&piece)) return (s->b - s->a).norm();
  const auto& a = std::get<Arc>(piece);
  return a.radius * std::abs(a.sweep);
}

Vec2 Component::position(double r) const {
  if (const auto* s = std::get_if<Segment>(&piece)) {
    const double len = (s->b - s->a).norm();
    return s->a + (r / len) * (s->b - s->a);
  }
  const auto& a = std::get<Arc>(piece);
  const double psi = a.start_angle + sign_of(a.sweep) * r / a.radius;
  return a.center + a.radius * Vec2(std::cos(psi), std::sin(psi));
}

Vec2 Component::tangent(double r) const {
  if (const auto* s = std::get_if<Segment>(&piece)) return (s->b - s->a).normalized();
  const auto& a = std::get<Arc>(piece);
  const double psi = a.start_angle + sign_of(a.sweep) * r / a.radius;
  return sign_of(a.sweep) * Vec2(-std::sin(psi), std::cos(psi));
}

Vec2 Component::inward_normal(double r) const { return left_normal(tangent(r)); }

double Component::curvature() const {
  if (std::holds_alternative<Segment>(piece)) return 0.0;
  const auto& a = std::get<Arc>(piece);
  return a.sweep > 0.0 ? -1.0 / a.radius : 1.0 / a.radius;
}

bool Component::closed() const {
  if (std::holds_alternative<Segment>(piece)) return false;
  return std::abs(std::abs(std::get<Arc>(piece).sweep) - 2.0 * kPi) < 1e-12;
}

Vec2 Component::end_point() const { return position(length()); }

const char* to_string(TableKind kind) {
  switch (kind) {
    case TableKind::Circle: return "circle";
    case TableKind::Stadium: return "stadium";
    case TableKind::Sinai: return "sinai";
    case TableKind::Flower: return "flower";
    case TableKind::LinearFixture: return "linear-fixture";
    case TableKind::Custom: return "custom";
  }
  return "custom";
}

TableKind table_kind_from_string(const std::string& name) {
  if (name == "circle") return TableKind::Circle;
  if (name == "stadium") return TableKind::Stadium;
  if (name == "sinai") return TableKind::Sinai;
  if (name == "flower") return TableKind::Flower;
  if (name == "linear-fixture") return TableKind::LinearFixture;
  if (name == "custom") return TableKind::Custom;
  fail(ErrorKind::InvalidInput, "unknown table kind '" + name + "'");
}

double default_metric_scale(const TableSpec& spec) {
  if (spec.kind == TableKind::LinearFixture) {
    return 0.9 / (2.0 * std::sqrt(2.0) * spec.params.at("half_width"));
  }
  double worst = 0.0;
  for (const auto& c : spec.components) {
    const double span = c.closed() ? c.length() / 2.0 : c.length();
    worst = std::max(worst, std::hypot(span, kPi));
  }
  return 0.9 / worst;
}

void finalize_table(TableSpec& spec) {
  spec.corners.clear();
  if (spec.kind == TableKind::LinearFixture) return;
  if (spec.components.empty()) fail(ErrorKind::InvalidInput, "table has no boundary components");

  std::map<int, std::vector<int>> loops;
  for (int i = 0; i < static_cast<int>(spec.components.size()); ++i) {
    const auto& c = spec.components[i];
    if (!(c.length() > 0.0)) fail(ErrorKind::InvalidInput, "component of zero length", i);
    loops[c.loop].push_back(i);
  }
  for (const auto& [loop, ids] : loops) {
    if (ids.size() == 1) {
      if (!spec.components[ids[0]].closed()) {
        fail(ErrorKind::InvalidInput, "single-piece loop must be a full circle", ids[0]);
      }
      continue;
    }
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const auto& cur = spec.components[ids[k]];
      const auto& nxt = spec.components[ids[(k + 1) % ids.size()]];
      const double gap = (cur.end_point() - nxt.start_point()).norm();
      if (gap > 1e-12) {
        fail(ErrorKind::InvalidInput, "loop " + std::to_string(loop) + " not closed, gap " + fmt(gap),
             ids[k]);
      }
      spec.corners.push_back(cur.end_point());
    }
  }

  for (int i = 0; i < static_cast<int>(spec.components.size()); ++i) {
    const auto* arc = std::get_if<Arc>(&spec.components[i].piece);
    if (!arc || !arc->full_disc_inside) continue;
    for (int k = 0; k < 64; ++k) {
      const double psi = 2.0 * kPi * (k + 0.5) / 64.0;
      for (double shrink : {1.0 - 1e-6, 0.5, 0.0}) {
        const Vec2 p = arc->center + shrink * arc->radius * Vec2(std::cos(psi), std::sin(psi));
        if (!inside_table(spec, p)) {
          fail(ErrorKind::InvalidInput, "flagged disc leaves the table", i);
        }
      }
    }
  }

  if (!(spec.metric_scale > 0.0)) spec.metric_scale = default_metric_scale(spec);
}

TableSpec circle_table(double radius) {
  TableSpec spec;
  spec.kind = TableKind::Circle;
  spec.params = {{"radius", radius}};
  spec.components.push_back({Arc{Vec2(0, 0), radius, 0.0, 2.0 * kPi, false}, 0});
  spec.metric_scale = 0.0;
  finalize_table(spec);
  return spec;
}

TableSpec stadium_table(double flat_length, double radius) {
  TableSpec spec;
  spec.kind = TableKind::Stadium;
  spec.params = {{"flat_length", flat_length}, {"radius", radius}};
  const double h = flat_length / 2.0;
  spec.components.push_back({Segment{Vec2(-h, -radius), Vec2(h, -radius)}, 0});
  spec.components.push_back({Arc{Vec2(h, 0), radius, -kHalfPi, kPi, true}, 0});
  spec.components.push_back({Segment{Vec2(h, radius), Vec2(-h, radius)}, 0});
  spec.components.push_back({Arc{Vec2(-h, 0), radius, kHalfPi, kPi, true}, 0});
  spec.metric_scale = 0.0;
  finalize_table(spec);
  return spec;
}

TableSpec sinai_table(double half_width, double obstacle_radius) {
  if (!(obstacle_radius < half_width)) fail(ErrorKind::InvalidInput, "obstacle does not fit");
  TableSpec spec;
  spec.kind = TableKind::Sinai;
  spec.params = {{"half_width", half_width}, {"obstacle_radius", obstacle_radius}};
  const double w = half_width;
  spec.components.push_back({Segment{Vec2(-w, -w), Vec2(w, -w)}, 0});
  spec.components.push_back({Segment{Vec2(w, -w), Vec2(w, w)}, 0});
  spec.components.push_back({Segment{Vec2(w, w), Vec2(-w, w)}, 0});
  spec.components.push_back({Segment{Vec2(-w, w), Vec2(-w, -w)}, 0});
  spec.components.push_back({Arc{Vec2(0, 0), obstacle_radius, 0.0, -2.0 * kPi, false}, 1});
  spec.metric_scale = 0.0;
  finalize_table(spec);
  return spec;
}

TableSpec flower_table(int petals, double center_distance, double radius) {
  const double half = kPi / petals;
  const double D = center_distance;
  if (petals < 3 || !(radius > D * std::sin(half)) || !(radius < D)) {
    fail(ErrorKind::InvalidInput, "flower parameters do not enclose a table");
  }
  TableSpec spec;
  spec.kind = TableKind::Flower;
  spec.params = {{"petals", static_cast<double>(petals)},
                 {"center_distance", center_distance},
                 {"radius", radius}};
  // Neighbouring discs meet on the bisecting ray at distance t from the origin.
  const double t = D * std::cos(half) - std::sqrt(radius * radius - D * D * std::sin(half) * std::sin(half));
  for (int i = 0; i < petals; ++i) {
    const double phi = 2.0 * kPi * i / petals;
    const Vec2 c = D * Vec2(std::cos(phi), std::sin(phi));
    const Vec2 p0 = t * Vec2(std::cos(phi - half), std::sin(phi - half));
    const Vec2 p1 = t * Vec2(std::cos(phi + half), std::sin(phi + half));
    const double a0 = std::atan2(p0.y() - c.y(), p0.x() - c.x());
    double a1 = std::atan2(p1.y() - c.y(), p1.x() - c.x());
    double sweep = a1 - a0;
    while (sweep >= 0.0) sweep -= 2.0 * kPi;
    while (sweep <= -2.0 * kPi) sweep += 2.0 * kPi;
    spec.components.push_back({Arc{c, radius, a0, sweep, false}, 0});
  }
  spec.metric_scale = 0.0;
  // The arc endpoints come from two different trig evaluations; snap them.
  for (int i = 0; i < petals; ++i) {
    auto& cur = std::get<Arc>(spec.components[i].piece);
    const auto& nxt = spec.components[(i + 1) % petals];
    const Vec2 target = nxt.start_point();
    const double a1 = std::atan2(target.y() - cur.center.y(), target.x() - cur.center.x());
    double sweep = a1 - cur.start_angle;
    while (sweep >= 0.0) sweep -= 2.0 * kPi;
    while (sweep <= -2.0 * kPi) sweep += 2.0 * kPi;
    cur.sweep = sweep;
  }
  finalize_table(spec);
  return spec;
}

TableSpec linear_fixture_spec(double lambda_s, double lambda_u, double half_width) {
  TableSpec spec;
  spec.kind = TableKind::LinearFixture;
  spec.params = {{"lambda_s", lambda_s}, {"lambda_u", lambda_u}, {"half_width", half_width}};
  spec.metric_scale = 1.0;
  return spec;
}

namespace {

double param(const std::map<std::string, double>& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

}  // namespace

TableSpec parse_table(const std::string& text) {
  std::map<std::string, double> params;
  std::string kind_name;
  std::optional<double> scale;
  std::vector<Component> components;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string head;
    if (!(ls >> head)) continue;
    if (head == "segment") {
      Segment s;
      int loop = 0;
      if (!(ls >> s.a.x() >> s.a.y() >> s.b.x() >> s.b.y())) {
        fail(ErrorKind::InvalidInput, "malformed segment", lineno);
      }
      ls >> loop;
      components.push_back({s, loop});
      continue;
    }
    if (head == "arc") {
      Arc a;
      int loop = 0;
      int inside = 0;
      if (!(ls >> a.center.x() >> a.center.y() >> a.radius >> a.start_angle >> a.sweep)) {
        fail(ErrorKind::InvalidInput, "malformed arc", lineno);
      }
      ls >> loop >> inside;
      a.full_disc_inside = inside != 0;
      components.push_back({a, loop});
      continue;
    }
    std::string rest;
    std::getline(ls, rest);
    auto eq = rest.find('=');
    std::string key = head;
    std::string value;
    if (auto keq = key.find('='); keq != std::string::npos) {
      value = key.substr(keq + 1) + rest;
      key = key.substr(0, keq);
    } else if (eq != std::string::npos) {
      value = rest.substr(eq + 1);
    } else {
      fail(ErrorKind::InvalidInput, "expected key = value", lineno);
    }
    std::istringstream vs(value);
    if (key == "kind") {
      vs >> kind_name;
    } else if (key == "metric_scale") {
      std::string v;
      vs >> v;
      if (v != "auto") scale = std::stod(v);
    } else {
      double v = 0.0;
      if (!(vs >> v)) fail(ErrorKind::InvalidInput, "non-numeric value for " + key, lineno);
      params[key] = v;
    }
  }
  if (kind_name.empty()) fail(ErrorKind::InvalidInput, "table file lacks 'kind'");

  TableSpec spec;
  switch (table_kind_from_string(kind_name)) {
    case TableKind::Circle: spec = circle_table(param(params, "radius", 1.0)); break;
    case TableKind::Stadium:
      spec = stadium_table(param(params, "flat_length", 2.0), param(params, "radius", 1.0));
      break;
    case TableKind::Sinai:
      spec = sinai_table(param(params, "half_width", 1.0), param(params, "obstacle_radius", 0.4));
      break;
    case TableKind::Flower:
      spec = flower_table(static_cast<int>(param(params, "petals", 4)), param(params, "center_distance", 1.0),
                          param(params, "radius", 0.8));
      break;
    case TableKind::LinearFixture:
      spec = linear_fixture_spec(param(params, "lambda_s", std::exp(-1.0)), param(params, "lambda_u", std::exp(1.0)),
                                 param(params, "half_width", 0.35));
      break;
    case TableKind::Custom:
      spec.kind = TableKind::Custom;
      spec.params = params;
      spec.components = components;
      spec.metric_scale = 0.0;
      finalize_table(spec);
      break;
  }
  if (scale) spec.metric_scale = *scale;
  if (!(spec.metric_scale > 0.0)) fail(ErrorKind::InvalidInput, "metric_scale must be positive");
  return spec;
}

TableSpec load_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidInput, "cannot open table file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_table(ss.str());
}

std::string format_table(const TableSpec& spec) {
  std::ostringstream out;
  out << "kind = " << to_string(spec.kind) << "\n";
  for (const auto& [k, v] : spec.params) out << k << " = " << fmt(v) << "\n";
  out << "metric_scale = " << fmt(spec.metric_scale) << "\n";
  if (spec.kind == TableKind::Custom) {
    for (const auto& c : spec.components) {
      if (const auto* s = std::get_if<Segment>(&c.piece)) {
        out << "segment " << fmt(s->a.x()) << ' ' << fmt(s->a.y()) << ' ' << fmt(s->b.x()) << ' '
            << fmt(s->b.y()) << ' ' << c.loop << "\n";
      } else {
        const auto& a = std::get<Arc>(c.piece);
        out << "arc " << fmt(a.center.x()) << ' ' << fmt(a.center.y()) << ' ' << fmt(a.radius) << ' '
            << fmt(a.start_angle) << ' ' << fmt(a.sweep) << ' ' << c.loop << ' ' << (a.full_disc_inside ? 1 : 0)
            << "\n";
      }
    }
  }
  return out.str();
}

}  // namespace pesin::geometry
