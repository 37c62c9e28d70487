#include "pesin/geometry.hpp"

#include <algorithm>

namespace pesin::geometry {

namespace {

double cross(const Vec2& u, const Vec2& w) { return u.x() * w.y() - u.y() * w.x(); }

double wrap_to(double r, double len) {
  r = std::fmod(r, len);
  if (r < 0.0) r += len;
  if (r >= len) r -= len;
  return r;
}

// Arclength of the point at polar angle psi on an arc, or NaN when the angle
// falls outside the arc.
double arc_parameter(const Arc& a, double psi, bool closed) {
  const double s = a.sweep < 0.0 ? -1.0 : 1.0;
  double rel = s * (psi - a.start_angle);
  rel = std::fmod(rel, 2.0 * kPi);
  if (rel < 0.0) rel += 2.0 * kPi;
  const double r = rel * a.radius;
  const double len = a.radius * std::abs(a.sweep);
  if (closed) return wrap_to(r, len);
  if (r <= len + 1e-12) return std::min(r, len);
  if (2.0 * kPi * a.radius - r < 1e-12) return 0.0;
  return std::nan("");
}

Mat2 reversal() {
  Mat2 m;
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}

}  // namespace

// ---------------------------------------------------------------- SurfaceMap

double SurfaceMap::rho(const PhasePoint& x) const {
  double d = dist_to_discontinuity(x);
  d = std::min(d, dist_to_discontinuity(forward(x)));
  d = std::min(d, dist_to_discontinuity(backward(x)));
  return d;
}

Vec2 SurfaceMap::to_metric(const PhasePoint& x) const { return metric_scale() * Vec2(x.r, x.theta); }

Vec2 SurfaceMap::displacement(const PhasePoint& from, const PhasePoint& to) const {
  if (from.component != to.component) return Vec2(std::nan(""), std::nan(""));
  double dr = to.r - from.r;
  if (component_closed(from.component)) {
    const double len = component_length(from.component);
    dr = std::remainder(dr, len);
  }
  return metric_scale() * Vec2(dr, to.theta - from.theta);
}

double SurfaceMap::distance(const PhasePoint& a, const PhasePoint& b) const {
  if (a.component != b.component) return std::numeric_limits<double>::infinity();
  return displacement(a, b).norm();
}

PhasePoint SurfaceMap::wrap(PhasePoint x) const {
  if (component_closed(x.component)) x.r = wrap_to(x.r, component_length(x.component));
  return x;
}

PhasePoint SurfaceMap::translate(const PhasePoint& x, const Vec2& v) const {
  const double c = metric_scale();
  return wrap({x.component, x.r + v.x() / c, x.theta + v.y() / c});
}

std::array<Mat2, 2> SurfaceMap::hessian(const PhasePoint& x, bool inverse) const {
  const double h = 1e-6;
  auto jac = [&](const PhasePoint& y) { return inverse ? inverse_derivative(y) : derivative(y); };
  const Mat2 dr = (jac(wrap({x.component, x.r + h, x.theta})) - jac(wrap({x.component, x.r - h, x.theta}))) / (2 * h);
  const Mat2 dt = (jac({x.component, x.r, x.theta + h}) - jac({x.component, x.r, x.theta - h})) / (2 * h);
  const double c = metric_scale();
  std::array<Mat2, 2> H;
  for (int k = 0; k < 2; ++k) {
    Mat2 m;
    m << dr(k, 0), dt(k, 0), dr(k, 1), dt(k, 1);
    H[k] = 0.5 * (m + m.transpose()) / c;
  }
  return H;
}

// ------------------------------------------------------------ BilliardTable

BilliardTable::BilliardTable(TableSpec spec) : spec_(std::move(spec)) {
  if (spec_.kind == TableKind::LinearFixture) fail(ErrorKind::InvalidInput, "linear fixture is not a billiard");
  for (const auto& c : spec_.components) total_length_ += c.length();
}

std::string BilliardTable::name() const { return to_string(spec_.kind); }

double BilliardTable::component_length(int component) const { return spec_.components.at(component).length(); }

bool BilliardTable::component_closed(int component) const { return spec_.components.at(component).closed(); }

double BilliardTable::angle_at(int component, double r, const Vec2& dir) const {
  const auto& c = spec_.components[component];
  return std::atan2(dir.dot(c.tangent(r)), dir.dot(c.inward_normal(r)));
}

BilliardTable::Flight BilliardTable::flight(const PhasePoint& x) const {
  if (x.component < 0 || x.component >= component_count()) {
    fail(ErrorKind::InvalidInput, "component id out of range");
  }
  if (std::abs(std::cos(x.theta)) < kGrazing || std::abs(x.theta) > kHalfPi) {
    fail(ErrorKind::GrazingCollision, "tangential outgoing direction");
  }
  const auto& start = spec_.components[x.component];
  const Vec2 p = start.position(x.r);
  const Vec2 v = std::cos(x.theta) * start.inward_normal(x.r) + std::sin(x.theta) * start.tangent(x.r);

  double best_tau = std::numeric_limits<double>::infinity();
  int best = -1;
  double best_r = 0.0;
  for (int j = 0; j < component_count(); ++j) {
    const auto& comp = spec_.components[j];
    if (const auto* s = std::get_if<Segment>(&comp.piece)) {
      if (j == x.component) continue;
      const Vec2 d = s->b - s->a;
      const double denom = cross(v, d);
      if (std::abs(denom) < 1e-300) continue;
      const double tau = cross(s->a - p, d) / denom;
      const double sp = cross(s->a - p, v) / denom;
      if (tau > 1e-12 && sp >= -1e-12 && sp <= 1.0 + 1e-12 && tau < best_tau) {
        best_tau = tau;
        best = j;
        best_r = std::clamp(sp, 0.0, 1.0) * d.norm();
      }
      continue;
    }
    const auto& a = std::get<Arc>(comp.piece);
    const Vec2 w = p - a.center;
    const double b = w.dot(v);
    double roots[2];
    int nroots = 0;
    if (j == x.component) {
      roots[nroots++] = -2.0 * b;
    } else {
      const double disc = b * b - (w.squaredNorm() - a.radius * a.radius);
      if (disc < 0.0) continue;
      const double sq = std::sqrt(disc);
      roots[nroots++] = -b - sq;
      roots[nroots++] = -b + sq;
    }
    for (int k = 0; k < nroots; ++k) {
      const double tau = roots[k];
      if (!(tau > 1e-12) || tau >= best_tau) continue;
      const Vec2 q = p + tau * v - a.center;
      const double r = arc_parameter(a, std::atan2(q.y(), q.x()), comp.closed());
      if (std::isnan(r)) continue;
      best_tau = tau;
      best = j;
      best_r = r;
    }
  }
  if (best < 0) fail(ErrorKind::NoIntersection, "ray leaves the table");

  const auto& hit = spec_.components[best];
  const double len = hit.length();
  if (!hit.closed() && (best_r < 1e-9 || len - best_r < 1e-9)) {
    fail(ErrorKind::CornerHit, "trajectory reaches a corner");
  }
  if (hit.closed()) best_r = wrap_to(best_r, len);
  const Vec2 n1 = hit.inward_normal(best_r);
  const Vec2 vout = v - 2.0 * v.dot(n1) * n1;
  const double theta1 = std::atan2(vout.dot(hit.tangent(best_r)), vout.dot(n1));
  if (std::abs(std::cos(theta1)) < kGrazing) fail(ErrorKind::GrazingCollision, "tangential arrival");
  return {{best, best_r, theta1}, best_tau};
}

PhasePoint BilliardTable::forward(const PhasePoint& x) const { return flight(x).next; }

PhasePoint BilliardTable::backward(const PhasePoint& x) const {
  PhasePoint y = forward({x.component, x.r, -x.theta});
  y.theta = -y.theta;
  return y;
}

Mat2 BilliardTable::derivative(const PhasePoint& x) const {
  const Flight fl = flight(x);
  const double k0 = spec_.components[x.component].curvature();
  const double k1 = spec_.components[fl.next.component].curvature();
  const double c0 = std::cos(x.theta);
  const double c1 = std::cos(fl.next.theta);
  const double tau = fl.tau;
  Mat2 m;
  m << tau * k0 + c0, tau, tau * k0 * k1 + k0 * c1 + k1 * c0, tau * k1 + c1;
  return -m / c1;
}

Mat2 BilliardTable::inverse_derivative(const PhasePoint& x) const {
  const Mat2 R = reversal();
  return R * derivative({x.component, x.r, -x.theta}) * R;
}

double BilliardTable::distance_to_singular_curves(const PhasePoint& x) const {
  const auto& comp = spec_.components[x.component];
  const double len = comp.length();
  const bool closed = comp.closed();

  // Candidate direction functions r ↦ θ_T(r): rays through a corner, and rays
  // tangent to a dispersing arc at a point of that arc.
  struct Target {
    int kind;  // 0 corner, 1 tangency with sign +, 2 tangency with sign -
    int index;
  };
  std::vector<Target> targets;
  for (int i = 0; i < static_cast<int>(spec_.corners.size()); ++i) {
    // Corners on the line of a flat piece are reached only by grazing rays,
    // which the π/2 − |θ| term already accounts for.
    if (const auto* seg = std::get_if<Segment>(&comp.piece)) {
      const Vec2 t = (seg->b - seg->a).normalized();
      const Vec2 w = spec_.corners[i] - seg->a;
      if (std::abs(t.x() * w.y() - t.y() * w.x()) < 1e-12) continue;
    }
    targets.push_back({0, i});
  }
  for (int j = 0; j < component_count(); ++j) {
    if (j != x.component && spec_.components[j].curvature() > 0.0) {
      targets.push_back({1, j});
      targets.push_back({2, j});
    }
  }

  double cap = std::min(kHalfPi - std::abs(x.theta), closed ? len : std::min(x.r, len - x.r));
  cap = std::max(cap, 0.0);
  if (targets.empty() || cap == 0.0) return cap;
  double best = cap * cap;

  auto direction_angle = [&](const Target& t, double r) -> double {
    const Vec2 p = comp.position(r);
    if (t.kind == 0) {
      const Vec2 d = spec_.corners[t.index] - p;
      if (d.norm() < 1e-12) return std::nan("");
      const double th = angle_at(x.component, r, d);
      return std::abs(th) < kHalfPi ? th : std::nan("");
    }
    const auto& other = spec_.components[t.index];
    const auto& a = std::get<Arc>(other.piece);
    const Vec2 w = a.center - p;
    const double dist = w.norm();
    if (dist <= a.radius) return std::nan("");
    const double beta = std::asin(a.radius / dist) * (t.kind == 1 ? 1.0 : -1.0);
    const Vec2 u = w / dist;
    const Vec2 dir(std::cos(beta) * u.x() - std::sin(beta) * u.y(), std::sin(beta) * u.x() + std::cos(beta) * u.y());
    const Vec2 touch = p + std::sqrt(dist * dist - a.radius * a.radius) * dir - a.center;
    if (std::isnan(arc_parameter(a, std::atan2(touch.y(), touch.x()), other.closed()))) return std::nan("");
    const double th = angle_at(x.component, r, dir);
    return std::abs(th) < kHalfPi ? th : std::nan("");
  };

  // Squared distance in (r, θ) units to the curve, for both the forward curve
  // and its time reversal (backward singular curve).
  auto gap2 = [&](const Target& t, double r) -> double {
    const double th = direction_angle(t, closed ? wrap_to(r, len) : r);
    if (std::isnan(th)) return std::numeric_limits<double>::infinity();
    const double dr = r - x.r;
    const double dt = std::min(std::abs(th - x.theta), std::abs(th + x.theta));
    return dr * dr + dt * dt;
  };

  // Lower bound on the gap over |r − x.r| ≤ cap: θ_T is Lipschitz with
  // constant L there, so the gap is at least g0/√(1+L²).
  const Vec2 p0 = comp.position(x.r);
  const double kappa = std::abs(comp.curvature());
  auto lower_bound = [&](const Target& t) -> double {
    const double th0 = direction_angle(t, x.r);
    if (std::isnan(th0)) return 0.0;
    const double g0 = std::min(std::abs(th0 - x.theta), std::abs(th0 + x.theta));
    double L = kappa;
    if (t.kind == 0) {
      const double dmin = (spec_.corners[t.index] - p0).norm() - cap;
      if (!(dmin > 0.0)) return 0.0;
      L += 1.0 / dmin;
    } else {
      const auto& a = std::get<Arc>(spec_.components[t.index].piece);
      const double dmin = (a.center - p0).norm() - cap;
      if (!(dmin > a.radius * (1.0 + 1e-9))) return 0.0;
      L += 1.0 / dmin + a.radius / (dmin * std::sqrt(dmin * dmin - a.radius * a.radius));
    }
    return g0 * g0 / (1.0 + L * L);
  };
  std::vector<std::pair<double, Target>> ordered;
  for (const auto& t : targets) ordered.emplace_back(lower_bound(t), t);
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  for (const auto& [bound, t] : ordered) {
    if (bound >= best) break;
    cap = std::min(cap, std::sqrt(best));
    double lo = x.r - cap;
    double hi = x.r + cap;
    if (!closed) {
      lo = std::max(lo, 0.0);
      hi = std::min(hi, len);
    }
    if (!(hi > lo)) continue;
    constexpr int kSamples = 48;
    std::array<double, kSamples + 1> g{};
    for (int i = 0; i <= kSamples; ++i) g[i] = gap2(t, lo + (hi - lo) * i / kSamples);
    for (int i = 0; i <= kSamples; ++i) {
      if (!std::isfinite(g[i])) continue;
      best = std::min(best, g[i]);
      const bool local = (i == 0 || !(g[i - 1] < g[i])) && (i == kSamples || !(g[i + 1] < g[i]));
      if (!local) continue;
      double a = lo + (hi - lo) * std::max(i - 1, 0) / kSamples;
      double b = lo + (hi - lo) * std::min(i + 1, kSamples) / kSamples;
      const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
      double c = b - phi * (b - a);
      double d = a + phi * (b - a);
      double gc = gap2(t, c);
      double gd = gap2(t, d);
      // The gap is quadratic at its minimum, so 1e-7 in r is ample.
      for (int it = 0; it < 40 && b - a > 1e-7; ++it) {
        if (gc < gd) {
          b = d;
          d = c;
          gd = gc;
          c = b - phi * (b - a);
          gc = gap2(t, c);
        } else {
          a = c;
          c = d;
          gc = gd;
          d = a + phi * (b - a);
          gd = gap2(t, d);
        }
      }
      best = std::min({best, gc, gd});
    }
  }
  return std::sqrt(best);
}

double BilliardTable::dist_to_discontinuity(const PhasePoint& x) const {
  const auto& comp = spec_.components.at(x.component);
  double d = std::max(kHalfPi - std::abs(x.theta), 0.0);
  if (!comp.closed()) d = std::min({d, std::max(x.r, 0.0), std::max(comp.length() - x.r, 0.0)});
  if (d > 0.0) d = std::min(d, distance_to_singular_curves(x));
  return spec_.metric_scale * d;
}

PhasePoint BilliardTable::sample_invariant(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double pick = unit(rng) * total_length_;
  int comp = 0;
  while (comp + 1 < component_count() && pick >= spec_.components[comp].length()) {
    pick -= spec_.components[comp].length();
    ++comp;
  }
  const double theta = std::asin(2.0 * unit(rng) - 1.0);
  return {comp, std::min(pick, spec_.components[comp].length()), theta};
}

// ------------------------------------------------------------ LinearFixture

LinearFixture::LinearFixture(double lambda_s, double lambda_u, double half_width, double metric_scale)
    : lambda_s_(lambda_s), lambda_u_(lambda_u), half_width_(half_width), scale_(metric_scale) {
  if (!(lambda_s > 0.0 && lambda_s < 1.0 && lambda_u > 1.0 && half_width > 0.0 && metric_scale > 0.0)) {
    fail(ErrorKind::InvalidInput, "linear fixture needs 0 < λ_s < 1 < λ_u");
  }
}

PhasePoint LinearFixture::forward(const PhasePoint& x) const { return {0, lambda_s_ * x.r, lambda_u_ * x.theta}; }

PhasePoint LinearFixture::backward(const PhasePoint& x) const { return {0, x.r / lambda_s_, x.theta / lambda_u_}; }

Mat2 LinearFixture::derivative(const PhasePoint&) const {
  Mat2 m;
  m << lambda_s_, 0.0, 0.0, lambda_u_;
  return m;
}

Mat2 LinearFixture::inverse_derivative(const PhasePoint&) const {
  Mat2 m;
  m << 1.0 / lambda_s_, 0.0, 0.0, 1.0 / lambda_u_;
  return m;
}

double LinearFixture::dist_to_discontinuity(const PhasePoint& x) const {
  return scale_ * std::max(0.0, half_width_ - std::max(std::abs(x.r), std::abs(x.theta)));
}

PhasePoint LinearFixture::sample_invariant(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(-half_width_, half_width_);
  const double x = u(rng);
  return {0, x, u(rng)};
}

std::unique_ptr<SurfaceMap> make_map(const TableSpec& spec) {
  if (spec.kind == TableKind::LinearFixture) {
    return std::make_unique<LinearFixture>(spec.params.at("lambda_s"), spec.params.at("lambda_u"),
                                           spec.params.at("half_width"), spec.metric_scale);
  }
  return std::make_unique<BilliardTable>(spec);
}

}  // namespace pesin::geometry
