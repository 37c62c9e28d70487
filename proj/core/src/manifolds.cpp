#include "pesin/manifolds.hpp"

#include <algorithm>
#include <numeric>

namespace pesin::manifolds {

namespace {

constexpr double kStep = 2.0 / (kGrid - 1);
// Slack on |τ| ≤ 1 for preimages that land on the domain boundary.
constexpr double kEdgeSlack = 1e-9;

struct Hermite {
  int i = 0;
  double t = 0.0;
};

Hermite locate(double tau) {
  const double x = (tau + 1.0) / kStep;
  const int i = std::clamp(static_cast<int>(std::floor(x)), 0, kGrid - 2);
  return {i, x - i};
}

double hermite_value(const std::vector<double>& y, const std::vector<double>& d, double tau) {
  const auto [i, t] = locate(tau);
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y[i] + (t3 - 2 * t2 + t) * kStep * d[i] + (-2 * t3 + 3 * t2) * y[i + 1] +
         (t3 - t2) * kStep * d[i + 1];
}

double hermite_slope(const std::vector<double>& y, const std::vector<double>& d, double tau) {
  const auto [i, t] = locate(tau);
  const double t2 = t * t;
  return ((6 * t2 - 6 * t) * y[i] + (-6 * t2 + 6 * t) * y[i + 1]) / kStep + (3 * t2 - 4 * t + 1) * d[i] +
         (3 * t2 - 2 * t) * d[i + 1];
}

// log|a + e^s·r| without forming e^s.
double log_abs_combo(double a, double s, double r) {
  const double lr = (r == 0.0 || s == kNegInf) ? kNegInf : s + std::log(std::abs(r));
  if (lr == kNegInf) return safe_log(std::abs(a));
  if (a == 0.0) return lr;
  const double la = std::log(std::abs(a));
  const double m = std::max(la, lr);
  const double v = std::copysign(std::exp(la - m), a) + std::copysign(std::exp(lr - m), r);
  return m + safe_log(std::abs(v));
}

double scale_by(double x, double log_scale) {
  if (x == 0.0 || log_scale == kNegInf) return 0.0;
  return std::copysign(bounded_exp(std::log(std::abs(x)) + log_scale), x);
}

Vec2 scale_by(const Vec2& v, double log_scale) { return {scale_by(v(0), log_scale), scale_by(v(1), log_scale)}; }

double lattice_log(const EpsilonConfig& cfg, long k) { return cfg.log_value(k); }

// Largest pairwise |r'(τ_i) − r'(τ_j)| / |τ_i − τ_j|^γ.
double log_grid_holder(const std::vector<double>& dr, double gamma) {
  double best = 0.0;
  for (int i = 0; i < kGrid; ++i) {
    for (int j = i + 1; j < kGrid; ++j) {
      const double d = std::abs(dr[i] - dr[j]);
      if (d == 0.0) continue;
      best = std::max(best, d / std::pow((j - i) * kStep, gamma));
    }
  }
  return safe_log(best);
}

struct Fit {
  double slope = 0.0;
  double intercept = 0.0;
};

Fit least_squares(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  if (xs.size() < 2) return {0.0, ys.empty() ? 0.0 : ys.front()};
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  return {slope, my - slope * mx};
}

// Jet in (value, parameter) order: identity for u-graphs, the coordinate swap
// for s-graphs.
charts::ChartJet swap_coordinates(const charts::ChartJet& j) {
  Mat2 P;
  P << 0, 1, 1, 0;
  charts::ChartJet out;
  out.offset = P * j.offset;
  out.linear = P * j.linear * P;
  out.quad = {P * j.quad[1] * P, P * j.quad[0] * P};
  return out;
}

AdmissibleManifold transform(const EpsilonConfig& cfg, const charts::ChartJet& J, const AdmissibleManifold& in,
                             long out_p_exp, long out_pmin_exp, TransformReport* report) {
  const double lpi = lattice_log(cfg, in.p_exp);
  const double lpo = lattice_log(cfg, out_p_exp);
  const double ell = lpi - lpo;
  const double e_ell = std::exp(ell);
  const Mat2& L = J.linear;
  const Vec2 alpha0 = scale_by(J.offset, -lpo) + e_ell * L * Vec2(in.a, 0.0);
  const Vec2 alpha1 = e_ell * L * Vec2(in.b, 1.0);
  const double es = std::exp(in.log_sigma);

  // Nonlinear part of W(pτ)/p' as two pieces with their own log scales.
  std::vector<Vec2> p1(kGrid), p1d(kGrid), p2(kGrid), p2d(kGrid);
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < kGrid; ++i) {
    const double tau = grid_node(i);
    const Vec2 V(in.a + in.b * tau + es * in.r[i], tau);
    const Vec2 Vd(in.b + es * in.dr[i], 1.0);
    p1[i] = L * Vec2(in.r[i], 0.0);
    p1d[i] = L * Vec2(in.dr[i], 0.0);
    p2[i] = 0.5 * Vec2(V.dot(J.quad[0] * V), V.dot(J.quad[1] * V));
    p2d[i] = Vec2(V.dot(J.quad[0] * Vd), V.dot(J.quad[1] * Vd));
    m1 = std::max({m1, p1[i].cwiseAbs().maxCoeff(), p1d[i].cwiseAbs().maxCoeff()});
    m2 = std::max({m2, p2[i].cwiseAbs().maxCoeff(), p2d[i].cwiseAbs().maxCoeff()});
  }
  const double s1 = ell + in.log_sigma;
  const double s2 = 2.0 * lpi - lpo;
  const double sigS = std::max(s1 + safe_log(m1), s2 + safe_log(m2));
  std::vector<double> Sv(kGrid, 0.0), Sp(kGrid, 0.0), Svd(kGrid, 0.0), Spd(kGrid, 0.0);
  if (sigS != kNegInf) {
    const double w1 = m1 > 0.0 ? std::exp(s1 - sigS) : 0.0;
    const double w2 = m2 > 0.0 ? std::exp(s2 - sigS) : 0.0;
    for (int i = 0; i < kGrid; ++i) {
      const Vec2 S = w1 * p1[i] + w2 * p2[i];
      const Vec2 Sd = w1 * p1d[i] + w2 * p2d[i];
      Sv[i] = S(0);
      Sp[i] = S(1);
      Svd[i] = Sd(0);
      Spd[i] = Sd(1);
    }
  }
  const double E = sigS == kNegInf ? 0.0 : std::exp(sigS);

  const double a0v = alpha0(0), a0p = alpha0(1), a1v = alpha1(0), a1p = alpha1(1);
  if (a1p == 0.0 || !std::isfinite(a1p)) fail(ErrorKind::GraphFolded, "parameter coordinate degenerate");
  double spd_sup = 0.0;
  for (int i = 0; i < kGrid; ++i) {
    const double ds = a1p + E * Spd[i];
    if (!(ds * a1p > 0.0)) fail(ErrorKind::GraphFolded, "parameter coordinate not monotone");
    spd_sup = std::max(spd_sup, std::abs(Spd[i]));
  }
  const bool perturbative = E * spd_sup < 0.5 * std::abs(a1p);

  AdmissibleManifold out;
  out.kind = in.kind;
  out.p_exp = out_p_exp;
  out.pmin_exp = out_pmin_exp;
  out.b = a1v / a1p;
  out.a = a0v - out.b * a0p;
  std::vector<double> R(kGrid), Rd(kGrid);
  double tau_max = 0.0, residual = 0.0;
  for (int j = 0; j < kGrid; ++j) {
    const double s = grid_node(j);
    const double tau0 = (s - a0p) / a1p;
    double delta = 0.0;
    if (!std::isfinite(tau0) || std::abs(tau0) > 2.0) fail(ErrorKind::DomainEscape, "output sample has no preimage");
    if (perturbative) {
      for (int it = 0; it < 200; ++it) {
        const double next = -hermite_value(Sp, Spd, tau0 + E * delta) / a1p;
        const bool done = std::abs(next - delta) <= 1e-15 * (1.0 + std::abs(next));
        delta = next;
        if (done) break;
      }
    } else {
      auto phi = [&](double t) { return a0p + a1p * t + E * hermite_value(Sp, Spd, t) - s; };
      double lo = -1.0 - kEdgeSlack, hi = 1.0 + kEdgeSlack;
      double flo = phi(lo), fhi = phi(hi);
      if (flo * fhi > 0.0) fail(ErrorKind::DomainEscape, "output sample has no preimage");
      for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = phi(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      delta = (0.5 * (lo + hi) - tau0) / E;
    }
    const double tau = tau0 + E * delta;
    if (!(std::abs(tau) <= 1.0 + kEdgeSlack)) fail(ErrorKind::DomainEscape, "image does not cover the target domain");
    tau_max = std::max(tau_max, std::abs(tau));
    residual = std::max(residual, std::abs(a0p + a1p * tau + E * hermite_value(Sp, Spd, tau) - s));
    const double spd = hermite_slope(Sp, Spd, tau);
    const double svd = hermite_slope(Sv, Svd, tau);
    R[j] = a1v * delta + hermite_value(Sv, Svd, tau);
    Rd[j] = (svd * a1p - a1v * spd) / (a1p * (a1p + E * spd));
  }
  double mr = 0.0;
  for (int j = 0; j < kGrid; ++j) mr = std::max({mr, std::abs(R[j]), std::abs(Rd[j])});
  if (mr > 0.0 && sigS != kNegInf) {
    out.log_sigma = sigS + std::log(mr);
    for (int j = 0; j < kGrid; ++j) {
      out.r[j] = R[j] / mr;
      out.dr[j] = Rd[j] / mr;
    }
  }
  if (report) {
    report->containment_margin = 1.0 - tau_max;
    report->reprojection_residual = residual;
  }
  return out;
}

void check_edge(const SurfaceMap& map, const EpsilonConfig& cfg, const DoubleChart& v, const DoubleChart& w) {
  if (!coding::edge_test(map, cfg, v, w)) fail(ErrorKind::InvalidInput, "graph transform along a non-edge");
}

}  // namespace

double grid_node(int i) { return -1.0 + kStep * i; }

double AdmissibleManifold::remainder(double tau) const { return hermite_value(r, dr, tau); }
double AdmissibleManifold::remainder_slope(double tau) const { return hermite_slope(r, dr, tau); }

double AdmissibleManifold::value(double tau) const {
  const double es = std::exp(log_sigma);
  return a + b * tau + (es == 0.0 ? 0.0 : es * remainder(tau));
}

double AdmissibleManifold::slope(double tau) const {
  const double es = std::exp(log_sigma);
  return b + (es == 0.0 ? 0.0 : es * remainder_slope(tau));
}

AdmissibleManifold zero_manifold(const EpsilonConfig&, const DoubleChart& v, Kind kind) {
  AdmissibleManifold m;
  m.kind = kind;
  m.p_exp = kind == Kind::Stable ? v.ps_exp : v.pu_exp;
  m.pmin_exp = v.pmin_exp();
  return m;
}

AdmissibleManifold constant_manifold(const EpsilonConfig& cfg, const DoubleChart& v, Kind kind, double log_c,
                                     double sign) {
  AdmissibleManifold m = zero_manifold(cfg, v, kind);
  m.a = std::copysign(std::exp(log_c - lattice_log(cfg, m.p_exp)), sign);
  return m;
}

AdmissibleManifold random_manifold(const ChartContext& ctx, const DoubleChart& v, Kind kind, std::mt19937_64& rng) {
  const EpsilonConfig& cfg = ctx.eps;
  AdmissibleManifold m = zero_manifold(cfg, v, kind);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double lp = lattice_log(cfg, m.p_exp);
  const double lpm = lattice_log(cfg, m.pmin_exp);
  const double gamma = ctx.beta / 3.0;
  m.a = 0.5e-3 * U(rng) * std::exp(lpm - lp);
  m.b = 0.25 * U(rng) * std::exp(gamma * lpm);

  std::array<double, 4> c{}, phase{};
  for (int k = 0; k < 4; ++k) {
    c[k] = U(rng);
    phase[k] = kPi * U(rng);
  }
  auto g = [&](double t) {
    double s = 0.0;
    for (int k = 0; k < 4; ++k) s += c[k] * std::sin((k + 1) * kHalfPi * t + phase[k]) / ((k + 1) * (k + 1));
    return s;
  };
  auto gd = [&](double t) {
    double s = 0.0;
    for (int k = 0; k < 4; ++k) s += c[k] * kHalfPi * std::cos((k + 1) * kHalfPi * t + phase[k]) / (k + 1);
    return s;
  };
  // r(0) = r'(0) = 0, so AM1 and AM2 are carried by a and b alone.
  const double g0 = g(0.0), gd0 = gd(0.0);
  double scale = 0.0;
  for (int i = 0; i < kGrid; ++i) {
    const double t = grid_node(i);
    m.r[i] = g(t) - g0 - gd0 * t;
    m.dr[i] = gd(t) - gd0;
    scale = std::max({scale, std::abs(m.r[i]), std::abs(m.dr[i])});
  }
  if (scale == 0.0) return m;
  for (int i = 0; i < kGrid; ++i) {
    m.r[i] /= scale;
    m.dr[i] /= scale;
  }
  // p^{-γ} e^σ Hol_γ(r') = 0.1, and e^σ sup|r'| ≤ 0.1 as well.
  const double lh = log_grid_holder(m.dr, gamma);
  m.log_sigma = std::min(gamma * lp + std::log(0.1) - lh, std::log(0.1));
  return m;
}

AdmissibilityReport validate_admissible(const ChartContext& ctx, const AdmissibleManifold& m, bool strict) {
  const EpsilonConfig& cfg = ctx.eps;
  const double lp = lattice_log(cfg, m.p_exp);
  const double lpm = lattice_log(cfg, m.pmin_exp);
  const double gamma = ctx.beta / 3.0;
  const int mid = kGrid / 2;
  AdmissibilityReport rep;
  rep.log_f0 = lp + log_abs_combo(m.a, m.log_sigma, m.r[mid]);
  rep.log_slope0 = log_abs_combo(m.b, m.log_sigma, m.dr[mid]);
  for (int i = 0; i < kGrid; ++i) rep.log_slope_sup = std::max(rep.log_slope_sup, log_abs_combo(m.b, m.log_sigma, m.dr[i]));
  rep.log_holder = m.log_sigma == kNegInf ? kNegInf : m.log_sigma - gamma * lp + log_grid_holder(m.dr, gamma);
  rep.margin1 = std::log(1e-3) + lpm - rep.log_f0;
  rep.margin2 = std::log(0.5) + gamma * lpm - rep.log_slope0;
  rep.margin3 = std::log(0.5) - log_add(rep.log_slope_sup, rep.log_holder);
  if (strict) {
    if (!(rep.margin1 >= 0.0)) fail(ErrorKind::AdmissibilityViolated, "AM1: |F(0)| > 10^{-3}(p^s∧p^u)");
    if (!(rep.margin2 >= 0.0)) fail(ErrorKind::AdmissibilityViolated, "AM2: |F'(0)| > ½(p^s∧p^u)^{β/3}");
    if (!(rep.margin3 >= 0.0)) fail(ErrorKind::AdmissibilityViolated, "AM3: ‖F'‖_0 + Hol_{β/3}(F') > ½");
  }
  return rep;
}

ManifoldDistance distance(const EpsilonConfig& cfg, const AdmissibleManifold& m1, const AdmissibleManifold& m2) {
  const long pc_exp = std::max(m1.p_exp, m2.p_exp);
  const double lpc = lattice_log(cfg, pc_exp);
  const double k1 = std::exp(lattice_log(cfg, m1.p_exp) - lpc);
  const double k2 = std::exp(lattice_log(cfg, m2.p_exp) - lpc);
  const double sv = std::max(m1.log_sigma + std::log(k1), m2.log_sigma + std::log(k2));
  const double sd = std::max(m1.log_sigma, m2.log_sigma);
  ManifoldDistance d;
  for (int i = 0; i < kGrid; ++i) {
    const double t = grid_node(i);
    const double t1 = t / k1, t2 = t / k2;
    const double aff = k1 * (m1.a + m1.b * t1) - k2 * (m2.a + m2.b * t2);
    double rem = 0.0, remd = 0.0;
    if (sv != kNegInf) {
      rem = std::exp(m1.log_sigma + std::log(k1) - sv) * m1.remainder(t1) -
            std::exp(m2.log_sigma + std::log(k2) - sv) * m2.remainder(t2);
    }
    if (sd != kNegInf) {
      remd = std::exp(m1.log_sigma - sd) * m1.remainder_slope(t1) - std::exp(m2.log_sigma - sd) * m2.remainder_slope(t2);
    }
    d.log_c0 = std::max(d.log_c0, lpc + log_abs_combo(aff, sv, rem));
    d.log_slope = std::max(d.log_slope, log_abs_combo(m1.b - m2.b, sd, remd));
  }
  return d;
}

double normalized_distance(const EpsilonConfig& cfg, const AdmissibleManifold& m1, const AdmissibleManifold& m2) {
  const ManifoldDistance d = distance(cfg, m1, m2);
  const double lpc = lattice_log(cfg, std::max(m1.p_exp, m2.p_exp));
  return bounded_exp(log_add(d.log_c0 - lpc, d.log_slope));
}

AdmissibleManifold graph_transform_u(const SurfaceMap& map, const ChartContext& ctx, const DoubleChart& v,
                                     const DoubleChart& w, const AdmissibleManifold& in, TransformReport* report) {
  if (in.kind != Kind::Unstable || in.p_exp != v.pu_exp) fail(ErrorKind::InvalidInput, "input is not a u-graph at v");
  check_edge(map, ctx.eps, v, w);
  const auto jet = charts::chart_jet(map, v.chart, v.next, w.chart, charts::Direction::Forward);
  AdmissibleManifold out = transform(ctx.eps, jet, in, w.pu_exp, w.pmin_exp(), report);
  const auto adm = validate_admissible(ctx, out);
  if (report) report->admissibility = adm;
  return out;
}

AdmissibleManifold graph_transform_s(const SurfaceMap& map, const ChartContext& ctx, const DoubleChart& v,
                                     const DoubleChart& w, const AdmissibleManifold& in, TransformReport* report) {
  if (in.kind != Kind::Stable || in.p_exp != w.ps_exp) fail(ErrorKind::InvalidInput, "input is not an s-graph at w");
  check_edge(map, ctx.eps, v, w);
  const auto jet = charts::chart_jet(map, w.chart, w.prev, v.chart, charts::Direction::Backward);
  AdmissibleManifold out = transform(ctx.eps, swap_coordinates(jet), in, v.ps_exp, v.pmin_exp(), report);
  const auto adm = validate_admissible(ctx, out);
  if (report) report->admissibility = adm;
  return out;
}

Contraction contraction_measurement(const SurfaceMap& map, const ChartContext& ctx, const DoubleChart& v,
                                    const DoubleChart& w, const AdmissibleManifold& m1, const AdmissibleManifold& m2,
                                    bool strict) {
  const bool stable = m1.kind == Kind::Stable;
  if (m2.kind != m1.kind || m2.p_exp != m1.p_exp) fail(ErrorKind::InvalidInput, "manifolds at different charts");
  auto push = [&](const AdmissibleManifold& m) {
    return stable ? graph_transform_s(map, ctx, v, w, m) : graph_transform_u(map, ctx, v, w, m);
  };
  const AdmissibleManifold o1 = push(m1), o2 = push(m2);
  const ManifoldDistance din = distance(ctx.eps, m1, m2);
  const ManifoldDistance dout = distance(ctx.eps, o1, o2);
  Contraction c;
  c.log_c0_in = din.log_c0;
  c.log_c0_out = dout.log_c0;
  c.log_c1_in = din.log_c1();
  c.log_c1_out = dout.log_c1();
  c.c0 = din.log_c0 == kNegInf ? 0.0 : bounded_exp(dout.log_c0 - din.log_c0);
  const double denom = log_add(din.log_c1(), ctx.beta / 3.0 * din.log_c0);
  c.c1 = denom == kNegInf ? 0.0 : bounded_exp(dout.log_c1() - denom);
  const double bound = std::exp(-ctx.chi / 2.0);
  if (strict && c.c0 > bound) fail(ErrorKind::ContractionViolated, "d_{C⁰} ratio " + std::to_string(c.c0));
  if (strict && c.c1 > bound) fail(ErrorKind::ContractionViolated, "d_{C¹} ratio " + std::to_string(c.c1));
  return c;
}

namespace {

// Manifolds at path[k] for k = start..0, pushed from a seed at path[start].
// step(k, m) maps the manifold at path[k + 1] to path[k].
template <class Step>
AdmissibleManifold run_chain(std::size_t start, AdmissibleManifold seed, Step step) {
  for (std::size_t k = start; k-- > 0;) seed = step(k, seed);
  return seed;
}

ManifoldResult limit_manifold(const SurfaceMap& map, const ChartContext& ctx, const std::vector<DoubleChart>& path,
                              Kind kind, const ManifoldOptions& opts) {
  if (path.size() < 3) fail(ErrorKind::InvalidInput, "path too short for a manifold limit");
  const std::size_t depth = std::min<std::size_t>(path.size() - 1, static_cast<std::size_t>(opts.max_iterations));
  auto step = [&](std::size_t k, const AdmissibleManifold& m) {
    // path[k + 1] is the later vertex for Stable and the earlier one for Unstable.
    return kind == Kind::Stable ? graph_transform_s(map, ctx, path[k], path[k + 1], m)
                                : graph_transform_u(map, ctx, path[k + 1], path[k], m);
  };
  std::mt19937_64 rng(opts.seed);
  AdmissibleManifold zero = zero_manifold(ctx.eps, path[depth], kind);
  AdmissibleManifold random = random_manifold(ctx, path[depth], kind, rng);
  ManifoldResult res;
  res.log_seed_gap.reserve(depth + 1);
  res.log_seed_gap.push_back(safe_log(normalized_distance(ctx.eps, zero, random)));
  for (std::size_t k = depth; k-- > 0;) {
    zero = step(k, zero);
    random = step(k, random);
    res.log_seed_gap.push_back(safe_log(normalized_distance(ctx.eps, zero, random)));
  }
  const AdmissibleManifold shorter = run_chain(depth - 1, zero_manifold(ctx.eps, path[depth - 1], kind), step);
  res.manifold = zero;
  res.depth = static_cast<int>(depth);
  res.successive = normalized_distance(ctx.eps, zero, shorter);
  res.seed_distance = normalized_distance(ctx.eps, zero, random);
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < res.log_seed_gap.size(); ++i) {
    if (res.log_seed_gap[i] > std::log(1e-13)) {
      xs.push_back(static_cast<double>(i));
      ys.push_back(res.log_seed_gap[i]);
    }
  }
  res.rate = least_squares(xs, ys).slope;
  res.converged = res.successive < opts.tolerance && res.seed_distance < opts.seed_agreement;
  if (opts.strict && !res.converged) {
    fail(ErrorKind::NotConverged, "manifold limit: successive " + std::to_string(res.successive) + ", seeds " +
                                      std::to_string(res.seed_distance));
  }
  return res;
}

}  // namespace

ManifoldResult stable_manifold(const SurfaceMap& map, const ChartContext& ctx, const std::vector<DoubleChart>& path,
                               const ManifoldOptions& opts) {
  return limit_manifold(map, ctx, path, Kind::Stable, opts);
}

ManifoldResult unstable_manifold(const SurfaceMap& map, const ChartContext& ctx,
                                 const std::vector<DoubleChart>& backward_path, const ManifoldOptions& opts) {
  return limit_manifold(map, ctx, backward_path, Kind::Unstable, opts);
}

std::vector<AdmissibleManifold> stable_sweep(const SurfaceMap& map, const ChartContext& ctx,
                                             const std::vector<DoubleChart>& path) {
  if (path.empty()) return {};
  std::vector<AdmissibleManifold> out(path.size());
  out.back() = zero_manifold(ctx.eps, path.back(), Kind::Stable);
  for (std::size_t k = path.size() - 1; k-- > 0;) out[k] = graph_transform_s(map, ctx, path[k], path[k + 1], out[k + 1]);
  return out;
}

std::vector<AdmissibleManifold> unstable_sweep(const SurfaceMap& map, const ChartContext& ctx,
                                               const std::vector<DoubleChart>& path) {
  if (path.empty()) return {};
  std::vector<AdmissibleManifold> out(path.size());
  out.front() = zero_manifold(ctx.eps, path.front(), Kind::Unstable);
  for (std::size_t k = 0; k + 1 < path.size(); ++k) out[k + 1] = graph_transform_u(map, ctx, path[k], path[k + 1], out[k]);
  return out;
}

namespace {

// F and G in units of p^s∧p^u: y = f(x) on V^s, x = g(y) on V^u.
struct Graphs {
  const AdmissibleManifold& vs;
  const AdmissibleManifold& vu;
  double ks = 1.0;
  double ku = 1.0;

  double f(double x) const { return ks * vs.value(x / ks); }
  double g(double y) const { return ku * vu.value(y / ku); }
  bool in_domain(double x) const { return std::abs(x) <= ks && std::abs(f(x)) <= ku; }
};

Graphs make_graphs(const EpsilonConfig& cfg, const AdmissibleManifold& vs, const AdmissibleManifold& vu) {
  const long pm = std::max(vs.pmin_exp, vu.pmin_exp);
  const double lpm = lattice_log(cfg, pm);
  return {vs, vu, std::exp(lattice_log(cfg, vs.p_exp) - lpm), std::exp(lattice_log(cfg, vu.p_exp) - lpm)};
}

}  // namespace

std::vector<double> intersect_scan(const EpsilonConfig& cfg, const AdmissibleManifold& vs,
                                   const AdmissibleManifold& vu, int samples) {
  const Graphs G = make_graphs(cfg, vs, vu);
  std::vector<double> roots;
  double prev_x = 0.0, prev_phi = 0.0;
  bool have_prev = false;
  for (int i = 0; i < samples; ++i) {
    const double x = G.ks * (-1.0 + 2.0 * i / (samples - 1));
    if (!G.in_domain(x)) {
      have_prev = false;
      continue;
    }
    const double phi = x - G.g(G.f(x));
    if (phi == 0.0) {
      roots.push_back(x);
    } else if (have_prev && prev_phi != 0.0 && (phi < 0.0) != (prev_phi < 0.0)) {
      roots.push_back(prev_x - prev_phi * (x - prev_x) / (phi - prev_phi));
    }
    prev_x = x;
    prev_phi = phi;
    have_prev = true;
  }
  return roots;
}

Intersection intersect(const ChartContext& ctx, const DoubleChart& v, const AdmissibleManifold& vs,
                       const AdmissibleManifold& vu, bool strict) {
  const EpsilonConfig& cfg = ctx.eps;
  if (vs.kind != Kind::Stable || vu.kind != Kind::Unstable || vs.p_exp != v.ps_exp || vu.p_exp != v.pu_exp) {
    fail(ErrorKind::InvalidInput, "intersect needs V^s and V^u of the same double chart");
  }
  const Graphs G = make_graphs(cfg, vs, vu);
  Intersection out;
  double x = 0.0, last_step = 0.0;
  for (int it = 0; it < 200; ++it) {
    if (!G.in_domain(x)) fail(ErrorKind::NoIntersection, "fixed-point iteration left the chart");
    const double next = G.g(G.f(x));
    const double step = std::abs(next - x);
    if (last_step > 0.0 && step > 0.0) out.residual_ratio = std::max(out.residual_ratio, step / last_step);
    last_step = step;
    x = next;
    out.iterations = it + 1;
    if (step <= 1e-17 * std::max(1.0, std::abs(x))) break;
  }
  const auto roots = intersect_scan(cfg, vs, vu, 2001);
  if (roots.size() > 1) fail(ErrorKind::MultipleIntersections, std::to_string(roots.size()) + " sign changes");
  if (roots.empty() && std::abs(x - G.g(G.f(x))) > 1e-12) fail(ErrorKind::NoIntersection, "no sign change");

  const double y = G.f(x);
  const double lpm = lattice_log(cfg, v.pmin_exp());
  out.w.log_scale = lpm;
  out.w.u = Vec2(x, y);
  out.bound_margin = safe_log(std::max(std::abs(x), std::abs(y))) - std::log(1e-2);

  // Tangents C(1, F') and C(G', 1) against the columns of C, expanded to first
  // order in the slopes so that tiny slopes are not lost to rounding.
  const double fs = vs.slope(x / G.ks), gs = vu.slope(y / G.ku);
  const Mat2& C = v.chart.frame.C;
  const Vec2 c1 = C.col(0), c2 = C.col(1);
  const double n1 = c1.squaredNorm(), n2 = c2.squaredNorm(), c12 = c1.dot(c2);
  const double x1 = 2.0 * fs * c12 / n1 + fs * fs * n2 / n1;
  const double x2 = 2.0 * gs * c12 / n2 + gs * gs * n1 / n2;
  const double log_e = 0.5 * (std::log1p(x1) + std::log1p(x2));
  const double log_ratio = std::log1p(-fs * gs) - log_e;
  out.log_sin_ratio = safe_log(std::abs(log_ratio));
  const double cos_diff = (c12 * (fs * gs - std::expm1(log_e)) + gs * n1 + fs * n2) / (std::sqrt(n1 * n2) * std::exp(log_e));
  out.log_cos_diff = safe_log(std::abs(cos_diff));
  out.log_angle_bound = ctx.beta / 4.0 * lpm;
  if (strict) {
    if (!(out.bound_margin < 0.0)) fail(ErrorKind::BoundViolated, "‖w‖_∞ ≥ 10^{-2}(p^s∧p^u)");
    if (!(out.log_sin_ratio <= out.log_angle_bound)) fail(ErrorKind::BoundViolated, "sin∠/sin α outside e^{±p^{β/4}}");
    if (!(out.log_cos_diff < std::log(2.0) + out.log_angle_bound)) {
      fail(ErrorKind::BoundViolated, "|cos∠ − cos α| ≥ 2(p^s∧p^u)^{β/4}");
    }
  }
  return out;
}

PhasePoint chart_point_apply(const SurfaceMap& map, const PesinChart& chart, const ChartPoint& w) {
  return map.translate(chart.x, scale_by(Vec2(chart.frame.C * w.u), w.log_scale));
}

ShadowResult shadow(const SurfaceMap& map, const ChartContext& ctx, const std::vector<DoubleChart>& path, long window,
                    long depth, bool strict) {
  const EpsilonConfig& cfg = ctx.eps;
  const long half = window + depth;
  if (window < 0 || depth < 1 || static_cast<long>(path.size()) != 2 * half + 1) {
    fail(ErrorKind::InvalidInput, "shadow needs a path of length 2(window + depth) + 1");
  }
  const std::size_t first = static_cast<std::size_t>(depth);
  const std::vector<DoubleChart> forward(path.begin() + static_cast<long>(first), path.end());
  const std::vector<DoubleChart> backward(path.begin(), path.end() - static_cast<long>(first));
  const auto S = stable_sweep(map, ctx, forward);
  const auto U = unstable_sweep(map, ctx, backward);

  ShadowResult res;
  res.window = window;
  for (long n = -window; n <= window; ++n) {
    const std::size_t idx = static_cast<std::size_t>(half + n);
    const DoubleChart& v = path[idx];
    const Intersection I = intersect(ctx, v, S[idx - first], U[idx], strict);
    res.intersections.push_back(I);
    res.points.push_back(I.w);
    res.stable.push_back(S[idx - first]);
    res.unstable.push_back(U[idx]);
    const double lpm = lattice_log(cfg, v.pmin_exp());
    double ratio = I.w.log_sup() - lpm;
    double qratio = I.w.log_sup() - (std::log(10.0) + v.chart.log_Q(cfg));
    if (n > -window) {
      // f^n(x) reached from the previous index through the chart map.
      const DoubleChart& u = path[idx - 1];
      const ChartPoint& prev = res.points[res.points.size() - 2];
      const auto jet = charts::chart_jet(map, u.chart, u.next, v.chart, charts::Direction::Forward);
      const Vec2 img = jet.eval_scaled(prev.u, prev.log_scale, lpm);
      const double img_sup = lpm + safe_log(img.cwiseAbs().maxCoeff());
      ratio = std::max(ratio, img_sup - lpm);
      qratio = std::max(qratio, img_sup - (std::log(10.0) + v.chart.log_Q(cfg)));
      res.step_error.push_back((img - scale_by(I.w.u, I.w.log_scale - lpm)).cwiseAbs().maxCoeff());
      const PhasePoint a = map.forward(chart_point_apply(map, u.chart, prev));
      res.physical_error.push_back(map.distance(a, chart_point_apply(map, v.chart, I.w)));
      if (strict && !(res.step_error.back() < 1e-6)) fail(ErrorKind::ShadowEscape, "chart-map step inconsistent", n);
    }
    res.log_window_ratio.push_back(ratio);
    res.log_q_ratio.push_back(qratio);
    if (strict && !(ratio <= 0.0)) fail(ErrorKind::ShadowEscape, "f^n(x) outside Ψ_{x_n}(R[p^s∧p^u])", n);
    if (strict && !(qratio <= 0.0)) fail(ErrorKind::ShadowEscape, "f^n(x) outside Ψ_{x_n}(R[10Q])", n);
  }
  res.x = chart_point_apply(map, path[static_cast<std::size_t>(half)].chart, res.points[static_cast<std::size_t>(window)]);
  return res;
}

HolderFit holder_dependence(const SurfaceMap& map, const ChartContext& ctx,
                            const std::vector<std::pair<std::vector<DoubleChart>, std::vector<DoubleChart>>>& pairs,
                            const std::vector<long>& depths) {
  if (pairs.size() != depths.size()) fail(ErrorKind::InvalidInput, "one depth per path pair");
  HolderFit fit;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto limit = [&](const std::vector<DoubleChart>& path, std::uint64_t seed) {
      std::mt19937_64 rng(seed);
      AdmissibleManifold m = random_manifold(ctx, path.back(), Kind::Stable, rng);
      for (std::size_t k = path.size() - 1; k-- > 0;) m = graph_transform_s(map, ctx, path[k], path[k + 1], m);
      return m;
    };
    const double d = normalized_distance(ctx.eps, limit(pairs[i].first, 2 * i + 1), limit(pairs[i].second, 2 * i + 2));
    fit.depths.push_back(depths[i]);
    fit.log_distance.push_back(safe_log(d));
    if (d > 0.0) {
      xs.push_back(static_cast<double>(depths[i]));
      ys.push_back(std::log(d));
    }
  }
  const Fit f = least_squares(xs, ys);
  fit.theta = std::exp(f.slope);
  fit.log_K = f.intercept;
  return fit;
}

}  // namespace pesin::manifolds
