#include "pesin/charts.hpp"

#include <algorithm>

namespace pesin::charts {

EpsilonConfig EpsilonConfig::make(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) fail(ErrorKind::InvalidInput, "ε must lie in (0, 1)");
  EpsilonConfig cfg;
  cfg.eps = eps;
  const double log_eps = std::log(eps);
  long n = static_cast<long>(std::floor(-log_eps / eps)) + 1;
  while (-eps * static_cast<double>(n - 1) < log_eps) --n;
  while (!(-eps * static_cast<double>(n) < log_eps)) ++n;
  cfg.delta_n = n;
  return cfg;
}

long i_eps_floor_log(const EpsilonConfig& cfg, double log_value) {
  if (std::isnan(log_value)) fail(ErrorKind::InvalidInput, "lattice floor of NaN");
  if (log_value == kNegInf) fail(ErrorKind::InvalidInput, "lattice floor of 0");
  if (log_value >= 0.0) return 0;
  const double t = -3.0 * log_value / cfg.eps;
  // Exact lattice values come back as themselves despite rounding in log().
  return static_cast<long>(std::ceil(t - 1e-13 * std::max(1.0, t)));
}

long i_eps_floor(const EpsilonConfig& cfg, double value) {
  if (!(value > 0.0)) fail(ErrorKind::InvalidInput, "lattice floor of a non-positive value");
  return i_eps_floor_log(cfg, std::log(value));
}

ChartContext ChartContext::make(double eps, const geometry::RegularityConstants& consts, double chi) {
  return ChartContext{EpsilonConfig::make(eps), consts.beta, consts.a, chi};
}

double log_q_tilde(const ChartContext& ctx, const HyperbolicFrame& x, const HyperbolicFrame& fx, double rho) {
  const double b = ctx.beta;
  const double first = -(24.0 / b) * x.log_c_inv_frob();
  const double second = -(12.0 / b) * fx.log_c_inv_frob() + (72.0 * ctx.a / b) * std::log(rho);
  return (3.0 / b) * std::log(ctx.eps.eps) + std::min(first, second);
}

long compute_Q(const ChartContext& ctx, const HyperbolicFrame& x, const HyperbolicFrame& fx, double rho) {
  return i_eps_floor_log(ctx.eps, log_q_tilde(ctx, x, fx, rho));
}

double chart_bound_excess(const ChartContext& ctx, const PesinChart& chart) {
  const double b = ctx.beta;
  const double le = std::log(ctx.eps.eps);
  const double lq = chart.log_Q(ctx.eps);
  const double e1 = lq - (3.0 / b) * le;
  const double e2 = chart.frame.log_c_inv_frob() + (b / 24.0) * lq - le / 8.0;
  const double e3 = -ctx.a * std::log(chart.rho) + (b / 72.0) * lq - le / 24.0;
  return std::max({e1, e2, e3});
}

PesinChart make_chart(const ChartContext& ctx, const geometry::RegularityConstants& consts, const PhasePoint& x,
                      const HyperbolicFrame& frame, const HyperbolicFrame& frame_fx, double dist, double rho) {
  PesinChart c;
  c.x = x;
  c.frame = frame;
  c.q_exp = compute_Q(ctx, frame, frame_fx, rho);
  c.eta_exp = c.q_exp;
  c.dist = dist;
  c.rho = rho;
  c.log_r = std::log(consts.r_map(dist));
  const double excess = chart_bound_excess(ctx, c);
  if (excess >= 0.0) fail(ErrorKind::BoundViolated, "chart size bound exceeded by e^" + std::to_string(excess));
  return c;
}

PesinChart with_eta(const PesinChart& chart, long eta_exp) {
  if (eta_exp < chart.q_exp) fail(ErrorKind::InvalidInput, "η must not exceed Q");
  PesinChart c = chart;
  c.eta_exp = eta_exp;
  return c;
}

std::vector<PesinChart> charts_along(const ChartContext& ctx, const geometry::RegularityConstants& consts,
                                     const linear::OrbitSegment& seg, const linear::FrameSequence& frames) {
  std::vector<PesinChart> out;
  for (long n = frames.first; n < frames.last(); ++n) {
    const std::size_t i = seg.index(n);
    try {
      out.push_back(make_chart(ctx, consts, seg.points[i], frames.at(n), frames.at(n + 1), seg.dist[i], seg.rho[i]));
    } catch (const Error& e) {
      fail(e.kind(), e.what(), n);
    }
  }
  return out;
}

GreedyResult greedy_q(const EpsilonConfig& cfg, std::span<const long> q_exps, long window) {
  const std::size_t n = q_exps.size();
  GreedyResult r;
  if (n == 0) return r;
  const long d = cfg.delta_exponent();
  r.qs.resize(n);
  r.qu.resize(n);
  r.q.resize(n);
  r.converged.resize(n);

  r.qs[n - 1] = q_exps[n - 1] + d;
  for (std::size_t i = n - 1; i-- > 0;) r.qs[i] = std::max(r.qs[i + 1] - 3, q_exps[i] + d);
  r.qu[0] = q_exps[0] + d;
  for (std::size_t i = 1; i < n; ++i) r.qu[i] = std::max(r.qu[i - 1] - 3, q_exps[i] + d);

  const long margin = window / 2;
  for (std::size_t i = 0; i < n; ++i) {
    r.q[i] = std::max(r.qs[i], r.qu[i]);
    const long to_edge = std::min<long>(static_cast<long>(i), static_cast<long>(n - 1 - i));
    r.converged[i] = to_edge > margin;
    // q < εQ: δ_ε < ε, so it is enough that q ≤ δ_ε Q.
    if (r.q[i] < q_exps[i] + d) fail(ErrorKind::InequalityViolated, "q exceeds δ_ε Q", static_cast<long>(i));
    if (i > 0 && std::abs(r.q[i] - r.q[i - 1]) > 3) {
      fail(ErrorKind::InequalityViolated, "q(fx)/q(x) outside e^{±ε}", static_cast<long>(i));
    }
  }
  return r;
}

namespace {

double lsq_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() < 2) return 0.0;
  const double m = static_cast<double>(xs.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / m, my = sy / m;
  double num = 0, den = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num += (xs[i] - mx) * (ys[i] - my);
    den += (xs[i] - mx) * (xs[i] - mx);
  }
  return den > 0 ? num / den : 0.0;
}

}  // namespace

double temperedness_slope(const EpsilonConfig& cfg, std::span<const long> q_exps, std::size_t base, long window) {
  const long half = window / 2;
  double worst = 0.0;
  for (int side : {1, -1}) {
    std::vector<double> xs, ys;
    for (long k = std::max<long>(half, 1);; ++k) {
      const long i = static_cast<long>(base) + side * k;
      if (i < 0 || i >= static_cast<long>(q_exps.size())) break;
      xs.push_back(static_cast<double>(k));
      ys.push_back(cfg.log_value(q_exps[static_cast<std::size_t>(i)]));
    }
    worst = std::max(worst, std::abs(lsq_slope(xs, ys)));
  }
  return worst;
}

PhasePoint chart_apply(const SurfaceMap& map, const EpsilonConfig& cfg, const PesinChart& chart, const Vec2& v) {
  const double sup = v.cwiseAbs().maxCoeff();
  if (safe_log(sup) > chart.log_eta(cfg) + 1e-12) fail(ErrorKind::OutOfDomain, "v outside R[η]");
  return map.translate(chart.x, chart.frame.C * v);
}

Vec2 chart_invert(const SurfaceMap& map, const EpsilonConfig& cfg, const PesinChart& chart, const PhasePoint& y) {
  const Vec2 w = map.displacement(chart.x, y);
  if (!w.allFinite()) fail(ErrorKind::OutOfDomain, "point on another component");
  const Vec2 v = chart.frame.C.partialPivLu().solve(w);
  if (safe_log(v.cwiseAbs().maxCoeff()) > chart.log_eta(cfg) + 1e-9) {
    fail(ErrorKind::OutOfDomain, "point outside Ψ_x(R[η])");
  }
  return v;
}

namespace {

Vec2 quad_value(const std::array<Mat2, 2>& q, const Vec2& u) {
  return Vec2(0.5 * u.dot(q[0] * u), 0.5 * u.dot(q[1] * u));
}

Mat2 quad_gradient(const std::array<Mat2, 2>& q, const Vec2& u) {
  Mat2 g;
  g.row(0) = (q[0] * u).transpose();
  g.row(1) = (q[1] * u).transpose();
  return g;
}

// e^{log_scale}·v without overflow in the scale alone.
Vec2 scaled(const Vec2& v, double log_scale) {
  Vec2 out = Vec2::Zero();
  for (int k = 0; k < 2; ++k) {
    if (v(k) != 0.0) out(k) = std::copysign(bounded_exp(std::log(std::abs(v(k))) + log_scale), v(k));
  }
  return out;
}

double log_sup(const Vec2& v) { return safe_log(v.cwiseAbs().maxCoeff()); }

double log_rows(const Mat2& m) { return safe_log(std::max(m.row(0).norm(), m.row(1).norm())); }

double log_quad(const std::array<Mat2, 2>& q) { return safe_log(std::max(q[0].norm(), q[1].norm())); }

}  // namespace

Vec2 ChartJet::eval_scaled(const Vec2& u, double log_in, double log_out) const {
  return scaled(offset, -log_out) + scaled(linear * u, log_in - log_out) +
         scaled(quad_value(quad, u), 2.0 * log_in - log_out);
}

Mat2 ChartJet::gradient_scaled(const Vec2& u, double log_in) const {
  const Mat2 g = quad_gradient(quad, u);
  Mat2 out = linear;
  for (int i = 0; i < 2; ++i) out.row(i) += scaled(g.row(i).transpose(), log_in).transpose();
  return out;
}

namespace {

PhasePoint apply_g(const SurfaceMap& map, const PhasePoint& p, Direction dir) {
  return dir == Direction::Forward ? map.forward(p) : map.backward(p);
}

Mat2 dg_at(const SurfaceMap& map, const PhasePoint& p, Direction dir) {
  return dir == Direction::Forward ? map.derivative(p) : map.inverse_derivative(p);
}

// diag(A, B) of the reduced cocycle from source to image along g. Hyperbolicity
// is enforced inside reduced_cocycle.
Mat2 cocycle_diagonal(const SurfaceMap& map, const PesinChart& source, const PesinChart& image, Direction dir) {
  if (dir == Direction::Forward) {
    const Mat2 red = linear::reduced_cocycle(source.frame, image.frame, map.derivative(source.x));
    return (Mat2() << red(0, 0), 0.0, 0.0, red(1, 1)).finished();
  }
  const Mat2 red = linear::reduced_cocycle(image.frame, source.frame, map.derivative(image.x));
  return (Mat2() << 1.0 / red(0, 0), 0.0, 0.0, 1.0 / red(1, 1)).finished();
}

// Ψ_target^{-1}∘g∘Ψ_source written as (Ψ_target^{-1}∘Ψ_image)∘g_x with g_x the
// map between the source and image charts, whose linear part is exactly D.
// d0 receives the plain product C_image^{-1}·dg·C_source.
ChartJet jet_from(const SurfaceMap& map, const PesinChart& source, const PesinChart& image, const PesinChart& target,
                  Direction dir, const Mat2& D, Mat2* d0) {
  const PhasePoint gx = apply_g(map, source.x, dir);
  const double miss = map.distance(gx, image.x);
  if (!(miss < 1e-9)) fail(ErrorKind::InvalidInput, "image chart is not based at the image of the source");
  const Vec2 link = map.displacement(target.x, image.x);
  if (!link.allFinite()) fail(ErrorKind::DomainEscape, "target chart on another component");
  const Mat2 ci_inv = image.frame.C_inv();
  const Mat2& cs = source.frame.C;
  if (d0) *d0 = ci_inv * dg_at(map, source.x, dir) * cs;

  std::array<Mat2, 2> quad;
  const auto h = map.hessian(source.x, dir == Direction::Backward);
  for (int i = 0; i < 2; ++i) {
    const Mat2 m = cs.transpose() * (ci_inv(i, 0) * h[0] + ci_inv(i, 1) * h[1]) * cs;
    quad[static_cast<std::size_t>(i)] = 0.5 * (m + m.transpose());
  }
  const auto lu = target.frame.C.partialPivLu();
  const Mat2 Lg = target.frame.C == image.frame.C ? Mat2::Identity() : Mat2(lu.solve(image.frame.C));

  ChartJet jet;
  jet.offset = link.isZero(0.0) ? Vec2::Zero() : Vec2(lu.solve(link));
  jet.linear = Lg * D;
  for (int i = 0; i < 2; ++i) jet.quad[static_cast<std::size_t>(i)] = Lg(i, 0) * quad[0] + Lg(i, 1) * quad[1];
  return jet;
}

ChartMapDecomposition decompose(const SurfaceMap& map, const PesinChart& source, const PesinChart& image,
                                const PesinChart& target, Direction dir, double A, double B, double gamma,
                                const DecompositionOptions& opts, double default_log_half_width) {
  const int g = opts.grid;
  if (g < 3) fail(ErrorKind::InvalidInput, "grid needs at least 3 points per side");
  ChartMapDecomposition out;
  out.A = A;
  out.B = B;
  out.gamma = gamma;
  out.grid = g;
  const double logL = opts.log_half_width.value_or(default_log_half_width);
  out.log_half_width = logL;
  out.normalized = logL <= std::log(opts.direct_threshold);

  const Mat2 D = (Mat2() << A, 0.0, 0.0, B).finished();
  const ChartJet jet = jet_from(map, source, image, target, dir, D, &out.d0);
  const Mat2 G = jet.linear - D;
  out.log_h0 = log_sup(jet.offset);
  out.log_grad0 = log_rows(G);

  const double step = 2.0 / (g - 1);
  auto u_at = [g, step](int i, int j) { return Vec2(-1.0 + step * i, -1.0 + step * j); };
  const std::size_t count = static_cast<std::size_t>(g) * static_cast<std::size_t>(g);
  out.h_scaled.resize(count);
  std::vector<Mat2> grad(count);
  double df_sup = 0.0;

  if (out.normalized) {
    // h(Lu) = offset + L·G u + L²·q(u), each piece carried at its own scale.
    const double lq = log_quad(jet.quad);
    const double Sh = std::max({log_sup(jet.offset), logL + log_rows(G), 2.0 * logL + lq});
    const double Si = std::max({log_sup(jet.offset), logL + log_rows(jet.linear), 2.0 * logL + lq});
    double h_best = 0.0, img_best = 0.0, grad_q = 0.0;
    for (int i = 0; i < g; ++i) {
      for (int j = 0; j < g; ++j) {
        const std::size_t p = static_cast<std::size_t>(i) * g + j;
        const Vec2 u = u_at(i, j);
        const Vec2 qu = quad_value(jet.quad, u);
        if (Sh > kNegInf) {
          const Vec2 hs = scaled(jet.offset, -Sh) + scaled(G * u, logL - Sh) + scaled(qu, 2.0 * logL - Sh);
          h_best = std::max(h_best, hs.cwiseAbs().maxCoeff());
          out.h_scaled[p] = scaled(hs, Sh - logL);
        } else {
          out.h_scaled[p] = Vec2::Zero();
        }
        const Vec2 is = scaled(jet.offset, -Si) + scaled(jet.linear * u, logL - Si) + scaled(qu, 2.0 * logL - Si);
        img_best = std::max(img_best, is.cwiseAbs().maxCoeff());
        grad_q = std::max(grad_q, std::exp(log_rows(quad_gradient(jet.quad, u))));
        df_sup = std::max(df_sup, operator_norm(jet.gradient_scaled(u, logL)));
      }
    }
    out.log_h_sup = Sh + safe_log(h_best);
    out.log_image_sup = Si + safe_log(img_best);
    out.log_grad_sup = log_add(G.isZero(0.0) ? kNegInf : log_rows(G), logL + safe_log(grad_q));
    // ∇h is affine in u, so the quotient depends only on the grid offset.
    double hol = kNegInf;
    for (int span = 1; span < g; span *= 2) {
      for (const Vec2& du : {Vec2(span, 0), Vec2(0, span), Vec2(span, span)}) {
        const Vec2 d = step * du;
        hol = std::max(hol, logL + log_rows(quad_gradient(jet.quad, d)) - gamma * (logL + std::log(d.norm())));
      }
    }
    out.log_holder = hol;
  } else {
    const double L = std::exp(logL);
    const PhasePoint gx = apply_g(map, source.x, dir);
    const Mat2 ct_inv = target.frame.C_inv();
    const Vec2 link = map.displacement(target.x, image.x);
    double h_sup = 0.0, img_sup = 0.0, grad_sup = 0.0;
    for (int i = 0; i < g; ++i) {
      for (int j = 0; j < g; ++j) {
        const std::size_t p = static_cast<std::size_t>(i) * g + j;
        const Vec2 v = L * u_at(i, j);
        const PhasePoint pv = map.translate(source.x, source.frame.C * v);
        PhasePoint gp;
        Mat2 dgp;
        try {
          gp = apply_g(map, pv, dir);
          dgp = dg_at(map, pv, dir);
        } catch (const Error& e) {
          fail(ErrorKind::DomainEscape, std::string("chart domain meets the singular set: ") + e.what());
        }
        const Vec2 w = map.displacement(gx, gp);
        if (!w.allFinite()) fail(ErrorKind::DomainEscape, "image left the component");
        const Vec2 val = ct_inv * (link + w);
        const Vec2 h = val - D * v;
        out.h_scaled[p] = h / L;
        h_sup = std::max(h_sup, h.cwiseAbs().maxCoeff());
        img_sup = std::max(img_sup, val.cwiseAbs().maxCoeff());
        grad[p] = ct_inv * dgp * source.frame.C - D;
        grad_sup = std::max(grad_sup, std::exp(log_rows(grad[p])));
        df_sup = std::max(df_sup, operator_norm(D + grad[p]));
      }
    }
    out.log_h_sup = safe_log(h_sup);
    out.log_image_sup = safe_log(img_sup);
    out.log_grad_sup = safe_log(grad_sup);
    double hol = kNegInf;
    for (int span = 1; span < g; span *= 2) {
      for (const auto& [di, dj] : {std::pair{span, 0}, std::pair{0, span}, std::pair{span, span}}) {
        const double ldist = logL + std::log(step * std::hypot(di, dj));
        for (int i = 0; i + di < g; ++i) {
          for (int j = 0; j + dj < g; ++j) {
            const std::size_t p = static_cast<std::size_t>(i) * g + j;
            const std::size_t q = static_cast<std::size_t>(i + di) * g + (j + dj);
            hol = std::max(hol, log_rows(grad[q] - grad[p]) - gamma * ldist);
          }
        }
      }
    }
    out.log_holder = hol;
  }
  out.log_df_sup = std::log(df_sup);
  out.log_norm = log_add(out.log_h_sup, log_add(out.log_grad_sup, out.log_holder));
  return out;
}

}  // namespace

ChartJet chart_jet(const SurfaceMap& map, const PesinChart& source, const PesinChart& image, const PesinChart& target,
                   Direction dir) {
  return jet_from(map, source, image, target, dir, cocycle_diagonal(map, source, image, dir), nullptr);
}

ChartMapDecomposition chart_map_fx(const SurfaceMap& map, const ChartContext& ctx, const PesinChart& x,
                                   const PesinChart& fx, const DecompositionOptions& opts) {
  const Mat2 red = linear::reduced_cocycle(x.frame, fx.frame, map.derivative(x.x));
  const double logL = std::log(10.0) + x.log_Q(ctx.eps);
  auto out = decompose(map, x, fx, fx, Direction::Forward, red(0, 0), red(1, 1), ctx.beta / 2.0, opts, logL);
  if (!opts.check_bounds) return out;
  if (!(std::log(2.0) + out.log_half_width < x.log_r)) fail(ErrorKind::DomainEscape, "R[10Q] exceeds the chart domain");
  if (!(out.log_image_sup <= fx.log_r)) fail(ErrorKind::DomainEscape, "image leaves the target chart");
  const double le = std::log(ctx.eps.eps);
  if (!(out.log_norm < le)) fail(ErrorKind::BoundViolated, "‖h‖ ≥ ε: log ‖h‖ = " + std::to_string(out.log_norm));
  const double df_bound = std::log(2.0 * (1.0 + std::exp(2.0 * ctx.chi))) - ctx.a * std::log(x.rho);
  if (!(out.log_df_sup < df_bound)) fail(ErrorKind::BoundViolated, "‖df_x‖_0 above 2(1+e^{2χ})/ρ^a");
  return out;
}

ChartMapDecomposition chart_map_fxy(const SurfaceMap& map, const ChartContext& ctx, const PesinChart& source,
                                    const PesinChart& image, const PesinChart& target, Direction dir,
                                    const DecompositionOptions& opts) {
  const EpsilonConfig& cfg = ctx.eps;
  const bool fwd = dir == Direction::Forward;
  if (!(fwd ? overlap_test(map, cfg, image, target) : overlap_test(map, cfg, target, image))) {
    fail(ErrorKind::OverlapMissing, "image chart does not ε-overlap the target chart");
  }
  const Mat2 D = cocycle_diagonal(map, source, image, dir);
  const double logL = std::log(10.0) + source.log_Q(cfg);
  auto out = decompose(map, source, image, target, dir, D(0, 0), D(1, 1), ctx.beta / 3.0, opts, logL);
  if (!opts.check_bounds) return out;
  if (!(out.log_image_sup <= target.log_r)) fail(ErrorKind::DomainEscape, "image leaves the target chart");
  const double le = std::log(cfg.eps);
  const double log_eta = fwd ? image.log_eta(cfg) : target.log_eta(cfg);
  if (!(out.log_h0 < le + log_eta)) fail(ErrorKind::BoundViolated, "‖h(0)‖ ≥ εη");
  if (!(out.log_grad0 < le + ctx.beta / 3.0 * log_eta)) fail(ErrorKind::BoundViolated, "‖∇h(0)‖ ≥ εη^{β/3}");
  if (!(out.log_holder < le)) fail(ErrorKind::BoundViolated, "Hol_{β/3}(∇h) ≥ ε");
  return out;
}

double log_chart_distance(const SurfaceMap& map, const PesinChart& c1, const PesinChart& c2) {
  if (c1.x.component != c2.x.component) return std::numeric_limits<double>::infinity();
  const double d = map.distance(c1.x, c2.x);
  const Mat2 diff = c1.frame.C - c2.frame.C;
  const double dc = diff.isZero(0.0) ? 0.0 : operator_norm(diff);
  return safe_log(d + dc);
}

bool overlap_test(const SurfaceMap& map, const EpsilonConfig& cfg, const PesinChart& c1, const PesinChart& c2) {
  if (std::abs(c1.eta_exp - c2.eta_exp) > 3) return false;
  return log_chart_distance(map, c1, c2) < 4.0 * (c1.log_eta(cfg) + c2.log_eta(cfg));
}

namespace {

// sup over v ∈ R[e^{log_w}] of ‖offset + N v‖_∞, as a log.
double log_affine_sup(const Vec2& offset, const Mat2& N, double log_w) {
  const double S = std::max(log_sup(offset), log_w + log_rows(N));
  if (S == kNegInf) return kNegInf;
  double best = 0.0;
  for (double a : {-1.0, 1.0})
    for (double b : {-1.0, 1.0}) {
      const Vec2 v = scaled(offset, -S) + scaled(N * Vec2(a, b), log_w - S);
      best = std::max(best, v.cwiseAbs().maxCoeff());
    }
  return S + safe_log(best);
}

double log_abs_log_ratio(double a, double b) { return safe_log(std::abs(std::log(std::abs(a) / std::abs(b)))); }

}  // namespace

ChangeOfCoordinates change_of_coordinates(const SurfaceMap& map, const ChartContext& ctx, const PesinChart& c1,
                                          const PesinChart& c2) {
  const EpsilonConfig& cfg = ctx.eps;
  if (!overlap_test(map, cfg, c1, c2)) fail(ErrorKind::OverlapMissing, "charts do not ε-overlap");
  const double le1 = c1.log_eta(cfg), le2 = c2.log_eta(cfg);

  auto affine = [&](const PesinChart& from, const PesinChart& to, Vec2& offset, Mat2& lin) {
    if (from.frame.C == to.frame.C) {
      lin = Mat2::Identity();
    } else {
      lin = to.frame.C.partialPivLu().solve(from.frame.C);
    }
    const Vec2 w = map.displacement(to.x, from.x);
    offset = w.isZero(0.0) ? Vec2::Zero() : Vec2(to.frame.C.partialPivLu().solve(w));
  };

  ChangeOfCoordinates out;
  affine(c1, c2, out.offset, out.linear);
  out.log_domain = 2.0 * ctx.a * std::log(c1.dist);
  const Mat2 N = out.linear - Mat2::Identity();
  out.log_norm = log_add(log_affine_sup(out.offset, N, out.log_domain), N.isZero(0.0) ? kNegInf : std::log(operator_norm(N)));
  out.log_bound = std::log(cfg.eps) + 2.0 * (le1 + le2);
  out.log_s_ratio = log_abs_log_ratio(c1.frame.s, c2.frame.s);
  out.log_u_ratio = log_abs_log_ratio(c1.frame.u, c2.frame.u);
  out.log_alpha_ratio = log_abs_log_ratio(std::sin(c1.frame.alpha), std::sin(c2.frame.alpha));

  // Ψ_i(R[e^{-2ε}η_i]) ⊂ Ψ_j(R[η_j]) in both orders.
  for (int order = 0; order < 2; ++order) {
    const PesinChart& from = order == 0 ? c1 : c2;
    const PesinChart& to = order == 0 ? c2 : c1;
    Vec2 off;
    Mat2 lin;
    affine(from, to, off, lin);
    const double reach = log_affine_sup(off, lin, from.log_eta(cfg) - 2.0 * cfg.eps);
    if (!(reach <= to.log_eta(cfg))) out.inclusion = false;
  }

  const double ratio_bound = 3.0 * (le1 + le2);
  if (!(out.log_norm < out.log_bound)) {
    fail(ErrorKind::BoundViolated, "‖Ψ₂^{-1}Ψ₁ − Id‖ = e^" + std::to_string(out.log_norm) + " ≥ ε(η₁η₂)²");
  }
  if (!(out.log_s_ratio < ratio_bound && out.log_u_ratio < ratio_bound)) {
    fail(ErrorKind::BoundViolated, "s or u ratio outside e^{±(η₁η₂)³}");
  }
  if (!(out.log_alpha_ratio < ratio_bound)) fail(ErrorKind::BoundViolated, "sin α ratio outside e^{±(η₁η₂)³}");
  if (!out.inclusion) fail(ErrorKind::BoundViolated, "overlap inclusion fails");
  return out;
}

std::vector<ChartRecord> chart_records(const EpsilonConfig& cfg, long first_n, std::span<const long> q_exps,
                                       const GreedyResult& greedy) {
  std::vector<ChartRecord> out(q_exps.size());
  for (std::size_t i = 0; i < q_exps.size(); ++i) {
    ChartRecord& r = out[i];
    r.n = first_n + static_cast<long>(i);
    r.q_exp = q_exps[i];
    r.q_eps_exp = greedy.q[i];
    r.qs_exp = greedy.qs[i];
    r.qu_exp = greedy.qu[i];
    r.log_Q = cfg.log_value(r.q_exp);
    r.log_q = cfg.log_value(r.q_eps_exp);
    r.log_qs = cfg.log_value(r.qs_exp);
    r.log_qu = cfg.log_value(r.qu_exp);
    r.converged = greedy.converged[i];
  }
  return out;
}

}  // namespace pesin::charts
