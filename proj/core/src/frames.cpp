#include "pesin/linear_pesin.hpp"

#include <algorithm>
#include <numeric>

namespace pesin::linear {

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

std::vector<Vec2> push_forward(const OrbitSegment& seg, std::size_t start, const Vec2& v0) {
  std::vector<Vec2> out(seg.size(), Vec2::Zero());
  out[start] = v0.normalized();
  for (std::size_t i = start; i + 1 < seg.size(); ++i) out[i + 1] = (seg.df[i] * out[i]).normalized();
  return out;
}

std::vector<Vec2> pull_back(const OrbitSegment& seg, std::size_t start, const Vec2& v0) {
  std::vector<Vec2> out(seg.size(), Vec2::Zero());
  out[start] = v0.normalized();
  for (std::size_t i = start; i > 0; --i) out[i - 1] = (seg.df[i - 1].inverse() * out[i]).normalized();
  return out;
}

const Vec2 kGeneric1(std::cos(1.0), std::sin(1.0));
const Vec2 kGeneric2(std::cos(2.0), std::sin(2.0));

}  // namespace

Splitting oseledets_splitting(const OrbitSegment& seg, const SplittingOptions& opts) {
  if (seg.back < opts.burn_in || seg.fwd < opts.burn_in) {
    fail(ErrorKind::InvalidInput, "segment shorter than the burn-in on one side");
  }
  const std::size_t last = seg.size() - 1;
  const std::size_t half = static_cast<std::size_t>(opts.burn_in / 2);
  const auto eu = push_forward(seg, 0, kGeneric1);
  const auto eu2 = push_forward(seg, half, kGeneric2);
  const auto es = pull_back(seg, last, kGeneric1);
  const auto es2 = pull_back(seg, last - half, kGeneric2);

  Splitting out;
  out.valid_from = -seg.back + opts.burn_in;
  out.valid_to = seg.fwd - opts.burn_in;
  out.e_s.resize(seg.size());
  out.e_u.resize(seg.size());
  double worst = 0.0;
  long worst_n = 0;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    out.e_s[i] = normalized_with_sign(es[i]);
    out.e_u[i] = normalized_with_sign(eu[i]);
    const long n = static_cast<long>(i) - seg.back;
    if (!out.valid(n)) continue;
    const double change = std::max(std::abs(cross(eu[i], eu2[i])), std::abs(cross(es[i], es2[i])));
    if (change > worst) {
      worst = change;
      worst_n = n;
    }
    if (std::abs(cross(es[i], eu[i])) < opts.tolerance) {
      fail(ErrorKind::SplittingNotConverged, "stable and unstable directions coincide", n);
    }
  }
  out.convergence = worst;
  if (worst > opts.tolerance) {
    fail(ErrorKind::SplittingNotConverged, "direction changes by " + std::to_string(worst) + " across windows", worst_n);
  }
  return out;
}

double equivariance_residual(const OrbitSegment& seg, const Splitting& split) {
  double worst = 0.0;
  for (long n = split.valid_from; n < split.valid_to; ++n) {
    const std::size_t i = seg.index(n);
    worst = std::max(worst, std::abs(cross((seg.df[i] * split.e_s[i]).normalized(), split.e_s[i + 1])));
    worst = std::max(worst, std::abs(cross((seg.df[i] * split.e_u[i]).normalized(), split.e_u[i + 1])));
  }
  return worst;
}

LyapunovEstimate lyapunov_exponents(const OrbitSegment& seg, long burn_in) {
  if (seg.size() < 2) fail(ErrorKind::InvalidInput, "segment needs at least one step");
  const std::size_t last = seg.size() - 1;
  const auto eu = push_forward(seg, 0, kGeneric1);
  const auto es = pull_back(seg, last, kGeneric1);

  std::size_t from = static_cast<std::size_t>(burn_in), to = last >= static_cast<std::size_t>(burn_in) ? last - burn_in : 0;
  if (from >= to) {
    from = 0;
    to = last;
  }
  double sum_s = 0.0, sum_u = 0.0;
  for (std::size_t i = from; i < to; ++i) {
    sum_s += std::log((seg.df[i] * es[i]).norm());
    sum_u += std::log((seg.df[i] * eu[i]).norm());
  }
  const double steps = static_cast<double>(to - from);

  // Gram–Schmidt QR over the whole segment from the coordinate basis.
  Mat2 Q = Mat2::Identity();
  double r11 = 0.0, r22 = 0.0;
  for (std::size_t i = 0; i < last; ++i) {
    const Mat2 M = seg.df[i] * Q;
    const double n1 = M.col(0).norm();
    const Vec2 q1 = M.col(0) / n1;
    const Vec2 w = M.col(1) - q1.dot(M.col(1)) * q1;
    r11 += std::log(n1);
    r22 += std::log(w.norm());
    Q.col(0) = q1;
    Q.col(1) = w.normalized();
  }

  LyapunovEstimate est;
  est.lambda1 = sum_s / steps;
  est.lambda2 = sum_u / steps;
  est.qr1 = std::min(r11, r22) / static_cast<double>(last);
  est.qr2 = std::max(r11, r22) / static_cast<double>(last);
  est.radius = std::max(std::abs(est.lambda1 - est.qr1), std::abs(est.lambda2 - est.qr2));
  // QR from a fixed basis carries an O(log N / N) transient on top of the
  // relative tolerance.
  const double transient = 2.0 * std::log(static_cast<double>(last) + 1.0) / static_cast<double>(last);
  est.agree = est.radius <= 0.05 * std::max(std::abs(est.lambda1), std::abs(est.lambda2)) + transient;
  return est;
}

SUParameters s_u_parameters(const OrbitSegment& seg, const Splitting& split, double chi, const SeriesOptions& opts) {
  if (!(chi > 0.0)) fail(ErrorKind::InvalidInput, "χ must be positive");
  const std::size_t count = seg.size();
  SUParameters out;
  out.rel_tol = opts.rel_tol;
  out.s.resize(count);
  out.u.resize(count);
  out.s_tail.resize(count);
  out.u_tail.resize(count);
  out.s_terms.resize(count);
  out.u_terms.resize(count);

  const double e2chi = std::exp(2.0 * chi);
  std::vector<double> a(count, 0.0), b(count, 0.0);
  double mean_log_a = 0.0, mean_log_b = 0.0;
  for (std::size_t i = 0; i + 1 < count; ++i) {
    a[i] = e2chi * (seg.df[i] * split.e_s[i]).squaredNorm();
    b[i + 1] = e2chi * (seg.df[i].inverse() * split.e_u[i + 1]).squaredNorm();
    mean_log_a += std::log(a[i]);
    mean_log_b += std::log(b[i + 1]);
  }
  if (count > 1) {
    mean_log_a /= static_cast<double>(count - 1);
    mean_log_b /= static_cast<double>(count - 1);
    if (mean_log_a >= 0.0) fail(ErrorKind::SeriesDiverging, "forward contraction along e_s does not beat e^{-χ}");
    if (mean_log_b >= 0.0) fail(ErrorKind::SeriesDiverging, "backward contraction along e_u does not beat e^{-χ}");
  }

  double s2 = 2.0, term = 2.0;
  for (std::size_t k = count; k-- > 0;) {
    if (k + 1 < count) {
      s2 = 2.0 + a[k] * s2;
      term *= a[k];
    }
    if (!(s2 < opts.sum_cap)) fail(ErrorKind::SeriesDiverging, "s partial sum exceeds cap", static_cast<long>(k) - seg.back);
    out.s[k] = std::sqrt(s2);
    out.s_tail[k] = term / s2;
    out.s_terms[k] = static_cast<long>(count - k);
    if (out.s_terms[k] > opts.max_terms && out.s_tail[k] > opts.rel_tol) {
      fail(ErrorKind::SeriesDiverging, "s series unresolved after the term cap", static_cast<long>(k) - seg.back);
    }
  }
  double u2 = 2.0;
  term = 2.0;
  for (std::size_t k = 0; k < count; ++k) {
    if (k > 0) {
      u2 = 2.0 + b[k] * u2;
      term *= b[k];
    }
    if (!(u2 < opts.sum_cap)) fail(ErrorKind::SeriesDiverging, "u partial sum exceeds cap", static_cast<long>(k) - seg.back);
    out.u[k] = std::sqrt(u2);
    out.u_tail[k] = term / u2;
    out.u_terms[k] = static_cast<long>(k + 1);
    if (out.u_terms[k] > opts.max_terms && out.u_tail[k] > opts.rel_tol) {
      fail(ErrorKind::SeriesDiverging, "u series unresolved after the term cap", static_cast<long>(k) - seg.back);
    }
  }
  return out;
}

double s_from_log_norms(std::span<const double> log_norms, double chi) {
  double log_sum = 0.0;
  for (std::size_t n = 0; n < log_norms.size(); ++n) {
    log_sum = log_add(log_sum, 2.0 * (static_cast<double>(n + 1) * chi + log_norms[n]));
  }
  return std::sqrt(2.0) * std::exp(0.5 * log_sum);
}

HyperbolicFrame build_frame(const Vec2& e_s, const Vec2& e_u, double s, double u, double chi) {
  const double root2 = std::sqrt(2.0);
  if (!(s >= root2 * (1.0 - 1e-15) && u >= root2 * (1.0 - 1e-15))) {
    fail(ErrorKind::InvalidInput, "s and u must be at least √2");
  }
  HyperbolicFrame f;
  f.e_s = e_s.normalized();
  f.e_u = e_u.normalized();
  const double sin_alpha = cross(f.e_s, f.e_u);
  if (std::abs(sin_alpha) < 1e-12) fail(ErrorKind::DegenerateAngle, "stable and unstable directions are parallel");
  f.alpha = std::atan2(std::abs(sin_alpha), f.e_s.dot(f.e_u));
  f.s = std::max(s, root2);
  f.u = std::max(u, root2);
  f.chi = chi;
  f.C.col(0) = f.e_s / f.s;
  f.C.col(1) = f.e_u / f.u;
  return f;
}

FrameSequence frames_along(const OrbitSegment& seg, const Splitting& split, const SUParameters& su, double chi) {
  // Longest run of resolved points inside the valid range.
  long best_from = 0, best_len = 0, run_from = 0, run_len = 0;
  for (long n = split.valid_from; n <= split.valid_to; ++n) {
    if (su.resolved(seg.index(n))) {
      if (run_len == 0) run_from = n;
      if (++run_len > best_len) {
        best_len = run_len;
        best_from = run_from;
      }
    } else {
      run_len = 0;
    }
  }
  if (best_len == 0) fail(ErrorKind::NotConverged, "no point has resolved s and u");
  FrameSequence out;
  out.first = best_from;
  for (long n = best_from; n < best_from + best_len; ++n) {
    const std::size_t i = seg.index(n);
    out.frames.push_back(build_frame(split.e_s[i], split.e_u[i], su.s[i], su.u[i], chi));
  }
  return out;
}

Mat2 reduced_cocycle(const HyperbolicFrame& x, const HyperbolicFrame& fx, const Mat2& df) {
  // Coordinates of df·C(x) in the basis {e_s(fx)/s(fx), e_u(fx)/u(fx)} by
  // Cramer's rule; inverting C(fx) loses digits when ‖C(fx)^{-1}‖ is large.
  const double det = cross(fx.e_s, fx.e_u);
  Mat2 D;
  for (int j = 0; j < 2; ++j) {
    const Vec2 v = df * x.C.col(j);
    D(0, j) = cross(v, fx.e_u) / det * fx.s;
    D(1, j) = cross(fx.e_s, v) / det * fx.u;
  }
  const double scale = operator_norm(D);
  // Rounding error bound of the triple product; entries below it carry no
  // information (the hyperbolicity margin of A is only 1/s(x)²).
  const double round = 8.0 * std::numeric_limits<double>::epsilon() * operator_norm(df) * operator_norm(x.C) *
                       fx.c_inv_frob();
  if (std::max(std::abs(D(0, 1)), std::abs(D(1, 0))) > std::max(1e-8 * scale, round)) {
    fail(ErrorKind::NotDiagonal, "reduced cocycle has off-diagonal entries");
  }
  if (!(std::abs(D(0, 0)) < std::exp(-x.chi) + round) || !(std::abs(D(1, 1)) > std::exp(x.chi) - round)) {
    fail(ErrorKind::NotHyperbolic, "diagonal entries do not clear e^{±χ}");
  }
  return D;
}

GrowthReport c_inverse_growth_check(const FrameSequence& frames, const OrbitSegment& seg, double a) {
  GrowthReport report;
  for (long n = frames.first + 1; n <= frames.last(); ++n) {
    const double rho = seg.rho[seg.index(n)];
    if (!(rho > 0.0)) continue;
    const double chi = frames.at(n).chi;
    const double log_rho = std::log(rho);
    const double log_bound = std::log(2.0) - 2.0 * a * log_rho + log_add(0.0, chi - a * log_rho) +
                             std::log(operator_norm(frames.at(n).C_inv()));
    const double margin = log_bound - std::log(operator_norm(frames.at(n - 1).C_inv()));
    ++report.checked;
    if (margin < report.worst_margin) {
      report.worst_margin = margin;
      report.witness = n;
    }
  }
  if (report.worst_margin < 0.0) {
    fail(ErrorKind::InequalityViolated, "‖C(f^{-1}x)^{-1}‖ growth bound fails", report.witness);
  }
  return report;
}

NuhReport nuh_diagnostics(const OrbitSegment& seg, const FrameSequence& frames, const NuhOptions& opts,
                          std::span<const double> log_qs, std::span<const double> log_qu) {
  NuhReport r;
  const long fwd = std::max(0L, frames.last());
  const long back = std::max(0L, -frames.first);
  const long fwd_tail = static_cast<long>(std::ceil(opts.tail_fraction * static_cast<double>(fwd)));
  const long back_tail = static_cast<long>(std::ceil(opts.tail_fraction * static_cast<double>(back)));
  auto in_tail = [&](long n) { return n == 0 ? false : (n > 0 ? n >= fwd_tail : -n >= back_tail); };

  // Least-squares slopes of log‖C^{±1}‖ against |n| on each side.
  struct Fit {
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    void add(double x, double y) {
      n += 1;
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    double slope() const {
      const double den = n * sxx - sx * sx;
      return den > 0.0 ? (n * sxy - sx * sy) / den : 0.0;
    }
  };
  Fit inv_f, inv_b, c_f, c_b;

  const Mat2 C0 = frames.contains(0) ? frames.at(0).C : frames.frames.front().C;
  for (long n = frames.first; n <= frames.last(); ++n) {
    const auto& fr = frames.at(n);
    const double an = static_cast<double>(std::abs(n));
    if (n >= 0) {
      inv_f.add(an, fr.log_c_inv_frob());
      c_f.add(an, std::log(fr.C.norm()));
    }
    if (n <= 0) {
      inv_b.add(an, fr.log_c_inv_frob());
      c_b.add(an, std::log(fr.C.norm()));
    }
    if (n != 0) {
      const double ret = (fr.C - C0).norm();
      if (ret < r.best_return) {
        r.best_return = ret;
        r.best_return_index = n;
      }
    }
    if (!in_tail(n)) continue;
    r.reg_ratio = std::max(r.reg_ratio, std::abs(safe_log(seg.rho[seg.index(n)])) / an);

    const std::size_t k = static_cast<std::size_t>(n - frames.first);
    if (n > 0 && k < log_qs.size()) r.log_qs_limsup = std::max(r.log_qs_limsup.value_or(kNegInf), log_qs[k]);
    if (n < 0 && k < log_qu.size()) r.log_qu_limsup = std::max(r.log_qu_limsup.value_or(kNegInf), log_qu[k]);
  }
  r.c_slope = std::max({std::abs(inv_f.slope()), std::abs(inv_b.slope()), std::abs(c_f.slope()), std::abs(c_b.slope())});
  r.reg_ok = r.reg_ratio < opts.reg_threshold;
  r.slopes_ok = r.c_slope < opts.slope_threshold;
  return r;
}

AdaptednessEstimate adaptedness_estimate(const SurfaceMap& map, long samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AdaptednessEstimate est;
  double sum = 0.0, sum_sq = 0.0, sum_rho = 0.0;
  long used = 0, used_rho = 0;
  long checkpoint = 1000;
  for (long i = 0; i < samples; ++i) {
    const PhasePoint x = map.sample_invariant(rng);
    const double d = map.dist_to_discontinuity(x);
    if (!(d > 0.0)) {
      ++est.skipped;
      continue;
    }
    const double l = std::log(d);
    sum += l;
    sum_sq += l * l;
    ++used;
    try {
      const double r = map.rho(x);
      if (r > 0.0) {
        sum_rho += std::log(r);
        ++used_rho;
      }
    } catch (const Error&) {
    }
    if (used == checkpoint) {
      est.running.emplace_back(used, sum / static_cast<double>(used));
      checkpoint *= 2;
    }
  }
  if (used == 0) fail(ErrorKind::InvalidInput, "no usable samples");
  est.mean_log_dist = sum / static_cast<double>(used);
  const double var = std::max(0.0, sum_sq / static_cast<double>(used) - est.mean_log_dist * est.mean_log_dist);
  est.stderr_log_dist = std::sqrt(var / static_cast<double>(used));
  est.mean_log_rho = used_rho ? sum_rho / static_cast<double>(used_rho) : kNegInf;
  est.running.emplace_back(used, est.mean_log_dist);
  if (est.running.size() >= 2) {
    est.stabilization = std::abs(est.running.back().second - est.running[est.running.size() - 2].second);
  }
  return est;
}

}  // namespace pesin::linear
