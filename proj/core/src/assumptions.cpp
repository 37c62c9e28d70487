#include "pesin/geometry.hpp"

#include <algorithm>

namespace pesin::geometry {

void RegularityConstants::validate() const {
  if (!(a > 1.0)) fail(ErrorKind::InvalidInput, "regularity exponent a must exceed 1");
  if (!(beta > 0.0 && beta < 1.0)) fail(ErrorKind::InvalidInput, "Hölder exponent β must lie in (0,1)");
  if (!(K >= 1.0)) fail(ErrorKind::InvalidInput, "Hölder constant K must be at least 1");
}

bool AssumptionReport::ok() const {
  return std::all_of(margins.begin(), margins.end(), [](const auto& m) { return m.worst_margin >= 0.0; });
}

const AssumptionMargin* AssumptionReport::worst() const {
  const AssumptionMargin* w = nullptr;
  for (const auto& m : margins) {
    if (!w || m.worst_margin < w->worst_margin) w = &m;
  }
  return w;
}

AssumptionReport verify_assumptions(const SurfaceMap& map, const RegularityConstants& consts,
                                    const std::vector<PhasePoint>& sample, std::uint64_t seed, bool strict) {
  consts.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);

  AssumptionMargin a5{"derivative_bound"}, a6{"derivative_holder"}, a7{"conorm_bound"};
  auto record = [](AssumptionMargin& m, double margin, long witness) {
    ++m.checked;
    if (margin < m.worst_margin) {
      m.worst_margin = margin;
      m.witness = witness;
    }
  };

  for (long i = 0; i < static_cast<long>(sample.size()); ++i) {
    const PhasePoint& x = sample[i];
    double d = 0.0;
    Mat2 dfx, dfix;
    double rho = 0.0;
    try {
      d = map.dist_to_discontinuity(x);
      if (!(d > 0.0)) continue;
      dfx = map.derivative(x);
      dfix = map.inverse_derivative(x);
      rho = map.rho(x);
    } catch (const Error&) {
      continue;
    }
    const double log_bound = -consts.a * std::log(d);
    const double radius = 2.0 * consts.r_map(d) * 0.999;

    record(a5, log_bound - std::log(std::max(operator_norm(dfx), operator_norm(dfix))), i);
    for (int k = 0; k < 4; ++k) {
      const double phi = angle(rng);
      const Vec2 v = radius * Vec2(std::cos(phi), std::sin(phi));
      const PhasePoint y = map.translate(x, v);
      Mat2 dfy, dfiy;
      try {
        dfy = map.derivative(y);
        dfiy = map.inverse_derivative(y);
      } catch (const Error&) {
        continue;
      }
      record(a5, log_bound - std::log(std::max(operator_norm(dfy), operator_norm(dfiy))), i);
      const double sep = std::pow(v.norm(), consts.beta);
      const double ratio = std::max(operator_norm(dfx - dfy), operator_norm(dfix - dfiy)) / sep;
      record(a6, std::log(consts.K) - safe_log(ratio), i);
    }
    if (rho > 0.0) {
      const double m = std::min(conorm(dfx), conorm(dfix));
      record(a7, std::log(m) - consts.a * std::log(rho), i);
    }
  }

  AssumptionReport report{{a5, a6, a7}};
  if (strict) {
    for (const auto& m : report.margins) {
      if (m.worst_margin < 0.0) {
        fail(ErrorKind::AssumptionViolated, m.id + " violated, log-margin " + std::to_string(m.worst_margin),
             m.witness);
      }
    }
  }
  return report;
}

}  // namespace pesin::geometry
