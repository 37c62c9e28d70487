#include "pesin/double_chart.hpp"

#include <algorithm>

namespace pesin::coding {

long size_scale(const EpsilonConfig& cfg, long pmin_exp) {
  return std::lround(-cfg.log_value(pmin_exp));
}

void validate_double_chart(const EpsilonConfig& cfg, const DoubleChart& v) {
  const long floor = v.chart.q_exp + cfg.delta_exponent();
  if (v.ps_exp < floor || v.pu_exp < floor) fail(ErrorKind::InvalidInput, "p^s or p^u above δ_ε Q");
  const double lp = cfg.log_value(v.pmin_exp());
  const double j = static_cast<double>(v.bin.j);
  if (!(lp >= -j - 2.0 && lp <= -j + 2.0)) fail(ErrorKind::InvalidInput, "p^s∧p^u outside [e^{-j-2}, e^{-j+2}]");
}

namespace {

// min{e^ε p, δ_ε Q} on exponents.
long greedy_step(const EpsilonConfig& cfg, long p_exp, long q_exp) {
  return std::max(p_exp - 3, q_exp + cfg.delta_exponent());
}

PesinChart at_size(const PesinChart& c, long eta_exp) {
  PesinChart out = c;
  out.eta_exp = eta_exp;
  return out;
}

}  // namespace

bool size_condition_holds(const EpsilonConfig& cfg, const DoubleChart& v, const DoubleChart& w) {
  return v.ps_exp == greedy_step(cfg, w.ps_exp, v.chart.q_exp) && w.pu_exp == greedy_step(cfg, v.pu_exp, w.chart.q_exp);
}

bool overlap_condition_holds(const geometry::SurfaceMap& map, const EpsilonConfig& cfg, const DoubleChart& v,
                const DoubleChart& w) {
  const long qw = w.pmin_exp();
  const long pv = v.pmin_exp();
  return charts::overlap_test(map, cfg, at_size(v.next, qw), at_size(w.chart, qw)) &&
         charts::overlap_test(map, cfg, at_size(w.prev, pv), at_size(v.chart, pv));
}

bool edge_test(const geometry::SurfaceMap& map, const EpsilonConfig& cfg, const DoubleChart& v,
               const DoubleChart& w) {
  return size_condition_holds(cfg, v, w) && overlap_condition_holds(map, cfg, v, w);
}

}  // namespace pesin::coding
