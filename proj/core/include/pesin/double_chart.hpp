#pragma once

#include "pesin/charts.hpp"

#include <array>
#include <cstdint>

namespace pesin::coding {

using charts::EpsilonConfig;
using charts::PesinChart;

// Coarse-graining bin of a center: k_i = ⌊-log d(f^i x, D)⌋, ℓ_i = ⌊log‖C(f^i x)^{-1}‖⌋
// and the cover cell a_i for i = -1, 0, 1, then m = ⌊-log Q⌋ and the size
// scale j with p^s∧p^u ∈ [e^{-j-2}, e^{-j+2}].
struct BinSignature {
  std::array<long, 3> k{};
  std::array<long, 3> l{};
  std::array<std::uint64_t, 3> a{};
  long m = 0;
  long j = 0;

  bool operator==(const BinSignature&) const = default;
};

// Ψ_x^{p^s,p^u}, together with the charts at f(x) and f^{-1}(x) that the
// overlap conditions compare against.
struct DoubleChart {
  int center = -1;
  PesinChart chart;
  PesinChart next;
  PesinChart prev;
  long ps_exp = 0;
  long pu_exp = 0;
  BinSignature bin;

  // p^s∧p^u as an exponent.
  long pmin_exp() const { return std::max(ps_exp, pu_exp); }
  long q_exp() const { return chart.q_exp; }
};

// Throws InvalidInput unless 0 < p^s, p^u ≤ δ_ε Q and p^s∧p^u ∈ [e^{-j-2}, e^{-j+2}] for bin.j.
void validate_double_chart(const EpsilonConfig& cfg, const DoubleChart& v);

// j with p^s∧p^u ∈ [e^{-j-2}, e^{-j+2}], the nearest integer to -log(p^s∧p^u).
long size_scale(const EpsilonConfig& cfg, long pmin_exp);

// p^s(v) = min{e^ε p^s(w), δ_ε Q(x)} and p^u(w) = min{e^ε p^u(v), δ_ε Q(y)}.
bool size_condition_holds(const EpsilonConfig& cfg, const DoubleChart& v, const DoubleChart& w);
// Ψ_{f(x)} ≈ Ψ_y at size p^s∧p^u(w), Ψ_{f^{-1}(y)} ≈ Ψ_x at size p^s∧p^u(v).
bool overlap_condition_holds(const geometry::SurfaceMap& map, const EpsilonConfig& cfg, const DoubleChart& v,
                const DoubleChart& w);
bool edge_test(const geometry::SurfaceMap& map, const EpsilonConfig& cfg, const DoubleChart& v,
               const DoubleChart& w);

}  // namespace pesin::coding
