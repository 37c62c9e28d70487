#pragma once

#include "pesin/double_chart.hpp"
#include "pesin/manifolds.hpp"

#include <map>
#include <vector>

namespace pesin::coding {

using charts::ChartContext;
using geometry::PhasePoint;
using geometry::SurfaceMap;

// Γ(x) for a point of a stored periodic cycle, with the chart data of the
// cycle's own frames. next/prev are the neighbouring centers along the cycle.
struct Center {
  int id = -1;
  int cycle = -1;
  int index = 0;
  PesinChart chart;
  int next = -1;
  int prev = -1;
  // k̄, ℓ̄, ā at f^{-1}x, x, fx and m.
  std::array<long, 3> k{};
  std::array<long, 3> l{};
  std::array<std::uint64_t, 3> a{};
  long m = 0;
};

struct CenterDatabase {
  std::vector<Center> centers;
  // Center ids of each accepted cycle, in orbit order.
  std::vector<std::vector<int>> cycles;
  // Cycles dropped and why.
  std::vector<std::string> rejected;
};

struct CenterOptions {
  // Segment length on each side of the cycle used for splitting and s, u.
  long half_window = 600;
};

// One entry per point of every cycle whose frames resolve and whose charts
// pass their bounds.
CenterDatabase build_centers(const SurfaceMap& map, const ChartContext& ctx,
                             const geometry::RegularityConstants& consts,
                             const std::vector<geometry::PeriodicOrbit>& cycles, const CenterOptions& opts = {});

// Cell of the grid cover containing x, at a dyadic side ≤ 2𝔯 for distance d
// to D. Equal hashes for equal points.
std::uint64_t cover_cell(const SurfaceMap& map, const geometry::RegularityConstants& consts, const PhasePoint& x,
                         double dist);

// Greedy sizes on a periodic Q sequence: p^s_n = δ_ε min_{k≥0} e^{εk}Q_{n+k},
// p^u_n = δ_ε min_{k≥0} e^{εk}Q_{n-k}, exact because one period suffices.
void periodic_greedy(const EpsilonConfig& cfg, const std::vector<long>& q_exps, std::vector<long>& ps,
                     std::vector<long>& pu);

// Directed graph on vertex ids.
struct ShiftGraph {
  std::vector<std::vector<int>> out;
  std::vector<std::vector<int>> in;

  std::size_t size() const { return out.size(); }
  std::size_t edge_count() const;
  bool has_edge(int a, int b) const;
  std::size_t max_out_degree() const;
  std::size_t max_in_degree() const;
  // Subgraph on the kept vertices, renumbered in order; map[i] is the old id.
  ShiftGraph induced(const std::vector<bool>& keep, std::vector<int>* map = nullptr) const;
};

// Iteratively drops vertices with no in- or no out-edge; the survivors.
std::vector<bool> trim(const ShiftGraph& g);

struct AlphabetOptions {
  // Labels within ±K lattice steps of each center's greedy (p^s, p^u).
  long label_window = 2;
};

struct BinKey {
  std::array<long, 3> k{};
  std::array<long, 3> l{};
  std::array<std::uint64_t, 3> a{};
  long m = 0;

  auto operator<=>(const BinKey&) const = default;
};

struct AlphabetStats {
  std::size_t bins = 0;
  std::size_t net_centers = 0;
  std::size_t candidates = 0;
  std::size_t edge_tests = 0;
  std::size_t edges = 0;
  std::size_t relevant = 0;
  std::size_t max_out_degree = 0;
  std::size_t max_in_degree = 0;
};

struct Alphabet {
  double eps = 0.0;
  long label_window = 0;
  // Every emitted double chart; graph holds every edge among them.
  std::vector<DoubleChart> vertices;
  ShiftGraph graph;
  // Vertices on bi-infinite paths, after trimming.
  std::vector<bool> relevant;
  // Net centers by (bin, j).
  std::map<std::pair<BinKey, long>, std::vector<int>> nets;
  AlphabetStats stats;

  // Vertex id of (center, p^s, p^u), or -1.
  int find(int center, long ps_exp, long pu_exp) const;
  ShiftGraph relevant_graph(std::vector<int>* map = nullptr) const;

 private:
  friend Alphabet coarse_grain(const SurfaceMap&, const ChartContext&, const CenterDatabase&, const AlphabetOptions&);
  friend void reindex(Alphabet&);
  std::map<std::tuple<int, long, long>, int> index_;
};

void reindex(Alphabet& alphabet);

BinKey bin_of(const Center& c);

// Bins, e^{-8(j+2)}-nets per bin and j, size labels, all edges by
// edge_test on cover-cell candidates, relevance by trimming. Throws
// EmptyAlphabet.
Alphabet coarse_grain(const SurfaceMap& map, const ChartContext& ctx, const CenterDatabase& db,
                      const AlphabetOptions& opts = {});

// #{v : p^s, p^u > e^{-εt/3}} through a sorted index, and by a plain scan.
std::size_t count_above(const Alphabet& alphabet, long t_exp);
std::size_t count_above_scan(const Alphabet& alphabet, long t_exp);

// Finite word with the position of time 0.
struct Itinerary {
  std::vector<int> vertices;
  long anchor = 0;

  bool operator==(const Itinerary&) const = default;
};

bool is_path(const ShiftGraph& g, const Itinerary& it);

// Orbit of a database center over n = -half..half.
std::vector<int> orbit_window(const CenterDatabase& db, int center, long half);

// Per n, a net center in x_n's bin within e^{-8(j+2)} with Q ratio e^{±ε/3},
// labels by the min formulas over the cycle, and the edge checks. Throws
// NoBinCenter(n).
Itinerary sufficiency_itinerary(const SurfaceMap& map, const ChartContext& ctx, const CenterDatabase& db,
                                const Alphabet& alphabet, const std::vector<int>& orbit);

// A vertex repeats in the first third and one repeats in the last third.
bool sigma_sharp_filter(const Itinerary& it);

struct Projection {
  PhasePoint x;
  manifolds::ShadowResult shadow;
  // max over the window of |f(π(σ^n v̄)) − π(σ^{n+1} v̄)|.
  double equivariance = 0.0;
};

// π of the word through its stable and unstable manifolds; the word must have
// 2(window + depth) + 1 letters with anchor window + depth.
Projection project_pi(const SurfaceMap& map, const ChartContext& ctx, const Alphabet& alphabet, const Itinerary& it,
                      long window, long depth, bool strict = true);

struct DiagnosticItem {
  std::string id;
  // Smallest log(bound) − log(measured) over the window.
  double worst_margin = std::numeric_limits<double>::infinity();
  long witness = 0;
  long checked = 0;
};

struct DiagnosticReport {
  std::vector<DiagnosticItem> items;
  // σ_n of Ψ_y^{-1}∘Ψ_x ≈ (−1)^{σ_n} Id.
  std::vector<int> sigma;
  bool maximality = false;

  bool ok() const;
};

// Items (1)–(6) of the inverse theorem at every index n with |n| ≤ window,
// plus a forward index with p^s_n = δ_ε Q in each word. Throws
// DiagnosticFailed(item, n) when strict.
DiagnosticReport inverse_diagnostics(const SurfaceMap& map, const ChartContext& ctx, const Alphabet& alphabet,
                                     const Itinerary& a, const Itinerary& b, long window, bool strict = true);

// The word with its last letter replaced by another label of the same center
// that is still an edge from the previous letter, and likewise with the first
// letter; each is a second coding of the same shadowed point.
std::vector<Itinerary> window_end_recodings(const SurfaceMap& map, const ChartContext& ctx, const Alphabet& alphabet,
                                            const Itinerary& it);

}  // namespace pesin::coding
