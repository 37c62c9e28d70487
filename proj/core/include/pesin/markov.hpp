#pragma once

#include "pesin/coding.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <array>
#include <map>
#include <vector>

namespace pesin::markov {

using BigInt = boost::multiprecision::cpp_int;
using charts::ChartContext;
using coding::Alphabet;
using coding::DoubleChart;
using coding::Itinerary;
using coding::ShiftGraph;
using geometry::PhasePoint;
using geometry::SurfaceMap;
using manifolds::AdmissibleManifold;
using manifolds::ChartPoint;

// π(σ^n v̄) for one corpus word and one window index n, with the stable and
// unstable fibres V^s, V^u of that word at its vertex.
struct Sample {
  int word = -1;
  long time = 0;
  int vertex = -1;
  // Distinct-point id, shared by samples closer than the point tolerance.
  int point = -1;
  PhasePoint x;
  ChartPoint w;
  AdmissibleManifold vs;
  AdmissibleManifold vu;
  // Sample at time + 1 of the same word, -1 at the window end.
  int next = -1;
};

struct CorpusOptions {
  long window = 10;
  long depth = 40;
  double point_tolerance = 1e-9;
  bool strict = true;
};

struct Corpus {
  std::vector<Itinerary> words;
  std::vector<Sample> samples;
  std::vector<PhasePoint> points;
  long window = 0;
  long depth = 0;
  // Largest |f(π(σ^n v̄)) − π(σ^{n+1} v̄)| and chart-map step error.
  double equivariance = 0.0;
  double step_error = 0.0;
};

// Projects every word (anchor window + depth) and keeps the 2·window + 1
// shadowed points of each. Throws EmptyCover for an empty corpus.
Corpus build_corpus(const SurfaceMap& map, const ChartContext& ctx, const Alphabet& alphabet,
                    const std::vector<Itinerary>& words, const CorpusOptions& opts = {});

// Finite sets of point ids with an s- and a u-fibre for each member; fibres
// are point ids inside the set and contain the member.
struct SetSystem {
  std::size_t points = 0;
  std::vector<std::vector<int>> sets;
  std::vector<std::vector<std::vector<int>>> s_fibre;
  std::vector<std::vector<std::vector<int>>> u_fibre;

  // Index of p in sets[i], or -1.
  int member_index(std::size_t i, int p) const;
};

// Throws InvalidInput when the shapes disagree or a fibre leaves its set.
void validate_set_system(const SetSystem& sys);

// Sets meeting each set, itself included.
std::vector<std::vector<int>> intersecting_sets(const SetSystem& sys);

struct BracketCheck {
  std::size_t checked = 0;
  // Largest log ‖[x,y]‖_∞ − log(10^{-2}(p^s∧p^u)), negative inside the box.
  double worst_margin = kNegInf;
};

struct Cover {
  SetSystem system;
  // Vertex v of Z(v) for every set.
  std::vector<int> vertex;
  // Sample carrying the fibres of each member, same shape as system.sets.
  std::vector<std::vector<int>> representative;
  std::vector<std::vector<int>> neighbours;
  std::size_t max_neighbours = 0;
  BracketCheck brackets;
};

struct CoverOptions {
  // Fibre membership: |s − F(t)| ≤ tolerance in units of the fibre domain.
  double fibre_tolerance = 1e-6;
  // Bracket pairs checked per set.
  std::size_t bracket_pairs = 16;
  bool strict = true;
};

// Z(v) = the corpus points coded with v at time 0. Fibres collect the members
// lying on the V^s / V^u of each member's word. Throws EmptyCover, and
// whatever intersect throws for a bracket.
Cover build_cover(const SurfaceMap& map, const ChartContext& ctx, const Alphabet& alphabet, const Corpus& corpus,
                  const CoverOptions& opts = {});

// [x, y] = W^s(x) ∩ W^u(y) in the chart of v.
manifolds::Intersection smale_bracket(const ChartContext& ctx, const DoubleChart& v, const AdmissibleManifold& vs_x,
                                      const AdmissibleManifold& vu_y, bool strict = true);

// |f_{v0,v1}([x,y]_0) − [f x, f y]_1|_∞ in units of p^s∧p^u(v1), the fibres at
// v1 being those of the shifted words.
double bracket_step_error(const SurfaceMap& map, const ChartContext& ctx, const DoubleChart& v0,
                          const DoubleChart& v1, const AdmissibleManifold& vs0, const AdmissibleManifold& vu0,
                          const AdmissibleManifold& vs1, const AdmissibleManifold& vu1);

// (i, j, code) for every set i containing the point and every j meeting i;
// code bit 1: W^s(x, Z_i) ∩ Z_j ≠ ∅, bit 0: W^u(x, Z_i) ∩ Z_j ≠ ∅.
using Signature = std::vector<std::array<int, 3>>;

struct Partition {
  // Rectangles as sorted point ids.
  std::vector<std::vector<int>> rectangles;
  std::vector<Signature> signatures;
  // Rectangle of every point, -1 for points outside every set.
  std::vector<int> rectangle_of;
  // The rectangles as a set system with fibres W(x, Z_i) ∩ R.
  SetSystem system;
  std::size_t max_sets_per_rectangle = 0;
  std::size_t max_rectangles_per_set = 0;
};

Signature point_signature(const SetSystem& sys, const std::vector<std::vector<int>>& neighbours, int p);

// Groups points by signature.
Partition refine(const SetSystem& sys);
bool same_partition(const Partition& a, const Partition& b);

struct Extension {
  ShiftGraph graph;
  std::vector<int> rectangle_of_sample;
  // Corpus chains whose rectangle word is a path in the graph.
  std::size_t valid_words = 0;
  std::size_t words = 0;
};

// R → S when a sample in R has its successor in S.
Extension build_extension(const Partition& partition, const Corpus& corpus);

struct CylinderOptions {
  double stop_diameter = 1e-8;
  long max_depth = 80;
};

struct CylinderTrace {
  std::vector<long> depth;
  // Diameter of the hull of the depth-n cylinder, in units of p^s∧p^u(v_0).
  std::vector<double> log_diameter;
  // Least-squares slope of log_diameter per step.
  double rate = 0.0;
  ChartPoint point;
  PhasePoint x;
  bool converged = false;
};

// π̂ of the rectangle word lifted to the vertex word it: the chart box at
// v_{±n} is pulled back to v_0 through the graph transforms of its extreme
// admissible graphs (F ≡ ±10^{-3}·½(p^s∧p^u)), and the four corner
// intersections span the cylinder hull. Stops at stop_diameter. The word
// needs max_depth letters on both sides of the anchor unless it stops sooner;
// throws CylinderEmpty when it runs out first.
CylinderTrace pi_hat(const SurfaceMap& map, const ChartContext& ctx, const Alphabet& alphabet, const Itinerary& it,
                     const CylinderOptions& opts = {});

struct PiHatEquivariance {
  // |f_{v0,v1}(π̂) − π̂∘σ̂|_∞ in units of p^s∧p^u(v1), and the physical distance.
  double chart_error = 0.0;
  double physical_error = 0.0;
};

PiHatEquivariance pi_hat_equivariance(const SurfaceMap& map, const ChartContext& ctx, const Alphabet& alphabet,
                                      const Itinerary& it, const CylinderOptions& opts = {});

struct MarkovReport {
  std::size_t checks = 0;
  std::size_t violations = 0;
  // Largest residual seen, in fibre-domain units; inf when a point escaped.
  double worst = 0.0;

  double rate() const { return checks ? static_cast<double>(violations) / static_cast<double>(checks) : 0.0; }
};

struct MarkovOptions {
  double tolerance = 1e-6;
  int nodes = 9;
};

// f(W^s(x, R₀)) ⊂ W^s(f x, R₁) and f^{-1}(W^u(f x, R₁)) ⊂ W^u(x, R₀) along
// every corpus step, with the full admissible graphs as fibres. owner, when
// given, reassigns the fibres of sample i to sample owner[i].
MarkovReport markov_property_check(const SurfaceMap& map, const ChartContext& ctx, const Alphabet& alphabet,
                                   const Corpus& corpus, const MarkovOptions& opts = {},
                                   const std::vector<int>* owner = nullptr);

struct MultiplicityCluster {
  PhasePoint x;
  std::size_t words = 0;
  // Distinct first letters times distinct last letters over the cluster.
  std::size_t end_bound = 0;
};

struct MultiplicityReport {
  std::map<std::size_t, std::size_t> histogram;
  std::size_t max_multiplicity = 0;
  std::size_t bound_exceeded = 0;
  std::vector<MultiplicityCluster> clusters;
};

// Clusters coded points within tolerance; multiplicity counts distinct words
// compared on the window around the anchor common to the cluster.
MultiplicityReport multiplicity_check(const SurfaceMap& map,
                                      const std::vector<std::pair<PhasePoint, Itinerary>>& coded,
                                      double tolerance = 1e-9);

// Tarjan's components, each sorted, in reverse topological order.
std::vector<std::vector<int>> strongly_connected_components(const ShiftGraph& g);
// gcd of the cycle lengths through a strongly connected component; 0 if acyclic.
long component_period(const ShiftGraph& g, const std::vector<int>& component);

// N(n) = tr A^n for n = 0..n_max, exact.
std::vector<BigInt> count_periodic_words(const ShiftGraph& g, int n_max);
double log_big(const BigInt& x);

struct EntropyEstimate {
  double h = 0.0;
  long period = 0;
  std::size_t component_size = 0;
  // Closed walks inside the largest component.
  std::vector<BigInt> component_counts;
  // log N(n)/n for the whole graph; -inf where N(n) = 0.
  std::vector<double> growth;
  // (max − min)/|mean| of growth over the top ten n; inf if one is -inf.
  double variation = 0.0;
};

// h is the slope of log N(n) over the multiples of the period in the upper
// half of 1..n_max, on the largest strongly connected component.
EntropyEstimate entropy_estimate(const ShiftGraph& g, int n_max = 60);

}  // namespace pesin::markov
