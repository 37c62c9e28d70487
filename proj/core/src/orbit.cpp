#include "pesin/linear_pesin.hpp"

#include <algorithm>

namespace pesin::linear {

namespace {

double checked_dist(const SurfaceMap& map, const PhasePoint& x, long n) {
  const double d = map.dist_to_discontinuity(x);
  if (!(d > kOrbitTolerance)) fail(ErrorKind::OrbitHitsDiscontinuity, "orbit point within tolerance of D", n);
  return d;
}

}  // namespace

OrbitSegment orbit_segment(const SurfaceMap& map, const PhasePoint& x, long back, long fwd) {
  if (back < 0 || fwd < 0) fail(ErrorKind::InvalidInput, "segment lengths must be non-negative");
  OrbitSegment seg;
  seg.back = back;
  seg.fwd = fwd;
  const std::size_t count = static_cast<std::size_t>(back + fwd + 1);
  seg.points.resize(count);
  seg.dist.resize(count);

  seg.points[seg.index(0)] = x;
  seg.dist[seg.index(0)] = checked_dist(map, x, 0);
  for (long n = 1; n <= fwd; ++n) {
    try {
      seg.points[seg.index(n)] = map.forward(seg.at(n - 1));
    } catch (const Error& e) {
      fail(ErrorKind::OrbitHitsDiscontinuity, e.what(), n - 1);
    }
    seg.dist[seg.index(n)] = checked_dist(map, seg.at(n), n);
  }
  for (long n = -1; n >= -back; --n) {
    try {
      seg.points[seg.index(n)] = map.backward(seg.at(n + 1));
    } catch (const Error& e) {
      fail(ErrorKind::OrbitHitsDiscontinuity, e.what(), n + 1);
    }
    seg.dist[seg.index(n)] = checked_dist(map, seg.at(n), n);
  }

  // One step beyond each end, for ρ at the endpoints.
  double before = 0.0, after = 0.0;
  try {
    before = map.dist_to_discontinuity(map.backward(seg.points.front()));
  } catch (const Error&) {
  }
  try {
    after = map.dist_to_discontinuity(map.forward(seg.points.back()));
  } catch (const Error&) {
  }

  seg.df.resize(count);
  seg.rho.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    try {
      seg.df[i] = map.derivative(seg.points[i]);
    } catch (const Error& e) {
      fail(ErrorKind::OrbitHitsDiscontinuity, e.what(), static_cast<long>(i) - back);
    }
    const double prev = i == 0 ? before : seg.dist[i - 1];
    const double next = i + 1 == count ? after : seg.dist[i + 1];
    seg.rho[i] = std::min({prev, seg.dist[i], next});
  }
  return seg;
}

OrbitSegment periodic_segment(const SurfaceMap& map, const std::vector<PhasePoint>& cycle, long back, long fwd) {
  if (cycle.empty()) fail(ErrorKind::InvalidInput, "empty cycle");
  const long p = static_cast<long>(cycle.size());
  std::vector<double> d(cycle.size());
  std::vector<Mat2> df(cycle.size());
  for (long k = 0; k < p; ++k) {
    d[k] = checked_dist(map, cycle[k], k);
    df[k] = map.derivative(cycle[k]);
  }
  auto mod = [p](long n) { return static_cast<std::size_t>(((n % p) + p) % p); };

  OrbitSegment seg;
  seg.back = back;
  seg.fwd = fwd;
  for (long n = -back; n <= fwd; ++n) {
    seg.points.push_back(cycle[mod(n)]);
    seg.df.push_back(df[mod(n)]);
    seg.dist.push_back(d[mod(n)]);
    seg.rho.push_back(std::min({d[mod(n - 1)], d[mod(n)], d[mod(n + 1)]}));
  }
  return seg;
}

}  // namespace pesin::linear
