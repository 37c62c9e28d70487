#include "pesin/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

namespace pesin::geometry {

namespace {

struct Refined {
  PhasePoint point;
  Mat2 monodromy;
  double residual;
};

std::optional<Refined> newton_periodic(const SurfaceMap& map, PhasePoint y, int period) {
  for (int it = 0; it < 40; ++it) {
    PhasePoint z = y;
    Mat2 J = Mat2::Identity();
    for (int k = 0; k < period; ++k) {
      J = map.derivative(z) * J;
      z = map.forward(z);
    }
    if (z.component != y.component) return std::nullopt;
    const Vec2 g = map.displacement(y, z);
    const double res = g.norm();
    if (res < 1e-13 || (it > 25 && res < 1e-12)) return Refined{y, J, res};
    const Mat2 A = J - Mat2::Identity();
    if (std::abs(A.determinant()) < 1e-14) return std::nullopt;
    Vec2 step = -A.inverse() * g;
    const double cap = 0.05 * map.metric_scale();
    if (step.norm() > cap) step *= cap / step.norm();
    y = map.translate(y, step);
  }
  return std::nullopt;
}

}  // namespace

std::vector<PeriodicOrbit> find_periodic_orbits(const SurfaceMap& map, const PeriodicSearch& opts,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<PeriodicOrbit> found;
  std::set<std::tuple<int, long long, long long>> seen;
  const double radius = opts.return_radius * map.metric_scale();
  long steps = 0;

  auto key_of = [](const PhasePoint& p) {
    return std::make_tuple(p.component, std::llround(p.r * 1e7), std::llround(p.theta * 1e7));
  };

  while (steps < opts.max_steps && static_cast<int>(found.size()) < opts.target_orbits) {
    std::vector<PhasePoint> traj;
    traj.push_back(map.sample_invariant(rng));
    try {
      for (int n = 0; n < 2000; ++n) traj.push_back(map.forward(traj.back()));
    } catch (const Error&) {
    }
    steps += static_cast<long>(traj.size());

    for (std::size_t n = 0; n < traj.size() && static_cast<int>(found.size()) < opts.target_orbits; ++n) {
      for (int p = opts.min_period; p <= opts.max_period; ++p) {
        if (n + p >= traj.size()) break;
        if (map.distance(traj[n], traj[n + p]) > radius) continue;
        std::optional<Refined> ref;
        try {
          ref = newton_periodic(map, traj[n], p);
        } catch (const Error&) {
          ref.reset();
        }
        if (!ref) continue;

        PeriodicOrbit orbit;
        orbit.residual = ref->residual;
        bool minimal = true;
        try {
          PhasePoint z = ref->point;
          for (int k = 0; k < p; ++k) {
            if (k > 0 && map.distance(z, ref->point) < 1e-8) minimal = false;
            orbit.points.push_back(z);
            z = map.forward(z);
          }
        } catch (const Error&) {
          continue;
        }
        if (!minimal) continue;

        const double tr = ref->monodromy.trace();
        if (std::abs(tr) <= 2.0 + 1e-9) continue;
        const double mu = 0.5 * (std::abs(tr) + std::sqrt(tr * tr - 4.0));
        orbit.exponent = std::log(mu) / p;
        if (orbit.exponent < opts.min_exponent) continue;

        double min_rho = std::numeric_limits<double>::infinity();
        try {
          for (const auto& q : orbit.points) min_rho = std::min(min_rho, map.rho(q));
        } catch (const Error&) {
          continue;
        }
        orbit.min_rho = min_rho;
        if (min_rho < opts.min_rho) continue;

        // Rotate so the lexicographically smallest point leads; that point is
        // the orbit's identity.
        auto lead = std::min_element(orbit.points.begin(), orbit.points.end(), [&](const auto& a, const auto& b) {
          return key_of(a) < key_of(b);
        });
        std::rotate(orbit.points.begin(), lead, orbit.points.end());
        if (!seen.insert(key_of(orbit.points.front())).second) continue;

        // Re-close the cycle from the new leading point.
        try {
          PhasePoint z = orbit.points.front();
          for (int k = 0; k < p; ++k) z = map.forward(z);
          orbit.residual = map.distance(z, orbit.points.front());
        } catch (const Error&) {
          continue;
        }
        if (orbit.residual > 1e-11) continue;
        found.push_back(std::move(orbit));
        if (static_cast<int>(found.size()) >= opts.target_orbits) break;
      }
    }
  }
  return found;
}

}  // namespace pesin::geometry
