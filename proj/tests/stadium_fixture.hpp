#pragma once

#include "pesin/coding.hpp"

namespace pesin::testing {

// Stadium cycles up to period 9 coded at ε = 0.01, built once per binary.
struct StadiumSetup {
  geometry::BilliardTable map{geometry::stadium_table()};
  charts::ChartContext ctx = charts::ChartContext::make(0.01, geometry::RegularityConstants{}, 0.5);
  coding::CenterDatabase db;
  coding::Alphabet alphabet;
};

inline const StadiumSetup& stadium() {
  static const StadiumSetup s = [] {
    StadiumSetup s;
    geometry::PeriodicSearch opts;
    opts.target_orbits = 24;
    opts.max_period = 9;
    s.db = coding::build_centers(s.map, s.ctx, {}, geometry::find_periodic_orbits(s.map, opts, 42));
    s.alphabet = coding::coarse_grain(s.map, s.ctx, s.db);
    return s;
  }();
  return s;
}

}  // namespace pesin::testing
