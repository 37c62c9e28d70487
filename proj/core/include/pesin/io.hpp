#pragma once

#include "pesin/markov.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

// JSON persistence for every artifact that crosses a pipeline stage. Doubles
// are written in shortest round-trip form; non-finite values as the strings
// "inf", "-inf", "nan".
namespace pesin::io {

using nlohmann::json;

json number(double x);
double number(const json& j);

json to_json(const geometry::PhasePoint& x);
geometry::PhasePoint point_from_json(const json& j);

json to_json(const linear::HyperbolicFrame& f);
linear::HyperbolicFrame frame_from_json(const json& j);

json to_json(const charts::PesinChart& c);
charts::PesinChart chart_from_json(const json& j);

json to_json(const geometry::PeriodicOrbit& o);
geometry::PeriodicOrbit orbit_from_json(const json& j);

json to_json(const coding::CenterDatabase& db);
coding::CenterDatabase centers_from_json(const json& j);

// Charts are stored once and referenced by index from the vertices.
json to_json(const coding::Alphabet& a);
coding::Alphabet alphabet_from_json(const json& j);

json to_json(const coding::Itinerary& it);
coding::Itinerary itinerary_from_json(const json& j);

json to_json(const markov::Partition& p);
markov::Partition partition_from_json(const json& j);

// Throws InvalidInput naming the path when it cannot be read or parsed.
json read_json(const std::string& path);
// Two-space indentation and a trailing newline, so equal values give equal bytes.
void write_json(const std::string& path, const json& j);
void write_text(const std::string& path, const std::string& text);

// Pass/fail record of one asserted inequality: margin = log(bound) − log(measured)
// or bound − measured, positive when it holds.
struct Check {
  std::string id;
  double measured = 0.0;
  double bound = 0.0;
  double margin = 0.0;
  bool pass = false;
  std::string note;
};

// measured ≤ bound.
Check check_at_most(std::string id, double measured, double bound, std::string note = {});
// measured ≥ bound.
Check check_at_least(std::string id, double measured, double bound, std::string note = {});
Check check_true(std::string id, bool ok, std::string note = {});

struct Manifest {
  std::string stage;
  json config;
  std::vector<Check> checks;
  std::vector<std::string> outputs;
  json summary = json::object();

  bool ok() const;
  // First failing check, or nullptr.
  const Check* first_failure() const;
  json to_json() const;
};

Manifest manifest_from_json(const json& j);

}  // namespace pesin::io
