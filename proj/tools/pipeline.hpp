#pragma once

#include "pesin/io.hpp"

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

// Stage drivers behind pesin-coder. Every stage reads only the files it names
// as inputs from the output directory, writes its outputs there, and returns a
// manifest of the inequalities it asserted.
namespace pesin::pipeline {

using io::json;

struct Tolerances {
  // Simulated orbits closer than this to D are discarded.
  double grazing = 1e-8;
  // π∘σ against f∘π, in chart units.
  double shadowing = 1e-6;
  // Slack on log‖w_n‖ − log(p^s_n∧p^u_n) ≤ 0.
  double containment = 1e-9;
  double markov = 1e-6;
  // Physical distance below which two coded points are the same point.
  double point = 1e-9;
};

struct RunConfig {
  // Builtin table name, or a table file resolved against the config directory.
  std::string table = "stadium";
  double chi = 0.5;
  double eps = 0.01;
  geometry::RegularityConstants regularity;

  long orbit_count = 8;
  long orbit_back = 2000;
  long orbit_forward = 2000;

  geometry::PeriodicSearch periodic;
  // Used instead of the search when non-empty.
  std::vector<std::vector<geometry::PhasePoint>> cycles;

  // Chart windows N⁻ = N⁺ around every periodic point.
  long half_window = 600;
  long label_window = 2;

  long code_window = 10;
  long code_depth = 40;
  // Half-length of the periodic orbit window fed to the itinerary search.
  long orbit_half = 100;

  long n_max = 60;
  double stop_diameter = 1e-8;
  long max_cylinder_depth = 80;
  long pi_hat_words = 20;
  // "" or "full_two_shift"; the latter makes the markov stage count the
  // symbolic fixture instead of the extension shift.
  std::string shift;

  Tolerances tol;
  std::uint64_t seed = 42;
  std::string out = "out";
  std::string base_dir = ".";

  // Throws InvalidInput on the first bad field.
  void validate() const;
  json to_json() const;
};

// Validated range for ε: [kEpsMin, kEpsMax] and ε < χ.
inline constexpr double kEpsMin = 0.005;
inline constexpr double kEpsMax = 0.2;

// Unknown keys are rejected so typos do not silently fall back to defaults.
RunConfig config_from_json(const json& j, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

// An upstream artifact is absent.
class MissingInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::unique_ptr<geometry::SurfaceMap> make_table(const RunConfig& cfg);

// PESIN_WORKERS, defaulting to 1.
unsigned worker_count();

const std::vector<std::string>& stage_names();

// Runs one stage and writes <out>/<stage>.manifest.json. Core errors raised
// inside the stage propagate.
io::Manifest run_stage(const std::string& stage, const RunConfig& cfg, unsigned workers = 1);

}  // namespace pesin::pipeline
