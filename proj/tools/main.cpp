#include "pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

// Exit codes: 0 all checks green, 1 a check failed or a stage raised, 2 an
// upstream artifact or the config is missing, 3 invalid configuration.
int main(int argc, char** argv) {
  using namespace pesin;
  CLI::App app{"Chart, coding and Markov pipeline for billiard maps"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  for (const auto& name : pipeline::stage_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "run configuration (JSON)")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out, "override the output directory");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string stage = app.get_subcommands().front()->get_name();

  try {
    auto cfg = pipeline::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (out) cfg.out = *out;
    const auto m = pipeline::run_stage(stage, cfg, pipeline::worker_count());
    std::size_t passed = 0;
    for (const auto& c : m.checks) passed += c.pass ? 1 : 0;
    std::cout << stage << ": " << passed << "/" << m.checks.size() << " checks passed\n";
    if (const auto* f = m.first_failure()) {
      std::cerr << stage << ": check '" << f->id << "' failed: measured " << io::number(f->measured).dump()
                << ", bound " << io::number(f->bound).dump();
      if (!f->note.empty()) std::cerr << " (" << f->note << ")";
      std::cerr << "\n";
      return 1;
    }
    return 0;
  } catch (const pipeline::MissingInput& e) {
    std::cerr << stage << ": " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << stage << ": " << e.what() << "\n";
    return e.kind() == ErrorKind::InvalidInput ? 3 : 1;
  } catch (const std::exception& e) {
    std::cerr << stage << ": " << e.what() << "\n";
    return 1;
  }
}
