#include <omp.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfkit/errors.hpp"
#include "mfkit/workflows.hpp"

namespace {

void write_error_record(const std::string& out_dir, const std::string& type,
                        const std::string& message) {
  try {
    std::filesystem::create_directories(out_dir);
    nlohmann::json j;
    j["error"] = type;
    j["message"] = message;
    std::ofstream out(std::filesystem::path(out_dir) / "error.json", std::ios::binary);
    out << j.dump(2) << "\n";
  } catch (...) {
    // stderr still carries the message
  }
}

int resolve_threads(int cli_threads) {
  if (cli_threads > 0) return cli_threads;
  if (const char* env = std::getenv("MFKIT_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 0;  // leave the OpenMP default
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mfkit: particle toolkit for mean field control and potential games of controls"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  long long seed_override = -1;
  int threads = 0;
  bool no_plots = false;

  const std::vector<std::string> workflows = {"simulate",      "solve-mfc", "exploitability",
                                              "mixture-check", "mfld",      "compare"};
  for (const std::string& w : workflows) {
    CLI::App* sub = app.add_subcommand(w, "run the " + w + " workflow");
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed_override, "override the config seed");
    sub->add_option("--out", out_override, "override the output directory");
    sub->add_option("--threads", threads, "worker threads (env MFKIT_THREADS as fallback)");
    sub->add_flag("--no-plots", no_plots, "skip SVG plot emission");
  }

  CLI11_PARSE(app, argc, argv);
  std::string subcommand = app.get_subcommands().front()->get_name();

  std::string out_dir = out_override.empty() ? "out" : out_override;
  try {
    mfkit::RunConfig cfg = mfkit::load_config(config_path);
    if (cfg.workflow.empty())
      cfg.workflow = subcommand;
    else if (cfg.workflow != subcommand)
      throw mfkit::ConfigError("config workflow \"" + cfg.workflow +
                               "\" does not match subcommand \"" + subcommand + "\"");
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (no_plots) cfg.plots = false;
    out_dir = cfg.out_dir;

    int n_threads = resolve_threads(threads);
    if (n_threads > 0) omp_set_num_threads(n_threads);

    return mfkit::run_workflow(cfg);
  } catch (const mfkit::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    write_error_record(out_dir, "config", e.what());
    return 1;
  } catch (const mfkit::SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    write_error_record(out_dir, "solver", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    write_error_record(out_dir, "runtime", e.what());
    return 1;
  }
}
