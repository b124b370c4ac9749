#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mfkit/models.hpp"

namespace mfkit {

inline constexpr const char* kVersion = "0.1.0";

/// A declarative experiment: which workflow, which model, at what scale.
/// Unset numeric fields inherit the model bundle's recommended defaults.
struct RunConfig {
  std::string workflow;
  std::string model_name = "lq";
  ModelParams model_params;

  std::optional<TimeGrid> grid;
  std::optional<int> particles;
  std::optional<int> scenarios;
  OptimizerConfig optimizer;

  // absent -> model default discount; explicit null in the file -> finite horizon
  std::optional<double> discount;
  bool discount_explicit_none = false;

  std::uint64_t seed = 1;
  std::string out_dir = "out";
  bool plots = true;

  std::optional<std::vector<double>> policy_theta;  // simulate: fixed policy parameters
  std::vector<double> mixture_deltas = {0.5, 0.25, 0.125};
  int mfld_checkpoints = 12;
  double x0_mean = 0.0;
  double x0_sd = 1.0;
};

/// Parses and validates a JSON config. Unknown keys anywhere are errors;
/// parse failures report the byte position.
RunConfig load_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

/// Resolved scale of a run (config overrides on top of bundle defaults).
struct ResolvedRun {
  ModelBundle bundle;
  PanelSpec panels;
  std::optional<double> discount;
  X0Sampler x0;
};

ResolvedRun resolve_run(const RunConfig& cfg);

}  // namespace mfkit
