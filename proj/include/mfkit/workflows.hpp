#pragma once

#include "mfkit/config.hpp"

namespace mfkit {

/// Executes the config's workflow and writes its artifacts (results CSVs, a
/// reproducibility manifest, optional SVG plots) into cfg.out_dir.
/// Returns 0 on success; failures throw.
int run_workflow(const RunConfig& cfg);

bool known_workflow(const std::string& name);

}  // namespace mfkit
