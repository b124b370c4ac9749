#pragma once

#include "mfkit/models.hpp"

namespace mfkit {

struct FlowCheckpoint {
  double t = 0.0;
  double F = 0.0;            // interaction potential F(mu_t)
  double entropy = 0.0;      // differential entropy estimate of the state marginal
  double free_energy = 0.0;  // F - sigma^2/2 * entropy (relative entropy convention)
  double order_param = 0.0;
  double variance = 0.0;
  double w2_step = 0.0;  // W2 displacement from the previous checkpoint
};

struct FlowDiagnostics {
  std::vector<FlowCheckpoint> points;
  bool converged = false;
  EmpiricalLaw final_law;
};

struct MfldConfig {
  TimeGrid grid{8.0, 512};
  int particles = 2000;
  std::uint64_t seed = 1;
  int checkpoints = 12;          // geometric spacing, t = T, T/2, T/4, ... plus 0
  double convergence_tol = 0.05; // W2 displacement per unit time, 3 consecutive hits
  int entropy_k = 1;
};

/// Uncontrolled mean field Langevin flow dX = -grad delta F(mu)(X) dt
/// + sigma dW, with free-energy monitoring at geometric checkpoints.
FlowDiagnostics run_mfld(const ModelBundle& bundle, const MfldConfig& cfg, const X0Sampler& x0);

struct CompareReport {
  double value = 0.0;         // MFC value with running cost 1/2|a|^2 + F~
  double value_target = 0.0;  // F(mu_0)
  double value_rel_error = 0.0;
  double drift_rel_l2 = 0.0;  // learned feedback vs -grad delta F on probes
  Mat probes;                 // state_dim x P
  Mat learned_drift;          // control per probe
  Mat target_drift;
  SolveReport solve;
};

/// Solves the lifted control problem and checks the correspondence: value
/// close to F(mu_0), learned drift close to the Langevin drift.
CompareReport compare_mfld_to_mfc(const ModelBundle& f_bundle, double beta, double sigma,
                                  const OptimizerConfig& cfg, const PanelSpec& panels,
                                  const X0Sampler& x0);

}  // namespace mfkit
