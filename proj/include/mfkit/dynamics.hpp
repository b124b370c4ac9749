#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "mfkit/measure.hpp"
#include "mfkit/noise.hpp"
#include "mfkit/policy.hpp"

namespace mfkit {

/// State path on a grid prefix; column j = state at t_j, rightmost = current.
using PathView = Eigen::Ref<const Mat>;

inline auto current(PathView path) { return path.col(path.cols() - 1); }

/// Law information handed to coefficients: the snapshot itself, the
/// model-defined summary statistics, and the current-state ensemble mean.
struct LawView {
  const EmpiricalLaw* law = nullptr;
  Vec summary;
  Vec state_mean;
};

using SummaryFn = std::function<Vec(double t, const EmpiricalLaw&)>;
using DriftFn = std::function<Vec(double t, PathView x, const Vec& a, const LawView& mu)>;
using DiffusionFn = std::function<Mat(double t, PathView x, const Vec& a)>;
using JumpCoefFn = std::function<Vec(double t, PathView x, const Vec& a, const Vec& mark)>;
/// Mark-integrated jump coefficient: t, x, a -> integral of lambda(t,x,a,z) n(dz).
using JumpMeanFn = std::function<Vec(double t, PathView x, const Vec& a)>;

/// Coefficient bundle of the controlled state equation. Diffusions may be
/// declared constant (sigma_const) to skip per-particle evaluation. Jump
/// channels require the mark-integrated coefficient for exact compensation.
struct ModelDynamics {
  int state_dim = 1;
  int control_dim = 1;
  int idio_noise_dim = 1;
  int common_noise_dim = 0;

  DriftFn drift;
  DiffusionFn sigma;
  DiffusionFn sigma0;
  std::optional<Mat> sigma_const;
  std::optional<Mat> sigma0_const;
  JumpCoefFn jump;
  JumpCoefFn jump0;
  JumpMeanFn jump_mean;
  JumpMeanFn jump0_mean;

  bool law_in_drift = false;
  bool path_dependent = false;

  /// Statistics of the state law consumed by the drift (e.g. circular moments).
  SummaryFn summary;

  /// Left inverse phi of the drift in the control argument:
  /// phi(t, x, b(t,x,a,mu), mu) = a. Required for the law-dependent game.
  std::function<Vec(double t, PathView x, const Vec& y, const LawView& mu)> drift_inverse;
  /// Linear derivative of phi in the measure, evaluated entry-wise:
  /// (t, x~, y, mu)(probe path) -> vector in the control space.
  std::function<Vec(double t, PathView x, const Vec& y, const LawView& mu, PathView probe)>
      delta_mu_phi;
};

/// Driving noise of one (scenario, particle, step) cell.
struct PanelCell {
  const Vec* dw = nullptr;
  const Vec* dw0 = nullptr;
  const std::vector<JumpEvent>* idio_events = nullptr;
  const std::vector<JumpEvent>* common_events = nullptr;
};

/// One explicit step of the jump-diffusion: drift and diffusion increments
/// plus jump contributions compensated at rate h * (mark-integrated
/// coefficients), all coefficients frozen at the step's left endpoint.
Vec euler_step(PathView path, double t, const Vec& a, const LawView& mu, const PanelCell& cell,
               const ModelDynamics& model, double h);

/// Per-scenario, per-grid-point conditional law snapshots on
/// (path-so-far, control); realizes the measure flow given the common noise.
class MeasureFlow {
 public:
  MeasureFlow() = default;
  MeasureFlow(TimeGrid grid, int n_scenarios)
      : grid_(grid), laws_(n_scenarios, std::vector<EmpiricalLaw>(grid.n_steps + 1)) {}

  const TimeGrid& grid() const { return grid_; }
  int scenarios() const { return static_cast<int>(laws_.size()); }
  const EmpiricalLaw& law(int s, int k) const { return laws_[s][k]; }
  EmpiricalLaw& mutable_law(int s, int k) { return laws_[s][k]; }

 private:
  TimeGrid grid_;
  std::vector<std::vector<EmpiricalLaw>> laws_;
};

struct ScenarioTrajectories {
  std::vector<Mat> paths;    // per particle: state_dim x (n_steps + 1)
  std::vector<Mat> controls; // per grid point: control_dim x n_particles
};

struct SimResult {
  std::vector<ScenarioTrajectories> scenarios;
  MeasureFlow flow;
  bool has_flow = false;
};

struct SimOptions {
  bool retain_flow = true;
  bool flow_with_paths = false;  // snapshots carry full path prefixes
  bool parallel = true;
};

using X0Sampler = std::function<Vec(StreamRng&)>;
/// Per-particle policy dispatch (mixtures assign policies by particle index).
using PolicySelector = std::function<const FeedbackPolicy*(int s, int i)>;

/// Controlled dynamics without law coupling in the coefficients.
SimResult simulate_controlled(const FeedbackPolicy& policy, const ModelDynamics& model,
                              const NoisePanel& panel, const X0Sampler& x0,
                              const SimOptions& opts = {});

/// McKean-Vlasov dynamics: the drift consumes the scenario's current
/// empirical law (explicit coupling). Pass nullptr for the uncontrolled
/// (mean field Langevin) mode.
SimResult simulate_mckean_vlasov(const FeedbackPolicy* policy, const ModelDynamics& model,
                                 const NoisePanel& panel, const X0Sampler& x0,
                                 const SimOptions& opts = {});

/// Representative player against a frozen measure flow; no feedback from the
/// player to the flow. Policy law features read the frozen flow.
SimResult simulate_vs_flow(const FeedbackPolicy& policy, const ModelDynamics& model,
                           const MeasureFlow& frozen, const NoisePanel& panel,
                           const X0Sampler& x0, const SimOptions& opts = {});

/// Mixture runs: particles are routed to policies by the selector.
SimResult simulate_with_selector(const PolicySelector& select, const ModelDynamics& model,
                                 const NoisePanel& panel, const X0Sampler& x0,
                                 const MeasureFlow* frozen = nullptr,
                                 const SimOptions& opts = {});

}  // namespace mfkit
