#pragma once

#include <limits>
#include <string>

#include "mfkit/costs.hpp"

namespace mfkit {

/// Recipe for building evaluation panels; batch panels share the common-noise
/// channel (keyed by `seed`) and draw fresh idiosyncratic noise per batch.
struct PanelSpec {
  TimeGrid grid;
  int scenarios = 1;
  int particles = 100;
  JumpMeasureSpec idio_jumps = JumpMeasureSpec::none();
  JumpMeasureSpec common_jumps = JumpMeasureSpec::none();
  int idio_dim = 1;
  int common_dim = 0;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> idio_seed;  // override for the idiosyncratic channel

  NoisePanel make() const;
  NoisePanel make_batch(int n_scenarios, int n_particles, std::uint64_t batch_idio_seed) const;
};

struct OptimizerConfig {
  int iters = 80;
  double step = 0.1;         // initial Adam step size; cosine-decayed
  double fd_eps = 1e-2;      // parameter-space central-difference width
  int n_knots = 1;           // time knots of the policy family
  int batch_scenarios = 0;   // 0 -> all scenarios
  int batch_particles = 0;   // 0 -> all particles
  int eval_every = 10;       // full-panel evaluation cadence (best-seen tracking)
  int br_iters = 0;          // best-response iterations; 0 -> reuse iters
  std::uint64_t seed = 1;    // batch resampling stream
};

struct SolveReport {
  Vec theta;
  double cost = std::numeric_limits<double>::quiet_NaN();
  double cost_std_error = 0.0;
  double tail_bound = 0.0;
  std::vector<double> trace;  // per-iteration batch objective
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string notes;
};

/// Stochastic zeroth-order minimization of the control objective over the
/// policy family: central finite differences on the parameters with common
/// random numbers (one shared panel per +/- probe pair), Adam updates, and
/// best-seen selection by full-panel evaluation.
SolveReport solve_mfc(const ModelDynamics& model, const CostSpec& cost,
                      const FeedbackPolicy& family, const OptimizerConfig& cfg,
                      const PanelSpec& panels, const X0Sampler& x0,
                      std::optional<double> discount = {});

/// Same optimizer against the game cost with a frozen flow; `start` doubles
/// as the warm start.
SolveReport best_response(const ModelDynamics& model, const GameCost& game,
                          const MeasureFlow& frozen, const FeedbackPolicy& start,
                          const OptimizerConfig& cfg, const PanelSpec& panels,
                          const X0Sampler& x0, std::optional<double> discount = {});

struct ExploitabilityReport {
  double gap = 0.0;        // J_g(alpha*, nu*) - J_g(BR, nu*)
  double std_error = 0.0;  // of the paired difference (shared player panel)
  double j_star = 0.0;
  double j_star_std_error = 0.0;
  double j_br = 0.0;
  SolveReport br;
};

/// Certifies a candidate optimum: generates nu* from the candidate, runs a
/// warm-started best response within the same family, and reports the gap.
/// The gap is family-restricted, hence an under-estimate of the unrestricted
/// exploitability; a materially positive value still refutes optimality.
ExploitabilityReport exploitability(const FeedbackPolicy& alpha_star, const ModelDynamics& model,
                                    const CostSpec& cost, const PanelSpec& panels,
                                    const OptimizerConfig& cfg, const X0Sampler& x0,
                                    std::optional<double> discount = {});

/// Consistency diagnostic for the flow fixed point: re-simulates the flow
/// with fresh idiosyncratic noise (same common noise) and returns the
/// time-averaged W2 between the two flows' state-control marginals.
/// `alt_idio_seed` defaults to a derived independent seed.
double fixed_point_residual(const FeedbackPolicy& alpha_star, const ModelDynamics& model,
                            const NoisePanel& panel, const X0Sampler& x0,
                            std::optional<std::uint64_t> alt_idio_seed = {});

struct MixtureRow {
  double delta_requested = 0.0;
  double delta_effective = 0.0;  // ceil(delta*N)/N, the realized mixing weight
  double j_delta = 0.0;
  double derivative = 0.0;  // (J_delta - J(alpha*)) / delta_effective
};

struct MixtureReport {
  std::vector<MixtureRow> rows;
  double limit = 0.0;  // linear extrapolation of the derivative to delta -> 0
  double j_star = 0.0;
  double game_gap = 0.0;  // J_g(alpha, nu*) - J_g(alpha*, nu*), computed independently
  double game_gap_std_error = 0.0;
};

/// Mixture-derivative test: a deterministic stratified delta-fraction of each
/// scenario's particles plays `alpha`, the rest play `alpha_star`, the law is
/// the mixed ensemble. The extrapolated derivative at 0+ is compared with the
/// game gap computed through the derived game cost.
MixtureReport mixture_derivative_check(const FeedbackPolicy& alpha,
                                       const FeedbackPolicy& alpha_star,
                                       const ModelDynamics& model, const CostSpec& cost,
                                       const std::vector<double>& deltas, const PanelSpec& panels,
                                       const X0Sampler& x0, std::optional<double> discount = {});

}  // namespace mfkit
