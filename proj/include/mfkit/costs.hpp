#pragma once

#include <optional>

#include "mfkit/dynamics.hpp"

namespace mfkit {

using RunningCost =
    std::function<double(double t, PathView x, const Vec& a, const LawView& nu)>;
using TerminalCost = std::function<double(PathView x, const LawView& nu)>;
using LawCost = std::function<double(double t, const LawView& nu)>;
/// delta_nu F(t, x_base, a_base, nu)(x_probe, a_probe).
using RunningDerivative = std::function<double(double t, PathView x_base, const Vec& a_base,
                                               const LawView& nu, PathView x_probe,
                                               const Vec& a_probe)>;
/// delta_mu G(x_base, mu)(x_probe).
using TerminalDerivative =
    std::function<double(PathView x_base, const LawView& mu, PathView x_probe)>;
using ControlGradient = std::function<Vec(double t, PathView x, const Vec& a, const LawView& mu)>;

/// Running/terminal cost pair with optional analytic linear derivatives.
/// The optional F0/F_law split separates the (x, a)-dependent part from the
/// law-only part: the evaluator hoists F_law out of the particle loop, and
/// the derived game drops it (it plays no role in the agent's optimization).
struct CostSpec {
  RunningCost F;
  TerminalCost G;

  RunningCost F0;
  LawCost F_law;

  RunningDerivative delta_F;
  TerminalDerivative delta_G;
  ControlGradient grad_a_F;

  bool F_law_free = false;        // F does not depend on the law: f reduces to F
  bool G_law_free = false;
  bool delta_F_base_free = false; // delta_F independent of (x_base, a_base)
  bool fd_fallback = false;       // allow finite-difference derivatives
  double fd_eps = 1e-4;
  double growth_const = 1.0;      // quadratic-growth constant for tail bounds
  SummaryFn summary;              // law statistics consumed by the cost callables
};

/// Game cost pair assembled from a CostSpec; evaluated against frozen flows.
struct GameCost {
  RunningCost f;
  TerminalCost g;
  SummaryFn summary;
};

struct EvalResult {
  double mean = 0.0;
  double std_error = 0.0;
  int n_samples = 0;
  double tail_bound = 0.0;  // discounted runs: truncation bound on the dropped tail
  Vec per_atom;             // scenario-major per-particle costs (CRN differencing)
};

/// Monte Carlo value of the control objective: time integral by left-endpoint
/// sampling of the cost (with exact per-interval discounting in discounted
/// mode), expectation over scenarios x particles, law argument realized by
/// the within-scenario flow.
EvalResult eval_mfc_cost(const FeedbackPolicy& policy, const ModelDynamics& model,
                         const CostSpec& cost, const NoisePanel& panel, const X0Sampler& x0,
                         std::optional<double> discount = {});

/// Same objective for mixed ensembles: particles are routed to policies by a
/// selector and the law argument is the mixed within-scenario flow.
EvalResult eval_mfc_cost_selector(const PolicySelector& select, const ModelDynamics& model,
                                  const CostSpec& cost, const NoisePanel& panel,
                                  const X0Sampler& x0, std::optional<double> discount = {});

/// Assembles the game cost pair
///   f(t,x,a,nu) = integral of delta_nu F(t,.,.,nu)(x,a) against nu + F(t,x,a,nu)
///   g(x,mu)     = integral of delta_mu G(.,mu)(x) against mu + G(x,mu),
/// using analytic derivatives when available. With fd_fallback, f is the
/// mixture difference quotient of the nu-averaged running cost (a centered
/// representative of the same derivative; best responses are unaffected).
GameCost build_game_cost(const CostSpec& cost);

/// Law-dependent-drift variant: f gains the nu-average of
/// grad_a F(t, x~, a~, mu) . delta_mu phi(t, x~, b(t, x~, a~, mu), mu)(x).
GameCost build_game_cost_lawdep(const CostSpec& cost, const ModelDynamics& model);

/// Representative-player value against a frozen flow.
EvalResult eval_game_cost(const FeedbackPolicy& policy, const ModelDynamics& model,
                          const GameCost& game, const MeasureFlow& frozen,
                          const NoisePanel& panel, const X0Sampler& x0,
                          std::optional<double> discount = {});

/// Shared accumulation core: applies a running/terminal cost pair to an
/// already-simulated system, against the supplied flow (the system's own flow
/// for control costs, a frozen one for game costs).
EvalResult accumulate_cost(const SimResult& sim, const MeasureFlow& flow,
                           const RunningCost& running, const TerminalCost& terminal,
                           const LawCost& law_only, const SummaryFn& summary,
                           const TimeGrid& grid, std::optional<double> discount,
                           double growth_const);

}  // namespace mfkit
