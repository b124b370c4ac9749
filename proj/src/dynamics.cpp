#include "mfkit/dynamics.hpp"

#include <omp.h>

#include <atomic>
#include <cmath>
#include <exception>

#include "mfkit/errors.hpp"

namespace mfkit {

Vec euler_step(PathView path, double t, const Vec& a, const LawView& mu, const PanelCell& cell,
               const ModelDynamics& model, double h) {
  if (h <= 0.0) throw ConfigError("euler_step: step size must be positive");
  Vec next = current(path);
  if (model.drift) next += h * model.drift(t, path, a, mu);

  if (cell.dw && cell.dw->size() > 0) {
    if (model.sigma_const)
      next.noalias() += (*model.sigma_const) * (*cell.dw);
    else if (model.sigma)
      next.noalias() += model.sigma(t, path, a) * (*cell.dw);
  }
  if (cell.dw0 && cell.dw0->size() > 0) {
    if (model.sigma0_const)
      next.noalias() += (*model.sigma0_const) * (*cell.dw0);
    else if (model.sigma0)
      next.noalias() += model.sigma0(t, path, a) * (*cell.dw0);
  }

  // Jump coefficients are frozen at the step's left endpoint (predictable
  // integrands); the running compensator makes the integrals martingales.
  if (model.jump && cell.idio_events) {
    if (!model.jump_mean) throw ConfigError("euler_step: jump coefficient without jump_mean");
    for (const JumpEvent& e : *cell.idio_events) next += model.jump(t, path, a, e.mark);
    next -= h * model.jump_mean(t, path, a);
  }
  if (model.jump0 && cell.common_events) {
    if (!model.jump0_mean) throw ConfigError("euler_step: jump0 coefficient without jump0_mean");
    for (const JumpEvent& e : *cell.common_events) next += model.jump0(t, path, a, e.mark);
    next -= h * model.jump0_mean(t, path, a);
  }

  if (!next.allFinite()) throw SimulationError("euler_step: non-finite state", -1, -1, -1);
  return next;
}

namespace {

enum class Coupling { kNone, kSelf, kFrozen };

void run_scenario(int s, const PolicySelector& select, const ModelDynamics& model,
                  const NoisePanel& panel, const X0Sampler& x0, Coupling coupling,
                  const MeasureFlow* frozen, const SimOptions& opts, SimResult& result) {
  const TimeGrid& grid = panel.grid();
  const int N = panel.particles();
  const int K = grid.n_steps;
  const int n = model.state_dim;
  const int u = model.control_dim;
  const double h = grid.dt();

  const bool use_idio_bm =
      (model.sigma_const || model.sigma) && panel.idio_dim() > 0;
  const bool use_common_bm =
      (model.sigma0_const || model.sigma0) && panel.common_dim() > 0;
  const bool use_idio_jumps = static_cast<bool>(model.jump) && panel.idio_spec().active();
  const bool use_common_jumps = static_cast<bool>(model.jump0) && panel.common_spec().active();

  ScenarioTrajectories& traj = result.scenarios[s];
  traj.paths.assign(N, Mat(n, K + 1));
  traj.controls.assign(K + 1, Mat(u, N));

  for (int i = 0; i < N; ++i) {
    StreamRng rng = panel.init_stream(s, i);
    Vec x = x0(rng);
    if (x.size() != n) throw ConfigError("simulate: initial sampler dimension mismatch");
    traj.paths[i].col(0) = x;
  }

  Vec dw(use_idio_bm ? panel.idio_dim() : 0);
  Vec dw0(use_common_bm ? panel.common_dim() : 0);
  const std::vector<JumpEvent> no_events;
  Mat states(n, N);

  for (int k = 0; k <= K; ++k) {
    const double t = grid.t(k);
    for (int i = 0; i < N; ++i) states.col(i) = traj.paths[i].col(k);
    Vec state_mean = states.rowwise().mean();

    LawView drift_view;
    EmpiricalLaw self_law;
    Vec policy_mean = state_mean;
    if (coupling == Coupling::kFrozen) {
      const EmpiricalLaw& fl = frozen->law(s, k);
      drift_view.law = &fl;
      drift_view.state_mean = fl.state_mean();
      if (model.summary) drift_view.summary = model.summary(t, fl);
      policy_mean = drift_view.state_mean;
    } else if (coupling == Coupling::kSelf && model.law_in_drift) {
      self_law = EmpiricalLaw::from_ensemble(states);
      drift_view.law = &self_law;
      drift_view.state_mean = state_mean;
      if (model.summary) drift_view.summary = model.summary(t, self_law);
    } else {
      drift_view.state_mean = state_mean;
    }

    Mat& ctrl = traj.controls[k];
    for (int i = 0; i < N; ++i) {
      const FeedbackPolicy* pol = select(s, i);
      if (pol)
        ctrl.col(i) = pol->control(t, states.col(i), policy_mean);
      else
        ctrl.col(i).setZero();
    }

    if (opts.retain_flow) {
      if (opts.flow_with_paths) {
        EmpiricalLaw law(n, u, k, N);
        for (int i = 0; i < N; ++i)
          law.mutable_paths().col(i) =
              Eigen::Map<const Vec>(traj.paths[i].data(), n * (k + 1));
        law.mutable_controls() = ctrl;
        result.flow.mutable_law(s, k) = std::move(law);
      } else {
        result.flow.mutable_law(s, k) = EmpiricalLaw::from_ensemble(states, ctrl);
      }
    }

    if (k == K) break;

    if (use_common_bm) panel.common_dw(s, k, dw0);
    const std::vector<JumpEvent> common_events =
        use_common_jumps ? panel.common_jumps_in(s, k) : std::vector<JumpEvent>{};

    for (int i = 0; i < N; ++i) {
      if (use_idio_bm) panel.idio_dw(s, i, k, dw);
      const std::vector<JumpEvent> idio_events =
          use_idio_jumps ? panel.idio_jumps_in(s, i, k) : std::vector<JumpEvent>{};
      PanelCell cell;
      cell.dw = &dw;
      cell.dw0 = &dw0;
      cell.idio_events = use_idio_jumps ? &idio_events : &no_events;
      cell.common_events = use_common_jumps ? &common_events : &no_events;
      try {
        traj.paths[i].col(k + 1) =
            euler_step(traj.paths[i].leftCols(k + 1), t, ctrl.col(i), drift_view, cell, model, h);
      } catch (const SimulationError& e) {
        throw SimulationError(e.what(), s, i, k);
      }
    }
  }
}

SimResult run_simulation(const PolicySelector& select, const ModelDynamics& model,
                         const NoisePanel& panel, const X0Sampler& x0, Coupling coupling,
                         const MeasureFlow* frozen, const SimOptions& opts) {
  if (!x0) throw ConfigError("simulate: missing initial-condition sampler");
  if (coupling == Coupling::kFrozen) {
    if (!frozen) throw ConfigError("simulate: frozen flow required");
    if (frozen->grid().n_steps != panel.grid().n_steps ||
        std::abs(frozen->grid().horizon - panel.grid().horizon) >
            1e-12 * std::max(1.0, panel.grid().horizon))
      throw ConfigError("simulate: frozen flow grid does not match the panel grid");
    if (frozen->scenarios() < panel.scenarios())
      throw ConfigError("simulate: frozen flow has fewer scenarios than the panel");
  }
  if ((model.sigma || model.sigma_const) && panel.idio_dim() != model.idio_noise_dim)
    throw ConfigError("simulate: panel idiosyncratic dimension does not match the model");
  if ((model.sigma0 || model.sigma0_const) && panel.common_dim() != model.common_noise_dim)
    throw ConfigError("simulate: panel common dimension does not match the model");

  const int S = panel.scenarios();
  SimResult result;
  result.scenarios.resize(S);
  if (opts.retain_flow) {
    result.flow = MeasureFlow(panel.grid(), S);
    result.has_flow = true;
  }

  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  const bool parallel = opts.parallel && S > 1 && !omp_in_parallel();
#pragma omp parallel for schedule(static) if (parallel)
  for (int s = 0; s < S; ++s) {
    if (failed.load(std::memory_order_relaxed)) continue;
    try {
      run_scenario(s, select, model, panel, x0, coupling, frozen, opts, result);
    } catch (...) {
#pragma omp critical(mfkit_sim_error)
      if (!failed.exchange(true)) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return result;
}

PolicySelector single_policy(const FeedbackPolicy* policy) {
  return [policy](int, int) { return policy; };
}

void check_policy_dims(const FeedbackPolicy& policy, const ModelDynamics& model) {
  if (policy.state_dim() != model.state_dim || policy.control_dim() != model.control_dim)
    throw ConfigError("simulate: policy dimensions do not match the model");
}

}  // namespace

SimResult simulate_controlled(const FeedbackPolicy& policy, const ModelDynamics& model,
                              const NoisePanel& panel, const X0Sampler& x0,
                              const SimOptions& opts) {
  if (model.law_in_drift)
    throw ConfigError("simulate_controlled: model declares law-dependent drift");
  check_policy_dims(policy, model);
  return run_simulation(single_policy(&policy), model, panel, x0, Coupling::kNone, nullptr, opts);
}

SimResult simulate_mckean_vlasov(const FeedbackPolicy* policy, const ModelDynamics& model,
                                 const NoisePanel& panel, const X0Sampler& x0,
                                 const SimOptions& opts) {
  if (policy) check_policy_dims(*policy, model);
  return run_simulation(single_policy(policy), model, panel, x0, Coupling::kSelf, nullptr, opts);
}

SimResult simulate_vs_flow(const FeedbackPolicy& policy, const ModelDynamics& model,
                           const MeasureFlow& frozen, const NoisePanel& panel,
                           const X0Sampler& x0, const SimOptions& opts) {
  check_policy_dims(policy, model);
  return run_simulation(single_policy(&policy), model, panel, x0, Coupling::kFrozen, &frozen,
                        opts);
}

SimResult simulate_with_selector(const PolicySelector& select, const ModelDynamics& model,
                                 const NoisePanel& panel, const X0Sampler& x0,
                                 const MeasureFlow* frozen, const SimOptions& opts) {
  Coupling coupling =
      frozen ? Coupling::kFrozen : (model.law_in_drift ? Coupling::kSelf : Coupling::kNone);
  return run_simulation(select, model, panel, x0, coupling, frozen, opts);
}

}  // namespace mfkit
