#include "mfkit/costs.hpp"

#include <cmath>

#include "mfkit/errors.hpp"

namespace mfkit {

namespace {

LawView make_law_view(double t, const EmpiricalLaw& law, const SummaryFn& summary) {
  LawView view;
  view.law = &law;
  view.state_mean = law.state_mean();
  if (summary) view.summary = summary(t, law);
  return view;
}

}  // namespace

EvalResult accumulate_cost(const SimResult& sim, const MeasureFlow& flow,
                           const RunningCost& running, const TerminalCost& terminal,
                           const LawCost& law_only, const SummaryFn& summary,
                           const TimeGrid& grid, std::optional<double> discount,
                           double growth_const) {
  const int S = static_cast<int>(sim.scenarios.size());
  const int K = grid.n_steps;
  const double h = grid.dt();
  const int N = S > 0 ? static_cast<int>(sim.scenarios[0].paths.size()) : 0;
  if (S == 0 || N == 0) throw DomainError("accumulate_cost: empty simulation");

  // Left-endpoint weights; in discounted mode each interval carries its exact
  // discount mass so that constant integrands are integrated exactly.
  Vec w(K);
  const double beta = discount.value_or(0.0);
  for (int k = 0; k < K; ++k)
    w(k) = discount ? std::exp(-beta * grid.t(k)) * (1.0 - std::exp(-beta * h)) / beta : h;
  const double w_terminal = discount ? std::exp(-beta * grid.horizon) : 1.0;

  EvalResult out;
  out.per_atom = Vec::Zero(S * N);
  Vec m2_sup = Vec::Zero(S);

  for (int s = 0; s < S; ++s) {
    const ScenarioTrajectories& traj = sim.scenarios[s];
    for (int k = 0; k <= K; ++k) {
      const double t = grid.t(k);
      const EmpiricalLaw& law = flow.law(s, k);
      LawView view = make_law_view(t, law, summary);

      if (k < K) {
        double base = law_only ? law_only(t, view) : 0.0;
        for (int i = 0; i < N; ++i) {
          double c = base;
          if (running)
            c += running(t, traj.paths[i].leftCols(k + 1), traj.controls[k].col(i), view);
          if (!std::isfinite(c))
            throw EvaluationError("cost evaluation returned a non-finite value at scenario " +
                                  std::to_string(s) + ", particle " + std::to_string(i) +
                                  ", step " + std::to_string(k));
          out.per_atom(s * N + i) += w(k) * c;
        }
      } else if (terminal) {
        for (int i = 0; i < N; ++i) {
          double c = terminal(traj.paths[i], view);
          if (!std::isfinite(c))
            throw EvaluationError("terminal cost returned a non-finite value at scenario " +
                                  std::to_string(s) + ", particle " + std::to_string(i));
          out.per_atom(s * N + i) += w_terminal * c;
        }
      }

      if (discount) {
        double m2 = 0.0;
        for (int i = 0; i < N; ++i)
          m2 += traj.paths[i].col(k).squaredNorm() + traj.controls[k].col(i).squaredNorm();
        m2_sup(s) = std::max(m2_sup(s), m2 / N);
      }
    }
  }

  out.n_samples = S * N;
  out.mean = out.per_atom.mean();
  double var = (out.per_atom.array() - out.mean).square().sum() /
               std::max(1, out.n_samples - 1);
  out.std_error = std::sqrt(var / out.n_samples);
  if (discount)
    out.tail_bound = std::exp(-beta * grid.horizon) * growth_const *
                     (1.0 + 2.0 * m2_sup.maxCoeff()) / beta;
  return out;
}

namespace {

EvalResult eval_mfc_impl(const PolicySelector& select, const ModelDynamics& model,
                         const CostSpec& cost, const NoisePanel& panel, const X0Sampler& x0,
                         std::optional<double> discount) {
  if (!cost.F && !cost.F0 && !cost.F_law && !cost.G)
    throw ConfigError("eval_mfc_cost: cost spec has no cost callables");
  SimOptions opts;
  opts.retain_flow = true;
  opts.flow_with_paths = model.path_dependent;
  SimResult sim = simulate_with_selector(select, model, panel, x0, nullptr, opts);
  const RunningCost& running = cost.F0 ? cost.F0 : cost.F;
  const LawCost law_only = cost.F0 ? cost.F_law : LawCost{};
  return accumulate_cost(sim, sim.flow, running, cost.G, law_only, cost.summary, panel.grid(),
                         discount, cost.growth_const);
}

}  // namespace

EvalResult eval_mfc_cost(const FeedbackPolicy& policy, const ModelDynamics& model,
                         const CostSpec& cost, const NoisePanel& panel, const X0Sampler& x0,
                         std::optional<double> discount) {
  const FeedbackPolicy* p = &policy;
  return eval_mfc_impl([p](int, int) { return p; }, model, cost, panel, x0, discount);
}

EvalResult eval_mfc_cost_selector(const PolicySelector& select, const ModelDynamics& model,
                                  const CostSpec& cost, const NoisePanel& panel,
                                  const X0Sampler& x0, std::optional<double> discount) {
  return eval_mfc_impl(select, model, cost, panel, x0, discount);
}

GameCost build_game_cost(const CostSpec& cost) {
  if (!cost.F) throw ConfigError("build_game_cost: running cost missing");
  if (!cost.F_law_free && !cost.delta_F && !cost.fd_fallback)
    throw ConfigError("build_game_cost: running derivative missing and FD fallback disabled");
  if (cost.G && !cost.G_law_free && !cost.delta_G && !cost.fd_fallback)
    throw ConfigError("build_game_cost: terminal derivative missing and FD fallback disabled");

  GameCost game;
  game.summary = cost.summary;

  CostSpec spec = cost;
  game.f = [spec](double t, PathView x, const Vec& a, const LawView& nu) {
    double own;
    if (spec.F_law_free) {
      own = spec.F(t, x, a, nu);
      return own;
    }
    if (spec.delta_F) {
      // Dropped law-only terms: keep the control-relevant part when the
      // split is available, the full cost otherwise (argmin-equivalent).
      own = spec.F0 ? spec.F0(t, x, a, nu) : spec.F(t, x, a, nu);
      const EmpiricalLaw& law = *nu.law;
      double inter;
      if (spec.delta_F_base_free) {
        Atom base = law.atom(0);
        inter = spec.delta_F(t, base.path, base.control, nu, x, a);
      } else {
        inter = 0.0;
        for (int j = 0; j < law.n_atoms(); ++j) {
          Atom base = law.atom(j);
          inter += base.weight * spec.delta_F(t, base.path, base.control, nu, x, a);
        }
      }
      return own + inter;
    }
    // FD route: derivative of the nu-averaged running cost equals f up to a
    // law-only constant.
    const EmpiricalLaw& law = *nu.law;
    auto averaged = [&spec, t](const EmpiricalLaw& m) {
      LawView view = make_law_view(t, m, spec.summary);
      double acc = 0.0;
      for (int j = 0; j < m.n_atoms(); ++j) {
        Atom b = m.atom(j);
        acc += b.weight * spec.F(t, b.path, b.control, view);
      }
      return acc;
    };
    Atom probe;
    probe.path = x;
    probe.control = a;
    return linear_derivative_fd(averaged, law, probe, spec.fd_eps).value;
  };

  game.g = [spec](PathView x, const LawView& mu) {
    if (!spec.G) return 0.0;
    if (spec.G_law_free) return spec.G(x, mu);
    if (spec.delta_G) {
      const EmpiricalLaw& law = *mu.law;
      double inter = 0.0;
      for (int j = 0; j < law.n_atoms(); ++j) {
        Atom base = law.atom(j);
        inter += base.weight * spec.delta_G(base.path, mu, x);
      }
      return inter;  // law-only G0(mu) dropped
    }
    const EmpiricalLaw& law = *mu.law;
    auto averaged = [&spec](const EmpiricalLaw& m) {
      LawView view;
      view.law = &m;
      view.state_mean = m.state_mean();
      if (spec.summary) view.summary = spec.summary(0.0, m);
      double acc = 0.0;
      for (int j = 0; j < m.n_atoms(); ++j) {
        Atom b = m.atom(j);
        acc += b.weight * spec.G(b.path, view);
      }
      return acc;
    };
    Atom probe;
    probe.path = x;
    probe.control = Vec::Zero(law.control_dim());
    return linear_derivative_fd(averaged, law, probe, spec.fd_eps).value;
  };

  return game;
}

GameCost build_game_cost_lawdep(const CostSpec& cost, const ModelDynamics& model) {
  if (!model.law_in_drift)
    throw ConfigError("build_game_cost_lawdep: model has no law-dependent drift");
  if (!cost.grad_a_F) throw ConfigError("build_game_cost_lawdep: grad_a_F missing");
  if (!model.delta_mu_phi) throw ConfigError("build_game_cost_lawdep: delta_mu_phi missing");
  if (!model.drift) throw ConfigError("build_game_cost_lawdep: drift missing");

  GameCost game = build_game_cost(cost);
  RunningCost base_f = game.f;
  CostSpec spec = cost;
  ModelDynamics dyn = model;
  game.f = [base_f, spec, dyn](double t, PathView x, const Vec& a, const LawView& nu) {
    double value = base_f(t, x, a, nu);
    const EmpiricalLaw& law = *nu.law;
    for (int j = 0; j < law.n_atoms(); ++j) {
      Atom base = law.atom(j);
      Vec y = dyn.drift(t, base.path, base.control, nu);
      Vec grad = spec.grad_a_F(t, base.path, base.control, nu);
      Vec dphi = dyn.delta_mu_phi(t, base.path, y, nu, x);
      value += base.weight * grad.dot(dphi);
    }
    return value;
  };
  return game;
}

EvalResult eval_game_cost(const FeedbackPolicy& policy, const ModelDynamics& model,
                          const GameCost& game, const MeasureFlow& frozen,
                          const NoisePanel& panel, const X0Sampler& x0,
                          std::optional<double> discount) {
  SimOptions opts;
  opts.retain_flow = false;
  SimResult sim = simulate_vs_flow(policy, model, frozen, panel, x0, opts);
  return accumulate_cost(sim, frozen, game.f, game.g, LawCost{}, game.summary, panel.grid(),
                         discount, 1.0);
}

}  // namespace mfkit
