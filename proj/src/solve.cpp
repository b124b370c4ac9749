#include "mfkit/solve.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>

#include "mfkit/errors.hpp"

namespace mfkit {

NoisePanel PanelSpec::make() const {
  NoisePanel p(grid, scenarios, particles, idio_dim, common_dim, idio_jumps, common_jumps, seed);
  if (idio_seed) return p.with_idiosyncratic_seed(*idio_seed);
  return p;
}

NoisePanel PanelSpec::make_batch(int n_scenarios, int n_particles,
                                 std::uint64_t batch_idio_seed) const {
  NoisePanel p(grid, n_scenarios, n_particles, idio_dim, common_dim, idio_jumps, common_jumps,
               seed);
  return p.with_idiosyncratic_seed(batch_idio_seed);
}

namespace {

using Objective = std::function<EvalResult(const Vec& theta, const NoisePanel& panel)>;

SolveReport run_optimizer(const Objective& objective, const FeedbackPolicy& family,
                          const OptimizerConfig& cfg, const PanelSpec& panels, int iters,
                          const std::string& notes) {
  const auto t_start = std::chrono::steady_clock::now();
  const int P = family.n_params();
  const int batch_scen =
      cfg.batch_scenarios > 0 ? std::min(cfg.batch_scenarios, panels.scenarios) : panels.scenarios;
  const int batch_parts =
      cfg.batch_particles > 0 ? std::min(cfg.batch_particles, panels.particles) : panels.particles;
  const std::uint64_t idio_base = panels.idio_seed.value_or(panels.seed);

  NoisePanel full_panel = panels.make();

  Vec theta = family.params();
  Vec m = Vec::Zero(P), v = Vec::Zero(P);
  SolveReport report;
  report.seed = panels.seed;
  report.notes = notes;

  EvalResult best = objective(theta, full_panel);
  Vec best_theta = theta;
  report.trace.reserve(iters + 1);

  for (int it = 0; it < iters; ++it) {
    NoisePanel batch = panels.make_batch(
        batch_scen, batch_parts, mix64(idio_base ^ mix64(0xba7c4ull + cfg.seed) ^ mix64(it + 1)));

    double j0 = objective(theta, batch).mean;
    report.trace.push_back(j0);
    if (!std::isfinite(j0))
      throw SolverError("solve: objective diverged at iteration " + std::to_string(it),
                        report.trace);

    // Central differences with common random numbers: both probe sides of a
    // coordinate see the identical panel.
    Vec grad(P);
    std::exception_ptr probe_error;
#pragma omp parallel for schedule(dynamic) if (!omp_in_parallel())
    for (int j = 0; j < P; ++j) {
      try {
        Vec tp = theta, tm = theta;
        tp(j) += cfg.fd_eps;
        tm(j) -= cfg.fd_eps;
        grad(j) = (objective(tp, batch).mean - objective(tm, batch).mean) / (2.0 * cfg.fd_eps);
      } catch (...) {
#pragma omp critical(mfkit_probe_error)
        if (!probe_error) probe_error = std::current_exception();
      }
    }
    if (probe_error) std::rethrow_exception(probe_error);
    if (!grad.allFinite())
      throw SolverError("solve: gradient estimate diverged at iteration " + std::to_string(it),
                        report.trace);

    const double lr =
        cfg.step * (0.55 + 0.45 * std::cos(M_PI * it / std::max(1, iters - 1)));
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v.array() + 0.001 * grad.array().square();
    double bc1 = 1.0 - std::pow(0.9, it + 1);
    double bc2 = 1.0 - std::pow(0.999, it + 1);
    theta -= lr * ((m / bc1).array() / ((v / bc2).array().sqrt() + 1e-8)).matrix();

    if ((it + 1) % std::max(1, cfg.eval_every) == 0 || it == iters - 1) {
      EvalResult full = objective(theta, full_panel);
      if (std::isfinite(full.mean) && full.mean < best.mean) {
        best = full;
        best_theta = theta;
      }
    }
  }

  report.theta = best_theta;
  report.cost = best.mean;
  report.cost_std_error = best.std_error;
  report.tail_bound = best.tail_bound;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

}  // namespace

SolveReport solve_mfc(const ModelDynamics& model, const CostSpec& cost,
                      const FeedbackPolicy& family, const OptimizerConfig& cfg,
                      const PanelSpec& panels, const X0Sampler& x0,
                      std::optional<double> discount) {
  if (family.state_dim() != model.state_dim || family.control_dim() != model.control_dim)
    throw ConfigError("solve_mfc: policy family incompatible with the model dimensions");
  Objective objective = [&](const Vec& theta, const NoisePanel& panel) {
    FeedbackPolicy policy = family.with_params(theta);
    return eval_mfc_cost(policy, model, cost, panel, x0, discount);
  };
  return run_optimizer(objective, family, cfg, panels, cfg.iters, "");
}

SolveReport best_response(const ModelDynamics& model, const GameCost& game,
                          const MeasureFlow& frozen, const FeedbackPolicy& start,
                          const OptimizerConfig& cfg, const PanelSpec& panels,
                          const X0Sampler& x0, std::optional<double> discount) {
  Objective objective = [&](const Vec& theta, const NoisePanel& panel) {
    FeedbackPolicy policy = start.with_params(theta);
    return eval_game_cost(policy, model, game, frozen, panel, x0, discount);
  };
  int iters = cfg.br_iters > 0 ? cfg.br_iters : cfg.iters;
  return run_optimizer(objective, start, cfg, panels, iters,
                       "family-restricted best response (under-estimates the unrestricted gap)");
}

namespace {

MeasureFlow generate_flow(const FeedbackPolicy& policy, const ModelDynamics& model,
                          const NoisePanel& panel, const X0Sampler& x0) {
  SimOptions opts;
  opts.retain_flow = true;
  opts.flow_with_paths = model.path_dependent;
  const FeedbackPolicy* p = &policy;
  SimResult sim = simulate_with_selector([p](int, int) { return p; }, model, panel, x0, nullptr,
                                         opts);
  return std::move(sim.flow);
}

double paired_std_error(const Vec& a, const Vec& b) {
  Vec d = a - b;
  double mean = d.mean();
  double var = (d.array() - mean).square().sum() / std::max<int>(1, d.size() - 1);
  return std::sqrt(var / d.size());
}

}  // namespace

ExploitabilityReport exploitability(const FeedbackPolicy& alpha_star, const ModelDynamics& model,
                                    const CostSpec& cost, const PanelSpec& panels,
                                    const OptimizerConfig& cfg, const X0Sampler& x0,
                                    std::optional<double> discount) {
  NoisePanel flow_panel = panels.make();
  MeasureFlow flow = generate_flow(alpha_star, model, flow_panel, x0);
  GameCost game =
      model.law_in_drift ? build_game_cost_lawdep(cost, model) : build_game_cost(cost);

  // The representative player is independent of the flow given the common
  // noise: same common channel, fresh idiosyncratic channel.
  const std::uint64_t player_seed = mix64(panels.seed ^ 0x9afe77ull);
  PanelSpec player_spec = panels;
  player_spec.idio_seed = player_seed;
  NoisePanel player_panel = player_spec.make();

  EvalResult j_star = eval_game_cost(alpha_star, model, game, flow, player_panel, x0, discount);
  SolveReport br = best_response(model, game, flow, alpha_star, cfg, player_spec, x0, discount);
  EvalResult j_br = eval_game_cost(alpha_star.with_params(br.theta), model, game, flow,
                                   player_panel, x0, discount);

  ExploitabilityReport out;
  out.j_star = j_star.mean;
  out.j_star_std_error = j_star.std_error;
  out.j_br = j_br.mean;
  out.gap = j_star.mean - j_br.mean;
  out.std_error = paired_std_error(j_star.per_atom, j_br.per_atom);
  out.br = std::move(br);
  return out;
}

double fixed_point_residual(const FeedbackPolicy& alpha_star, const ModelDynamics& model,
                            const NoisePanel& panel, const X0Sampler& x0,
                            std::optional<std::uint64_t> alt_idio_seed) {
  std::uint64_t alt = alt_idio_seed.value_or(mix64(panel.idio_seed() ^ 0xf1d0ull));
  NoisePanel other = panel.with_idiosyncratic_seed(alt);
  MeasureFlow a = generate_flow(alpha_star, model, panel, x0);
  MeasureFlow b = generate_flow(alpha_star, model, other, x0);
  const int K = panel.grid().n_steps;
  double acc = 0.0;
  for (int s = 0; s < panel.scenarios(); ++s)
    for (int k = 0; k <= K; ++k)
      acc += wasserstein2(a.law(s, k), b.law(s, k), W2Marginal::kStateControl, 64,
                          panel.seed());
  return acc / (panel.scenarios() * (K + 1));
}

MixtureReport mixture_derivative_check(const FeedbackPolicy& alpha,
                                       const FeedbackPolicy& alpha_star,
                                       const ModelDynamics& model, const CostSpec& cost,
                                       const std::vector<double>& deltas, const PanelSpec& panels,
                                       const X0Sampler& x0, std::optional<double> discount) {
  if (model.law_in_drift)
    throw ConfigError("mixture_derivative_check: law-dependent dynamics are out of scope");
  for (double d : deltas)
    if (!(d > 0.0 && d <= 0.5))
      throw ConfigError("mixture_derivative_check: delta values must lie in (0, 1/2]");

  NoisePanel panel = panels.make();
  const int N = panel.particles();

  EvalResult j_star = eval_mfc_cost(alpha_star, model, cost, panel, x0, discount);

  MixtureReport report;
  report.j_star = j_star.mean;
  const FeedbackPolicy* pa = &alpha;
  const FeedbackPolicy* ps = &alpha_star;
  for (double d : deltas) {
    int m = static_cast<int>(std::ceil(d * N));
    double d_eff = static_cast<double>(m) / N;
    EvalResult j_delta = eval_mfc_cost_selector(
        [pa, ps, m](int, int i) { return i < m ? pa : ps; }, model, cost, panel, x0, discount);
    MixtureRow row;
    row.delta_requested = d;
    row.delta_effective = d_eff;
    row.j_delta = j_delta.mean;
    row.derivative = (j_delta.mean - j_star.mean) / d_eff;
    report.rows.push_back(row);
  }

  // Least-squares line through (delta_eff, derivative); intercept = limit.
  if (report.rows.size() == 1) {
    report.limit = report.rows[0].derivative;
  } else {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const MixtureRow& r : report.rows) {
      sx += r.delta_effective;
      sy += r.derivative;
      sxx += r.delta_effective * r.delta_effective;
      sxy += r.delta_effective * r.derivative;
    }
    double n = static_cast<double>(report.rows.size());
    double denom = n * sxx - sx * sx;
    report.limit = denom != 0.0 ? (sy * sxx - sx * sxy) / denom : sy / n;
  }

  // Independent route: the same gap through the derived game cost.
  MeasureFlow flow = generate_flow(alpha_star, model, panel, x0);
  GameCost game = build_game_cost(cost);
  EvalResult g_alpha = eval_game_cost(alpha, model, game, flow, panel, x0, discount);
  EvalResult g_star = eval_game_cost(alpha_star, model, game, flow, panel, x0, discount);
  report.game_gap = g_alpha.mean - g_star.mean;
  report.game_gap_std_error = paired_std_error(g_alpha.per_atom, g_star.per_atom);
  return report;
}

}  // namespace mfkit
