#include "mfkit/langevin.hpp"

#include <algorithm>
#include <cmath>

#include "mfkit/errors.hpp"

namespace mfkit {

namespace {

Mat wrap_torus(const Mat& states) {
  const double two_pi = 2.0 * M_PI;
  Mat w = states;
  for (int i = 0; i < w.size(); ++i) {
    double v = std::fmod(w.data()[i], two_pi);
    if (v < 0.0) v += two_pi;
    w.data()[i] = v;
  }
  return w;
}

}  // namespace

FlowDiagnostics run_mfld(const ModelBundle& bundle, const MfldConfig& cfg, const X0Sampler& x0) {
  if (!bundle.grad_delta_F)
    throw ConfigError("run_mfld: analytic grad delta F is required");

  const int n = bundle.dynamics.state_dim;
  ModelDynamics flow_model;
  flow_model.state_dim = n;
  flow_model.control_dim = 0;
  flow_model.idio_noise_dim = n;
  flow_model.law_in_drift = true;
  flow_model.summary = bundle.summary;
  auto grad = bundle.grad_delta_F;
  flow_model.drift = [grad](double, PathView path, const Vec&, const LawView& mu) {
    return (-grad(mu, current(path))).eval();
  };
  if (bundle.sigma > 0.0) flow_model.sigma_const = bundle.sigma * Mat::Identity(n, n);

  NoisePanel panel(cfg.grid, 1, cfg.particles, n, 0, JumpMeasureSpec::none(),
                   JumpMeasureSpec::none(), cfg.seed);
  SimOptions opts;
  opts.retain_flow = true;
  SimResult sim = simulate_mckean_vlasov(nullptr, flow_model, panel, x0, opts);

  // Checkpoint grid indices: t = 0 plus T / 2^j, finest first.
  std::vector<int> ks{0};
  for (int j = cfg.checkpoints - 1; j >= 0; --j) {
    int k = static_cast<int>(std::llround(cfg.grid.n_steps * std::pow(0.5, j)));
    if (k > ks.back()) ks.push_back(k);
  }

  FlowDiagnostics diag;
  const double sigma2 = bundle.sigma * bundle.sigma;
  int stable_run = 0;
  for (std::size_t c = 0; c < ks.size(); ++c) {
    const int k = ks[c];
    const double t = cfg.grid.t(k);
    const EmpiricalLaw& law = sim.flow.law(0, k);
    LawView view;
    view.law = &law;
    view.state_mean = law.state_mean();
    if (bundle.summary) view.summary = bundle.summary(t, law);

    FlowCheckpoint cp;
    cp.t = t;
    cp.F = bundle.F_law ? bundle.F_law(t, view) : 0.0;
    Mat pts = bundle.torus ? wrap_torus(law.current_states()) : Mat(law.current_states());
    try {
      cp.entropy = entropy_estimate(pts, cfg.entropy_k);
    } catch (const DegenerateInputError&) {
      cp.entropy = 0.0;  // point masses: entropy unavailable, keep entries finite
    }
    cp.free_energy = cp.F - 0.5 * sigma2 * cp.entropy;
    cp.order_param = order_parameter(law);
    cp.variance = law.state_variance();
    if (c > 0) {
      cp.w2_step = wasserstein2(sim.flow.law(0, ks[c - 1]), law, W2Marginal::kState, 64,
                                cfg.seed);
      double dt = t - diag.points.back().t;
      if (dt > 0.0 && cp.w2_step / dt < cfg.convergence_tol)
        ++stable_run;
      else
        stable_run = 0;
      if (stable_run >= 3) diag.converged = true;
    }
    diag.points.push_back(cp);
  }
  diag.final_law = sim.flow.law(0, cfg.grid.n_steps);
  return diag;
}

CompareReport compare_mfld_to_mfc(const ModelBundle& f_bundle, double beta, double sigma,
                                  const OptimizerConfig& cfg, const PanelSpec& panels,
                                  const X0Sampler& x0) {
  LawCost tilde = make_tilde_F(f_bundle, beta, sigma);
  const int n = f_bundle.dynamics.state_dim;

  ModelDynamics model;
  model.state_dim = n;
  model.control_dim = n;
  model.idio_noise_dim = n;
  model.drift = [](double, PathView, const Vec& a, const LawView&) { return a; };
  model.sigma_const = sigma * Mat::Identity(n, n);

  CostSpec cost;
  cost.summary = f_bundle.summary;
  cost.F0 = [](double, PathView, const Vec& a, const LawView&) { return 0.5 * a.squaredNorm(); };
  cost.F_law = tilde;
  auto F0 = cost.F0;
  cost.F = [F0, tilde](double t, PathView x, const Vec& a, const LawView& nu) {
    return F0(t, x, a, nu) + tilde(t, nu);
  };
  cost.growth_const = std::max(1.0, f_bundle.cost.growth_const);

  PanelSpec spec = panels;
  spec.idio_dim = n;
  FeedbackPolicy family = FeedbackPolicy::affine(n, cfg.n_knots, spec.grid.horizon);

  CompareReport report;
  report.solve = solve_mfc(model, cost, family, cfg, spec, x0, beta);
  report.value = report.solve.cost;

  // Initial ensemble: target value F(mu_0) and the drift probe set.
  NoisePanel panel = spec.make();
  Mat init(n, spec.particles);
  for (int i = 0; i < spec.particles; ++i) {
    StreamRng rng = panel.init_stream(0, i);
    init.col(i) = x0(rng);
  }
  EmpiricalLaw mu0 = EmpiricalLaw::from_ensemble(init);
  LawView view0;
  view0.law = &mu0;
  view0.state_mean = mu0.state_mean();
  if (f_bundle.summary) view0.summary = f_bundle.summary(0.0, mu0);
  report.value_target = f_bundle.F_law(0.0, view0);
  report.value_rel_error =
      std::abs(report.value - report.value_target) / std::max(1e-12, std::abs(report.value_target));

  FeedbackPolicy learned = family.with_params(report.solve.theta);
  int n_probes;
  if (n == 1) {
    n_probes = 41;
    double m = view0.state_mean(0);
    double sd = std::sqrt(std::max(mu0.state_variance(), 1e-12));
    report.probes = Mat(1, n_probes);
    for (int i = 0; i < n_probes; ++i)
      report.probes(0, i) = m + sd * (-2.5 + 5.0 * i / (n_probes - 1));
  } else {
    n_probes = std::min(64, spec.particles);
    report.probes = init.leftCols(n_probes);
  }
  report.learned_drift = Mat(n, n_probes);
  report.target_drift = Mat(n, n_probes);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n_probes; ++i) {
    Vec x = report.probes.col(i);
    report.learned_drift.col(i) = learned.control(0.0, x, view0.state_mean);
    report.target_drift.col(i) = -f_bundle.grad_delta_F(view0, x);
    num += (report.learned_drift.col(i) - report.target_drift.col(i)).squaredNorm();
    den += report.target_drift.col(i).squaredNorm();
  }
  report.drift_rel_l2 = std::sqrt(num / std::max(den, 1e-12));
  return report;
}

}  // namespace mfkit
