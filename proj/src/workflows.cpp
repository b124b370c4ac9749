#include "mfkit/workflows.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mfkit/csv.hpp"
#include "mfkit/errors.hpp"
#include "mfkit/langevin.hpp"
#include "mfkit/solve.hpp"

namespace mfkit {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Series {
  std::string name;
  std::vector<double> ys;
};

// Minimal static SVG: one polyline per series over a shared x axis.
void svg_line_plot(const std::string& path, const std::string& title,
                   const std::vector<double>& xs, const std::vector<Series>& series) {
  const double W = 640, H = 400, L = 60, R = 20, T = 30, B = 40;
  double xmin = xs.empty() ? 0 : *std::min_element(xs.begin(), xs.end());
  double xmax = xs.empty() ? 1 : *std::max_element(xs.begin(), xs.end());
  double ymin = 0, ymax = 1;
  bool first = true;
  for (const Series& s : series)
    for (double y : s.ys) {
      if (!std::isfinite(y)) continue;
      if (first || y < ymin) ymin = y;
      if (first || y > ymax) ymax = y;
      first = false;
    }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

  static const char* colors[] = {"#1f6fb2", "#b2451f", "#3c9a3c", "#8a4cb2"};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EvaluationError("plot: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\">\n";
  out << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  out << "<text x=\"320\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">"
      << title << "</text>\n";
  out << "<line x1=\"" << format_double(L) << "\" y1=\"" << format_double(H - B) << "\" x2=\""
      << format_double(W - R) << "\" y2=\"" << format_double(H - B)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << format_double(L) << "\" y1=\"" << format_double(T) << "\" x2=\""
      << format_double(L) << "\" y2=\"" << format_double(H - B) << "\" stroke=\"black\"/>\n";
  auto label = [&](double v, double x, double y, const char* anchor) {
    out << "<text x=\"" << format_double(x) << "\" y=\"" << format_double(y) << "\" text-anchor=\""
        << anchor << "\" font-family=\"sans-serif\" font-size=\"10\">" << format_double(v)
        << "</text>\n";
  };
  label(xmin, L, H - B + 14, "middle");
  label(xmax, W - R, H - B + 14, "middle");
  label(ymin, L - 4, H - B, "end");
  label(ymax, L - 4, T + 8, "end");
  for (std::size_t si = 0; si < series.size(); ++si) {
    out << "<polyline fill=\"none\" stroke=\"" << colors[si % 4] << "\" points=\"";
    for (std::size_t i = 0; i < xs.size() && i < series[si].ys.size(); ++i) {
      if (!std::isfinite(series[si].ys[i])) continue;
      out << format_double(px(xs[i])) << ',' << format_double(py(series[si].ys[i])) << ' ';
    }
    out << "\"/>\n";
    out << "<text x=\"" << format_double(W - R - 4) << "\" y=\""
        << format_double(T + 14 + 14 * si) << "\" text-anchor=\"end\" "
        << "font-family=\"sans-serif\" font-size=\"11\" fill=\"" << colors[si % 4] << "\">"
        << series[si].name << "</text>\n";
  }
  out << "</svg>\n";
}

json config_echo(const RunConfig& cfg, const ResolvedRun& run) {
  json j;
  j["workflow"] = cfg.workflow;
  j["model"]["name"] = cfg.model_name;
  json params = json::object();
  for (const auto& [k, v] : cfg.model_params) params[k] = v;
  j["model"]["params"] = params;
  j["grid"]["horizon"] = run.panels.grid.horizon;
  j["grid"]["steps"] = run.panels.grid.n_steps;
  j["particles"] = run.panels.particles;
  j["scenarios"] = run.panels.scenarios;
  j["optimizer"]["iters"] = cfg.optimizer.iters;
  j["optimizer"]["step"] = cfg.optimizer.step;
  j["optimizer"]["fd_eps"] = cfg.optimizer.fd_eps;
  j["optimizer"]["knots"] = cfg.optimizer.n_knots;
  j["optimizer"]["batch_scenarios"] = cfg.optimizer.batch_scenarios;
  j["optimizer"]["batch_particles"] = cfg.optimizer.batch_particles;
  j["optimizer"]["eval_every"] = cfg.optimizer.eval_every;
  j["optimizer"]["br_iters"] = cfg.optimizer.br_iters;
  if (run.discount)
    j["discount"] = *run.discount;
  else
    j["discount"] = nullptr;
  j["seed"] = cfg.seed;
  j["out"] = cfg.out_dir;
  j["plots"] = cfg.plots;
  j["x0"]["mean"] = cfg.x0_mean;
  j["x0"]["sd"] = cfg.x0_sd;
  j["mixture"]["deltas"] = cfg.mixture_deltas;
  j["mfld"]["checkpoints"] = cfg.mfld_checkpoints;
  return j;
}

void write_manifest(const fs::path& dir, const RunConfig& cfg, const ResolvedRun& run) {
  json j;
  j["version"] = kVersion;
  j["seed"] = cfg.seed;
  j["config"] = config_echo(cfg, run);
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw EvaluationError("cannot write manifest");
  out << j.dump(2) << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EvaluationError("cannot write " + path.string());
  out << text;
}

FeedbackPolicy build_policy(const RunConfig& cfg, const ResolvedRun& run) {
  FeedbackPolicy policy =
      run.bundle.policy_builder(cfg.optimizer.n_knots, run.panels.grid.horizon);
  if (cfg.policy_theta) {
    Vec theta = Eigen::Map<const Vec>(cfg.policy_theta->data(),
                                      static_cast<int>(cfg.policy_theta->size()));
    policy.set_params(theta);  // size mismatch -> ConfigError
  }
  return policy;
}

void write_solve_artifacts(const fs::path& dir, const SolveReport& report,
                           double fixed_point_res, bool plots, const std::string& stem) {
  std::vector<CsvRow> trace;
  for (std::size_t i = 0; i < report.trace.size(); ++i)
    trace.push_back({static_cast<long long>(i), report.trace[i]});
  emit_csv(trace, {"iter", "cost"}, (dir / (stem + "_trace.csv")).string());

  std::vector<CsvRow> theta;
  for (int i = 0; i < report.theta.size(); ++i)
    theta.push_back({static_cast<long long>(i), report.theta(i)});
  emit_csv(theta, {"index", "value"}, (dir / (stem + "_theta.csv")).string());

  std::string summary;
  summary += "cost: " + format_double(report.cost) + " +- " +
             format_double(report.cost_std_error) + "\n";
  summary += "tail_bound: " + format_double(report.tail_bound) + "\n";
  summary += "fixed_point_residual: " + format_double(fixed_point_res) + "\n";
  summary += "seed: " + std::to_string(report.seed) + "\n";
  summary += "theta:";
  for (int i = 0; i < report.theta.size(); ++i) summary += " " + format_double(report.theta(i));
  summary += "\n";
  if (!report.notes.empty()) summary += "notes: " + report.notes + "\n";
  write_text(dir / (stem + "_summary.txt"), summary);

  if (plots && !report.trace.empty()) {
    std::vector<double> xs(report.trace.size());
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i);
    svg_line_plot((dir / "cost_trace.svg").string(), "optimizer cost trace", xs,
                  {{"batch cost", report.trace}});
  }
}

int workflow_simulate(const RunConfig& cfg, const ResolvedRun& run, const fs::path& dir) {
  FeedbackPolicy policy = build_policy(cfg, run);
  NoisePanel panel = run.panels.make();
  SimOptions opts;
  opts.retain_flow = true;
  const FeedbackPolicy* p = &policy;
  SimResult sim = simulate_with_selector([p](int, int) { return p; }, run.bundle.dynamics, panel,
                                         run.x0, nullptr, opts);

  const int n = run.bundle.dynamics.state_dim;
  const int u = run.bundle.dynamics.control_dim;
  const int K = panel.grid().n_steps;

  std::vector<std::string> cols = {"scenario", "particle", "step", "t"};
  for (int c = 0; c < n; ++c) cols.push_back("state_" + std::to_string(c));
  for (int c = 0; c < u; ++c) cols.push_back("control_" + std::to_string(c));
  std::vector<CsvRow> rows;
  rows.reserve(static_cast<std::size_t>(panel.scenarios()) * panel.particles() * (K + 1));
  for (int s = 0; s < panel.scenarios(); ++s)
    for (int i = 0; i < panel.particles(); ++i)
      for (int k = 0; k <= K; ++k) {
        CsvRow row = {static_cast<long long>(s), static_cast<long long>(i),
                      static_cast<long long>(k), panel.grid().t(k)};
        for (int c = 0; c < n; ++c) row.push_back(sim.scenarios[s].paths[i](c, k));
        for (int c = 0; c < u; ++c) row.push_back(sim.scenarios[s].controls[k](c, i));
        rows.push_back(std::move(row));
      }
  emit_csv(rows, cols, (dir / "trajectories.csv").string());

  std::vector<std::string> scols = {"scenario", "step", "t"};
  for (int c = 0; c < n; ++c) scols.push_back("mean_" + std::to_string(c));
  scols.push_back("variance");
  scols.push_back("order_param");
  std::vector<CsvRow> srows;
  std::vector<double> ts, var0, ord0;
  for (int s = 0; s < panel.scenarios(); ++s)
    for (int k = 0; k <= K; ++k) {
      const EmpiricalLaw& law = sim.flow.law(s, k);
      Vec mean = law.state_mean();
      CsvRow row = {static_cast<long long>(s), static_cast<long long>(k), panel.grid().t(k)};
      for (int c = 0; c < n; ++c) row.push_back(mean(c));
      double variance = law.state_variance();
      double ord = order_parameter(law);
      row.push_back(variance);
      row.push_back(ord);
      srows.push_back(std::move(row));
      if (s == 0) {
        ts.push_back(panel.grid().t(k));
        var0.push_back(variance);
        ord0.push_back(ord);
      }
    }
  emit_csv(srows, scols, (dir / "summary.csv").string());

  if (cfg.plots) {
    svg_line_plot((dir / "variance.svg").string(), "ensemble variance (scenario 0)", ts,
                  {{"variance", var0}});
    svg_line_plot((dir / "order_param.svg").string(), "order parameter (scenario 0)", ts,
                  {{"order parameter", ord0}});
  }
  return 0;
}

int workflow_solve(const RunConfig& cfg, const ResolvedRun& run, const fs::path& dir) {
  FeedbackPolicy family =
      run.bundle.policy_builder(cfg.optimizer.n_knots, run.panels.grid.horizon);
  SolveReport report = solve_mfc(run.bundle.dynamics, run.bundle.cost, family, cfg.optimizer,
                                 run.panels, run.x0, run.discount);
  FeedbackPolicy best = family.with_params(report.theta);
  double residual =
      fixed_point_residual(best, run.bundle.dynamics, run.panels.make(), run.x0);
  write_solve_artifacts(dir, report, residual, cfg.plots, "solve");

  std::vector<CsvRow> rows = {
      {report.cost, report.cost_std_error, report.tail_bound, residual,
       static_cast<long long>(report.seed)}};
  emit_csv(rows, {"cost", "cost_std_error", "tail_bound", "fixed_point_residual", "seed"},
           (dir / "results.csv").string());
  return 0;
}

int workflow_exploitability(const RunConfig& cfg, const ResolvedRun& run, const fs::path& dir) {
  FeedbackPolicy family =
      run.bundle.policy_builder(cfg.optimizer.n_knots, run.panels.grid.horizon);
  SolveReport solve = solve_mfc(run.bundle.dynamics, run.bundle.cost, family, cfg.optimizer,
                                run.panels, run.x0, run.discount);
  FeedbackPolicy alpha_star = family.with_params(solve.theta);
  ExploitabilityReport expl = exploitability(alpha_star, run.bundle.dynamics, run.bundle.cost,
                                             run.panels, cfg.optimizer, run.x0, run.discount);
  double residual =
      fixed_point_residual(alpha_star, run.bundle.dynamics, run.panels.make(), run.x0);
  write_solve_artifacts(dir, solve, residual, cfg.plots, "solve");

  double rel = std::abs(expl.j_star) > 0 ? expl.gap / std::abs(expl.j_star) : 0.0;
  std::vector<CsvRow> rows = {{expl.j_star, expl.j_star_std_error, expl.j_br, expl.gap,
                               expl.std_error, rel}};
  emit_csv(rows, {"j_star", "j_star_std_error", "j_br", "gap", "gap_std_error", "relative_gap"},
           (dir / "results.csv").string());

  std::vector<CsvRow> br_trace;
  for (std::size_t i = 0; i < expl.br.trace.size(); ++i)
    br_trace.push_back({static_cast<long long>(i), expl.br.trace[i]});
  emit_csv(br_trace, {"iter", "cost"}, (dir / "br_trace.csv").string());
  return 0;
}

int workflow_mixture(const RunConfig& cfg, const ResolvedRun& run, const fs::path& dir) {
  FeedbackPolicy family =
      run.bundle.policy_builder(cfg.optimizer.n_knots, run.panels.grid.horizon);
  SolveReport solve = solve_mfc(run.bundle.dynamics, run.bundle.cost, family, cfg.optimizer,
                                run.panels, run.x0, run.discount);
  FeedbackPolicy alpha_star = family.with_params(solve.theta);

  // Deviation policy: a seeded perturbation of the optimum.
  StreamRng rng = StreamRng::keyed({cfg.seed, 0xa17e2ull});
  Vec theta = solve.theta;
  for (int i = 0; i < theta.size(); ++i)
    theta(i) += 0.25 * (1.0 + std::abs(theta(i))) * rng.normal();
  FeedbackPolicy alpha = family.with_params(theta);

  MixtureReport report =
      mixture_derivative_check(alpha, alpha_star, run.bundle.dynamics, run.bundle.cost,
                               cfg.mixture_deltas, run.panels, run.x0, run.discount);

  std::vector<CsvRow> rows;
  for (const MixtureRow& r : report.rows)
    rows.push_back({r.delta_requested, r.delta_effective, r.j_delta, r.derivative});
  emit_csv(rows, {"delta", "delta_effective", "j_delta", "derivative"},
           (dir / "mixture.csv").string());

  std::vector<CsvRow> summary = {{report.limit, report.game_gap, report.game_gap_std_error,
                                  report.j_star,
                                  std::abs(report.limit - report.game_gap)}};
  emit_csv(summary, {"limit", "game_gap", "game_gap_std_error", "j_star", "abs_difference"},
           (dir / "results.csv").string());
  write_solve_artifacts(dir, solve, std::numeric_limits<double>::quiet_NaN(), cfg.plots,
                        "solve");
  return 0;
}

int workflow_mfld(const RunConfig& cfg, const ResolvedRun& run, const fs::path& dir) {
  MfldConfig mc;
  mc.grid = run.panels.grid;
  mc.particles = run.panels.particles;
  mc.seed = cfg.seed;
  mc.checkpoints = cfg.mfld_checkpoints;
  FlowDiagnostics diag = run_mfld(run.bundle, mc, run.x0);

  std::vector<CsvRow> rows;
  std::vector<double> ts, ord, var;
  for (const FlowCheckpoint& p : diag.points) {
    rows.push_back({p.t, p.F, p.entropy, p.free_energy, p.order_param, p.variance, p.w2_step});
    ts.push_back(p.t);
    ord.push_back(p.order_param);
    var.push_back(p.variance);
  }
  emit_csv(rows, {"t", "F", "H", "free_energy", "order_param", "variance", "w2_step"},
           (dir / "diagnostics.csv").string());
  std::vector<CsvRow> summary = {{static_cast<long long>(diag.converged ? 1 : 0),
                                  static_cast<long long>(diag.points.size())}};
  emit_csv(summary, {"converged", "checkpoints"}, (dir / "results.csv").string());

  if (cfg.plots) {
    svg_line_plot((dir / "order_param.svg").string(), "order parameter", ts,
                  {{"order parameter", ord}});
    svg_line_plot((dir / "variance.svg").string(), "ensemble variance", ts,
                  {{"variance", var}});
  }
  return 0;
}

int workflow_compare(const RunConfig& cfg, const ResolvedRun& run, const fs::path& dir) {
  if (!run.discount)
    throw ConfigError("compare workflow requires a discount (the lift is a discounted problem)");
  CompareReport report = compare_mfld_to_mfc(run.bundle, *run.discount, run.bundle.sigma,
                                             cfg.optimizer, run.panels, run.x0);

  std::vector<CsvRow> rows = {
      {report.value, report.value_target, report.value_rel_error, report.drift_rel_l2}};
  emit_csv(rows, {"value", "value_target", "value_rel_error", "drift_rel_l2"},
           (dir / "results.csv").string());

  const int n = static_cast<int>(report.probes.rows());
  std::vector<std::string> pcols;
  for (int c = 0; c < n; ++c) pcols.push_back("x_" + std::to_string(c));
  for (int c = 0; c < static_cast<int>(report.learned_drift.rows()); ++c)
    pcols.push_back("learned_" + std::to_string(c));
  for (int c = 0; c < static_cast<int>(report.target_drift.rows()); ++c)
    pcols.push_back("target_" + std::to_string(c));
  std::vector<CsvRow> probes;
  for (int i = 0; i < report.probes.cols(); ++i) {
    CsvRow row;
    for (int c = 0; c < n; ++c) row.push_back(report.probes(c, i));
    for (int c = 0; c < report.learned_drift.rows(); ++c)
      row.push_back(report.learned_drift(c, i));
    for (int c = 0; c < report.target_drift.rows(); ++c)
      row.push_back(report.target_drift(c, i));
    probes.push_back(std::move(row));
  }
  emit_csv(probes, pcols, (dir / "probes.csv").string());
  write_solve_artifacts(dir, report.solve, std::numeric_limits<double>::quiet_NaN(), cfg.plots,
                        "solve");
  return 0;
}

}  // namespace

bool known_workflow(const std::string& name) {
  return name == "simulate" || name == "solve-mfc" || name == "exploitability" ||
         name == "mixture-check" || name == "mfld" || name == "compare";
}

int run_workflow(const RunConfig& cfg) {
  if (!known_workflow(cfg.workflow))
    throw ConfigError("unknown workflow \"" + cfg.workflow + "\"");
  ResolvedRun run = resolve_run(cfg);
  fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  write_manifest(dir, cfg, run);

  if (cfg.workflow == "simulate") return workflow_simulate(cfg, run, dir);
  if (cfg.workflow == "solve-mfc") return workflow_solve(cfg, run, dir);
  if (cfg.workflow == "exploitability") return workflow_exploitability(cfg, run, dir);
  if (cfg.workflow == "mixture-check") return workflow_mixture(cfg, run, dir);
  if (cfg.workflow == "mfld") return workflow_mfld(cfg, run, dir);
  return workflow_compare(cfg, run, dir);
}

}  // namespace mfkit
