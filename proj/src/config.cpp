#include "mfkit/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mfkit/errors.hpp"

namespace mfkit {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown config key \"" + where + it.key() + "\"");
}

double require_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError("config field \"" + where + "\" must be a number");
  return j.get<double>();
}

int require_count(const json& j, const std::string& where) {
  double v = require_number(j, where);
  if (v < 1 || v != std::floor(v))
    throw ConfigError("config field \"" + where + "\" must be a positive integer");
  return static_cast<int>(v);
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error at byte ") + std::to_string(e.byte) + ": " +
                      e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be a JSON object");

  check_keys(root,
             {"workflow", "model", "grid", "particles", "scenarios", "optimizer", "discount",
              "seed", "out", "plots", "policy", "mixture", "mfld", "x0"},
             "");

  RunConfig cfg;
  if (root.contains("workflow")) {
    if (!root["workflow"].is_string()) throw ConfigError("config field \"workflow\" must be a string");
    cfg.workflow = root["workflow"].get<std::string>();
  }

  if (root.contains("model")) {
    const json& m = root["model"];
    if (!m.is_object()) throw ConfigError("config field \"model\" must be an object");
    check_keys(m, {"name", "params"}, "model.");
    if (m.contains("name")) {
      if (!m["name"].is_string()) throw ConfigError("config field \"model.name\" must be a string");
      cfg.model_name = m["name"].get<std::string>();
    }
    if (!model_registry().count(cfg.model_name))
      throw ConfigError("config field \"model\": unknown model \"" + cfg.model_name + "\"");
    if (m.contains("params")) {
      const json& p = m["params"];
      if (!p.is_object()) throw ConfigError("config field \"model.params\" must be an object");
      for (auto it = p.begin(); it != p.end(); ++it)
        cfg.model_params[it.key()] = require_number(it.value(), "model.params." + it.key());
    }
  }

  if (root.contains("grid")) {
    const json& g = root["grid"];
    if (!g.is_object()) throw ConfigError("config field \"grid\" must be an object");
    check_keys(g, {"horizon", "steps"}, "grid.");
    TimeGrid grid;
    grid.horizon = g.contains("horizon") ? require_number(g["horizon"], "grid.horizon") : 1.0;
    grid.n_steps = g.contains("steps") ? require_count(g["steps"], "grid.steps") : 1;
    if (!grid.valid()) throw ConfigError("config field \"grid\": horizon must be positive");
    cfg.grid = grid;
  }

  if (root.contains("particles")) cfg.particles = require_count(root["particles"], "particles");
  if (root.contains("scenarios")) cfg.scenarios = require_count(root["scenarios"], "scenarios");

  if (root.contains("optimizer")) {
    const json& o = root["optimizer"];
    if (!o.is_object()) throw ConfigError("config field \"optimizer\" must be an object");
    check_keys(o,
               {"iters", "step", "fd_eps", "knots", "batch_scenarios", "batch_particles",
                "eval_every", "br_iters"},
               "optimizer.");
    if (o.contains("iters")) cfg.optimizer.iters = require_count(o["iters"], "optimizer.iters");
    if (o.contains("step")) {
      cfg.optimizer.step = require_number(o["step"], "optimizer.step");
      if (cfg.optimizer.step <= 0) throw ConfigError("config field \"optimizer.step\" must be positive");
    }
    if (o.contains("fd_eps")) {
      cfg.optimizer.fd_eps = require_number(o["fd_eps"], "optimizer.fd_eps");
      if (cfg.optimizer.fd_eps <= 0)
        throw ConfigError("config field \"optimizer.fd_eps\" must be positive");
    }
    if (o.contains("knots")) cfg.optimizer.n_knots = require_count(o["knots"], "optimizer.knots");
    if (o.contains("batch_scenarios"))
      cfg.optimizer.batch_scenarios = require_count(o["batch_scenarios"], "optimizer.batch_scenarios");
    if (o.contains("batch_particles"))
      cfg.optimizer.batch_particles = require_count(o["batch_particles"], "optimizer.batch_particles");
    if (o.contains("eval_every"))
      cfg.optimizer.eval_every = require_count(o["eval_every"], "optimizer.eval_every");
    if (o.contains("br_iters"))
      cfg.optimizer.br_iters = require_count(o["br_iters"], "optimizer.br_iters");
  }

  if (root.contains("discount")) {
    if (root["discount"].is_null()) {
      cfg.discount_explicit_none = true;
    } else {
      double beta = require_number(root["discount"], "discount");
      if (beta <= 0) throw ConfigError("config field \"discount\" must be positive or null");
      cfg.discount = beta;
    }
  }

  if (root.contains("seed")) {
    double s = require_number(root["seed"], "seed");
    if (s < 0 || s != std::floor(s)) throw ConfigError("config field \"seed\" must be a nonnegative integer");
    cfg.seed = static_cast<std::uint64_t>(s);
  }
  if (root.contains("out")) {
    if (!root["out"].is_string()) throw ConfigError("config field \"out\" must be a string");
    cfg.out_dir = root["out"].get<std::string>();
  }
  if (root.contains("plots")) {
    if (!root["plots"].is_boolean()) throw ConfigError("config field \"plots\" must be a boolean");
    cfg.plots = root["plots"].get<bool>();
  }

  if (root.contains("policy")) {
    const json& p = root["policy"];
    if (!p.is_object()) throw ConfigError("config field \"policy\" must be an object");
    check_keys(p, {"theta"}, "policy.");
    if (p.contains("theta")) {
      if (!p["theta"].is_array()) throw ConfigError("config field \"policy.theta\" must be an array");
      std::vector<double> theta;
      for (std::size_t i = 0; i < p["theta"].size(); ++i)
        theta.push_back(require_number(p["theta"][i], "policy.theta[" + std::to_string(i) + "]"));
      cfg.policy_theta = theta;
    }
  }

  if (root.contains("mixture")) {
    const json& m = root["mixture"];
    if (!m.is_object()) throw ConfigError("config field \"mixture\" must be an object");
    check_keys(m, {"deltas"}, "mixture.");
    if (m.contains("deltas")) {
      if (!m["deltas"].is_array() || m["deltas"].size() < 3)
        throw ConfigError("config field \"mixture.deltas\" must be an array with >= 3 values");
      cfg.mixture_deltas.clear();
      for (std::size_t i = 0; i < m["deltas"].size(); ++i) {
        double d = require_number(m["deltas"][i], "mixture.deltas[" + std::to_string(i) + "]");
        if (!(d > 0.0 && d <= 0.5))
          throw ConfigError("config field \"mixture.deltas\" values must lie in (0, 1/2]");
        cfg.mixture_deltas.push_back(d);
      }
    }
  }

  if (root.contains("mfld")) {
    const json& m = root["mfld"];
    if (!m.is_object()) throw ConfigError("config field \"mfld\" must be an object");
    check_keys(m, {"checkpoints"}, "mfld.");
    if (m.contains("checkpoints"))
      cfg.mfld_checkpoints = require_count(m["checkpoints"], "mfld.checkpoints");
  }

  if (root.contains("x0")) {
    const json& x = root["x0"];
    if (!x.is_object()) throw ConfigError("config field \"x0\" must be an object");
    check_keys(x, {"mean", "sd"}, "x0.");
    if (x.contains("mean")) cfg.x0_mean = require_number(x["mean"], "x0.mean");
    if (x.contains("sd")) {
      cfg.x0_sd = require_number(x["sd"], "x0.sd");
      if (cfg.x0_sd < 0) throw ConfigError("config field \"x0.sd\" must be nonnegative");
    }
  }

  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

ResolvedRun resolve_run(const RunConfig& cfg) {
  ResolvedRun run;
  run.bundle = make_model(cfg.model_name, cfg.model_params);

  run.panels = run.bundle.defaults;
  if (cfg.grid) run.panels.grid = *cfg.grid;
  if (cfg.particles) run.panels.particles = *cfg.particles;
  if (cfg.scenarios) run.panels.scenarios = *cfg.scenarios;
  run.panels.seed = cfg.seed;

  if (cfg.discount_explicit_none)
    run.discount = std::nullopt;
  else
    run.discount = cfg.discount ? cfg.discount : std::optional<double>(run.bundle.beta);

  const int n = run.bundle.dynamics.state_dim;
  const double mean = cfg.x0_mean;
  const double sd = cfg.x0_sd;
  run.x0 = [n, mean, sd](StreamRng& rng) {
    return (Vec::Constant(n, mean) + sd * rng.normal_vec(n)).eval();
  };
  return run;
}

}  // namespace mfkit
