#include "mfkit/models.hpp"

#include <cmath>

#include "mfkit/errors.hpp"

namespace mfkit {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw ConfigError(std::string(what) + " must be positive");
}

double read_param(const ModelParams& params, const std::string& key, double fallback,
                  const std::vector<std::string>& allowed) {
  for (const auto& [k, _] : params) {
    bool known = false;
    for (const auto& a : allowed) known |= (k == a);
    if (!known) throw ConfigError("unknown model parameter \"" + k + "\"");
  }
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

// Summary [mean(state); E|state|^2] of the current-state marginal.
Vec mean_e2_summary(const EmpiricalLaw& law) {
  const int n = law.state_dim();
  Vec s(n + 1);
  s.head(n) = law.state_mean();
  double e2 = 0.0;
  for (int i = 0; i < law.n_atoms(); ++i) e2 += law.weight(i) * law.current_state(i).squaredNorm();
  s(n) = e2;
  return s;
}

double variance_from_summary(const Vec& s, int n) {
  return s(n) - s.head(n).squaredNorm();
}

}  // namespace

ModelBundle make_lq(double kappa, double beta, double sigma, int n) {
  require_positive(kappa, "kappa");
  require_positive(beta, "beta");
  require_positive(sigma, "sigma");
  if (n < 1) throw ConfigError("lq: dimension must be >= 1");

  ModelBundle m;
  m.name = "lq";
  m.beta = beta;
  m.sigma = sigma;

  m.dynamics.state_dim = n;
  m.dynamics.control_dim = n;
  m.dynamics.idio_noise_dim = n;
  m.dynamics.drift = [](double, PathView, const Vec& a, const LawView&) { return a; };
  m.dynamics.sigma_const = sigma * Mat::Identity(n, n);

  m.summary = [](double, const EmpiricalLaw& law) { return mean_e2_summary(law); };

  m.F_law = [kappa, n](double, const LawView& nu) {
    return kappa * variance_from_summary(nu.summary, n);
  };
  m.delta_F = [kappa, n](const LawView& nu, const Vec& x) {
    // integral of |x - y|^2 mu(dy) = |x|^2 - 2 x.mean + E|y|^2
    return kappa * (x.squaredNorm() - 2.0 * x.dot(nu.summary.head(n)) + nu.summary(n));
  };
  m.grad_delta_F = [kappa, n](const LawView& nu, const Vec& x) {
    return (2.0 * kappa * (x - nu.summary.head(n))).eval();
  };
  m.lap_delta_F = [kappa, n](const LawView&, const Vec&) { return 2.0 * kappa * n; };

  m.cost.summary = m.summary;
  m.cost.F0 = [](double, PathView, const Vec& a, const LawView&) { return 0.5 * a.squaredNorm(); };
  m.cost.F_law = m.F_law;
  auto F_law = m.F_law;
  auto F0 = m.cost.F0;
  m.cost.F = [F0, F_law](double t, PathView x, const Vec& a, const LawView& nu) {
    return F0(t, x, a, nu) + F_law(t, nu);
  };
  auto delta_F = m.delta_F;
  m.cost.delta_F = [delta_F](double, PathView, const Vec&, const LawView& nu, PathView x_probe,
                             const Vec&) { return delta_F(nu, current(x_probe)); };
  m.cost.delta_F_base_free = true;
  m.cost.grad_a_F = [](double, PathView, const Vec& a, const LawView&) { return a; };
  m.cost.growth_const = std::max(1.0, kappa);

  m.policy_builder = [n](int knots, double horizon) {
    return FeedbackPolicy::affine(n, knots, horizon);
  };
  m.defaults.grid = {8.0, 256};
  m.defaults.particles = 2000;
  m.defaults.scenarios = 8;
  m.defaults.idio_dim = n;

  LqClosedForm cf;
  cf.a = (std::sqrt(8.0 * kappa + beta * beta) - beta) / 4.0;
  cf.b = sigma * sigma * n * cf.a / beta;
  m.lq = cf;
  return m;
}

ModelBundle make_kuramoto(double kappa, double sigma, double beta) {
  require_positive(kappa, "kappa");
  require_positive(sigma, "sigma");
  require_positive(beta, "beta");

  ModelBundle m;
  m.name = "kuramoto";
  m.beta = beta;
  m.sigma = sigma;
  m.torus = true;

  m.dynamics.state_dim = 1;
  m.dynamics.control_dim = 1;
  m.dynamics.idio_noise_dim = 1;
  m.dynamics.drift = [](double, PathView, const Vec& a, const LawView&) { return a; };
  m.dynamics.sigma_const = sigma * Mat::Identity(1, 1);

  // Circular moments [E cos, E sin]; states live on R and wrap at read time.
  m.summary = [](double, const EmpiricalLaw& law) {
    Vec s = Vec::Zero(2);
    for (int i = 0; i < law.n_atoms(); ++i) {
      double x = law.current_state(i)(0);
      s(0) += law.weight(i) * std::cos(x);
      s(1) += law.weight(i) * std::sin(x);
    }
    return s;
  };

  m.F_law = [kappa](double, const LawView& nu) {
    // double integral of sin^2((x-y)/2) = (1 - E cos^2 - E sin^2)/2
    return kappa * 0.5 * (1.0 - nu.summary.squaredNorm());
  };
  m.delta_F = [kappa](const LawView& nu, const Vec& x) {
    return kappa * (1.0 - std::cos(x(0)) * nu.summary(0) - std::sin(x(0)) * nu.summary(1));
  };
  m.grad_delta_F = [kappa](const LawView& nu, const Vec& x) {
    Vec g(1);
    g(0) = kappa * (std::sin(x(0)) * nu.summary(0) - std::cos(x(0)) * nu.summary(1));
    return g;
  };
  m.lap_delta_F = [kappa](const LawView& nu, const Vec& x) {
    return kappa * (std::cos(x(0)) * nu.summary(0) + std::sin(x(0)) * nu.summary(1));
  };

  m.cost.summary = m.summary;
  m.cost.F0 = [](double, PathView, const Vec& a, const LawView&) { return 0.5 * a.squaredNorm(); };
  m.cost.F_law = m.F_law;
  auto F_law = m.F_law;
  auto F0 = m.cost.F0;
  m.cost.F = [F0, F_law](double t, PathView x, const Vec& a, const LawView& nu) {
    return F0(t, x, a, nu) + F_law(t, nu);
  };
  auto delta_F = m.delta_F;
  m.cost.delta_F = [delta_F](double, PathView, const Vec&, const LawView& nu, PathView x_probe,
                             const Vec&) { return delta_F(nu, current(x_probe)); };
  m.cost.delta_F_base_free = true;
  m.cost.grad_a_F = [](double, PathView, const Vec& a, const LawView&) { return a; };
  m.cost.growth_const = std::max(1.0, 2.0 * kappa);

  m.policy_builder = [](int knots, double horizon) {
    return FeedbackPolicy::torus_fourier(4, knots, horizon);
  };
  m.defaults.grid = {6.0, 192};
  m.defaults.particles = 1500;
  m.defaults.scenarios = 4;
  m.defaults.idio_dim = 1;
  return m;
}

ModelBundle make_cucker_smale(double kappa, double rho, double sigma, double beta, int n) {
  require_positive(kappa, "kappa");
  require_positive(sigma, "sigma");
  require_positive(beta, "beta");
  if (rho < 0.0) throw ConfigError("cucker-smale: rho must be nonnegative");
  if (n < 1) throw ConfigError("cucker-smale: dimension must be >= 1");

  ModelBundle m;
  m.name = "cucker-smale";
  m.beta = beta;
  m.sigma = sigma;

  const int sd = 2 * n;
  m.dynamics.state_dim = sd;
  m.dynamics.control_dim = n;
  m.dynamics.idio_noise_dim = n;
  m.dynamics.drift = [n](double, PathView path, const Vec& a, const LawView&) {
    Vec b(2 * n);
    b.head(n) = current(path).tail(n);  // dx = v dt
    b.tail(n) = a;                      // dv = a dt + sigma dW
    return b;
  };
  Mat s0 = Mat::Zero(sd, n);
  s0.bottomRows(n) = sigma * Mat::Identity(n, n);
  m.dynamics.sigma_const = s0;

  const bool lq_case = (rho == 0.0);
  auto comm_weight = [rho](const Vec& dx) { return std::pow(1.0 + dx.squaredNorm(), rho); };

  if (lq_case) {
    // Velocity moments suffice: summary [mean_v; E|v|^2].
    m.summary = [n](double, const EmpiricalLaw& law) {
      Vec s = Vec::Zero(n + 1);
      for (int i = 0; i < law.n_atoms(); ++i) {
        auto v = law.current_state(i).tail(n);
        s.head(n) += law.weight(i) * v;
        s(n) += law.weight(i) * v.squaredNorm();
      }
      return s;
    };
    m.F_law = [kappa, n](double, const LawView& nu) {
      return 0.5 * kappa * variance_from_summary(nu.summary, n);
    };
    m.delta_F = [kappa, n](const LawView& nu, const Vec& xv) {
      auto v = xv.tail(n);
      return 0.5 * kappa *
             (v.squaredNorm() - 2.0 * v.dot(nu.summary.head(n)) + nu.summary(n));
    };
    m.grad_delta_F = [kappa, n](const LawView& nu, const Vec& xv) {
      Vec g = Vec::Zero(2 * n);
      g.tail(n) = kappa * (xv.tail(n) - nu.summary.head(n));
      return g;
    };
    m.lap_delta_F = [kappa, n](const LawView&, const Vec&) { return kappa * n; };
  } else {
    m.F_law = [kappa, n, comm_weight](double, const LawView& nu) {
      const EmpiricalLaw& law = *nu.law;
      double acc = 0.0;
      for (int i = 0; i < law.n_atoms(); ++i) {
        auto zi = law.current_state(i);
        for (int j = 0; j < law.n_atoms(); ++j) {
          auto zj = law.current_state(j);
          acc += law.weight(i) * law.weight(j) *
                 (zi.tail(n) - zj.tail(n)).squaredNorm() /
                 comm_weight(zi.head(n) - zj.head(n));
        }
      }
      return 0.25 * kappa * acc;
    };
    m.delta_F = [kappa, n, comm_weight](const LawView& nu, const Vec& xv) {
      const EmpiricalLaw& law = *nu.law;
      double acc = 0.0;
      for (int j = 0; j < law.n_atoms(); ++j) {
        auto zj = law.current_state(j);
        acc += law.weight(j) * (xv.tail(n) - zj.tail(n)).squaredNorm() /
               comm_weight(xv.head(n) - zj.head(n));
      }
      return 0.5 * kappa * acc;
    };
    m.grad_delta_F = [kappa, rho, n, comm_weight](const LawView& nu, const Vec& xv) {
      const EmpiricalLaw& law = *nu.law;
      Vec g = Vec::Zero(2 * n);
      for (int j = 0; j < law.n_atoms(); ++j) {
        auto zj = law.current_state(j);
        Vec dx = xv.head(n) - zj.head(n);
        Vec dv = xv.tail(n) - zj.tail(n);
        double w = comm_weight(dx);
        g.tail(n) += law.weight(j) * kappa * dv / w;
        g.head(n) += law.weight(j) * (-kappa * rho) * dv.squaredNorm() *
                     dx / (w * (1.0 + dx.squaredNorm()));
      }
      return g;
    };
    // Lap delta_F is not shipped for rho > 0; the F-tilde lift requires it
    // and rejects this bundle.
    m.lap_delta_F = nullptr;
  }

  m.cost.summary = m.summary;
  m.cost.F0 = [](double, PathView, const Vec& a, const LawView&) { return 0.5 * a.squaredNorm(); };
  m.cost.F_law = m.F_law;
  auto F_law = m.F_law;
  auto F0 = m.cost.F0;
  m.cost.F = [F0, F_law](double t, PathView x, const Vec& a, const LawView& nu) {
    return F0(t, x, a, nu) + F_law(t, nu);
  };
  auto delta_F = m.delta_F;
  m.cost.delta_F = [delta_F](double, PathView, const Vec&, const LawView& nu, PathView x_probe,
                             const Vec&) { return delta_F(nu, current(x_probe)); };
  m.cost.delta_F_base_free = true;
  m.cost.grad_a_F = [](double, PathView, const Vec& a, const LawView&) { return a; };
  m.cost.growth_const = std::max(1.0, kappa);

  m.policy_builder = [n](int knots, double horizon) {
    return FeedbackPolicy::flocking_affine(n, knots, horizon);
  };
  m.defaults.grid = {10.0, 320};
  m.defaults.particles = 2000;
  m.defaults.scenarios = 4;
  m.defaults.idio_dim = n;
  return m;
}

ModelBundle make_price_game(const PriceGameInputs& in, double beta) {
  require_positive(beta, "beta");
  require_positive(in.sigma, "sigma");
  if (!in.f0 || !in.phi || !in.Phi || !in.Psi)
    throw ConfigError("price game: f0, phi, Phi and Psi are required");

  // Reject non-potential demand: Psi must match grad Phi on probe points.
  {
    StreamRng rng = StreamRng::keyed({0x9d1ceull});
    const double fd_h = 1e-5;
    for (int probe = 0; probe < 8; ++probe) {
      double t = rng.uniform(0.0, 1.0);
      Vec z = rng.normal_vec(in.k);
      Vec psi = in.Psi(t, z);
      for (int j = 0; j < in.k; ++j) {
        Vec zp = z, zm = z;
        zp(j) += fd_h;
        zm(j) -= fd_h;
        double fd = (in.Phi(t, zp) - in.Phi(t, zm)) / (2.0 * fd_h);
        if (std::abs(fd - psi(j)) > 1e-4 * (1.0 + std::abs(psi(j))))
          throw ConfigError(
              "price game: Psi is not the gradient of Phi (non-potential demand)");
      }
    }
  }

  ModelBundle m;
  m.name = "price";
  m.beta = beta;
  m.sigma = in.sigma;

  const int n = in.n;
  const int k = in.k;
  m.dynamics.state_dim = n;
  m.dynamics.control_dim = n;
  m.dynamics.idio_noise_dim = n;
  m.dynamics.drift = [](double, PathView, const Vec& a, const LawView&) { return a; };
  m.dynamics.sigma_const = in.sigma * Mat::Identity(n, n);

  // Aggregate weighted demand z(t) = nu(phi(t,x) a).
  auto phi = in.phi;
  m.summary = [phi, k](double t, const EmpiricalLaw& law) {
    Vec z = Vec::Zero(k);
    for (int i = 0; i < law.n_atoms(); ++i)
      z += law.weight(i) * (phi(t, Vec(law.current_state(i))) * law.control(i));
    return z;
  };

  auto F1 = in.F1;
  auto Phi = in.Phi;
  m.F_law = [F1, Phi](double t, const LawView& nu) {
    double v = Phi(t, nu.summary);
    if (F1) v += F1(t, nu);
    return v;
  };
  auto delta_F1 = in.delta_F1;
  m.delta_F = [delta_F1](const LawView& nu, const Vec& x) {
    return delta_F1 ? delta_F1(nu, x) : 0.0;
  };

  m.cost.summary = m.summary;
  auto f0 = in.f0;
  m.cost.F0 = [f0](double t, PathView x, const Vec& a, const LawView&) {
    return f0(t, Vec(current(x)), a);
  };
  m.cost.F_law = m.F_law;
  auto F_law = m.F_law;
  auto F0c = m.cost.F0;
  m.cost.F = [F0c, F_law](double t, PathView x, const Vec& a, const LawView& nu) {
    return F0c(t, x, a, nu) + F_law(t, nu);
  };
  auto Psi = in.Psi;
  m.cost.delta_F = [delta_F1, Psi, phi](double t, PathView, const Vec&, const LawView& nu,
                                        PathView x_probe, const Vec& a_probe) {
    Vec x = current(x_probe);
    double v = Psi(t, nu.summary).dot(phi(t, x) * a_probe);
    if (delta_F1) v += delta_F1(nu, x);
    return v;
  };
  m.cost.delta_F_base_free = true;
  m.cost.grad_a_F = [](double, PathView, const Vec& a, const LawView&) { return a; };
  if (in.terminal) {
    auto terminal = in.terminal;
    m.cost.G = [terminal](PathView x, const LawView&) { return terminal(Vec(current(x))); };
    m.cost.G_law_free = true;
  }

  m.policy_builder = [n](int knots, double horizon) {
    return FeedbackPolicy::affine(n, knots, horizon);
  };
  m.defaults.grid = {4.0, 128};
  m.defaults.particles = 1000;
  m.defaults.scenarios = 4;
  m.defaults.idio_dim = n;
  return m;
}

ModelBundle make_crowd(double mrev, double kappa, double sigma, double beta, int n) {
  require_positive(kappa, "kappa");
  require_positive(sigma, "sigma");
  require_positive(beta, "beta");
  if (n < 1) throw ConfigError("crowd: dimension must be >= 1");

  ModelBundle m = make_lq(kappa, beta, sigma, n);
  m.name = "custom";
  m.lq.reset();  // the LQ closed form no longer applies

  m.dynamics.law_in_drift = true;
  m.dynamics.summary = m.summary;
  m.dynamics.drift = [mrev](double, PathView path, const Vec& a, const LawView& mu) {
    return (a + mrev * (mu.state_mean - current(path))).eval();
  };
  m.dynamics.drift_inverse = [mrev](double, PathView path, const Vec& y, const LawView& mu) {
    return (y - mrev * (mu.state_mean - current(path))).eval();
  };
  m.dynamics.delta_mu_phi = [mrev](double, PathView, const Vec&, const LawView&,
                                   PathView probe) {
    return (-mrev * current(probe)).eval();
  };
  return m;
}

LawCost make_tilde_F(const ModelBundle& f_bundle, double beta, double sigma) {
  require_positive(beta, "beta");
  require_positive(sigma, "sigma");
  if (!f_bundle.F_law || !f_bundle.grad_delta_F || !f_bundle.lap_delta_F)
    throw ConfigError("make_tilde_F: F, grad delta F and Lap delta F are all required");
  auto F = f_bundle.F_law;
  auto grad = f_bundle.grad_delta_F;
  auto lap = f_bundle.lap_delta_F;
  return [F, grad, lap, beta, sigma](double t, const LawView& nu) {
    const EmpiricalLaw& law = *nu.law;
    double g2 = 0.0, lp = 0.0;
    for (int i = 0; i < law.n_atoms(); ++i) {
      Vec x = law.current_state(i);
      g2 += law.weight(i) * grad(nu, x).squaredNorm();
      lp += law.weight(i) * lap(nu, x);
    }
    return beta * F(t, nu) + 0.5 * g2 - 0.5 * sigma * sigma * lp;
  };
}

double order_parameter(const EmpiricalLaw& law) {
  double c = 0.0, s = 0.0;
  for (int i = 0; i < law.n_atoms(); ++i) {
    double x = law.current_state(i)(0);
    c += law.weight(i) * std::cos(x);
    s += law.weight(i) * std::sin(x);
  }
  return std::sqrt(c * c + s * s);
}

const std::map<std::string, ModelFactory>& model_registry() {
  static const std::map<std::string, ModelFactory> registry = {
      {"lq",
       [](const ModelParams& p) {
         double kappa = read_param(p, "kappa", 1.0, {"kappa", "beta", "sigma", "dim"});
         double beta = read_param(p, "beta", 1.0, {"kappa", "beta", "sigma", "dim"});
         double sigma = read_param(p, "sigma", 1.0, {"kappa", "beta", "sigma", "dim"});
         int dim = static_cast<int>(read_param(p, "dim", 1.0, {"kappa", "beta", "sigma", "dim"}));
         return make_lq(kappa, beta, sigma, dim);
       }},
      {"kuramoto",
       [](const ModelParams& p) {
         double kappa = read_param(p, "kappa", 2.0, {"kappa", "beta", "sigma"});
         double beta = read_param(p, "beta", 1.0, {"kappa", "beta", "sigma"});
         double sigma = read_param(p, "sigma", 1.0, {"kappa", "beta", "sigma"});
         return make_kuramoto(kappa, sigma, beta);
       }},
      {"cucker-smale",
       [](const ModelParams& p) {
         const std::vector<std::string> keys = {"kappa", "rho", "beta", "sigma", "dim"};
         double kappa = read_param(p, "kappa", 1.0, keys);
         double rho = read_param(p, "rho", 0.0, keys);
         double beta = read_param(p, "beta", 1.0, keys);
         double sigma = read_param(p, "sigma", 0.2, keys);
         int dim = static_cast<int>(read_param(p, "dim", 1.0, keys));
         return make_cucker_smale(kappa, rho, sigma, beta, dim);
       }},
      {"price",
       [](const ModelParams& p) {
         const std::vector<std::string> keys = {"slope", "storage", "beta", "sigma", "dim"};
         double slope = read_param(p, "slope", 0.5, keys);
         double storage = read_param(p, "storage", 0.5, keys);
         double beta = read_param(p, "beta", 1.0, keys);
         double sigma = read_param(p, "sigma", 1.0, keys);
         int dim = static_cast<int>(read_param(p, "dim", 1.0, keys));
         PriceGameInputs in;
         in.n = dim;
         in.k = dim;
         in.sigma = sigma;
         in.f0 = [storage](double, const Vec& x, const Vec& a) {
           return 0.5 * a.squaredNorm() + 0.5 * storage * x.squaredNorm();
         };
         in.phi = [dim](double, const Vec&) { return Mat::Identity(dim, dim); };
         in.Phi = [slope](double, const Vec& z) { return 0.5 * slope * z.squaredNorm(); };
         in.Psi = [slope](double, const Vec& z) { return (slope * z).eval(); };
         return make_price_game(in, beta);
       }},
      {"custom",
       [](const ModelParams& p) {
         const std::vector<std::string> keys = {"mrev", "kappa", "beta", "sigma", "dim"};
         double mrev = read_param(p, "mrev", 0.5, keys);
         double kappa = read_param(p, "kappa", 1.0, keys);
         double beta = read_param(p, "beta", 1.0, keys);
         double sigma = read_param(p, "sigma", 1.0, keys);
         int dim = static_cast<int>(read_param(p, "dim", 1.0, keys));
         return make_crowd(mrev, kappa, sigma, beta, dim);
       }},
  };
  return registry;
}

ModelBundle make_model(const std::string& name, const ModelParams& params) {
  auto it = model_registry().find(name);
  if (it == model_registry().end())
    throw ConfigError("unknown model \"" + name + "\"");
  return it->second(params);
}

}  // namespace mfkit
