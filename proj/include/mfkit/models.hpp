#pragma once

#include <map>
#include <string>

#include "mfkit/solve.hpp"

namespace mfkit {

struct LqClosedForm {
  double a = 0.0;  // value function v(mu) = a Var(mu) + b
  double b = 0.0;
  double feedback_slope() const { return -2.0 * a; }
  double stationary_variance(double sigma) const { return sigma * sigma / (4.0 * a); }
};

/// A ready model: dynamics + costs with analytic derivatives, a recommended
/// policy family, desk-scale defaults, and the law functional's calculus
/// (used by the Langevin flow, the F-tilde lift, and derivative cross-checks).
struct ModelBundle {
  std::string name;
  ModelDynamics dynamics;
  CostSpec cost;
  std::function<FeedbackPolicy(int n_knots, double horizon)> policy_builder;
  PanelSpec defaults;
  double beta = 1.0;   // discount of the bundle's control problem
  double sigma = 1.0;  // diffusion strength (free-energy temperature)
  bool torus = false;

  // Interaction potential F(mu) and its analytic derivatives in the paper's
  // (uncentered) representative.
  LawCost F_law;                                                    // t ignored
  std::function<double(const LawView&, const Vec& x)> delta_F;      // delta_mu F(mu)(x)
  std::function<Vec(const LawView&, const Vec& x)> grad_delta_F;    // grad_x delta_mu F
  std::function<double(const LawView&, const Vec& x)> lap_delta_F;  // Lap_x delta_mu F
  SummaryFn summary;

  std::optional<LqClosedForm> lq;
};

/// Quadratic interaction F(mu) = kappa Var(mu), running control cost
/// 1/2|a|^2, dX = a dt + sigma dW. Closed form: a = (sqrt(8 kappa + beta^2)
/// - beta)/4, b = sigma^2 n a / beta; optimal drift -2a(x - mean).
ModelBundle make_lq(double kappa, double beta, double sigma, int n);

/// Torus synchronization: F(mu) = kappa * double integral of sin^2((x-y)/2).
ModelBundle make_kuramoto(double kappa, double sigma, double beta);

/// Flocking on position-velocity pairs: F(mu) = (kappa/4) * double integral
/// of |v - v~|^2 / (1 + |x - x~|^2)^rho. rho = 0 is the velocity LQ model.
ModelBundle make_cucker_smale(double kappa, double rho, double sigma, double beta, int n);

struct PriceGameInputs {
  std::function<double(double t, const Vec& x, const Vec& a)> f0;  // purchase/storage cost
  LawCost F1;                                                      // congestion potential
  std::function<double(const LawView&, const Vec& x)> delta_F1;    // its derivative (f1)
  std::function<Mat(double t, const Vec& x)> phi;                  // k x n weight
  std::function<double(double t, const Vec& z)> Phi;               // demand potential
  std::function<Vec(double t, const Vec& z)> Psi;                  // inverse demand, = grad Phi
  std::function<double(const Vec& x)> terminal;                    // optional g(X_T)
  double sigma = 1.0;
  int n = 1;
  int k = 1;
};

/// Trader game with price interaction through the control marginal:
/// MFC cost F = f0 + F1(mu) + Phi(t, nu(phi a)); the derived game's price
/// term is Psi(t, nu(phi a)) . phi(t,x) a. Psi must be the gradient of Phi
/// (validated on probes; non-potential demand is rejected).
ModelBundle make_price_game(const PriceGameInputs& in, double beta);

/// Law-dependent drift demo: b(t,x,a,mu) = a + mrev (mean(mu) - x), with the
/// exact left inverse phi(t,x,y,mu) = y - mrev (mean(mu) - x) and
/// delta_mu phi = -mrev * probe. Costs as in the LQ model.
ModelBundle make_crowd(double mrev, double kappa, double sigma, double beta, int n);

/// Lifted running cost F~(mu) = beta F(mu) + 1/2 mu(|grad delta F|^2)
/// - sigma^2/2 mu(Lap delta F). The MFC with running cost 1/2|a|^2 + F~ has
/// value F(mu_0) and optimal drift -grad delta F (the Langevin drift).
LawCost make_tilde_F(const ModelBundle& f_bundle, double beta, double sigma);

/// |integral of e^{i x_0} d mu| of the current-state marginal.
double order_parameter(const EmpiricalLaw& law);

using ModelParams = std::map<std::string, double>;
using ModelFactory = std::function<ModelBundle(const ModelParams&)>;

/// Name-keyed factories ("lq", "kuramoto", "cucker-smale", "price", "custom");
/// unknown parameter keys are configuration errors.
const std::map<std::string, ModelFactory>& model_registry();
ModelBundle make_model(const std::string& name, const ModelParams& params);

}  // namespace mfkit
