#include "mfkit/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfkit/errors.hpp"
#include "mfkit/rng.hpp"

namespace mfkit {

EmpiricalLaw::EmpiricalLaw(int state_dim, int control_dim, int prefix_len, int n_atoms)
    : state_dim_(state_dim), control_dim_(control_dim), prefix_len_(prefix_len) {
  paths_ = Mat::Zero(state_dim * (prefix_len + 1), n_atoms);
  controls_ = Mat::Zero(control_dim, n_atoms);
  weights_ = Vec::Constant(n_atoms, n_atoms > 0 ? 1.0 / n_atoms : 0.0);
}

EmpiricalLaw EmpiricalLaw::from_atoms(const std::vector<Atom>& atoms) {
  if (atoms.empty()) throw DomainError("empirical law: empty atom list");
  const int n = static_cast<int>(atoms[0].path.rows());
  const int p = static_cast<int>(atoms[0].path.cols()) - 1;
  const int u = static_cast<int>(atoms[0].control.size());
  EmpiricalLaw law(n, u, p, static_cast<int>(atoms.size()));
  for (int i = 0; i < law.n_atoms(); ++i) {
    const Atom& a = atoms[i];
    if (a.path.rows() != n || a.path.cols() != p + 1 || a.control.size() != u)
      throw DomainError("empirical law: atoms must share dimensions and prefix length");
    law.paths_.col(i) = Eigen::Map<const Vec>(a.path.data(), n * (p + 1));
    if (u > 0) law.controls_.col(i) = a.control;
    law.weights_(i) = a.weight;
  }
  return law;
}

EmpiricalLaw EmpiricalLaw::from_ensemble(const Mat& states, const Mat& controls) {
  if (states.cols() != controls.cols())
    throw DomainError("empirical law: state/control atom count mismatch");
  EmpiricalLaw law(static_cast<int>(states.rows()), static_cast<int>(controls.rows()), 0,
                   static_cast<int>(states.cols()));
  law.paths_ = states;
  law.controls_ = controls;
  return law;
}

EmpiricalLaw EmpiricalLaw::from_ensemble(const Mat& states) {
  return from_ensemble(states, Mat::Zero(0, states.cols()));
}

EmpiricalLaw EmpiricalLaw::mix(const EmpiricalLaw& nu0, double delta, const EmpiricalLaw& nu1) {
  if (nu0.state_dim_ != nu1.state_dim_ || nu0.control_dim_ != nu1.control_dim_ ||
      nu0.prefix_len_ != nu1.prefix_len_)
    throw DomainError("mix: laws must share dimensions and prefix length");
  EmpiricalLaw out(nu0.state_dim_, nu0.control_dim_, nu0.prefix_len_,
                   nu0.n_atoms() + nu1.n_atoms());
  out.paths_ << nu0.paths_, nu1.paths_;
  if (nu0.control_dim_ > 0) out.controls_ << nu0.controls_, nu1.controls_;
  out.weights_ << delta * nu0.weights_, (1.0 - delta) * nu1.weights_;
  return out;
}

Atom EmpiricalLaw::atom(int i) const {
  Atom a;
  a.path = Eigen::Map<const Mat>(paths_.col(i).data(), state_dim_, prefix_len_ + 1);
  a.control = controls_.col(i);
  a.weight = weights_(i);
  return a;
}

double EmpiricalLaw::path_sup_norm(int i) const {
  double sup = 0.0;
  for (int j = 0; j <= prefix_len_; ++j) sup = std::max(sup, state_at(i, j).norm());
  return sup;
}

Vec EmpiricalLaw::state_mean() const { return current_states() * weights_; }

double EmpiricalLaw::state_variance() const {
  Vec m = state_mean();
  double v = 0.0;
  for (int i = 0; i < n_atoms(); ++i) v += weights_(i) * (current_state(i) - m).squaredNorm();
  return v;
}

void EmpiricalLaw::validate() const {
  if (n_atoms() == 0) throw DomainError("empirical law: empty atom list");
  if (weights_.minCoeff() < 0.0) throw DomainError("empirical law: negative weight");
  if (std::abs(weights_.sum() - 1.0) > 1e-12)
    throw DomainError("empirical law: weights must sum to 1 within 1e-12");
  if (paths_.rows() != state_dim_ * (prefix_len_ + 1))
    throw DomainError("empirical law: path storage inconsistent with prefix length");
}

double second_moment(const EmpiricalLaw& nu) {
  if (nu.n_atoms() == 0) throw DomainError("second_moment: empty atom list");
  double s = 0.0;
  for (int i = 0; i < nu.n_atoms(); ++i) {
    double p = nu.path_sup_norm(i);
    s += nu.weight(i) * (p * p + nu.control(i).squaredNorm());
  }
  return s;
}

double wasserstein2_1d(const Vec& x, const Vec& wx, const Vec& y, const Vec& wy) {
  const int nx = static_cast<int>(x.size());
  const int ny = static_cast<int>(y.size());
  if (nx == 0 || ny == 0) throw DomainError("wasserstein2_1d: empty atom set");
  std::vector<int> ix(nx), iy(ny);
  std::iota(ix.begin(), ix.end(), 0);
  std::iota(iy.begin(), iy.end(), 0);
  std::sort(ix.begin(), ix.end(), [&](int a, int b) { return x(a) < x(b); });
  std::sort(iy.begin(), iy.end(), [&](int a, int b) { return y(a) < y(b); });

  // Walk the two quantile functions and pair off overlapping mass.
  double cost = 0.0;
  int a = 0, b = 0;
  double ra = wx(ix[0]), rb = wy(iy[0]);
  while (a < nx && b < ny) {
    double m = std::min(ra, rb);
    double d = x(ix[a]) - y(iy[b]);
    cost += m * d * d;
    ra -= m;
    rb -= m;
    if (ra <= 1e-300 && ++a < nx) ra = wx(ix[a]);
    if (rb <= 1e-300 && ++b < ny) rb = wy(iy[b]);
  }
  return std::sqrt(std::max(cost, 0.0));
}

double sliced_wasserstein2(const Mat& x, const Vec& wx, const Mat& y, const Vec& wy,
                           int n_directions, std::uint64_t seed) {
  if (x.rows() != y.rows()) throw DomainError("sliced_wasserstein2: dimension mismatch");
  if (n_directions < 1) throw DomainError("sliced_wasserstein2: need at least one direction");
  const int d = static_cast<int>(x.rows());
  StreamRng rng = StreamRng::keyed({seed, 0x5afed1ull});
  double acc = 0.0;
  for (int j = 0; j < n_directions; ++j) {
    Vec dir = rng.normal_vec(d);
    double norm = dir.norm();
    if (norm == 0.0) {
      dir.setZero();
      dir(0) = 1.0;
    } else {
      dir /= norm;
    }
    double w = wasserstein2_1d(x.transpose() * dir, wx, y.transpose() * dir, wy);
    acc += w * w;
  }
  return std::sqrt(acc / n_directions);
}

namespace {

Mat marginal_points(const EmpiricalLaw& nu, W2Marginal marginal) {
  switch (marginal) {
    case W2Marginal::kState:
      return nu.current_states();
    case W2Marginal::kStateControl: {
      Mat pts(nu.state_dim() + nu.control_dim(), nu.n_atoms());
      pts.topRows(nu.state_dim()) = nu.current_states();
      if (nu.control_dim() > 0) pts.bottomRows(nu.control_dim()) = nu.controls();
      return pts;
    }
    case W2Marginal::kPath: {
      Mat pts(nu.flattened_paths().rows() + nu.control_dim(), nu.n_atoms());
      pts.topRows(nu.flattened_paths().rows()) = nu.flattened_paths();
      if (nu.control_dim() > 0) pts.bottomRows(nu.control_dim()) = nu.controls();
      return pts;
    }
  }
  throw DomainError("wasserstein2: unknown marginal");
}

}  // namespace

double wasserstein2(const EmpiricalLaw& a, const EmpiricalLaw& b, W2Marginal marginal,
                    int n_directions, std::uint64_t seed) {
  if (a.state_dim() != b.state_dim() || a.control_dim() != b.control_dim())
    throw DomainError("wasserstein2: dimension mismatch");
  if (marginal == W2Marginal::kPath && a.prefix_len() != b.prefix_len())
    throw DomainError("wasserstein2: path marginal needs equal prefix lengths");
  Mat pa = marginal_points(a, marginal);
  Mat pb = marginal_points(b, marginal);
  if (pa.rows() == 1)
    return wasserstein2_1d(pa.transpose(), a.weights(), pb.transpose(), b.weights());
  return sliced_wasserstein2(pa, a.weights(), pb, b.weights(), n_directions, seed);
}

LinearDerivativeEval linear_derivative_fd(const MeasureFunctional& F, const EmpiricalLaw& nu,
                                          const Atom& probe, double eps) {
  if (!(eps > 0.0 && eps <= 0.5)) throw DomainError("linear_derivative_fd: eps must be in (0, 0.5]");
  EmpiricalLaw spike = EmpiricalLaw::from_atoms({Atom{probe.path, probe.control, 1.0}});
  EmpiricalLaw mixed = EmpiricalLaw::mix(spike, eps, nu);
  LinearDerivativeEval out;
  out.probe = probe;
  double f_mixed = F(mixed);
  double f_base = F(nu);
  if (!std::isfinite(f_mixed) || !std::isfinite(f_base))
    throw EvaluationError("linear_derivative_fd: functional returned a non-finite value");
  out.value = (f_mixed - f_base) / eps;
  return out;
}

Vec linear_derivative_field(const MeasureFunctional& F, const EmpiricalLaw& nu,
                            const std::vector<Atom>& probes, double eps) {
  Vec values(probes.size());
  for (std::size_t i = 0; i < probes.size(); ++i)
    values(static_cast<int>(i)) = linear_derivative_fd(F, nu, probes[i], eps).value;
  double mean = 0.0;
  for (int i = 0; i < nu.n_atoms(); ++i)
    mean += nu.weight(i) * linear_derivative_fd(F, nu, nu.atom(i), eps).value;
  return values.array() - mean;
}

namespace {

// Digamma via upward recurrence onto the asymptotic series.
double digamma(double x) {
  double r = 0.0;
  while (x < 6.0) {
    r -= 1.0 / x;
    x += 1.0;
  }
  double f = 1.0 / (x * x);
  return r + std::log(x) - 0.5 / x -
         f * (1.0 / 12.0 - f * (1.0 / 120.0 - f * (1.0 / 252.0 - f / 240.0)));
}

double unit_ball_log_volume(int d) {
  return 0.5 * d * std::log(M_PI) - std::lgamma(0.5 * d + 1.0);
}

}  // namespace

double entropy_estimate(const Mat& points, int k) {
  const int n = static_cast<int>(points.cols());
  const int d = static_cast<int>(points.rows());
  if (k < 1) throw DomainError("entropy_estimate: neighbour order must be >= 1");
  if (n < k + 1) throw DegenerateInputError("entropy_estimate: need at least k+1 points");

  double log_dist_sum = 0.0;
  std::vector<double> dist(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) dist[j] = (points.col(j) - points.col(i)).norm();
    dist[i] = std::numeric_limits<double>::infinity();
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    double eps_i = dist[k - 1];
    if (eps_i <= 0.0)
      throw DegenerateInputError("entropy_estimate: duplicate points defeat the estimator");
    log_dist_sum += std::log(eps_i);
  }
  return digamma(n) - digamma(k) + unit_ball_log_volume(d) +
         static_cast<double>(d) / n * log_dist_sum;
}

double entropy_estimate(const EmpiricalLaw& mu, int k) {
  const int n = mu.n_atoms();
  if (n == 0) throw DomainError("entropy_estimate: empty atom list");
  double w0 = mu.weight(0);
  for (int i = 0; i < n; ++i)
    if (std::abs(mu.weight(i) - w0) > 1e-9 * std::max(1.0, std::abs(w0)))
      throw DomainError("entropy_estimate: atoms must carry uniform weights");
  return entropy_estimate(Mat(mu.current_states()), k);
}

}  // namespace mfkit
