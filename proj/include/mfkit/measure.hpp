#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace mfkit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// One weighted atom: a state path on a grid prefix (column j = state at t_j,
/// rightmost column = current state) and a control value.
struct Atom {
  Mat path;      // state_dim x (prefix_len + 1)
  Vec control;   // control_dim (may be empty)
  double weight = 1.0;
};

/// Weighted atom set over (path prefix, control) pairs; the numerical
/// realization of a law in P2(D_n x U). Atoms are stored column-wise with
/// paths flattened time-major, so per-time-slice marginals are cheap blocks.
class EmpiricalLaw {
 public:
  EmpiricalLaw() = default;
  EmpiricalLaw(int state_dim, int control_dim, int prefix_len, int n_atoms);

  static EmpiricalLaw from_atoms(const std::vector<Atom>& atoms);
  /// Equal-weight law over current states (prefix 0) and controls.
  static EmpiricalLaw from_ensemble(const Mat& states, const Mat& controls);
  static EmpiricalLaw from_ensemble(const Mat& states);
  /// delta * nu0 + (1 - delta) * nu1 as a single atom set.
  static EmpiricalLaw mix(const EmpiricalLaw& nu0, double delta, const EmpiricalLaw& nu1);

  int n_atoms() const { return static_cast<int>(weights_.size()); }
  int state_dim() const { return state_dim_; }
  int control_dim() const { return control_dim_; }
  int prefix_len() const { return prefix_len_; }

  double weight(int i) const { return weights_(i); }
  const Vec& weights() const { return weights_; }

  /// State of atom i at grid index j (j <= prefix_len).
  auto state_at(int i, int j) const { return paths_.col(i).segment(j * state_dim_, state_dim_); }
  auto current_state(int i) const { return state_at(i, prefix_len_); }
  auto control(int i) const { return controls_.col(i); }

  /// state_dim x n_atoms block of current states.
  auto current_states() const {
    return paths_.block(prefix_len_ * state_dim_, 0, state_dim_, n_atoms());
  }
  const Mat& flattened_paths() const { return paths_; }
  const Mat& controls() const { return controls_; }

  Mat& mutable_paths() { return paths_; }
  Mat& mutable_controls() { return controls_; }
  Vec& mutable_weights() { return weights_; }

  Atom atom(int i) const;
  /// Grid-supremum of the Euclidean norm along the stored path of atom i.
  double path_sup_norm(int i) const;

  /// Weighted mean of current states.
  Vec state_mean() const;
  /// Weighted covariance trace of current states (total variance).
  double state_variance() const;

  /// Throws DomainError unless weights are nonnegative and sum to 1 within
  /// 1e-12 and dimensions are coherent.
  void validate() const;

 private:
  int state_dim_ = 0;
  int control_dim_ = 0;
  int prefix_len_ = 0;
  Mat paths_;     // (state_dim * (prefix_len+1)) x N
  Mat controls_;  // control_dim x N
  Vec weights_;   // N
};

/// Second moment s(nu) = sum_i w_i (sup-norm(path_i)^2 + |control_i|^2).
double second_moment(const EmpiricalLaw& nu);

/// Which finite-dimensional marginal wasserstein2 compares.
enum class W2Marginal {
  kState,         // current state in R^n
  kStateControl,  // (current state, control) in R^{n+u}
  kPath,          // flattened path prefix (+ control); prefixes must match
};

/// Exact quantile-coupling W2 between weighted 1-d atom sets.
double wasserstein2_1d(const Vec& x, const Vec& wx, const Vec& y, const Vec& wy);

/// Sliced W2 estimate: root-mean-square of exact 1-d distances over
/// `n_directions` random unit directions drawn from `seed`.
double sliced_wasserstein2(const Mat& x, const Vec& wx, const Mat& y, const Vec& wy,
                           int n_directions, std::uint64_t seed);

/// W2 between two laws on the chosen marginal: exact in one dimension,
/// sliced (deterministic under `seed`) otherwise.
double wasserstein2(const EmpiricalLaw& a, const EmpiricalLaw& b,
                    W2Marginal marginal = W2Marginal::kState, int n_directions = 64,
                    std::uint64_t seed = 0);

using MeasureFunctional = std::function<double(const EmpiricalLaw&)>;

struct LinearDerivativeEval {
  Atom probe;
  double value = 0.0;
  bool centered = false;
};

/// Raw mixture difference quotient [F((1-eps) nu + eps delta_probe) - F(nu)]/eps.
/// As eps -> 0 this converges to the centered representative
/// delta_nu F(nu)(probe) - integral of delta_nu F against nu.
LinearDerivativeEval linear_derivative_fd(const MeasureFunctional& F, const EmpiricalLaw& nu,
                                          const Atom& probe, double eps);

/// Difference-quotient field over `probes`, explicitly recentered so that its
/// nu-average (computed over nu's own atoms) is zero.
Vec linear_derivative_field(const MeasureFunctional& F, const EmpiricalLaw& nu,
                            const std::vector<Atom>& probes, double eps);

/// Kozachenko-Leonenko k-nearest-neighbour differential entropy of a point
/// cloud (columns = samples). Throws DegenerateInputError when fewer than
/// k+1 distinct points are available.
double entropy_estimate(const Mat& points, int k = 1);

/// Entropy of the law's current-state marginal; atoms are treated as samples
/// (weights must be uniform).
double entropy_estimate(const EmpiricalLaw& mu, int k = 1);

}  // namespace mfkit
