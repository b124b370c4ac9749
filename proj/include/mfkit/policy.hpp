#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

namespace mfkit {

/// Parameterized feedback map (t, state, law summary) -> U. Controls are
/// linear in a family-specific feature vector, with a piecewise-constant
/// time basis on n_knots intervals and an optional box projection onto U.
class FeedbackPolicy {
 public:
  using Vec = Eigen::VectorXd;
  using Mat = Eigen::MatrixXd;
  using FeatureFn = std::function<Vec(double t, const Vec& state, const Vec& law_mean)>;

  /// Features (1, x - mean); control dimension equals the state dimension.
  static FeedbackPolicy affine(int state_dim, int n_knots, double horizon);
  /// Scalar control on the torus with features (1, sin kx, cos kx), k <= max_harmonic.
  static FeedbackPolicy torus_fourier(int max_harmonic, int n_knots, double horizon);
  /// Position-velocity states (x, v) in R^{2n}; features (1, x - mean_x, v - mean_v),
  /// control in R^n.
  static FeedbackPolicy flocking_affine(int space_dim, int n_knots, double horizon);
  static FeedbackPolicy custom(std::string name, FeatureFn features, int feature_dim,
                               int state_dim, int control_dim, int n_knots, double horizon);

  Vec control(double t, const Vec& state, const Vec& law_mean) const;

  int n_params() const { return n_knots_ * control_dim_ * feature_dim_; }
  const Vec& params() const { return theta_; }
  void set_params(const Vec& theta);
  FeedbackPolicy with_params(const Vec& theta) const;

  /// Clamp controls into the box [lo, hi] componentwise.
  void set_box(const Vec& lo, const Vec& hi);

  int state_dim() const { return state_dim_; }
  int control_dim() const { return control_dim_; }
  int feature_dim() const { return feature_dim_; }
  int n_knots() const { return n_knots_; }
  double horizon() const { return horizon_; }
  const std::string& family() const { return family_; }

  int knot_of(double t) const;
  /// Weight matrix (control_dim x feature_dim) of one time knot.
  Eigen::Map<const Mat> weights(int knot) const;

 private:
  FeedbackPolicy(std::string family, FeatureFn features, int feature_dim, int state_dim,
                 int control_dim, int n_knots, double horizon);

  std::string family_;
  FeatureFn features_;
  int feature_dim_;
  int state_dim_;
  int control_dim_;
  int n_knots_;
  double horizon_;
  Vec theta_;
  Vec box_lo_, box_hi_;
};

}  // namespace mfkit
