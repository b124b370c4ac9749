#include "mfkit/policy.hpp"

#include <cmath>

#include "mfkit/errors.hpp"

namespace mfkit {

FeedbackPolicy::FeedbackPolicy(std::string family, FeatureFn features, int feature_dim,
                               int state_dim, int control_dim, int n_knots, double horizon)
    : family_(std::move(family)),
      features_(std::move(features)),
      feature_dim_(feature_dim),
      state_dim_(state_dim),
      control_dim_(control_dim),
      n_knots_(n_knots),
      horizon_(horizon) {
  if (n_knots_ < 1) throw ConfigError("policy: need at least one time knot");
  if (horizon_ <= 0.0) throw ConfigError("policy: horizon must be positive");
  theta_ = Vec::Zero(n_params());
}

FeedbackPolicy FeedbackPolicy::affine(int state_dim, int n_knots, double horizon) {
  auto features = [state_dim](double, const Vec& x, const Vec& mean) {
    Vec f(1 + state_dim);
    f(0) = 1.0;
    f.tail(state_dim) = x - mean;
    return f;
  };
  return FeedbackPolicy("affine", features, 1 + state_dim, state_dim, state_dim, n_knots,
                        horizon);
}

FeedbackPolicy FeedbackPolicy::torus_fourier(int max_harmonic, int n_knots, double horizon) {
  if (max_harmonic < 1) throw ConfigError("torus policy: need at least one harmonic");
  auto features = [max_harmonic](double, const Vec& x, const Vec&) {
    Vec f(1 + 2 * max_harmonic);
    f(0) = 1.0;
    for (int k = 1; k <= max_harmonic; ++k) {
      f(2 * k - 1) = std::sin(k * x(0));
      f(2 * k) = std::cos(k * x(0));
    }
    return f;
  };
  return FeedbackPolicy("torus-fourier", features, 1 + 2 * max_harmonic, 1, 1, n_knots, horizon);
}

FeedbackPolicy FeedbackPolicy::flocking_affine(int space_dim, int n_knots, double horizon) {
  const int n = space_dim;
  auto features = [n](double, const Vec& xv, const Vec& mean) {
    Vec f(1 + 2 * n);
    f(0) = 1.0;
    f.segment(1, 2 * n) = xv - mean;
    return f;
  };
  return FeedbackPolicy("flocking-affine", features, 1 + 2 * n, 2 * n, n, n_knots, horizon);
}

FeedbackPolicy FeedbackPolicy::custom(std::string name, FeatureFn features, int feature_dim,
                                      int state_dim, int control_dim, int n_knots,
                                      double horizon) {
  return FeedbackPolicy(std::move(name), std::move(features), feature_dim, state_dim,
                        control_dim, n_knots, horizon);
}

void FeedbackPolicy::set_params(const Vec& theta) {
  if (theta.size() != n_params()) throw ConfigError("policy: parameter size mismatch");
  if (!theta.allFinite()) throw ConfigError("policy: parameters must be finite");
  theta_ = theta;
}

FeedbackPolicy FeedbackPolicy::with_params(const Vec& theta) const {
  FeedbackPolicy p = *this;
  p.set_params(theta);
  return p;
}

void FeedbackPolicy::set_box(const Vec& lo, const Vec& hi) {
  if (lo.size() != control_dim_ || hi.size() != control_dim_)
    throw ConfigError("policy: box bounds must match the control dimension");
  box_lo_ = lo;
  box_hi_ = hi;
}

int FeedbackPolicy::knot_of(double t) const {
  int k = static_cast<int>(t / horizon_ * n_knots_);
  return std::min(std::max(k, 0), n_knots_ - 1);
}

Eigen::Map<const FeedbackPolicy::Mat> FeedbackPolicy::weights(int knot) const {
  return Eigen::Map<const Mat>(theta_.data() + knot * control_dim_ * feature_dim_, control_dim_,
                               feature_dim_);
}

FeedbackPolicy::Vec FeedbackPolicy::control(double t, const Vec& state, const Vec& law_mean) const {
  Vec f = features_(t, state, law_mean);
  Vec u = weights(knot_of(t)) * f;
  if (box_lo_.size() > 0) u = u.cwiseMax(box_lo_).cwiseMin(box_hi_);
  return u;
}

}  // namespace mfkit
