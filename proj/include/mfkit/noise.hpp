#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "mfkit/rng.hpp"

namespace mfkit {

/// Uniform grid t_k = k*dt covering [0, horizon] exactly.
struct TimeGrid {
  double horizon = 1.0;
  int n_steps = 1;

  double dt() const { return horizon / n_steps; }
  double t(int k) const { return k * dt(); }
  bool valid() const { return horizon > 0.0 && n_steps >= 1; }
};

struct JumpEvent {
  double time;
  Eigen::VectorXd mark;
};

/// Finite-activity jump channel: a rate plus a mark distribution on
/// R^k \ {0}. mark_mean and mark_second_moment are carried for compensator
/// construction and statistical tests.
struct JumpMeasureSpec {
  double intensity = 0.0;  // events per unit time, finite
  int mark_dim = 1;
  std::function<Eigen::VectorXd(StreamRng&)> sample_mark;
  Eigen::VectorXd mark_mean;
  double mark_second_moment = 0.0;

  bool active() const { return intensity > 0.0; }

  static JumpMeasureSpec none(int mark_dim = 1);
  static JumpMeasureSpec point_mass(double intensity, const Eigen::VectorXd& mark);
  /// Marks ~ N(mean, diag(sd)^2); the zero vector has probability zero.
  static JumpMeasureSpec gaussian(double intensity, const Eigen::VectorXd& mean,
                                  const Eigen::VectorXd& sd);
};

/// Event list over [0, horizon]: count ~ Poisson(intensity * horizon), times
/// i.i.d. uniform (order-statistics representation), sorted; marks i.i.d.
std::vector<JumpEvent> sample_jump_events(const JumpMeasureSpec& spec, double horizon,
                                          StreamRng& rng);

/// The probability basis realized on a grid: Brownian increments and jump
/// events for the idiosyncratic and common channels of every
/// (scenario, particle, step) cell. Cells are generated on demand from
/// counter-based streams keyed by (seed, scenario, particle, step, channel),
/// so the panel is immutable, thread-safe, and bit-identical under
/// regeneration regardless of evaluation order.
class NoisePanel {
 public:
  NoisePanel(TimeGrid grid, int n_scenarios, int n_particles, int idio_dim, int common_dim,
             JumpMeasureSpec idio_jumps, JumpMeasureSpec common_jumps, std::uint64_t seed);

  const TimeGrid& grid() const { return grid_; }
  int scenarios() const { return n_scenarios_; }
  int particles() const { return n_particles_; }
  int idio_dim() const { return idio_dim_; }
  int common_dim() const { return common_dim_; }
  const JumpMeasureSpec& idio_spec() const { return idio_spec_; }
  const JumpMeasureSpec& common_spec() const { return common_spec_; }
  std::uint64_t seed() const { return common_seed_; }
  std::uint64_t idio_seed() const { return idio_seed_; }

  /// Idiosyncratic Brownian increment over (t_k, t_{k+1}] for (s, i).
  void idio_dw(int s, int i, int k, Eigen::Ref<Eigen::VectorXd> out) const;
  /// Common Brownian increment over (t_k, t_{k+1}] for scenario s.
  void common_dw(int s, int k, Eigen::Ref<Eigen::VectorXd> out) const;

  /// Jump events with time in (t_k, t_{k+1}], sorted by time.
  std::vector<JumpEvent> idio_jumps_in(int s, int i, int k) const;
  std::vector<JumpEvent> common_jumps_in(int s, int k) const;

  /// Aggregates this panel's driving noise onto a grid coarsened by `factor`:
  /// Brownian increments sum, jump events re-bucket by their exact times.
  /// The result represents the same noise paths, which is what strong-order
  /// mesh studies require.
  NoisePanel coarsened(int factor) const;

  /// Same common channel, fresh idiosyncratic channel (and fresh initial
  /// conditions, which are drawn from the idiosyncratic seed).
  NoisePanel with_idiosyncratic_seed(std::uint64_t idio_seed) const;

  /// Stream for the initial condition of particle (s, i).
  StreamRng init_stream(int s, int i) const;

 private:
  enum Channel : std::uint64_t { kIdioBrownian = 1, kIdioJump = 2, kCommonBrownian = 3, kCommonJump = 4, kInit = 5 };

  TimeGrid grid_;
  int n_scenarios_;
  int n_particles_;
  int idio_dim_;
  int common_dim_;
  JumpMeasureSpec idio_spec_;
  JumpMeasureSpec common_spec_;
  std::uint64_t common_seed_;
  std::uint64_t idio_seed_;

  std::shared_ptr<const NoisePanel> base_;  // set when this panel is a coarsening
  int factor_ = 1;
};

/// Panel construction with validation; counts must be >= 1 and the grid valid.
NoisePanel sample_noise_panel(const TimeGrid& grid, int n_scenarios, int n_particles,
                              const JumpMeasureSpec& idio_jumps,
                              const JumpMeasureSpec& common_jumps, int idio_dim, int common_dim,
                              std::uint64_t seed);

}  // namespace mfkit
