#include "mfkit/noise.hpp"

#include <algorithm>
#include <cmath>

#include "mfkit/errors.hpp"

namespace mfkit {

JumpMeasureSpec JumpMeasureSpec::none(int mark_dim) {
  JumpMeasureSpec s;
  s.intensity = 0.0;
  s.mark_dim = mark_dim;
  s.mark_mean = Eigen::VectorXd::Zero(mark_dim);
  return s;
}

JumpMeasureSpec JumpMeasureSpec::point_mass(double intensity, const Eigen::VectorXd& mark) {
  if (mark.norm() == 0.0) throw ConfigError("jump marks must avoid the zero vector");
  JumpMeasureSpec s;
  s.intensity = intensity;
  s.mark_dim = static_cast<int>(mark.size());
  s.mark_mean = mark;
  s.mark_second_moment = mark.squaredNorm();
  s.sample_mark = [mark](StreamRng&) { return mark; };
  return s;
}

JumpMeasureSpec JumpMeasureSpec::gaussian(double intensity, const Eigen::VectorXd& mean,
                                          const Eigen::VectorXd& sd) {
  if (mean.size() != sd.size()) throw ConfigError("gaussian marks: mean/sd size mismatch");
  JumpMeasureSpec s;
  s.intensity = intensity;
  s.mark_dim = static_cast<int>(mean.size());
  s.mark_mean = mean;
  s.mark_second_moment = mean.squaredNorm() + sd.squaredNorm();
  s.sample_mark = [mean, sd](StreamRng& rng) {
    Eigen::VectorXd z = rng.normal_vec(static_cast<int>(mean.size()));
    return (mean + sd.cwiseProduct(z)).eval();
  };
  return s;
}

std::vector<JumpEvent> sample_jump_events(const JumpMeasureSpec& spec, double horizon,
                                          StreamRng& rng) {
  if (spec.intensity < 0.0) throw ConfigError("jump intensity must be nonnegative");
  if (!std::isfinite(spec.intensity)) throw ConfigError("jump intensity must be finite");
  std::vector<JumpEvent> events;
  if (spec.intensity == 0.0 || horizon <= 0.0) return events;
  int count = rng.poisson(spec.intensity * horizon);
  if (count == 0) return events;
  events.resize(count);
  for (int j = 0; j < count; ++j) events[j].time = rng.uniform(0.0, horizon);
  std::sort(events.begin(), events.end(),
            [](const JumpEvent& a, const JumpEvent& b) { return a.time < b.time; });
  for (int j = 0; j < count; ++j) events[j].mark = spec.sample_mark(rng);
  return events;
}

NoisePanel::NoisePanel(TimeGrid grid, int n_scenarios, int n_particles, int idio_dim,
                       int common_dim, JumpMeasureSpec idio_jumps, JumpMeasureSpec common_jumps,
                       std::uint64_t seed)
    : grid_(grid),
      n_scenarios_(n_scenarios),
      n_particles_(n_particles),
      idio_dim_(idio_dim),
      common_dim_(common_dim),
      idio_spec_(std::move(idio_jumps)),
      common_spec_(std::move(common_jumps)),
      common_seed_(seed),
      idio_seed_(seed) {
  if (!grid_.valid()) throw ConfigError("noise panel: grid must have horizon > 0 and steps >= 1");
  if (n_scenarios_ < 1 || n_particles_ < 1) throw ConfigError("noise panel: counts must be >= 1");
  if (idio_dim_ < 0 || common_dim_ < 0) throw ConfigError("noise panel: negative noise dimension");
  if ((idio_spec_.active() && !idio_spec_.sample_mark) ||
      (common_spec_.active() && !common_spec_.sample_mark))
    throw ConfigError("noise panel: active jump channel needs a mark sampler");
}

void NoisePanel::idio_dw(int s, int i, int k, Eigen::Ref<Eigen::VectorXd> out) const {
  if (base_) {
    Eigen::VectorXd fine(idio_dim_);
    out.setZero();
    for (int j = 0; j < factor_; ++j) {
      base_->idio_dw(s, i, k * factor_ + j, fine);
      out += fine;
    }
    return;
  }
  StreamRng rng = StreamRng::keyed({idio_seed_, kIdioBrownian, static_cast<std::uint64_t>(s),
                                    static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(k)});
  rng.normal_fill(out);
  out *= std::sqrt(grid_.dt());
}

void NoisePanel::common_dw(int s, int k, Eigen::Ref<Eigen::VectorXd> out) const {
  if (base_) {
    Eigen::VectorXd fine(common_dim_);
    out.setZero();
    for (int j = 0; j < factor_; ++j) {
      base_->common_dw(s, k * factor_ + j, fine);
      out += fine;
    }
    return;
  }
  StreamRng rng = StreamRng::keyed(
      {common_seed_, kCommonBrownian, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(k)});
  rng.normal_fill(out);
  out *= std::sqrt(grid_.dt());
}

namespace {

std::vector<JumpEvent> bucket_events(const JumpMeasureSpec& spec, double t0, double dt,
                                     StreamRng rng) {
  std::vector<JumpEvent> events = sample_jump_events(spec, dt, rng);
  for (JumpEvent& e : events) e.time += t0;
  return events;
}

}  // namespace

std::vector<JumpEvent> NoisePanel::idio_jumps_in(int s, int i, int k) const {
  if (base_) {
    std::vector<JumpEvent> all;
    for (int j = 0; j < factor_; ++j) {
      auto sub = base_->idio_jumps_in(s, i, k * factor_ + j);
      all.insert(all.end(), sub.begin(), sub.end());
    }
    return all;
  }
  if (!idio_spec_.active()) return {};
  StreamRng rng = StreamRng::keyed({idio_seed_, kIdioJump, static_cast<std::uint64_t>(s),
                                    static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(k)});
  return bucket_events(idio_spec_, grid_.t(k), grid_.dt(), rng);
}

std::vector<JumpEvent> NoisePanel::common_jumps_in(int s, int k) const {
  if (base_) {
    std::vector<JumpEvent> all;
    for (int j = 0; j < factor_; ++j) {
      auto sub = base_->common_jumps_in(s, k * factor_ + j);
      all.insert(all.end(), sub.begin(), sub.end());
    }
    return all;
  }
  if (!common_spec_.active()) return {};
  StreamRng rng = StreamRng::keyed(
      {common_seed_, kCommonJump, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(k)});
  return bucket_events(common_spec_, grid_.t(k), grid_.dt(), rng);
}

NoisePanel NoisePanel::coarsened(int factor) const {
  if (factor < 1 || grid_.n_steps % factor != 0)
    throw ConfigError("coarsened: factor must divide the step count");
  NoisePanel coarse = *this;
  coarse.grid_.n_steps = grid_.n_steps / factor;
  coarse.base_ = std::make_shared<NoisePanel>(*this);
  coarse.factor_ = factor;
  return coarse;
}

NoisePanel NoisePanel::with_idiosyncratic_seed(std::uint64_t idio_seed) const {
  if (base_) throw ConfigError("with_idiosyncratic_seed: reseed the fine panel, then coarsen");
  NoisePanel p = *this;
  p.idio_seed_ = idio_seed;
  return p;
}

StreamRng NoisePanel::init_stream(int s, int i) const {
  const NoisePanel* root = this;
  while (root->base_) root = root->base_.get();
  return StreamRng::keyed({root->idio_seed_, kInit, static_cast<std::uint64_t>(s),
                           static_cast<std::uint64_t>(i)});
}

NoisePanel sample_noise_panel(const TimeGrid& grid, int n_scenarios, int n_particles,
                              const JumpMeasureSpec& idio_jumps,
                              const JumpMeasureSpec& common_jumps, int idio_dim, int common_dim,
                              std::uint64_t seed) {
  return NoisePanel(grid, n_scenarios, n_particles, idio_dim, common_dim, idio_jumps,
                    common_jumps, seed);
}

}  // namespace mfkit
