#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace mfkit {

/// SplitMix64 finalizer; bijective scramble of a 64-bit word.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Counter-based random stream. A stream is keyed by a tuple of integers
/// (seed, scenario, particle, step, channel, ...); draws advance a local
/// counter through the SplitMix64 sequence. Any keyed cell of a simulation
/// can therefore be regenerated independently of evaluation order, which is
/// what makes panel generation seed-stable under parallelism.
class StreamRng {
 public:
  explicit StreamRng(std::uint64_t key) : state_(key) {}

  static StreamRng keyed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t k = 0x8e31f9c1d279b5a3ull;
    for (std::uint64_t p : parts) k = mix64(k ^ mix64(p));
    return StreamRng(k);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform on (0,1); never returns 0 or 1.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  /// Standard normal via Box-Muller; pairs are cached within the stream.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  Eigen::VectorXd normal_vec(int d) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v(i) = normal();
    return v;
  }

  void normal_fill(Eigen::Ref<Eigen::VectorXd> v) {
    for (int i = 0; i < v.size(); ++i) v(i) = normal();
  }

  /// Poisson count. Knuth's product method for small means; means above the
  /// cutoff are split additively (Poisson(m) = Poisson(m/2) + Poisson(m/2)).
  int poisson(double mean);

  // UniformRandomBitGenerator interface.
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ull; }
  result_type operator()() { return next_u64(); }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace mfkit
