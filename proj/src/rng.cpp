#include "mfkit/rng.hpp"

#include "mfkit/errors.hpp"

namespace mfkit {

int StreamRng::poisson(double mean) {
  if (mean < 0.0) throw DomainError("poisson: negative mean");
  if (mean == 0.0) return 0;
  if (mean > 64.0) {
    // Additive split keeps the product method exact for large means.
    int half = poisson(mean / 2.0);
    return half + poisson(mean / 2.0);
  }
  const double limit = std::exp(-mean);
  int n = -1;
  double prod = 1.0;
  do {
    prod *= uniform01();
    ++n;
  } while (prod > limit);
  return n;
}

}  // namespace mfkit
