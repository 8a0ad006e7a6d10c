#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace avood {

// Seeded generator with explicitly coded distributions so a given seed yields
// the same sequence everywhere. mt19937_64 output is fully specified by the
// standard; std:: distributions are not, so uniform/normal are derived here
// (the normal uses Marsaglia's polar method, touching only sqrt and log).
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal deviate.
  double normal();

  // Uniform integer in [0, bound); bound must be nonzero.
  uint64_t index(uint64_t bound) { return gen_() % bound; }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Random direction on the unit sphere in `dim` dimensions.
std::vector<double> random_unit_vector(Rng& rng, size_t dim);

}  // namespace avood
