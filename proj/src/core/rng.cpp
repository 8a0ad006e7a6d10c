#include "rng.hpp"

#include <cmath>

#include "errors.hpp"

namespace avood {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double x, y, s;
  do {
    x = 2.0 * uniform() - 1.0;
    y = 2.0 * uniform() - 1.0;
    s = x * x + y * y;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = y * f;
  has_spare_ = true;
  return x * f;
}

std::vector<double> random_unit_vector(Rng& rng, size_t dim) {
  if (dim == 0) throw ValidationError("random_unit_vector: dim must be positive");
  std::vector<double> v(dim);
  double n = 0.0;
  do {
    n = 0.0;
    for (size_t i = 0; i < dim; ++i) {
      v[i] = rng.normal();
      n += v[i] * v[i];
    }
  } while (n == 0.0);
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

}  // namespace avood
