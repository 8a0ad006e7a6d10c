#include "numerics.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "matrix.hpp"

namespace avood {

double logsumexp(std::span<const double> v) {
  if (v.empty()) throw ValidationError("logsumexp: empty vector");
  if (!all_finite(v)) throw ValidationError("logsumexp: non-finite entry");
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

std::vector<double> softmax(std::span<const double> v) {
  const double lse = logsumexp(v);
  std::vector<double> p(v.size());
  for (size_t i = 0; i < v.size(); ++i) p[i] = std::exp(v[i] - lse);
  return p;
}

double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> analytic, std::span<const double> point, double step) {
  if (step <= 0.0) throw ValidationError("grad_check: step must be positive");
  if (analytic.size() != point.size())
    throw ValidationError("grad_check: gradient/point size mismatch");
  std::vector<double> x(point.begin(), point.end());
  double worst = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double fp = f(x);
    x[i] = saved - step;
    const double fm = f(x);
    x[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("grad_check: non-finite function evaluation");
    const double fd = (fp - fm) / (2.0 * step);
    const double rel = std::abs(fd - analytic[i]) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace avood
