#include "matrix.hpp"

#include <cmath>

#include "errors.hpp"

namespace avood {

Matrix Matrix::identity(size_t n) {
  Matrix m(n, n);
  for (size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ValidationError("matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  for (size_t i = 0; i < a.rows(); ++i) {
    for (size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (size_t i = 0; i < a.rows(); ++i)
    for (size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix gram(const Matrix& x) {
  const size_t d = x.cols();
  Matrix g(d, d);
  // Accumulate sample-by-sample; fill the lower triangle by symmetry.
  for (size_t m = 0; m < x.rows(); ++m) {
    const double* r = x.data() + m * d;
    for (size_t i = 0; i < d; ++i) {
      const double ri = r[i];
      if (ri == 0.0) continue;
      double* gi = g.data() + i * d;
      for (size_t j = i; j < d; ++j) gi[j] += ri * r[j];
    }
  }
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  return g;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw ValidationError("matvec: dimension mismatch");
  std::vector<double> y(a.rows(), 0.0);
  for (size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

std::vector<double> matvec_transposed(const Matrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) throw ValidationError("matvec_transposed: dimension mismatch");
  std::vector<double> y(a.cols(), 0.0);
  for (size_t i = 0; i < a.rows(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* r = a.data() + i * a.cols();
    for (size_t j = 0; j < a.cols(); ++j) y[j] += xi * r[j];
  }
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace avood
