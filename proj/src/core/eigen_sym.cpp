#include "eigen_sym.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "errors.hpp"

namespace avood {

namespace {

constexpr int kMaxSweeps = 100;

// Off-diagonal Frobenius norm, upper triangle only (w is kept symmetric in
// its upper triangle during the sweeps).
double offdiag_norm_upper(const Matrix& w) {
  const size_t n = w.rows();
  double s = 0.0;
  for (size_t p = 0; p + 1 < n; ++p) {
    const double* row = w.data() + p * n;
    for (size_t q = p + 1; q < n; ++q) s += row[q] * row[q];
  }
  return std::sqrt(2.0 * s);
}

}  // namespace

EigenResult sym_eig(const Matrix& a) {
  const size_t n = a.rows();
  if (n == 0 || a.cols() != n) throw ValidationError("sym_eig: input must be square");
  if (!a.all_finite()) throw NumericError("sym_eig: non-finite entry");

  double max_abs = 0.0;
  double max_asym = 0.0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i; j < n; ++j) {
      max_abs = std::max(max_abs, std::abs(a(i, j)));
      max_asym = std::max(max_asym, std::abs(a(i, j) - a(j, i)));
    }
  }
  if (max_asym > 1e-10 * std::max(1.0, max_abs))
    throw ValidationError("sym_eig: input asymmetric beyond tolerance");

  // Work matrix: only the upper triangle (and diagonal) is maintained.
  Matrix w(n, n);
  double frob2 = 0.0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i; j < n; ++j) {
      const double sym = 0.5 * (a(i, j) + a(j, i));
      w(i, j) = sym;
      frob2 += (i == j) ? sym * sym : 2.0 * sym * sym;
    }
  }
  // Accumulated rotations, stored transposed: row j holds eigenvector j, so
  // the rotation update runs over contiguous rows.
  Matrix vt = Matrix::identity(n);

  const double eps_off = 1e-14 * std::sqrt(frob2);
  bool converged = (frob2 == 0.0);
  if (!converged) {
    const double thr = eps_off / static_cast<double>(n * n);
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
      if (offdiag_norm_upper(w) <= eps_off) {
        converged = true;
        break;
      }
      for (size_t p = 0; p + 1 < n; ++p) {
        for (size_t q = p + 1; q < n; ++q) {
          const double apq = w(p, q);
          if (std::abs(apq) <= thr) continue;
          const double app = w(p, p);
          const double aqq = w(q, q);
          const double tau = (aqq - app) / (2.0 * apq);
          double t;
          if (std::abs(tau) > 1e154) {
            t = 0.5 / tau;
          } else {
            const double sgn = (tau >= 0.0) ? 1.0 : -1.0;
            t = sgn / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
          }
          const double c = 1.0 / std::sqrt(1.0 + t * t);
          const double s = t * c;

          double* rowp = w.data() + p * n;
          double* rowq = w.data() + q * n;
          for (size_t k = 0; k < p; ++k) {
            double* rowk = w.data() + k * n;
            const double akp = rowk[p];
            const double akq = rowk[q];
            rowk[p] = c * akp - s * akq;
            rowk[q] = s * akp + c * akq;
          }
          for (size_t k = p + 1; k < q; ++k) {
            const double apk = rowp[k];
            const double akq = w.data()[k * n + q];
            rowp[k] = c * apk - s * akq;
            w.data()[k * n + q] = s * apk + c * akq;
          }
          for (size_t k = q + 1; k < n; ++k) {
            const double apk = rowp[k];
            const double aqk = rowq[k];
            rowp[k] = c * apk - s * aqk;
            rowq[k] = s * apk + c * aqk;
          }
          rowp[p] = app - t * apq;
          rowq[q] = aqq + t * apq;
          rowp[q] = 0.0;

          double* vp = vt.data() + p * n;
          double* vq = vt.data() + q * n;
          for (size_t k = 0; k < n; ++k) {
            const double vkp = vp[k];
            const double vkq = vq[k];
            vp[k] = c * vkp - s * vkq;
            vq[k] = s * vkp + c * vkq;
          }
        }
      }
    }
    if (!converged && offdiag_norm_upper(w) <= eps_off) converged = true;
  }
  if (!converged) throw ConvergenceError("sym_eig: no convergence within 100 sweeps");

  // Descending by eigenvalue; ties keep the pre-sort column order.
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t i, size_t j) { return w(i, i) > w(j, j); });

  EigenResult r;
  r.eigenvalues.resize(n);
  r.eigenvectors = Matrix(n, n);
  for (size_t j = 0; j < n; ++j) {
    const size_t src = order[j];
    r.eigenvalues[j] = w(src, src);
    const double* vec = vt.data() + src * n;
    size_t peak = 0;
    double peak_abs = -1.0;
    for (size_t k = 0; k < n; ++k) {
      const double mag = std::abs(vec[k]);
      if (mag > peak_abs) {
        peak_abs = mag;
        peak = k;
      }
    }
    const double flip = (vec[peak] < 0.0) ? -1.0 : 1.0;
    for (size_t k = 0; k < n; ++k) r.eigenvectors(k, j) = flip * vec[k];
  }
  return r;
}

}  // namespace avood
