#pragma once

#include <vector>

#include "matrix.hpp"

namespace avood {

// Full spectrum of a symmetric matrix, eigenvalues sorted non-increasing.
// Column j of `eigenvectors` pairs with eigenvalues[j]; columns are
// orthonormal. Each column is flipped so its largest-magnitude entry is
// positive (first such entry on ties), making the output deterministic.
struct EigenResult {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;
};

// Cyclic Jacobi with threshold skipping. Input must be square, finite, and
// symmetric to within 1e-10 (scaled by the largest entry magnitude). Equal
// eigenvalues keep the solver's pre-sort column order. Capped at 100 sweeps.
EigenResult sym_eig(const Matrix& a);

}  // namespace avood
