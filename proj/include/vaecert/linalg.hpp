#pragma once

#include "vaecert/tensor.hpp"

namespace vaecert::num {

/// Lower Cholesky factor of a symmetric positive-definite matrix.
/// Throws std::runtime_error when the matrix is not positive definite.
Tensor cholesky(const Tensor& a);

/// Solves A x = b given the lower factor L of A.
Tensor cholesky_solve(const Tensor& l, const Tensor& b);

Tensor spd_inverse(const Tensor& a);

double spd_logdet(const Tensor& a);

struct TopSingular {
  double sigma = 0.0;       // largest singular value
  Tensor right;             // corresponding right-singular vector (unit norm)
  bool degenerate = false;  // top two singular values coincide (within 1e-6 rel)
};

/// Dominant singular pair of an arbitrary rank-2 tensor, by power iteration
/// on M^T M with a fixed deterministic start. The right vector's sign is
/// canonicalized so its first nonzero component is positive.
TopSingular top_singular_pair(const Tensor& m);

}  // namespace vaecert::num
