#include "vaecert/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace vaecert::num {

Tensor cholesky(const Tensor& a) {
  if (a.rank() != 2 || a.rows() != a.cols()) {
    throw std::invalid_argument("cholesky: square matrix required");
  }
  const std::size_t n = a.rows();
  Tensor l({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a.at2(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l.at2(i, k) * l.at2(j, k);
      if (i == j) {
        if (s <= 0.0 || !std::isfinite(s)) {
          throw std::runtime_error("cholesky: matrix not positive definite");
        }
        l.at2(i, i) = std::sqrt(s);
      } else {
        l.at2(i, j) = s / l.at2(j, j);
      }
    }
  }
  return l;
}

Tensor cholesky_solve(const Tensor& l, const Tensor& b) {
  const std::size_t n = l.rows();
  if (b.rank() != 1 || b.size() != n) throw std::invalid_argument("cholesky_solve: shape mismatch");
  Tensor y({n});
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l.at2(i, k) * y[k];
    y[i] = s / l.at2(i, i);
  }
  Tensor x({n});
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l.at2(k, ii) * x[k];
    x[ii] = s / l.at2(ii, ii);
  }
  return x;
}

Tensor spd_inverse(const Tensor& a) {
  const Tensor l = cholesky(a);
  const std::size_t n = a.rows();
  Tensor inv({n, n});
  for (std::size_t j = 0; j < n; ++j) {
    Tensor e({n});
    e[j] = 1.0;
    const Tensor col = cholesky_solve(l, e);
    for (std::size_t i = 0; i < n; ++i) inv.at2(i, j) = col[i];
  }
  return inv;
}

double spd_logdet(const Tensor& a) {
  const Tensor l = cholesky(a);
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += std::log(l.at2(i, i));
  return 2.0 * s;
}

namespace {

// Power iteration on G (symmetric PSD); returns (lambda_max, eigvec).
std::pair<double, Tensor> power_iteration(const Tensor& g) {
  const std::size_t n = g.rows();
  Tensor v({n});
  for (std::size_t j = 0; j < n; ++j) v[j] = 1.0 + 0.05 * static_cast<double>(j + 1);
  double norm = l2_norm(v);
  v = scale(v, 1.0 / norm);
  double lambda = 0.0;
  for (int it = 0; it < 20000; ++it) {
    Tensor w = matmul(g, v);
    const double wn = l2_norm(w);
    if (wn == 0.0) return {0.0, v};
    w = scale(w, 1.0 / wn);
    const double change = std::min(l2_norm(sub(w, v)), l2_norm(add(w, v)));
    v = w;
    lambda = dot(v, matmul(g, v));
    if (change < 1e-15) break;
  }
  return {lambda, v};
}

}  // namespace

TopSingular top_singular_pair(const Tensor& m) {
  if (m.rank() != 2) throw std::invalid_argument("top_singular_pair: rank-2 tensor required");
  const Tensor g = matmul(transpose(m), m);
  auto [lambda, v] = power_iteration(g);
  lambda = std::max(lambda, 0.0);

  TopSingular out;
  out.sigma = std::sqrt(lambda);
  out.right = v;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (v[j] != 0.0) {
      if (v[j] < 0.0) out.right = scale(v, -1.0);
      break;
    }
  }

  if (g.rows() > 1 && lambda > 0.0) {
    // Deflate and look at the runner-up to detect a tied spectrum.
    Tensor g2 = g;
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) {
        g2.at2(i, j) -= lambda * v[i] * v[j];
      }
    }
    const auto [lambda2, v2] = power_iteration(g2);
    (void)v2;
    if (lambda2 > 0.0 && std::sqrt(std::max(lambda2, 0.0)) >= out.sigma * (1.0 - 1e-6)) {
      out.degenerate = true;
    }
  }
  return out;
}

}  // namespace vaecert::num
