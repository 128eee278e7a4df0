#include "vaecert/tensor.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "vaecert/kernels.hpp"

namespace vaecert::num {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_numel(shape_)) {
    throw std::invalid_argument("Tensor: data length does not match shape");
  }
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  Tensor t(std::move(shape));
  for (double& x : t.data_) x = v;
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
  return t;
}

Tensor Tensor::vector(std::vector<double> data) {
  const std::size_t n = data.size();
  return Tensor({n}, std::move(data));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw std::invalid_argument("Tensor::rows: rank-2 required");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw std::invalid_argument("Tensor::cols: rank-2 required");
  return shape_[1];
}

double Tensor::at2(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }
double& Tensor::at2(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out(a.shape());
  kernels().add(a.ptr(), b.ptr(), out.ptr(), a.size());
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out(a.shape());
  kernels().sub(a.ptr(), b.ptr(), out.ptr(), a.size());
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "hadamard");
  Tensor out(a.shape());
  kernels().mul(a.ptr(), b.ptr(), out.ptr(), a.size());
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out(a.shape());
  kernels().scale(a.ptr(), c, out.ptr(), a.size());
  return out;
}

void axpy_into(double c, const Tensor& x, Tensor& y) {
  check_same_shape(x, y, "axpy");
  kernels().axpy(c, x.ptr(), y.ptr(), x.size());
}

Tensor relu(const Tensor& a) {
  Tensor out(a.shape());
  kernels().relu(a.ptr(), out.ptr(), a.size());
  return out;
}

namespace {
template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}
}  // namespace

Tensor exp(const Tensor& a) { return map(a, [](double x) { return std::exp(x); }); }
Tensor log(const Tensor& a) { return map(a, [](double x) { return std::log(x); }); }
Tensor tanh(const Tensor& a) { return map(a, [](double x) { return std::tanh(x); }); }
Tensor sqrt(const Tensor& a) { return map(a, [](double x) { return std::sqrt(x); }); }
Tensor square(const Tensor& a) { return map(a, [](double x) { return x * x; }); }

Tensor softplus(const Tensor& a) {
  return map(a, [](double x) {
    // log(1+e^x) without overflow in either tail
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  });
}

Tensor sigmoid(const Tensor& a) {
  return map(a, [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

Tensor add_const(const Tensor& a, double c) {
  return map(a, [c](double x) { return x + c; });
}

double sum(const Tensor& a) { return kernels().sum(a.ptr(), a.size()); }

double dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  return kernels().dot(a.ptr(), b.ptr(), a.size());
}

double sum_squares(const Tensor& a) { return kernels().sumsq(a.ptr(), a.size()); }

double l2_norm(const Tensor& a) { return std::sqrt(sum_squares(a)); }

double frobenius_norm(const Tensor& m) {
  if (m.rank() != 2) throw std::invalid_argument("frobenius_norm: rank-2 tensor required");
  return std::sqrt(sum_squares(m));
}

double min_value(const Tensor& a) {
  if (a.empty()) throw std::invalid_argument("min_value: empty tensor");
  double m = a[0];
  for (std::size_t i = 1; i < a.size(); ++i) m = std::min(m, a[i]);
  return m;
}

double max_value(const Tensor& a) {
  if (a.empty()) throw std::invalid_argument("max_value: empty tensor");
  double m = a[0];
  for (std::size_t i = 1; i < a.size(); ++i) m = std::max(m, a[i]);
  return m;
}

Tensor l2_project(const Tensor& v, double radius) {
  if (radius < 0.0) throw std::domain_error("l2_project: negative radius");
  Tensor out = v;
  // Rescaling can land a final ulp above the radius; repeat until inside so
  // that projecting an already-projected tensor is a bitwise no-op.
  for (int pass = 0; pass < 4; ++pass) {
    const double norm = l2_norm(out);
    if (norm <= radius) return out;
    if (norm == 0.0) return out;
    out = scale(out, radius / norm);
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() == 2 && b.rank() == 2) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = c.ptr() + i * n;
      for (std::size_t kk = 0; kk < k; ++kk) {
        kernels().axpy(a[i * k + kk], b.ptr() + kk * n, crow, n);
      }
    }
    return c;
  }
  if (a.rank() == 2 && b.rank() == 1) {
    if (a.cols() != b.size()) throw std::invalid_argument("matmul: matrix/vector mismatch");
    const std::size_t m = a.rows(), k = a.cols();
    Tensor y({m});
    for (std::size_t i = 0; i < m; ++i) y[i] = kernels().dot(a.ptr() + i * k, b.ptr(), k);
    return y;
  }
  if (a.rank() == 1 && b.rank() == 2) {
    if (a.size() != b.rows()) throw std::invalid_argument("matmul: vector/matrix mismatch");
    const std::size_t k = b.rows(), n = b.cols();
    Tensor y({n});
    for (std::size_t kk = 0; kk < k; ++kk) kernels().axpy(a[kk], b.ptr() + kk * n, y.ptr(), n);
    return y;
  }
  throw std::invalid_argument("matmul: unsupported ranks");
}

Tensor transpose(const Tensor& m) {
  if (m.rank() != 2) throw std::invalid_argument("transpose: rank-2 tensor required");
  Tensor t({m.cols(), m.rows()});
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) t.at2(j, i) = m.at2(i, j);
  }
  return t;
}

Tensor outer(const Tensor& u, const Tensor& v) {
  if (u.rank() != 1 || v.rank() != 1) throw std::invalid_argument("outer: rank-1 tensors required");
  Tensor m({u.size(), v.size()});
  for (std::size_t i = 0; i < u.size(); ++i) {
    kernels().scale(v.ptr(), u[i], m.ptr() + i * v.size(), v.size());
  }
  return m;
}

Tensor matvec_transposed(const Tensor& m, const Tensor& v) {
  if (m.rank() != 2 || v.rank() != 1 || m.rows() != v.size()) {
    throw std::invalid_argument("matvec_transposed: shape mismatch");
  }
  Tensor out({m.cols()});
  for (std::size_t i = 0; i < m.rows(); ++i) {
    kernels().axpy(v[i], m.ptr() + i * m.cols(), out.ptr(), m.cols());
  }
  return out;
}

bool all_finite(const Tensor& a) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i])) return false;
  }
  return true;
}

void require_finite(const Tensor& a, const char* what) {
  if (!all_finite(a)) throw std::runtime_error(std::string(what) + ": non-finite values");
}

Tensor concat(const Tensor& a, const Tensor& b) {
  std::vector<double> d;
  d.reserve(a.size() + b.size());
  d.insert(d.end(), a.data().begin(), a.data().end());
  d.insert(d.end(), b.data().begin(), b.data().end());
  return Tensor::vector(std::move(d));
}

Tensor slice(const Tensor& a, std::size_t offset, std::size_t len) {
  if (offset + len > a.size()) throw std::invalid_argument("slice: out of range");
  std::vector<double> d(a.data().begin() + offset, a.data().begin() + offset + len);
  return Tensor::vector(std::move(d));
}

}  // namespace vaecert::num
