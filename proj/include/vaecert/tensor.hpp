#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace vaecert::num {

/// Dense row-major tensor of doubles. The single numeric currency of the
/// library: inputs, latents, perturbations and weights are all Tensors.
///
/// Rank 0 (empty shape) is a scalar with one element. Zero extents are
/// allowed and produce empty tensors. Values are treated as immutable once
/// an operation has returned them; all arithmetic returns new tensors.
class Tensor {
 public:
  Tensor() = default;  // rank-1, extent 0
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::size_t> shape, double v);
  static Tensor identity(std::size_t n);
  static Tensor vector(std::vector<double> data);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const;  // rank-2 only
  std::size_t cols() const;

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at2(std::size_t i, std::size_t j) const;
  double& at2(std::size_t i, std::size_t j);

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const double* ptr() const { return data_.data(); }
  double* ptr() { return data_.data(); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

 private:
  std::vector<std::size_t> shape_{0};
  std::vector<double> data_;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);

// Elementwise arithmetic (kernel-backed). Shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
void axpy_into(double c, const Tensor& x, Tensor& y);  // y += c*x
Tensor relu(const Tensor& a);

// Elementwise transcendentals (scalar loops; not part of the SIMD surface).
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor add_const(const Tensor& a, double c);

// Reductions and norms.
double sum(const Tensor& a);
double dot(const Tensor& a, const Tensor& b);
double sum_squares(const Tensor& a);
double l2_norm(const Tensor& a);
/// Frobenius norm of a rank-2 tensor. Throws std::invalid_argument otherwise.
double frobenius_norm(const Tensor& m);
double min_value(const Tensor& a);
double max_value(const Tensor& a);

/// Projects v onto the L2 ball of the given radius: returns v unchanged when
/// already inside, otherwise rescales onto the sphere. Idempotent bit-for-bit.
/// Negative radius is a domain error.
Tensor l2_project(const Tensor& v, double radius);

// Linear algebra on rank-2 tensors (rank-1 operands are treated as column
// or row vectors as appropriate).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& m);
Tensor outer(const Tensor& u, const Tensor& v);
/// out[j] = sum_i m[i,j] * v[i]
Tensor matvec_transposed(const Tensor& m, const Tensor& v);

bool all_finite(const Tensor& a);
/// Throws std::runtime_error mentioning `what` if any entry is not finite.
void require_finite(const Tensor& a, const char* what);

Tensor concat(const Tensor& a, const Tensor& b);           // flat
Tensor slice(const Tensor& a, std::size_t offset, std::size_t len);  // flat

}  // namespace vaecert::num
