#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "vaecert/tensor.hpp"

namespace vaecert::ad {

using num::Tensor;

class Tape;

/// Lightweight handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int idx = -1;
  bool valid() const { return tape != nullptr && idx >= 0; }
};

/// Reverse-mode tape over Tensor expressions. Values are computed eagerly
/// as the expression is built; backward() fills adjoints in reverse
/// insertion order, which is a valid topological order. Construction and
/// backward are single-threaded per tape; independent tapes are safe to
/// evaluate concurrently.
class Tape {
 public:
  Var leaf(Tensor value);
  /// Leaf that will not receive a gradient (treated as a constant).
  Var constant(Tensor value);

  const Tensor& value(Var v) const;
  /// Adjoint of a node after backward(); zeros if the node was unreachable.
  Tensor grad(Var v) const;

  /// Backward pass from a scalar root (adjoint seeded with 1). Throws
  /// std::invalid_argument when the root is not scalar-valued.
  void backward(Var root);
  /// Backward pass with an explicit seed adjoint (for Jacobian rows).
  void backward_seeded(Var root, const Tensor& seed);

  void zero_adjoints();
  void clear();
  std::size_t size() const { return nodes_.size(); }

  // Expression builders. Elementwise ops require identical shapes.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var matmul(Var a, Var b);
  Var relu(Var a);
  Var softplus(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var sum(Var a);     // scalar
  Var square(Var a);
  Var sqrt(Var a);
  Var l2norm(Var a);  // scalar
  Var scale(Var a, double c);
  Var add_const(Var a, double c);
  Var neg(Var a) { return scale(a, -1.0); }
  Var slice(Var a, std::size_t offset, std::size_t len);
  Var concat(Var a, Var b);
  /// Replicates a scalar node to a rank-1 tensor of length n.
  Var broadcast(Var a, std::size_t n);

 private:
  enum class Op : std::uint8_t {
    leaf, add, sub, mul, matmul, relu, softplus, tanh_fn, sigmoid_fn,
    exp_fn, log_fn, sum, square, sqrt_fn, l2norm, scale, add_const,
    slice, concat, broadcast,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double c = 0.0;
    std::size_t off = 0;
    bool no_grad = false;
    Tensor value;
    Tensor adjoint;
    bool seeded = false;
  };

  Var push(Node n);
  void accumulate(int idx, const Tensor& g);
  void check(Var v) const;
  const Tensor& val(int i) const { return nodes_[static_cast<std::size_t>(i)].value; }

  std::vector<Node> nodes_;
};

/// Jacobian of a vector-valued map at a point, built row by row from
/// backward passes seeded with unit adjoints. Throws std::runtime_error if
/// the map produces non-finite outputs at the point.
Tensor jacobian(const std::function<Var(Tape&, Var)>& f, const Tensor& at);

}  // namespace vaecert::ad
