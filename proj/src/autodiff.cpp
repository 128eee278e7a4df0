#include "vaecert/autodiff.hpp"

#include <cmath>
#include <stdexcept>

#include "vaecert/kernels.hpp"

namespace vaecert::ad {

using num::Tensor;

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

void Tape::check(Var v) const {
  if (v.tape != this || v.idx < 0 || static_cast<std::size_t>(v.idx) >= nodes_.size()) {
    throw std::invalid_argument("Tape: var does not belong to this tape");
  }
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.op = Op::leaf;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::leaf;
  n.no_grad = true;
  n.value = std::move(value);
  return push(std::move(n));
}

const Tensor& Tape::value(Var v) const {
  check(v);
  return nodes_[static_cast<std::size_t>(v.idx)].value;
}

Tensor Tape::grad(Var v) const {
  check(v);
  const Node& n = nodes_[static_cast<std::size_t>(v.idx)];
  if (n.adjoint.size() == n.value.size() && n.seeded) return n.adjoint;
  return Tensor(n.value.shape());
}

namespace {

void shapes_must_match(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Var Tape::add(Var a, Var b) {
  check(a); check(b);
  shapes_must_match(val(a.idx), val(b.idx), "add");
  Node n;
  n.op = Op::add;
  n.a = a.idx;
  n.b = b.idx;
  n.value = num::add(val(a.idx), val(b.idx));
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  check(a); check(b);
  shapes_must_match(val(a.idx), val(b.idx), "sub");
  Node n;
  n.op = Op::sub;
  n.a = a.idx;
  n.b = b.idx;
  n.value = num::sub(val(a.idx), val(b.idx));
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  check(a); check(b);
  shapes_must_match(val(a.idx), val(b.idx), "mul");
  Node n;
  n.op = Op::mul;
  n.a = a.idx;
  n.b = b.idx;
  n.value = num::hadamard(val(a.idx), val(b.idx));
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  check(a); check(b);
  Node n;
  n.op = Op::matmul;
  n.a = a.idx;
  n.b = b.idx;
  n.value = num::matmul(val(a.idx), val(b.idx));
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  check(a);
  Node n;
  n.op = Op::relu;
  n.a = a.idx;
  n.value = num::relu(val(a.idx));
  return push(std::move(n));
}

Var Tape::softplus(Var a) {
  check(a);
  Node n;
  n.op = Op::softplus;
  n.a = a.idx;
  n.value = num::softplus(val(a.idx));
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  check(a);
  Node n;
  n.op = Op::tanh_fn;
  n.a = a.idx;
  n.value = num::tanh(val(a.idx));
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  check(a);
  Node n;
  n.op = Op::sigmoid_fn;
  n.a = a.idx;
  n.value = num::sigmoid(val(a.idx));
  return push(std::move(n));
}

Var Tape::exp(Var a) {
  check(a);
  Node n;
  n.op = Op::exp_fn;
  n.a = a.idx;
  n.value = num::exp(val(a.idx));
  return push(std::move(n));
}

Var Tape::log(Var a) {
  check(a);
  Node n;
  n.op = Op::log_fn;
  n.a = a.idx;
  n.value = num::log(val(a.idx));
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  check(a);
  Node n;
  n.op = Op::sum;
  n.a = a.idx;
  n.value = Tensor::scalar(num::sum(val(a.idx)));
  return push(std::move(n));
}

Var Tape::square(Var a) {
  check(a);
  Node n;
  n.op = Op::square;
  n.a = a.idx;
  n.value = num::square(val(a.idx));
  return push(std::move(n));
}

Var Tape::sqrt(Var a) {
  check(a);
  Node n;
  n.op = Op::sqrt_fn;
  n.a = a.idx;
  n.value = num::sqrt(val(a.idx));
  return push(std::move(n));
}

Var Tape::l2norm(Var a) {
  check(a);
  Node n;
  n.op = Op::l2norm;
  n.a = a.idx;
  n.value = Tensor::scalar(num::l2_norm(val(a.idx)));
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  check(a);
  Node n;
  n.op = Op::scale;
  n.a = a.idx;
  n.c = c;
  n.value = num::scale(val(a.idx), c);
  return push(std::move(n));
}

Var Tape::add_const(Var a, double c) {
  check(a);
  Node n;
  n.op = Op::add_const;
  n.a = a.idx;
  n.c = c;
  n.value = num::add_const(val(a.idx), c);
  return push(std::move(n));
}

Var Tape::slice(Var a, std::size_t offset, std::size_t len) {
  check(a);
  Node n;
  n.op = Op::slice;
  n.a = a.idx;
  n.off = offset;
  n.value = num::slice(val(a.idx), offset, len);
  return push(std::move(n));
}

Var Tape::concat(Var a, Var b) {
  check(a); check(b);
  Node n;
  n.op = Op::concat;
  n.a = a.idx;
  n.b = b.idx;
  n.value = num::concat(val(a.idx), val(b.idx));
  return push(std::move(n));
}

Var Tape::broadcast(Var a, std::size_t count) {
  check(a);
  if (val(a.idx).size() != 1) throw std::invalid_argument("broadcast: scalar source required");
  Node n;
  n.op = Op::broadcast;
  n.a = a.idx;
  n.value = Tensor::full({count}, val(a.idx)[0]);
  return push(std::move(n));
}

void Tape::accumulate(int idx, const Tensor& g) {
  Node& n = nodes_[static_cast<std::size_t>(idx)];
  if (n.no_grad) return;
  if (!n.seeded) {
    n.adjoint = Tensor(n.value.shape());
    n.seeded = true;
  }
  num::kernels().add(n.adjoint.ptr(), g.ptr(), n.adjoint.ptr(), g.size());
}

void Tape::zero_adjoints() {
  for (Node& n : nodes_) {
    n.adjoint = Tensor();
    n.seeded = false;
  }
}

void Tape::backward(Var root) {
  check(root);
  if (nodes_[static_cast<std::size_t>(root.idx)].value.size() != 1) {
    throw std::invalid_argument("backward: root must be scalar-valued");
  }
  backward_seeded(root, Tensor::full(nodes_[static_cast<std::size_t>(root.idx)].value.shape(), 1.0));
}

void Tape::backward_seeded(Var root, const Tensor& seed) {
  check(root);
  Node& rn = nodes_[static_cast<std::size_t>(root.idx)];
  if (!seed.same_shape(rn.value)) throw std::invalid_argument("backward: seed shape mismatch");
  accumulate(root.idx, seed);

  for (int i = root.idx; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.seeded) continue;
    const Tensor& g = n.adjoint;
    switch (n.op) {
      case Op::leaf:
        break;
      case Op::add:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::sub:
        accumulate(n.a, g);
        accumulate(n.b, num::scale(g, -1.0));
        break;
      case Op::mul:
        accumulate(n.a, num::hadamard(g, val(n.b)));
        accumulate(n.b, num::hadamard(g, val(n.a)));
        break;
      case Op::matmul: {
        const Tensor& a = val(n.a);
        const Tensor& b = val(n.b);
        if (a.rank() == 2 && b.rank() == 2) {
          accumulate(n.a, num::matmul(g, num::transpose(b)));
          accumulate(n.b, num::matmul(num::transpose(a), g));
        } else if (a.rank() == 2 && b.rank() == 1) {
          accumulate(n.a, num::outer(g, b));
          accumulate(n.b, num::matvec_transposed(a, g));
        } else {  // rank1 x rank2
          accumulate(n.a, num::matmul(b, g));
          accumulate(n.b, num::outer(a, g));
        }
        break;
      }
      case Op::relu: {
        Tensor gx(g.shape());
        num::kernels().relu_mask(val(n.a).ptr(), g.ptr(), gx.ptr(), g.size());
        accumulate(n.a, gx);
        break;
      }
      case Op::softplus:
        accumulate(n.a, num::hadamard(g, num::sigmoid(val(n.a))));
        break;
      case Op::tanh_fn: {
        Tensor d(g.shape());
        for (std::size_t k = 0; k < d.size(); ++k) d[k] = 1.0 - n.value[k] * n.value[k];
        accumulate(n.a, num::hadamard(g, d));
        break;
      }
      case Op::sigmoid_fn: {
        Tensor d(g.shape());
        for (std::size_t k = 0; k < d.size(); ++k) d[k] = n.value[k] * (1.0 - n.value[k]);
        accumulate(n.a, num::hadamard(g, d));
        break;
      }
      case Op::exp_fn:
        accumulate(n.a, num::hadamard(g, n.value));
        break;
      case Op::log_fn: {
        Tensor d(g.shape());
        for (std::size_t k = 0; k < d.size(); ++k) d[k] = g[k] / val(n.a)[k];
        accumulate(n.a, d);
        break;
      }
      case Op::sum:
        accumulate(n.a, Tensor::full(val(n.a).shape(), g[0]));
        break;
      case Op::square:
        accumulate(n.a, num::scale(num::hadamard(g, val(n.a)), 2.0));
        break;
      case Op::sqrt_fn: {
        Tensor d(g.shape());
        for (std::size_t k = 0; k < d.size(); ++k) d[k] = g[k] * 0.5 / n.value[k];
        accumulate(n.a, d);
        break;
      }
      case Op::l2norm: {
        // subgradient 0 at the origin
        const double norm = n.value[0];
        if (norm > 0.0) accumulate(n.a, num::scale(val(n.a), g[0] / norm));
        break;
      }
      case Op::scale:
        accumulate(n.a, num::scale(g, n.c));
        break;
      case Op::add_const:
        accumulate(n.a, g);
        break;
      case Op::slice: {
        Tensor gx(val(n.a).shape());
        for (std::size_t k = 0; k < g.size(); ++k) gx[n.off + k] = g[k];
        accumulate(n.a, gx);
        break;
      }
      case Op::concat: {
        const std::size_t na = val(n.a).size();
        accumulate(n.a, num::slice(g, 0, na));
        accumulate(n.b, num::slice(g, na, g.size() - na));
        break;
      }
      case Op::broadcast:
        accumulate(n.a, Tensor({}, {num::sum(g)}));
        break;
    }
  }
}

void Tape::clear() { nodes_.clear(); }

Tensor jacobian(const std::function<Var(Tape&, Var)>& f, const Tensor& at) {
  Tape tape;
  Var x = tape.leaf(at);
  Var y = f(tape, x);
  const Tensor& out = tape.value(y);
  if (!num::all_finite(out)) throw std::runtime_error("jacobian: non-finite outputs");
  const std::size_t rows = out.size(), cols = at.size();
  Tensor j({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    tape.zero_adjoints();
    Tensor seed(out.shape());
    seed[i] = 1.0;
    tape.backward_seeded(y, seed);
    const Tensor gx = tape.grad(x);
    for (std::size_t c = 0; c < cols; ++c) j.at2(i, c) = gx[c];
  }
  return j;
}

}  // namespace vaecert::ad
