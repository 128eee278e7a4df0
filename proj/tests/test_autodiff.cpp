#include <doctest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <vector>

#include "vaecert/autodiff.hpp"
#include "vaecert/rng.hpp"

using namespace vaecert;
using ad::Tape;
using ad::Var;
using num::Tensor;

namespace {

// Central-difference oracle for the gradient of a scalar function.
Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                              double h) {
  Tensor g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

void check_close(const Tensor& got, const Tensor& want, double rel) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double scale = std::max({std::abs(want[i]), std::abs(got[i]), 1.0});
    CHECK(std::abs(got[i] - want[i]) <= rel * scale);
  }
}

}  // namespace

TEST_CASE("quadratic gradient") {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1, 2, 3}));
  Var root = tape.sum(tape.mul(x, x));
  tape.backward(root);
  const Tensor g = tape.grad(x);
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 4.0);
  CHECK(g[2] == 6.0);
}

TEST_CASE("relu gradient is zero on the inactive side") {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({-5.0}));
  Var root = tape.sum(tape.relu(x));
  tape.backward(root);
  CHECK(tape.grad(x)[0] == 0.0);

  // subgradient at exactly zero is defined as zero
  Tape t2;
  Var x0 = t2.leaf(Tensor::vector({0.0}));
  Var r2 = t2.sum(t2.relu(x0));
  t2.backward(r2);
  CHECK(t2.grad(x0)[0] == 0.0);
}

TEST_CASE("two-layer tanh MLP matches finite differences") {
  num::RngStream rng(21, 4);
  const std::size_t d_in = 5, d_h = 4;
  Tensor w1({d_h, d_in}), b1({d_h}), w2({1, d_h}), b2({1});
  num::gaussian_fill(rng, w1);
  num::gaussian_fill(rng, b1);
  num::gaussian_fill(rng, w2);
  num::gaussian_fill(rng, b2);
  Tensor x0({d_in});
  num::gaussian_fill(rng, x0);

  auto value = [&](const Tensor& w1v, const Tensor& b1v, const Tensor& w2v, const Tensor& b2v,
                   const Tensor& xv) {
    const Tensor h = num::tanh(num::add(num::matmul(w1v, xv), b1v));
    return num::matmul(w2v, h)[0] + b2v[0];
  };

  Tape tape;
  Var w1v = tape.leaf(w1), b1v = tape.leaf(b1), w2v = tape.leaf(w2), b2v = tape.leaf(b2);
  Var xv = tape.leaf(x0);
  Var h = tape.tanh(tape.add(tape.matmul(w1v, xv), b1v));
  Var root = tape.sum(tape.add(tape.matmul(w2v, h), b2v));
  tape.backward(root);

  const double hstep = 1e-5;
  check_close(tape.grad(xv),
              finite_difference_grad([&](const Tensor& t) { return value(w1, b1, w2, b2, t); },
                                     x0, hstep),
              1e-5);
  check_close(tape.grad(w1v),
              finite_difference_grad([&](const Tensor& t) { return value(t, b1, w2, b2, x0); },
                                     w1, hstep),
              1e-5);
  check_close(tape.grad(b1v),
              finite_difference_grad([&](const Tensor& t) { return value(w1, t, w2, b2, x0); },
                                     b1, hstep),
              1e-5);
  check_close(tape.grad(w2v),
              finite_difference_grad([&](const Tensor& t) { return value(w1, b1, t, b2, x0); },
                                     w2, hstep),
              1e-5);
}

TEST_CASE("gradient check across every op") {
  num::RngStream rng(100, 0);
  struct Case {
    const char* name;
    std::function<Var(Tape&, Var)> build;
    std::function<Tensor(num::RngStream&)> sample;
    double rel;
  };
  auto positive = [](num::RngStream& r) {
    Tensor t({4});
    for (std::size_t i = 0; i < 4; ++i) t[i] = 0.5 + r.uniform();
    return t;
  };
  auto generic = [](num::RngStream& r) {
    Tensor t({4});
    num::gaussian_fill(r, t);
    // keep away from relu kinks and the l2norm origin
    for (std::size_t i = 0; i < 4; ++i) {
      if (std::abs(t[i]) < 0.1) t[i] = t[i] < 0 ? -0.1 : 0.1;
    }
    return t;
  };

  const Case cases[] = {
      {"add", [](Tape& t, Var v) { return t.sum(t.add(v, t.scale(v, 2.0))); }, generic, 1e-7},
      {"sub", [](Tape& t, Var v) { return t.sum(t.sub(t.square(v), v)); }, generic, 1e-6},
      {"mul", [](Tape& t, Var v) { return t.sum(t.mul(v, t.add_const(v, 1.5))); }, generic, 1e-6},
      {"matmul",
       [](Tape& t, Var v) {
         Tensor w = Tensor::matrix(3, 4, {0.5, -1, 2, 0.25, 1, 1, -0.5, 0.75, -2, 0.1, 0.3, 1.1});
         return t.sum(t.square(t.matmul(t.constant(w), v)));
       },
       generic, 1e-6},
      {"relu", [](Tape& t, Var v) { return t.sum(t.relu(v)); }, generic, 1e-6},
      {"softplus", [](Tape& t, Var v) { return t.sum(t.softplus(v)); }, generic, 1e-7},
      {"tanh", [](Tape& t, Var v) { return t.sum(t.tanh(v)); }, generic, 1e-7},
      {"sigmoid", [](Tape& t, Var v) { return t.sum(t.sigmoid(v)); }, generic, 1e-7},
      {"exp", [](Tape& t, Var v) { return t.sum(t.exp(v)); }, generic, 1e-7},
      {"log", [](Tape& t, Var v) { return t.sum(t.log(v)); }, positive, 1e-7},
      {"sum", [](Tape& t, Var v) { return t.scale(t.sum(v), 3.0); }, generic, 1e-7},
      {"square", [](Tape& t, Var v) { return t.sum(t.square(v)); }, generic, 1e-7},
      {"sqrt", [](Tape& t, Var v) { return t.sum(t.sqrt(v)); }, positive, 1e-7},
      {"l2norm", [](Tape& t, Var v) { return t.l2norm(v); }, generic, 1e-6},
      {"scale", [](Tape& t, Var v) { return t.sum(t.scale(v, -2.5)); }, generic, 1e-7},
      {"add_const", [](Tape& t, Var v) { return t.sum(t.square(t.add_const(v, 3.0))); }, generic, 1e-6},
      {"slice", [](Tape& t, Var v) { return t.sum(t.square(t.slice(v, 1, 2))); }, generic, 1e-6},
      {"concat",
       [](Tape& t, Var v) { return t.sum(t.square(t.concat(v, t.scale(v, 0.5)))); }, generic, 1e-6},
      {"broadcast",
       [](Tape& t, Var v) { return t.sum(t.mul(t.broadcast(t.sum(v), 4), v)); }, generic, 1e-6},
  };

  for (const Case& c : cases) {
    CAPTURE(c.name);
    for (int trial = 0; trial < 5; ++trial) {
      const Tensor x0 = c.sample(rng);
      Tape tape;
      Var v = tape.leaf(x0);
      Var root = c.build(tape, v);
      tape.backward(root);
      const Tensor fd = finite_difference_grad(
          [&](const Tensor& t) {
            Tape t2;
            Var v2 = t2.leaf(t);
            return t2.value(c.build(t2, v2))[0];
          },
          x0, 1e-6);
      check_close(tape.grad(v), fd, std::max(c.rel * 100, 1e-5));
    }
  }
}

TEST_CASE("jacobian of linear maps is exact") {
  const Tensor w = Tensor::matrix(2, 3, {1, -2, 0.5, 3, 4, -1});
  const Tensor x = Tensor::vector({0.2, -0.7, 1.1});
  const Tensor j = ad::jacobian(
      [&w](Tape& t, Var v) { return t.matmul(t.constant(w), v); }, x);
  REQUIRE(j.rows() == 2);
  REQUIRE(j.cols() == 3);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(j[i] == w[i]);

  const Tensor ji = ad::jacobian([](Tape&, Var v) { return v; }, Tensor::vector({1, 2, 3}));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 3; ++k) CHECK(ji.at2(i, k) == (i == k ? 1.0 : 0.0));
  }
}

TEST_CASE("jacobian of a relu MLP matches finite differences away from kinks") {
  num::RngStream rng(31, 8);
  const std::size_t d_in = 4, d_h = 6, d_out = 3;
  Tensor w1({d_h, d_in}), b1({d_h}), w2({d_out, d_h}), b2({d_out});
  num::gaussian_fill(rng, w1);
  num::gaussian_fill(rng, b1);
  num::gaussian_fill(rng, w2);
  num::gaussian_fill(rng, b2);
  const Tensor x = Tensor::vector({0.37, -0.81, 0.55, 1.23});

  auto f = [&](Tape& t, Var v) {
    Var h = t.relu(t.add(t.matmul(t.constant(w1), v), t.constant(b1)));
    return t.add(t.matmul(t.constant(w2), h), t.constant(b2));
  };
  const Tensor j = ad::jacobian(f, x);

  const double h = 1e-4;
  for (std::size_t col = 0; col < d_in; ++col) {
    Tensor xp = x, xm = x;
    xp[col] += h;
    xm[col] -= h;
    Tape tp, tm;
    const Tensor yp = tp.value(f(tp, tp.leaf(xp)));
    const Tensor ym = tm.value(f(tm, tm.leaf(xm)));
    for (std::size_t row = 0; row < d_out; ++row) {
      const double fd = (yp[row] - ym[row]) / (2.0 * h);
      const double scale = std::max({std::abs(fd), std::abs(j.at2(row, col)), 1.0});
      CHECK(std::abs(j.at2(row, col) - fd) <= 1e-4 * scale);
    }
  }
}

TEST_CASE("jacobian of a composition equals the product on linear maps") {
  const Tensor a = Tensor::matrix(2, 3, {1, 0, 2, -1, 1, 0});
  const Tensor b = Tensor::matrix(3, 3, {0.5, 1, 0, 0, -2, 1, 3, 0, 1});
  const Tensor x = Tensor::vector({1, -1, 2});
  const Tensor j = ad::jacobian(
      [&](Tape& t, Var v) { return t.matmul(t.constant(a), t.matmul(t.constant(b), v)); }, x);
  const Tensor ab = num::matmul(a, b);
  REQUIRE(j.size() == ab.size());
  for (std::size_t i = 0; i < ab.size(); ++i) CHECK(j[i] == doctest::Approx(ab[i]).epsilon(1e-14));
}

TEST_CASE("backward is bitwise deterministic") {
  num::RngStream rng(77, 1);
  Tensor w({6, 6}), x0({6});
  num::gaussian_fill(rng, w);
  num::gaussian_fill(rng, x0);
  auto run = [&]() {
    Tape tape;
    Var xv = tape.leaf(x0);
    Var h = tape.tanh(tape.matmul(tape.constant(w), xv));
    Var root = tape.l2norm(tape.add(h, tape.softplus(xv)));
    tape.backward(root);
    return tape.grad(xv);
  };
  const Tensor g1 = run();
  const Tensor g2 = run();
  CHECK(std::memcmp(g1.ptr(), g2.ptr(), g1.size() * sizeof(double)) == 0);
}

TEST_CASE("backward rejects non-scalar roots") {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1, 2}));
  Var y = tape.square(x);
  CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
}

TEST_CASE("jacobian rejects non-finite outputs") {
  CHECK_THROWS_AS(ad::jacobian(
                      [](Tape& t, Var v) {
                        return t.log(v);  // log of a negative entry
                      },
                      Tensor::vector({-1.0})),
                  std::runtime_error);
}
