#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vaecert/attacks.hpp"
#include "vaecert/oracles.hpp"
#include "vaecert/robustness.hpp"
#include "vaecert/special.hpp"

using namespace vaecert;
using num::RngStream;
using num::Tensor;

namespace {

vae::VaeModel linear_model(const Tensor& w_mu, const Tensor& b_mu, double sigma_const,
                           const Tensor& a_dec, const Tensor& c_dec, double tau = 0.0) {
  vae::VaeModel m;
  m.data_dim = w_mu.cols();
  m.latent_dim = w_mu.rows();
  m.tau = tau;
  m.mu_head.push_back({w_mu, b_mu, vae::Activation::identity});
  Tensor ws({w_mu.rows(), w_mu.cols()});
  Tensor bs({w_mu.rows()});
  const double raw = sigma_const - tau;
  for (std::size_t i = 0; i < bs.size(); ++i) {
    bs[i] = raw > 0.0 ? num::inverse_softplus(raw) : -40.0;
  }
  m.sigma_head.push_back({ws, bs, vae::Activation::identity});
  m.decoder.push_back({a_dec, c_dec, vae::Activation::identity});
  return m;
}

vae::VaeModel identity_model(std::size_t d, double sigma_const) {
  return linear_model(Tensor::identity(d), Tensor({d}), sigma_const, Tensor::identity(d),
                      Tensor({d}));
}

rob::AttackFn test_attack_fn(int steps = 20, int restarts = 3, std::size_t n_mc = 4) {
  return [steps, restarts, n_mc](const vae::VaeModel& m, const Tensor& x, double budget,
                                 RngStream& rng) {
    atk::AttackConfig cfg;
    cfg.budget = budget;
    cfg.steps = steps;
    cfg.restarts = restarts;
    cfg.n_mc = n_mc;
    cfg.target = atk::Target::both;
    return atk::max_damage_attack(m, x, cfg, rng).delta;
  };
}


}  // namespace

TEST_CASE("delta_sample: vanishing encoder noise gives vanishing distances") {
  vae::VaeModel m = identity_model(2, 1e-15);
  RngStream rng(1, 1);
  for (double d : rob::delta_sample(m, Tensor::vector({0.3, 0.4}), rng, 200)) {
    CHECK(d < 1e-12);
  }
}

TEST_CASE("delta_sample: identity maps give half-normal distances in 1-d") {
  vae::VaeModel m = identity_model(1, 1.0);
  RngStream rng(2, 1);
  std::vector<double> d = rob::delta_sample(m, Tensor::vector({0.5}), rng, 100000);
  std::sort(d.begin(), d.end());
  const double median = 0.5 * (d[49999] + d[50000]);
  CHECK(std::abs(median - 0.6744897501960817) < 0.01);
  CHECK(std::abs(median - num::probit(0.75)) < 0.01);
}

TEST_CASE("delta_sample: constant decoder gives zeros") {
  vae::VaeModel m = linear_model(Tensor::identity(2), Tensor({2}), 1.0,
                                 Tensor({2, 2}), Tensor::vector({0.7, -0.2}));
  RngStream rng(3, 1);
  for (double d : rob::delta_sample(m, Tensor::vector({0.1, 0.9}), rng, 100)) {
    CHECK(d == 0.0);
  }
}

TEST_CASE("estimate_min_r: degenerate zero-variance model stops at the first grid point") {
  vae::VaeModel m = identity_model(1, 1e-15);
  rob::EstimatorConfig cfg;
  cfg.step = 0.05;
  cfg.samples = 100;
  const rob::MinRResult res = rob::estimate_min_r(m, Tensor::vector({0.4}), cfg, RngStream(4, 1));
  CHECK(res.r == doctest::Approx(0.05));
  CHECK(res.p_inside == 1.0);
}

TEST_CASE("estimate_min_r: half-normal case lands on the covering grid point") {
  vae::VaeModel m = identity_model(1, 1.0);
  rob::EstimatorConfig cfg;
  cfg.m = 0.5;
  cfg.step = 0.05;
  cfg.samples = 100000;
  const rob::MinRResult res = rob::estimate_min_r(m, Tensor::vector({0.2}), cfg, RngStream(5, 1));
  // true median 0.6745; admissible outcomes are within one step
  CHECK(std::abs(res.r - 0.6744897501960817) <= cfg.step + 3.0 * 0.0016);
  CHECK(res.p_inside > 0.5);
}

TEST_CASE("estimate_min_r: 2-d identity case covers the chi median") {
  vae::VaeModel m = identity_model(2, 1.0);
  rob::EstimatorConfig cfg;
  cfg.m = 0.5;
  cfg.step = 0.05;
  cfg.samples = 100000;
  const rob::MinRResult res =
      rob::estimate_min_r(m, Tensor::vector({0.2, 0.8}), cfg, RngStream(6, 1));
  const double truth = std::sqrt(2.0 * std::log(2.0));  // 1.17741
  CHECK(std::abs(res.r - truth) <= cfg.step + 3.0 * 0.0016);
}

TEST_CASE("estimate_min_r: cap guard") {
  vae::VaeModel m = identity_model(1, 50.0);  // huge noise, tiny cap
  rob::EstimatorConfig cfg;
  cfg.step = 0.05;
  cfg.samples = 50;
  cfg.r_cap = 1.0;
  CHECK_THROWS_AS(rob::estimate_min_r(m, Tensor::vector({0.0}), cfg, RngStream(7, 1)),
                  rob::CapExceededError);
}

TEST_CASE("min_r_bound closed forms") {
  vae::VaeModel ident = identity_model(2, 1.0);
  CHECK(rob::min_r_bound(ident, Tensor::vector({0.3, 0.7})) == doctest::Approx(2.0).epsilon(1e-9));

  // decoder J = diag(2, 1), sigma = (1,1): sqrt(2 * (4 + 1)) = sqrt(10)
  vae::VaeModel scaled = linear_model(Tensor::identity(2), Tensor({2}), 1.0,
                                      Tensor::matrix(2, 2, {2, 0, 0, 1}), Tensor({2}));
  CHECK(rob::min_r_bound(scaled, Tensor::vector({0.1, 0.2})) ==
        doctest::Approx(std::sqrt(10.0)).epsilon(1e-9));

  vae::VaeModel quiet = identity_model(2, 1e-18);
  CHECK(rob::min_r_bound(quiet, Tensor::vector({0.1, 0.2})) < 1e-12);
}

TEST_CASE("margin_bound: zero when the inside probability is at or below one half") {
  vae::VaeModel m = identity_model(2, 1.0);
  // tiny radius: p ~ 0
  const rob::RobustnessReport rep =
      rob::margin_bound(m, Tensor::vector({0.5, 0.5}), 0.01, RngStream(8, 1), 2000);
  CHECK(rep.p_inside <= 0.5);
  CHECK(rep.margin_bound == 0.0);
}

TEST_CASE("margin_bound: 2-d identity case against the probit oracle") {
  vae::VaeModel m = identity_model(2, 1.0);
  // choose r so the inside probability is Phi(1): |eta|^2 is exponential
  // with mean 2, so r = sqrt(-2 ln(1 - p))
  const double p_target = num::normal_cdf(1.0);
  const double r = std::sqrt(-2.0 * std::log(1.0 - p_target));
  const rob::RobustnessReport rep =
      rob::margin_bound(m, Tensor::vector({0.2, 0.6}), r, RngStream(9, 1), 200000);
  // bound = min_sigma * probit(p) / |J|_F = 1 * 1 / sqrt(2)
  CHECK(rep.jac_norm == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(rep.min_sigma == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(rep.p_inside - p_target) < 3.0 * num::binomial_stderr(p_target, 200000));
  CHECK(rep.margin_bound == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.01));
}

TEST_CASE("margin_bound: doubling the encoder std doubles the bound") {
  // identical noise stream: distances scale exactly by 2 when sigma does,
  // so measuring at 2r reproduces the same empirical p
  vae::VaeModel m1 = identity_model(2, 1.0);
  vae::VaeModel m2 = identity_model(2, 2.0);
  const Tensor x = Tensor::vector({0.4, 0.1});
  const double r = 1.9;
  const rob::RobustnessReport rep1 = rob::margin_bound(m1, x, r, RngStream(10, 3), 20000);
  const rob::RobustnessReport rep2 = rob::margin_bound(m2, x, 2.0 * r, RngStream(10, 3), 20000);
  CHECK(rep1.p_inside == rep2.p_inside);
  CHECK(rep2.margin_bound == doctest::Approx(2.0 * rep1.margin_bound).epsilon(1e-6));
}

TEST_CASE("margin_bound: flat encoder reports an infinite bound with a flag") {
  // zero-weight mean head: J = 0
  vae::VaeModel m = linear_model(Tensor({1, 1}), Tensor({1}), 1.0, Tensor::identity(1),
                                 Tensor({1}));
  const rob::RobustnessReport rep =
      rob::margin_bound(m, Tensor::vector({0.3}), 3.0, RngStream(11, 1), 1000);
  CHECK(rep.flat_encoder);
  CHECK(std::isinf(rep.margin_bound));
}

TEST_CASE("margin_bound is monotone in p, min-sigma and the Jacobian norm") {
  // the formula is evaluated through the report path on parameter sweeps
  vae::VaeModel m = identity_model(2, 1.0);
  const Tensor x = Tensor::vector({0.2, 0.3});
  double prev = -1.0;
  for (double r : {1.5, 1.8, 2.1, 2.4, 2.7}) {
    const rob::RobustnessReport rep = rob::margin_bound(m, x, r, RngStream(12, 5), 50000);
    CHECK(rep.margin_bound >= prev);  // larger r, larger p, larger bound
    prev = rep.margin_bound;
  }
  // sigma sweep at matched p (scale trick as above)
  double prev_bound = 0.0;
  for (double s : {0.5, 1.0, 2.0}) {
    vae::VaeModel ms = identity_model(2, s);
    const rob::RobustnessReport rep =
        rob::margin_bound(ms, x, 1.9 * s, RngStream(13, 2), 20000);
    CHECK(rep.margin_bound > prev_bound);
    prev_bound = rep.margin_bound;
  }
  // Jacobian sweep: scaling the mean head up scales the bound down
  vae::VaeModel j1 = linear_model(num::scale(Tensor::identity(2), 1.0), Tensor({2}), 1.0,
                                  Tensor::identity(2), Tensor({2}));
  vae::VaeModel j2 = linear_model(num::scale(Tensor::identity(2), 3.0), Tensor({2}), 1.0,
                                  Tensor::identity(2), Tensor({2}));
  const rob::RobustnessReport b1 = rob::margin_bound(j1, x, 1.9, RngStream(14, 2), 20000);
  const rob::RobustnessReport b2 = rob::margin_bound(j2, x, 1.9, RngStream(14, 2), 20000);
  CHECK(b2.jac_norm == doctest::Approx(3.0 * b1.jac_norm).epsilon(1e-9));
  CHECK(b2.margin_bound == doctest::Approx(b1.margin_bound / 3.0).epsilon(1e-6));
}

TEST_CASE("estimate_margin: constant decoder returns the initial margin") {
  vae::VaeModel m = linear_model(Tensor::identity(2), Tensor({2}), 1.0, Tensor({2, 2}),
                                 Tensor::vector({0.5, 0.5}));
  rob::EstimatorConfig cfg;
  cfg.samples = 500;
  cfg.initial_margin = 10.0;
  const rob::MarginEstimate me = rob::estimate_margin(
      m, Tensor::vector({0.2, 0.9}), 1.0, cfg, test_attack_fn(), RngStream(15, 1));
  CHECK(me.margin == 10.0);
  CHECK_FALSE(me.not_robust);
}

TEST_CASE("estimate_margin: 1-d linear model recovers the analytic boundary") {
  // true boundary solves Phi(1-R) - Phi(-1-R) = 0.5
  double lo = 0.0, hi = 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double p = num::normal_cdf(1.0 - mid) - num::normal_cdf(-1.0 - mid);
    (p > 0.5 ? lo : hi) = mid;
  }
  const double r_star = 0.5 * (lo + hi);
  CHECK(r_star == doctest::Approx(0.93).epsilon(0.01));

  // Monte Carlo cross-check of the root itself
  RngStream mc(16, 4);
  std::size_t inside = 0;
  const std::size_t n_mc = 100000;
  for (std::size_t i = 0; i < n_mc; ++i) {
    if (std::abs(r_star + mc.gaussian()) < 1.0) ++inside;
  }
  const double p_at_root = static_cast<double>(inside) / n_mc;
  CHECK(std::abs(p_at_root - 0.5) < 3.0 * num::binomial_stderr(0.5, n_mc));

  vae::VaeModel m = identity_model(1, 1.0);
  rob::EstimatorConfig cfg;
  cfg.step = 0.05;
  cfg.samples = 10000;
  cfg.initial_margin = 2.0;
  const rob::MarginEstimate me = rob::estimate_margin(
      m, Tensor::vector({0.5}), 1.0, cfg, test_attack_fn(25, 3, 4), RngStream(16, 1));
  CHECK_FALSE(me.not_robust);
  CHECK(std::abs(me.margin - r_star) <= 2.0 * cfg.step);
}

TEST_CASE("estimate_margin: deterministic limit recovers the radius itself") {
  vae::VaeModel m = identity_model(1, 1e-15);
  rob::EstimatorConfig cfg;
  cfg.step = 0.05;
  cfg.samples = 400;
  cfg.initial_margin = 2.0;
  const rob::MarginEstimate me = rob::estimate_margin(
      m, Tensor::vector({0.5}), 1.0, cfg, test_attack_fn(25, 3, 2), RngStream(17, 1));
  CHECK(std::abs(me.margin - 1.0) <= 2.0 * cfg.step);
}

TEST_CASE("estimate_margin: not robust at the operating radius returns zero") {
  vae::VaeModel m = identity_model(1, 1.0);
  rob::EstimatorConfig cfg;
  cfg.samples = 2000;
  const rob::MarginEstimate me = rob::estimate_margin(
      m, Tensor::vector({0.5}), 0.05, cfg, test_attack_fn(), RngStream(18, 1));
  CHECK(me.not_robust);
  CHECK(me.margin == 0.0);
}

TEST_CASE("estimate_margin: bisection extension agrees with the scan") {
  vae::VaeModel m = identity_model(1, 1.0);
  rob::EstimatorConfig scan;
  scan.step = 0.05;
  scan.samples = 20000;
  scan.initial_margin = 2.0;
  rob::EstimatorConfig bisect = scan;
  bisect.bisection_refine = true;
  const rob::MarginEstimate a = rob::estimate_margin(
      m, Tensor::vector({0.5}), 1.0, scan, test_attack_fn(25, 3, 4), RngStream(19, 1));
  const rob::MarginEstimate b = rob::estimate_margin(
      m, Tensor::vector({0.5}), 1.0, bisect, test_attack_fn(25, 3, 4), RngStream(19, 1));
  CHECK(std::abs(a.margin - b.margin) <= 2.0 * scan.step);
}

TEST_CASE("aggregate_margin") {
  CHECK_THROWS_AS(rob::aggregate_margin({}), std::invalid_argument);
  const rob::MarginSummary single = rob::aggregate_margin({1.7});
  CHECK(single.mean == 1.7);
  CHECK(single.n == 1);
  const rob::MarginSummary s = rob::aggregate_margin({1.0, 2.0, 3.0});
  CHECK(s.mean == doctest::Approx(2.0));
  CHECK(s.median == doctest::Approx(2.0));
  CHECK(s.stddev == doctest::Approx(1.0));
  CHECK(s.min == 1.0);
  CHECK(s.max == 3.0);
}

TEST_CASE("surrogate objective closed cases") {
  // identity encoder/decoder in 1-d at x=1, beta=1:
  // 0 + 0.5 * |J x|^2 + 0.5 ln det(1 + 1) = 0.5 + 0.5 ln 2
  vae::VaeModel m = identity_model(1, 1.0);
  const double got = rob::surrogate_objective(m, Tensor::vector({1.0}), 1.0);
  CHECK(got == doctest::Approx(0.5 + 0.5 * std::log(2.0)).epsilon(1e-9));

  // x = 0 with perfect reconstruction: only the log-det term remains
  vae::VaeModel m2 = identity_model(2, 1.0);
  const double beta = 3.0;
  const double got2 = rob::surrogate_objective(m2, Tensor::vector({0.0, 0.0}), beta);
  CHECK(got2 == doctest::Approx(0.5 * beta * 2.0 * std::log(1.0 + 1.0 / beta)).epsilon(1e-9));

  vae::VaeModel bern = identity_model(1, 1.0);
  bern.family = vae::Likelihood::bernoulli;
  CHECK_THROWS_AS(rob::surrogate_objective(bern, Tensor::vector({0.5}), 1.0),
                  std::invalid_argument);
}

TEST_CASE("surrogate objective large-beta regime matches the eigenvalue expansion") {
  // linear decoder A: G = A A^T has eigenvalues from the 2x2 closed form
  const Tensor a = Tensor::matrix(2, 2, {1.5, 0.3, -0.2, 0.8});
  vae::VaeModel m = linear_model(Tensor::identity(2), Tensor({2}), 1.0, a, Tensor({2}));
  const Tensor g = num::matmul(a, num::transpose(a));
  const double tr = g.at2(0, 0) + g.at2(1, 1);
  const double det = g.at2(0, 0) * g.at2(1, 1) - g.at2(0, 1) * g.at2(1, 0);
  const double l1 = 0.5 * (tr + std::sqrt(tr * tr - 4.0 * det));
  const double l2 = 0.5 * (tr - std::sqrt(tr * tr - 4.0 * det));

  const double beta = 1e6;
  const double x0 = 0.0;
  const double term = rob::surrogate_objective(m, Tensor::vector({x0, x0}), beta);
  // expansion: Tr(G)/2 - (l1^2 + l2^2) / (4 beta) + O(beta^-2)
  const double expansion = 0.5 * tr - (l1 * l1 + l2 * l2) / (4.0 * beta);
  CHECK(term == doctest::Approx(expansion).epsilon(1e-8));
}

TEST_CASE("sufficient-radius consistency on random linear decoders") {
  // At the strict operating convention (inside probability 0.9) the
  // operating radius stays above the closed-form minimum-radius bound on
  // low-dimensional linear decoders.
  RngStream rng(77, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t dz = 1 + trial % 3;
    const std::size_t dx = dz + trial % 2;
    Tensor a({dx, dz});
    num::gaussian_fill(rng, a);
    const double sigma = 0.3 + rng.uniform();
    vae::VaeModel m = linear_model(Tensor({dz, dx}), Tensor({dz}), sigma, a, Tensor({dx}));
    const Tensor x = Tensor({dx});

    rob::EstimatorConfig cfg;
    cfg.m = 0.9;
    cfg.step = 0.05;
    cfg.samples = 4000;
    const rob::MinRResult res = rob::estimate_min_r(m, x, cfg, RngStream(100 + trial, 1));
    const double bound = rob::min_r_bound(m, x);
    CHECK(res.p_inside > 0.5);
    CHECK(res.r > bound - (cfg.step + 3.0 * num::binomial_stderr(0.9, cfg.samples)));
  }
}
