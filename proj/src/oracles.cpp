#include "vaecert/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vaecert/autodiff.hpp"
#include "vaecert/linalg.hpp"

namespace vaecert::oracle {

GaussianDist tempered_posterior(const LinearGaussianVae& lg, const Tensor& x, double beta) {
  if (beta <= 0.0) throw std::domain_error("tempered_posterior: beta must be positive");
  if (lg.gamma <= 0.0) throw std::domain_error("tempered_posterior: gamma must be positive");
  const std::size_t dz = lg.w.cols();
  const double s = 1.0 / (beta * lg.gamma * lg.gamma);

  Tensor precision = num::matmul(num::transpose(lg.w), lg.w);
  precision = num::scale(precision, s);
  for (std::size_t i = 0; i < dz; ++i) precision.at2(i, i) += 1.0;

  GaussianDist out;
  out.cov = num::spd_inverse(precision);
  const Tensor rhs = num::scale(num::matmul(num::transpose(lg.w), num::sub(x, lg.b)), s);
  out.mean = num::matmul(out.cov, rhs);
  return out;
}

namespace {

// The q = N(m, L L^T) parameter block is a flat vector: the d mean entries,
// then per column j the log-diagonal followed by the strict below-diagonal
// entries of L.
std::size_t param_count(std::size_t d) { return d + d * (d + 1) / 2; }

ad::Var build_column(ad::Tape& tape, ad::Var params, std::size_t d, std::size_t j,
                     std::size_t offset) {
  ad::Var logd = tape.slice(params, offset, 1);
  ad::Var col = tape.exp(logd);
  if (j + 1 < d) {
    col = tape.concat(col, tape.slice(params, offset + 1, d - j - 1));
  }
  if (j > 0) {
    col = tape.concat(tape.constant(Tensor({j})), col);
  }
  return col;
}

// Closed-form beta-ELBO graph over the flat parameter vector.
ad::Var beta_elbo_graph(ad::Tape& tape, const LinearGaussianVae& lg, const Tensor& x,
                        double beta, ad::Var params) {
  const std::size_t d = lg.w.cols();
  const std::size_t dx = lg.w.rows();
  const double g2 = lg.gamma * lg.gamma;

  ad::Var mean = tape.slice(params, 0, d);
  ad::Var wc = tape.constant(lg.w);

  // E_q log p(x|z) = -dx/2 log(2 pi g2) - (|x - b - Wm|^2 + |WL|_F^2) / (2 g2)
  ad::Var resid = tape.sub(tape.constant(num::sub(x, lg.b)), tape.matmul(wc, mean));
  ad::Var quad = tape.sum(tape.square(resid));

  ad::Var trace_cov{};    // Tr(L L^T)
  ad::Var wl_sq{};        // |W L|_F^2
  ad::Var logdet_half{};  // sum_j log L_jj
  std::size_t off = d;
  for (std::size_t j = 0; j < d; ++j) {
    ad::Var col = build_column(tape, params, d, j, off);
    ad::Var csq = tape.sum(tape.square(col));
    ad::Var wcol = tape.sum(tape.square(tape.matmul(wc, col)));
    ad::Var ld = tape.slice(params, off, 1);
    trace_cov = j == 0 ? csq : tape.add(trace_cov, csq);
    wl_sq = j == 0 ? wcol : tape.add(wl_sq, wcol);
    logdet_half = j == 0 ? tape.sum(ld) : tape.add(logdet_half, tape.sum(ld));
    off += d - j;
  }

  ad::Var recon = tape.add_const(
      tape.scale(tape.add(quad, wl_sq), -1.0 / (2.0 * g2)),
      -0.5 * static_cast<double>(dx) * std::log(2.0 * std::numbers::pi * g2));

  // KL(q || N(0,I)) = 0.5 (Tr(LL^T) + |m|^2 - d) - sum_j log L_jj
  ad::Var kl = tape.add_const(
      tape.scale(tape.add(trace_cov, tape.sum(tape.square(mean))), 0.5),
      -0.5 * static_cast<double>(d));
  kl = tape.sub(kl, logdet_half);

  return tape.sub(recon, tape.scale(kl, beta));
}

Tensor pack_params(const Tensor& mean, const Tensor& chol) {
  const std::size_t d = mean.size();
  Tensor params({param_count(d)});
  for (std::size_t i = 0; i < d; ++i) params[i] = mean[i];
  std::size_t off = d;
  for (std::size_t j = 0; j < d; ++j) {
    params[off] = std::log(chol.at2(j, j));
    for (std::size_t i = j + 1; i < d; ++i) params[off + (i - j)] = chol.at2(i, j);
    off += d - j;
  }
  return params;
}

}  // namespace

double linear_gaussian_beta_elbo(const LinearGaussianVae& lg, const Tensor& x, double beta,
                                 const Tensor& mean, const Tensor& chol) {
  ad::Tape tape;
  ad::Var params = tape.constant(pack_params(mean, chol));
  return tape.value(beta_elbo_graph(tape, lg, x, beta, params))[0];
}

TemperedOptimumReport verify_tempered_optimum(const LinearGaussianVae& lg, const Tensor& x, double beta,
                               double tol, std::size_t n_perturbations, std::uint64_t seed) {
  const GaussianDist opt = tempered_posterior(lg, x, beta);
  const Tensor chol = num::cholesky(opt.cov);
  const Tensor p0 = pack_params(opt.mean, chol);

  TemperedOptimumReport rep;

  ad::Tape tape;
  ad::Var params = tape.leaf(p0);
  ad::Var elbo = beta_elbo_graph(tape, lg, x, beta, params);
  rep.elbo_at_optimum = tape.value(elbo)[0];
  tape.backward(elbo);
  rep.grad_norm = num::l2_norm(tape.grad(params));

  RngStream rng(seed, 0x7e2u);
  rep.perturbations_tried = n_perturbations;
  rep.worst_gap = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n_perturbations; ++k) {
    Tensor p = p0;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += 0.1 * rng.gaussian();
    ad::Tape t2;
    ad::Var pv = t2.constant(p);
    const double e = t2.value(beta_elbo_graph(t2, lg, x, beta, pv))[0];
    const double gap = e - rep.elbo_at_optimum;
    rep.worst_gap = std::max(rep.worst_gap, gap);
    if (!(e < rep.elbo_at_optimum)) ++rep.perturbations_not_lower;
  }

  rep.passed = rep.grad_norm < tol && rep.perturbations_not_lower == 0;
  return rep;
}

double best_linear_gaussian_elbo_1d(const std::vector<Tensor>& data, double gamma) {
  if (data.empty()) throw std::invalid_argument("best_linear_gaussian_elbo_1d: empty data");
  double mean = 0.0;
  for (const Tensor& t : data) mean += t[0];
  mean /= static_cast<double>(data.size());
  double var = 0.0;
  for (const Tensor& t : data) var += (t[0] - mean) * (t[0] - mean);
  var /= static_cast<double>(data.size());

  const double g2 = gamma * gamma;
  // Marginal is N(b, w^2 + gamma^2); the variance can't drop below gamma^2.
  const double v = std::max(var, g2);
  return -0.5 * std::log(2.0 * std::numbers::pi * v) - var / (2.0 * v);
}

SvdOptimum svd_attack_optimum(const Tensor& encoder_w, const Tensor& decoder_a, double budget) {
  if (budget < 0.0) throw std::domain_error("svd_attack_optimum: negative budget");
  const Tensor m = num::matmul(decoder_a, encoder_w);
  const num::TopSingular top = num::top_singular_pair(m);
  SvdOptimum out;
  out.delta = num::scale(top.right, budget);
  out.damage = budget * top.sigma;
  out.degenerate = top.degenerate;
  return out;
}

McEstimate mc_reference(const std::function<double(RngStream&)>& draw, Statistic stat,
                        std::size_t n, RngStream rng) {
  if (n < 1000) throw std::invalid_argument("mc_reference: n must be at least 1000");
  std::vector<double> xs(n);
  for (double& v : xs) v = draw(rng);

  McEstimate out;
  out.n = n;
  const double dn = static_cast<double>(n);

  switch (stat) {
    case Statistic::mean: {
      double s = 0.0;
      for (double v : xs) s += v;
      const double mean = s / dn;
      double ss = 0.0;
      for (double v : xs) ss += (v - mean) * (v - mean);
      out.value = mean;
      out.std_error = std::sqrt(ss / (dn - 1.0) / dn);
      break;
    }
    case Statistic::variance: {
      double s = 0.0;
      for (double v : xs) s += v;
      const double mean = s / dn;
      double m2 = 0.0, m4 = 0.0;
      for (double v : xs) {
        const double d = v - mean;
        m2 += d * d;
        m4 += d * d * d * d;
      }
      m2 /= dn;
      m4 /= dn;
      out.value = m2 * dn / (dn - 1.0);
      out.std_error = std::sqrt(std::max(m4 - m2 * m2, 0.0) / dn);
      break;
    }
    case Statistic::median: {
      std::sort(xs.begin(), xs.end());
      out.value = n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
      const double half_width = 1.959963984540054 * std::sqrt(dn) / 2.0;
      const std::size_t lo = static_cast<std::size_t>(std::max(0.0, dn / 2.0 - half_width));
      const std::size_t hi = static_cast<std::size_t>(std::min(dn - 1.0, dn / 2.0 + half_width));
      out.std_error = (xs[hi] - xs[lo]) / (2.0 * 1.959963984540054);
      break;
    }
  }
  return out;
}

}  // namespace vaecert::oracle
