#include "vaecert/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vaecert/autodiff.hpp"
#include "vaecert/linalg.hpp"
#include "vaecert/special.hpp"

namespace vaecert::rob {

namespace {

Tensor encoder_mean_jacobian(const vae::VaeModel& m, const Tensor& x) {
  return ad::jacobian(
      [&m](ad::Tape& tape, ad::Var xv) {
        vae::ModelVars mv = vae::lift_constants(tape, m);
        return vae::encode_mu(tape, m, mv, xv);
      },
      x);
}

Tensor decoder_jacobian(const vae::VaeModel& m, const Tensor& z) {
  return ad::jacobian(
      [&m](ad::Tape& tape, ad::Var zv) {
        vae::ModelVars mv = vae::lift_constants(tape, m);
        return vae::decode_mean(tape, m, mv, zv);
      },
      z);
}

double inside_fraction(const std::vector<double>& d, double r) {
  std::size_t k = 0;
  for (double v : d) {
    if (v < r) ++k;
  }
  return static_cast<double>(k) / static_cast<double>(d.size());
}

}  // namespace

std::vector<double> delta_sample(const vae::VaeModel& m, const Tensor& x, RngStream& rng,
                                 std::size_t n) {
  const auto [mu, sigma] = vae::encode(m, x);
  const Tensor ref = vae::decode(m, mu);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor z = vae::reparam_sample(m, mu, sigma, rng);
    out[i] = num::l2_norm(num::sub(vae::decode(m, z), ref));
  }
  return out;
}

std::vector<double> delta_sample_perturbed(const vae::VaeModel& m, const Tensor& x,
                                           const Tensor& delta, DeltaVariant variant,
                                           RngStream& rng, std::size_t n) {
  const auto [mu0, sigma0] = vae::encode(m, x);
  const auto [mu_p, sigma_p] = vae::encode(m, num::add(x, delta));
  const Tensor& sigma = variant == DeltaVariant::perturbed_sigma ? sigma_p : sigma0;
  const Tensor ref = vae::decode(m, mu0);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor z = vae::reparam_sample(m, mu_p, sigma, rng);
    out[i] = num::l2_norm(num::sub(vae::decode(m, z), ref));
  }
  return out;
}

MinRResult estimate_min_r(const vae::VaeModel& m, const Tensor& x, const EstimatorConfig& cfg,
                          RngStream rng) {
  if (!(cfg.m > 0.0 && cfg.m < 1.0)) throw std::invalid_argument("estimate_min_r: m in (0,1) required");
  if (cfg.step <= 0.0) throw std::invalid_argument("estimate_min_r: step must be positive");
  if (cfg.samples < 1) throw std::invalid_argument("estimate_min_r: samples must be >= 1");

  double r = 0.0;
  double p = 0.0;
  // Robustness requires a strict p > m; ties at the threshold keep scanning.
  while (p <= cfg.m) {
    const std::vector<double> d = delta_sample(m, x, rng, cfg.samples);
    r += cfg.step;
    p = inside_fraction(d, r);
    if (r > cfg.r_cap) throw CapExceededError(cfg.r_cap, p);
  }
  return {r, p};
}

double min_r_bound(const vae::VaeModel& m, const Tensor& x) {
  const auto [mu, sigma] = vae::encode(m, x);
  const Tensor j = decoder_jacobian(m, mu);
  num::require_finite(j, "min_r_bound: decoder Jacobian");
  // Tr(J diag(sigma^2) J^T) = sum_j sigma_j^2 |column j|^2
  double trace = 0.0;
  for (std::size_t col = 0; col < j.cols(); ++col) {
    double csq = 0.0;
    for (std::size_t row = 0; row < j.rows(); ++row) csq += j.at2(row, col) * j.at2(row, col);
    trace += sigma[col] * sigma[col] * csq;
  }
  return std::sqrt(2.0 * trace);
}

RobustnessReport margin_bound(const vae::VaeModel& m, const Tensor& x, double r, RngStream rng,
                              std::size_t samples) {
  if (r <= 0.0) throw std::domain_error("margin_bound: r must be positive");
  RobustnessReport rep;
  rep.r = r;
  rep.n_samples = samples;
  rep.seed = rng.seed();

  const std::vector<double> d = delta_sample(m, x, rng, samples);
  std::size_t inside = 0;
  for (double v : d) {
    if (v < r) ++inside;
  }
  rep.p_inside = static_cast<double>(inside) / static_cast<double>(samples);
  const num::Interval ci = num::wilson_interval(inside, samples);
  rep.p_lo = ci.lo;
  rep.p_hi = ci.hi;

  const auto [mu, sigma] = vae::encode(m, x);
  rep.min_sigma = num::min_value(sigma);
  const Tensor j = encoder_mean_jacobian(m, x);
  num::require_finite(j, "margin_bound: encoder Jacobian");
  rep.jac_norm = num::frobenius_norm(j);

  if (rep.jac_norm == 0.0) {
    rep.flat_encoder = true;
    rep.margin_bound = std::numeric_limits<double>::infinity();
    return rep;
  }
  if (rep.p_inside <= 0.5) {
    rep.margin_bound = 0.0;
    rep.not_robust = rep.p_inside <= 0.5;
    return rep;
  }
  // an all-inside batch saturates the plug-in estimate; cap it at the
  // resolution the sample count can actually resolve
  const double p_plug = std::min(rep.p_inside, 1.0 - 0.5 / static_cast<double>(samples));
  rep.margin_bound = rep.min_sigma * num::probit(p_plug) / rep.jac_norm;

  // First-order trust check: compare J delta against the actual encoder-mean
  // shift at the bound radius along the most-stretched direction.
  const num::TopSingular top = num::top_singular_pair(j);
  if (top.sigma > 0.0 && std::isfinite(rep.margin_bound) && rep.margin_bound > 0.0) {
    const Tensor delta = num::scale(top.right, rep.margin_bound);
    const Tensor lin = num::matmul(j, delta);
    const auto [mu_p, sigma_p] = vae::encode(m, num::add(x, delta));
    (void)sigma_p;
    const Tensor actual = num::sub(mu_p, mu);
    const double lin_norm = num::l2_norm(lin);
    if (lin_norm > 0.0) {
      const double mismatch = num::l2_norm(num::sub(actual, lin)) / lin_norm;
      rep.trust_region_exceeded = mismatch > 0.10;
    }
  }
  return rep;
}

namespace {

double margin_probe(const vae::VaeModel& m, const Tensor& x, double r, double candidate,
                    const EstimatorConfig& cfg, const AttackFn& attack, RngStream& rng,
                    std::uint64_t probe_id) {
  RngStream attack_rng = rng.substream(2 * probe_id);
  RngStream sample_rng = rng.substream(2 * probe_id + 1);
  const Tensor delta = attack(m, x, candidate, attack_rng);
  const std::vector<double> d =
      delta_sample_perturbed(m, x, delta, cfg.variant, sample_rng, cfg.samples);
  return inside_fraction(d, r);
}

}  // namespace

MarginEstimate estimate_margin(const vae::VaeModel& m, const Tensor& x, double r,
                               const EstimatorConfig& cfg, const AttackFn& attack,
                               RngStream rng) {
  if (cfg.step <= 0.0) throw std::invalid_argument("estimate_margin: step must be positive");

  // Robust at delta = 0 is a precondition; otherwise the margin is zero.
  RngStream base_rng = rng.substream(0xbaae);
  const std::vector<double> d0 = delta_sample(m, x, base_rng, cfg.samples);
  const double p0 = inside_fraction(d0, r);
  if (p0 <= cfg.m) return {0.0, p0, true};

  std::uint64_t probe = 0;

  if (cfg.bisection_refine) {
    // Extension to the downward scan: keep [lo, hi] with lo passing and hi
    // failing, halving to step resolution.
    double hi = cfg.initial_margin;
    const double p_hi = margin_probe(m, x, r, hi, cfg, attack, rng, probe++);
    if (p_hi > 0.5) return {hi, p_hi, false};
    double lo = 0.0, p_lo = p0;
    while (hi - lo > cfg.step) {
      const double mid = 0.5 * (lo + hi);
      const double p_mid = margin_probe(m, x, r, mid, cfg, attack, rng, probe++);
      if (p_mid > 0.5) {
        lo = mid;
        p_lo = p_mid;
      } else {
        hi = mid;
      }
    }
    if (lo == 0.0) return {0.0, p_lo, true};
    return {lo, p_lo, false};
  }

  double candidate = cfg.initial_margin;
  double last_p = p0;
  while (candidate > 0.0) {
    last_p = margin_probe(m, x, r, candidate, cfg, attack, rng, probe++);
    if (last_p > 0.5) return {candidate, last_p, false};
    candidate -= cfg.step;
  }
  return {0.0, last_p, true};
}

MarginSummary aggregate_margin(const std::vector<double>& margins) {
  if (margins.empty()) throw std::invalid_argument("aggregate_margin: no reports");
  MarginSummary s;
  s.n = margins.size();
  double acc = 0.0;
  for (double v : margins) acc += v;
  s.mean = acc / static_cast<double>(s.n);
  double ss = 0.0;
  for (double v : margins) ss += (v - s.mean) * (v - s.mean);
  s.stddev = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;

  std::vector<double> sorted = margins;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&sorted](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    if (i + 1 >= sorted.size()) return sorted.back();
    return sorted[i] * (1.0 - frac) + sorted[i + 1] * frac;
  };
  s.min = sorted.front();
  s.q25 = quantile(0.25);
  s.median = quantile(0.5);
  s.q75 = quantile(0.75);
  s.max = sorted.back();
  return s;
}

double surrogate_objective(const vae::VaeModel& m, const Tensor& x, double beta) {
  if (m.family != vae::Likelihood::gaussian) {
    throw std::invalid_argument("surrogate_objective: gaussian likelihood required");
  }
  if (beta <= 0.0) throw std::domain_error("surrogate_objective: beta must be positive");

  const auto [mu, sigma] = vae::encode(m, x);
  (void)sigma;
  const Tensor recon = vae::decode(m, mu);
  const double fit = 0.5 * num::sum_squares(num::sub(x, recon));

  const Tensor jmu = encoder_mean_jacobian(m, x);
  const double contraction = 0.5 * beta * num::sum_squares(num::matmul(jmu, x));

  const Tensor jdec = decoder_jacobian(m, mu);
  Tensor gram = num::matmul(jdec, num::transpose(jdec));
  gram = num::scale(gram, 1.0 / beta);
  for (std::size_t i = 0; i < gram.rows(); ++i) gram.at2(i, i) += 1.0;
  const double volume = 0.5 * beta * num::spd_logdet(gram);

  return fit + contraction + volume;
}

}  // namespace vaecert::rob
