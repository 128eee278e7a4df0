#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vaecert/rng.hpp"
#include "vaecert/tensor.hpp"
#include "vaecert/vae.hpp"

namespace vaecert::rob {

using num::RngStream;
using num::Tensor;

/// Which encoder std enters the perturbed reconstruction distance: the
/// estimation algorithm samples with sigma(x + delta); the margin
/// definition itself uses sigma(x). Both are available.
enum class DeltaVariant { perturbed_sigma, fixed_sigma };

struct EstimatorConfig {
  double m = 0.5;                // risk threshold; robustness needs p > m
  double step = 0.05;            // grid increment
  std::size_t samples = 10000;   // Monte Carlo draws per grid point
  int restarts = 5;              // attack restarts per candidate margin
  double initial_margin = 10.0;
  double r_cap = 1000.0;         // termination guard for the radius search
  DeltaVariant variant = DeltaVariant::perturbed_sigma;
  bool bisection_refine = false; // extension: bisect instead of scanning down
};

/// Thrown when the radius search exceeds the configured cap.
struct CapExceededError : std::runtime_error {
  CapExceededError(double cap, double p)
      : std::runtime_error("estimate_min_r: radius cap exceeded"), cap(cap), p_at_cap(p) {}
  double cap;
  double p_at_cap;
};

/// Per-input robustness record; one CSV row per (model, input).
struct RobustnessReport {
  std::string input_id;
  double r = 0.0;                 // operating radius in reconstruction space
  double p_inside = 0.0;          // estimated p(|Delta(x)| <= r)
  double p_lo = 0.0, p_hi = 0.0;  // Wilson 95% interval for p_inside
  double r_min_estimate = 0.0;
  double r_min_bound = 0.0;
  double margin_estimate = 0.0;
  double margin_bound = 0.0;      // closed-form lower bound, higher-order terms dropped
  double min_sigma = 0.0;
  double jac_norm = 0.0;          // Frobenius norm of the encoder-mean Jacobian
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  bool flat_encoder = false;          // jac_norm == 0; bound reported as +inf
  bool trust_region_exceeded = false; // local linearization mismatch > 10% at the bound radius
  bool not_robust = false;            // p_inside <= m already at delta = 0
};

/// n draws of |g(mu + eta o sigma) - g(mu)|_2 at the unperturbed input.
std::vector<double> delta_sample(const vae::VaeModel& m, const Tensor& x, RngStream& rng,
                                 std::size_t n);

/// Same distance with a fixed input perturbation applied to the encoder
/// mean path; the std follows the configured variant.
std::vector<double> delta_sample_perturbed(const vae::VaeModel& m, const Tensor& x,
                                           const Tensor& delta, DeltaVariant variant,
                                           RngStream& rng, std::size_t n);

struct MinRResult {
  double r = 0.0;
  double p_inside = 0.0;
};

/// Smallest grid multiple of cfg.step at which the empirical inside
/// fraction strictly exceeds cfg.m; a fresh sample batch is drawn per grid
/// point. Throws CapExceededError past cfg.r_cap.
MinRResult estimate_min_r(const vae::VaeModel& m, const Tensor& x, const EstimatorConfig& cfg,
                          RngStream rng);

/// Necessary-radius style closed form sqrt(2 Tr(J sigma^2 J^T)) with J the
/// decoder Jacobian at the mean embedding. Higher-order terms are dropped.
double min_r_bound(const vae::VaeModel& m, const Tensor& x);

/// Estimates p(|Delta(x)| <= r) by Monte Carlo and evaluates the
/// closed-form margin lower bound min_sigma * probit(p) / |J|_F, clamped to
/// zero when p <= 0.5. Records p, the Wilson interval, min sigma, the
/// Jacobian norm and the trust-region flag in the report.
RobustnessReport margin_bound(const vae::VaeModel& m, const Tensor& x, double r, RngStream rng,
                              std::size_t samples);

using AttackFn = std::function<Tensor(const vae::VaeModel&, const Tensor& x, double budget,
                                      RngStream&)>;

struct MarginEstimate {
  double margin = 0.0;
  double p_at_margin = 0.0;
  bool not_robust = false;  // not robust even with delta = 0, or margin hit 0
};

/// Numerical estimate of the input-space robustness margin: starting at
/// cfg.initial_margin, attack at the candidate radius, sample perturbed
/// reconstruction distances, and shrink the candidate by cfg.step until the
/// inside fraction exceeds 0.5. Returns the first passing radius.
MarginEstimate estimate_margin(const vae::VaeModel& m, const Tensor& x, double r,
                               const EstimatorConfig& cfg, const AttackFn& attack, RngStream rng);

struct MarginSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double max = 0.0;
};

/// Dataset-level aggregation of per-input margins. Throws on empty input.
MarginSummary aggregate_margin(const std::vector<double>& margins);

/// Closed-form training-objective diagnostic for the gaussian family:
/// 0.5 |x - g(mu(x))|^2 + (beta/2) |J_mu x|^2 + (beta/2) log det(I + G/beta)
/// with G the decoder Jacobian Gram matrix. Never used as a training loss.
double surrogate_objective(const vae::VaeModel& m, const Tensor& x, double beta);

}  // namespace vaecert::rob
