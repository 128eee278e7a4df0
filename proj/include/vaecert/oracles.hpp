#pragma once

#include <cstdint>
#include <functional>

#include "vaecert/rng.hpp"
#include "vaecert/tensor.hpp"

namespace vaecert::oracle {

using num::RngStream;
using num::Tensor;

/// Linear-Gaussian generative model: z ~ N(0, I), x | z ~ N(Wz + b, gamma^2 I).
/// Everything about it is available in closed form, which makes it the
/// ground truth for the variational and attack machinery.
struct LinearGaussianVae {
  Tensor w;      // data_dim x latent_dim
  Tensor b;      // data_dim
  double gamma = 1.0;
};

struct GaussianDist {
  Tensor mean;  // rank-1
  Tensor cov;   // rank-2
};

/// Normalized density proportional to p(z) * p(x|z)^(1/beta):
/// covariance (I + W^T W / (beta gamma^2))^-1 and mean cov * W^T (x-b) / (beta gamma^2).
GaussianDist tempered_posterior(const LinearGaussianVae& lg, const Tensor& x, double beta);

struct TemperedOptimumReport {
  bool passed = false;
  double grad_norm = 0.0;          // beta-ELBO gradient at the tempered posterior
  double elbo_at_optimum = 0.0;
  std::size_t perturbations_tried = 0;
  std::size_t perturbations_not_lower = 0;
  double worst_gap = 0.0;          // most positive (perturbed - optimum); negative when passing
};

/// Checks that the tempered posterior maximizes the beta-weighted evidence
/// lower bound over full-covariance Gaussians: (i) the ELBO gradient in the
/// (mean, Cholesky factor) parameterization vanishes at the tempered
/// posterior within tol, and (ii) random parameter perturbations of scale
/// 0.1 never increase the ELBO.
TemperedOptimumReport verify_tempered_optimum(const LinearGaussianVae& lg, const Tensor& x, double beta,
                               double tol = 1e-6, std::size_t n_perturbations = 100,
                               std::uint64_t seed = 0);

/// Closed-form beta-ELBO of a Gaussian q = N(m, L L^T) under the model.
double linear_gaussian_beta_elbo(const LinearGaussianVae& lg, const Tensor& x, double beta,
                                 const Tensor& mean, const Tensor& chol);

/// Expected log evidence of the best linear-Gaussian fit to the sample:
/// the ceiling a linear VAE's ELBO can reach on this data (gamma fixed).
double best_linear_gaussian_elbo_1d(const std::vector<Tensor>& data, double gamma);

struct SvdOptimum {
  Tensor delta;        // optimal input perturbation, norm = budget
  double damage = 0.0; // budget * sigma_max(decoder * encoder)
  bool degenerate = false;
};

/// Ground truth for the maximum-damage attack on a fully linear model with
/// (near-)deterministic encoder: the optimum is the top right-singular
/// vector of decoder*encoder scaled to the budget.
SvdOptimum svd_attack_optimum(const Tensor& encoder_w, const Tensor& decoder_a, double budget);

enum class Statistic { mean, variance, median };

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

/// Brute-force Monte Carlo estimate of a statistic of a scalar draw.
/// Requires n >= 1000. Standard errors: mean via sample sd, variance via
/// fourth-moment formula, median via the order-statistic interval.
McEstimate mc_reference(const std::function<double(RngStream&)>& draw, Statistic stat,
                        std::size_t n, RngStream rng);

}  // namespace vaecert::oracle
