#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vaecert/autodiff.hpp"
#include "vaecert/rng.hpp"
#include "vaecert/tensor.hpp"

namespace vaecert::vae {

using num::RngStream;
using num::Tensor;

enum class Activation { identity, relu, tanh };

struct DenseLayer {
  Tensor weight;  // out x in
  Tensor bias;    // out
  Activation act = Activation::identity;
};

using Mlp = std::vector<DenseLayer>;

enum class Likelihood { gaussian, bernoulli };

/// Gaussian-encoder VAE. The encoder runs a shared trunk followed by two
/// head MLPs producing the mean and the raw standard-deviation parameter;
/// the encoder std is softplus(raw) + tau, so it is strictly positive and
/// floored at tau. The decoder MLP outputs the reconstruction mean for the
/// gaussian family and logits for the bernoulli family.
struct VaeModel {
  Mlp trunk;       // shared encoder layer(s); may be empty
  Mlp mu_head;
  Mlp sigma_head;
  Mlp decoder;
  double tau = 0.0;
  Likelihood family = Likelihood::gaussian;
  double gamma = 1.0;  // observation std for the gaussian family
  std::size_t data_dim = 0;
  std::size_t latent_dim = 0;

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
};

struct ArchitectureConfig {
  std::size_t data_dim = 16;
  std::size_t latent_dim = 8;
  std::vector<std::size_t> encoder_hidden = {64, 64};  // first entry is the shared layer
  std::vector<std::size_t> decoder_hidden = {64, 64};
  Activation activation = Activation::relu;
  Likelihood family = Likelihood::gaussian;
  double gamma = 1.0;
  double tau = 0.0;
};

/// Builds a model with small random initial weights (deterministic in rng).
VaeModel build_model(const ArchitectureConfig& cfg, RngStream rng);

Tensor mlp_forward(const Mlp& mlp, const Tensor& x);

/// Encoder pass: (mu, sigma) with sigma > 0 and sigma >= tau elementwise.
/// Throws std::runtime_error on non-finite activations.
std::pair<Tensor, Tensor> encode(const VaeModel& m, const Tensor& x);

/// z = mu + eta o sigma with eta drawn from the stream.
Tensor reparam_sample(const VaeModel& m, const Tensor& mu, const Tensor& sigma, RngStream& rng);

/// Reconstruction mean g(z): decoder output, mapped through a sigmoid for
/// the bernoulli family.
Tensor decode(const VaeModel& m, const Tensor& z);
Tensor decode_raw(const VaeModel& m, const Tensor& z);  // logits for bernoulli

/// Exact log-density of the likelihood family at x given decoder output at z.
double log_likelihood(const VaeModel& m, const Tensor& x, const Tensor& z);

/// KL(N(mu, diag sigma^2) || N(0, I)) in closed form.
double gaussian_kl(const Tensor& mu, const Tensor& sigma);

/// Monte Carlo estimate of the beta-weighted evidence lower bound at x.
double elbo(const VaeModel& m, const Tensor& x, double beta, RngStream& rng, std::size_t n_mc);

struct TrainConfig {
  double beta = 1.0;
  double lr = 0.001;
  std::size_t batch = 512;
  std::size_t epochs = 100;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::size_t n_mc = 1;
};

struct TrainResult {
  std::vector<double> loss_trace;  // mean negative beta-ELBO per epoch
};

/// Thrown when the loss stops being finite; carries the trace so far.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(std::vector<double> trace)
      : std::runtime_error("training diverged: non-finite loss"), loss_trace(std::move(trace)) {}
  std::vector<double> loss_trace;
};

/// Adam ascent on the beta-ELBO over the dataset. Deterministic given the
/// config seed; a rerun from the same initial model produces an identical
/// loss trace.
TrainResult train(VaeModel& m, const std::vector<Tensor>& data, const TrainConfig& cfg);

// --- tape builders shared by training, attacks and diagnostics ---

struct MlpVars {
  std::vector<std::pair<ad::Var, ad::Var>> layers;  // (weight, bias)
};

struct ModelVars {
  MlpVars trunk, mu_head, sigma_head, decoder;
};

/// Lifts model parameters onto a tape as gradient-tracked leaves.
ModelVars lift_parameters(ad::Tape& tape, const VaeModel& m);
/// Lifts model parameters as constants (for attacks, where only the input
/// perturbation needs gradients).
ModelVars lift_constants(ad::Tape& tape, const VaeModel& m);

ad::Var mlp_apply(ad::Tape& tape, const Mlp& mlp, const MlpVars& vars, ad::Var x);
ad::Var encode_mu(ad::Tape& tape, const VaeModel& m, const ModelVars& mv, ad::Var x);
ad::Var encode_sigma(ad::Tape& tape, const VaeModel& m, const ModelVars& mv, ad::Var x);
ad::Var decode_mean(ad::Tape& tape, const VaeModel& m, const ModelVars& mv, ad::Var z);
/// log p(x | z) with x fixed (constant) and z a tape expression.
ad::Var log_likelihood_graph(ad::Tape& tape, const VaeModel& m, const ModelVars& mv,
                             const Tensor& x, ad::Var z);
/// Negative beta-ELBO for one datapoint with frozen noise draws.
ad::Var negative_elbo_graph(ad::Tape& tape, const VaeModel& m, const ModelVars& mv,
                            const Tensor& x, double beta, const std::vector<Tensor>& etas);

// --- checkpoint io ---

void save_checkpoint(const VaeModel& m, const TrainConfig& cfg, const std::string& path);
struct Checkpoint {
  VaeModel model;
  TrainConfig train_config;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace vaecert::vae
