#pragma once

#include <cstdint>
#include <vector>

#include "vaecert/rng.hpp"
#include "vaecert/tensor.hpp"
#include "vaecert/vae.hpp"

namespace vaecert::atk {

using num::RngStream;
using num::Tensor;

/// Which encoder outputs the perturbation propagates to.
enum class Target { mu_only, sigma_only, both };

const char* target_name(Target t);
Target target_from_name(const std::string& name);

struct AttackConfig {
  double budget = 10.0;     // L2 radius of the feasible set
  int steps = 40;           // gradient-ascent iterations per restart
  int restarts = 5;         // first restart starts at 0, the rest on the sphere
  std::size_t n_mc = 8;     // noise draws per objective evaluation
  Target target = Target::both;
  bool single_sample = false;  // one noise draw per evaluation
};

struct AttackResult {
  Tensor delta;
  double damage = 0.0;             // best achieved objective value
  std::vector<double> trace;       // objective per iteration of the winning restart
  double degradation = 0.0;        // relative log-likelihood degradation at delta
  Target target = Target::both;
  std::uint64_t seed = 0;
};

/// Maximum-damage attack: projected gradient ascent on the expected L2
/// distance between the perturbed reconstruction and the reference
/// reconstruction g(mu(x)), with the perturbation routed to the encoder
/// mean, the encoder std, or both. Noise draws are frozen per restart
/// (common random numbers); the best iterate across restarts wins, ties
/// broken by restart order. A warm start, when given, is projected onto
/// the budget ball and used as an extra restart.
AttackResult max_damage_attack(const vae::VaeModel& m, const Tensor& x, const AttackConfig& cfg,
                               RngStream rng, const Tensor* warm_start = nullptr);

/// |log p(x|z*) - log p(x|z)| / |log p(x|z)| with z, z* the mean embeddings
/// of x and x + delta. Throws std::domain_error when log p(x|z) is zero.
double degradation(const vae::VaeModel& m, const Tensor& x, const Tensor& delta);

struct NoisePoint {
  double sigma_eps = 0.0;
  double mean_loglik = 0.0;
};

/// For each noise scale, embeds n noisy copies of x through the encoder
/// mean and averages the log-likelihood of the original x.
std::vector<NoisePoint> noise_sensitivity(const vae::VaeModel& m, const Tensor& x,
                                          const std::vector<double>& sigma_eps_grid,
                                          RngStream rng, std::size_t n);

/// Attacks across a budget grid, warm-starting each budget from the last
/// solution so best damage is nondecreasing in the budget.
std::vector<AttackResult> budget_sweep(const vae::VaeModel& m, const Tensor& x,
                                       const std::vector<double>& budgets, AttackConfig cfg,
                                       RngStream rng);

}  // namespace vaecert::atk
