#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vaecert/attacks.hpp"
#include "vaecert/dataset.hpp"
#include "vaecert/robustness.hpp"
#include "vaecert/vae.hpp"

namespace vaecert::exp {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error("config: " + msg) {}
};

// Process exit codes used by the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDataFormat = 3;
inline constexpr int kExitDivergence = 4;
inline constexpr int kExitCapExceeded = 5;

/// Full experiment description. All randomness is derived from `seed`; no
/// wall-clock defaults anywhere, so a rerun reproduces every output byte.
struct ExperimentConfig {
  std::string dataset = "bars:n=256,side=4,seed=11";
  vae::ArchitectureConfig arch;
  vae::TrainConfig train;
  std::vector<double> beta_list = {0.1, 1.0, 10.0};
  std::vector<double> tau_list = {0.0, 0.1, 0.5, 1.0};
  std::vector<double> budget_grid = {0.0, 0.25, 0.5, 1.0, 1.5};
  std::vector<double> sigma_eps_grid = {0.0, 0.1, 0.25, 0.5};
  rob::EstimatorConfig estimator;
  atk::AttackConfig attack;
  /// Operating-radius rule: "fixed:<v>", "quantile:<p>" (per model) or
  /// "shared_quantile:<p>" (computed on the noisiest model, shared).
  std::string r_rule = "quantile:0.9";
  std::uint64_t seed = 0;
  std::size_t n_models = 5;
  std::size_t n_inputs = 25;
  std::size_t eval_samples = 2000;  // MC draws for probability measurements
  /// When set, correlate assigns beta_list entries to models round-robin so
  /// the (bound, margin) cloud spans a range of regularization strengths.
  bool correlate_vary_beta = false;
  std::string out_dir = "out";
  std::string format = "csv";  // "csv" or "json"
};

ExperimentConfig desk_profile();
ExperimentConfig paper_profile();

/// Reads a JSON config, layered over the named profile's defaults.
/// Unknown keys and invalid values raise ConfigError.
ExperimentConfig load_config_file(const std::string& path, const std::string& profile);
ExperimentConfig apply_config_json(ExperimentConfig base, const std::string& json_text);

/// Writes a config template for the profile with a `notes` map explaining
/// where each default comes from.
void write_config_template(const std::string& path, const std::string& profile);

std::string config_canonical_json(const ExperimentConfig& cfg);

struct SweepOutcome {
  std::vector<std::string> files;   // paths written, relative to out_dir
  std::vector<std::string> failures;  // e.g. diverged training runs
};

/// Trains one model per tau and emits perturbation curves, noise
/// sensitivity curves, attack likelihood curves, margins and plots.
SweepOutcome run_tau_sweep(const ExperimentConfig& cfg);

/// Trains one model per beta and emits encoder statistics, margin and bound
/// distributions, attack likelihood curves and plots.
SweepOutcome run_beta_sweep(const ExperimentConfig& cfg);

struct CorrelationOutcome {
  double rho = 0.0;
  bool rho_defined = false;
  std::size_t n_points = 0;
  SweepOutcome out;
};

/// Trains n_models models, evaluates margin estimate vs. closed-form bound
/// per (model, input) pair, computes Pearson rho and draws the scatter.
CorrelationOutcome run_bound_correlation(const ExperimentConfig& cfg);

/// Attacks n_inputs inputs with each encoder target and emits damage rows,
/// traces and the distribution plot.
SweepOutcome run_attack_study(const ExperimentConfig& cfg);

/// Trains a single model from the config, saving the checkpoint and the
/// loss trace.
SweepOutcome run_train(const ExperimentConfig& cfg);

/// Regenerates the figures for a schema-tagged CSV. Returns the files
/// written. Throws std::runtime_error naming any missing column.
std::vector<std::string> emit_plots(const std::string& csv_path, const std::string& out_dir);

/// Writes manifest.json listing every output with its content hash.
void write_manifest(const std::string& out_dir, const ExperimentConfig& cfg,
                    const std::vector<std::string>& files, double elapsed_seconds);

/// Files present in out_dir but not recorded in its manifest.
std::vector<std::string> manifest_orphans(const std::string& out_dir);

/// Operating radius for a (model, input) under the config's r_rule; the
/// shared variant takes the precomputed shared value.
double select_radius(const ExperimentConfig& cfg, const vae::VaeModel& model,
                     const num::Tensor& x, num::RngStream rng);

/// Deterministic evaluation subset: n evenly spaced dataset indices.
std::vector<std::size_t> pick_input_indices(std::size_t dataset_size, std::size_t n);

}  // namespace vaecert::exp
