#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "vaecert/attacks.hpp"
#include "vaecert/dataset.hpp"
#include "vaecert/experiments.hpp"
#include "vaecert/oracles.hpp"
#include "vaecert/robustness.hpp"
#include "vaecert/vae.hpp"

namespace {

using namespace vaecert;

struct GlobalArgs {
  std::string config_path;
  std::string profile = "desk";
  std::string out_dir;
  std::string format;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

exp::ExperimentConfig resolve_config(const GlobalArgs& g) {
  exp::ExperimentConfig cfg = exp::load_config_file(g.config_path, g.profile);
  if (g.seed_set) cfg.seed = g.seed;
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (!g.format.empty()) cfg.format = g.format;
  return cfg;
}

void report_outcome(const exp::SweepOutcome& outcome, const std::string& out_dir) {
  for (const std::string& f : outcome.files) std::cout << "wrote " << out_dir << "/" << f << "\n";
  for (const std::string& f : outcome.failures) std::cout << "failure: " << f << "\n";
}

int cmd_verify_oracles(std::uint64_t seed) {
  bool ok = true;
  num::RngStream rng(seed, 0xacc7);
  const std::vector<double> betas = {0.25, 0.5, 1.0, 2.0, 4.0, 10.0};
  for (int inst = 0; inst < 5; ++inst) {
    const std::size_t dx = 2 + inst % 3;
    const std::size_t dz = 1 + inst % 2;
    oracle::LinearGaussianVae lg;
    lg.w = num::Tensor({dx, dz});
    for (std::size_t i = 0; i < lg.w.size(); ++i) lg.w[i] = rng.gaussian();
    lg.b = num::Tensor({dx});
    for (std::size_t i = 0; i < dx; ++i) lg.b[i] = 0.3 * rng.gaussian();
    lg.gamma = 0.5 + rng.uniform();
    num::Tensor x({dx});
    for (std::size_t i = 0; i < dx; ++i) x[i] = rng.gaussian();

    for (double beta : betas) {
      const oracle::TemperedOptimumReport rep =
          oracle::verify_tempered_optimum(lg, x, beta, 1e-6, 100, seed + inst);
      std::printf("tempered-posterior instance=%d beta=%-5g grad_norm=%.3e perturbations_lower=%zu/%zu %s\n",
                  inst, beta, rep.grad_norm,
                  rep.perturbations_tried - rep.perturbations_not_lower, rep.perturbations_tried,
                  rep.passed ? "[ok]" : "[FAIL]");
      ok = ok && rep.passed;
    }
  }

  // SVD ground truth sanity: hand-checkable diagonal case.
  const num::Tensor a = num::Tensor::matrix(2, 2, {2, 0, 0, 1});
  const num::Tensor w = num::Tensor::identity(2);
  const oracle::SvdOptimum opt = oracle::svd_attack_optimum(w, a, 3.0);
  const bool svd_ok = std::abs(opt.damage - 6.0) < 1e-9;
  std::printf("svd-optimum diag case damage=%.6f %s\n", opt.damage, svd_ok ? "[ok]" : "[FAIL]");
  ok = ok && svd_ok;

  std::printf("verify-oracles: %s\n", ok ? "all checks passed" : "CHECKS FAILED");
  return ok ? exp::kExitOk : exp::kExitFailure;
}

vae::VaeModel require_model(const std::string& path) {
  if (path.empty()) throw exp::ConfigError("--model is required for this command");
  return vae::load_checkpoint(path).model;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"train small Gaussian-encoder VAEs and certify their robustness to input perturbations"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  app.add_option("--config", g.config_path, "JSON config file layered over the profile defaults");
  app.add_option("--profile", g.profile, "base profile: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--format", g.format, "row output format")->check(CLI::IsMember({"csv", "json"}));
  auto* seed_opt = app.add_option("--seed", g.seed, "master seed (no wall-clock defaults)");
  std::string emit_template;
  app.add_option("--emit-config", emit_template,
                 "write an annotated config template for the profile and exit");

  auto* train_cmd = app.add_subcommand("train", "train a model and save its checkpoint");
  auto* attack_cmd = app.add_subcommand("attack", "run maximum-damage attacks per encoder target");
  auto* minr_cmd = app.add_subcommand("min-r", "estimate the smallest radius with inside-probability above m");
  auto* margin_cmd = app.add_subcommand("margin", "estimate the input-space robustness margin");
  auto* bound_cmd = app.add_subcommand("bound", "evaluate the closed-form margin lower bound");
  auto* sweep_tau_cmd = app.add_subcommand("sweep-tau", "train per tau offset and compare robustness");
  auto* sweep_beta_cmd = app.add_subcommand("sweep-beta", "train per beta and compare robustness");
  auto* correlate_cmd = app.add_subcommand("correlate", "margin estimate vs bound over models and inputs");
  auto* plot_cmd = app.add_subcommand("plot", "regenerate figures from a schema-tagged CSV");
  auto* verify_cmd = app.add_subcommand("verify-oracles", "check the closed-form ground truths");

  std::string model_path;
  std::size_t input_index = 0;
  double radius = 0.0;
  bool radius_set = false;
  for (CLI::App* c : {minr_cmd, margin_cmd, bound_cmd}) {
    c->add_option("--model", model_path, "model checkpoint path")->required();
    c->add_option("--input-index", input_index, "dataset item to evaluate");
  }
  auto* margin_r = margin_cmd->add_option("--r", radius, "operating radius (default: from r_rule)");
  auto* bound_r = bound_cmd->add_option("--r", radius, "operating radius (default: from r_rule)");

  std::string plot_csv;
  plot_cmd->add_option("--csv", plot_csv, "CSV produced by a sweep")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return vaecert::exp::kExitConfig;
  }

  g.seed_set = seed_opt->count() > 0;
  radius_set = margin_r->count() > 0 || bound_r->count() > 0;

  try {
    if (!emit_template.empty()) {
      exp::write_config_template(emit_template, g.profile);
      std::cout << "wrote " << emit_template << "\n";
      return exp::kExitOk;
    }
    const exp::ExperimentConfig cfg = resolve_config(g);

    if (*train_cmd) {
      report_outcome(exp::run_train(cfg), cfg.out_dir);
    } else if (*attack_cmd) {
      report_outcome(exp::run_attack_study(cfg), cfg.out_dir);
    } else if (*sweep_tau_cmd) {
      report_outcome(exp::run_tau_sweep(cfg), cfg.out_dir);
    } else if (*sweep_beta_cmd) {
      report_outcome(exp::run_beta_sweep(cfg), cfg.out_dir);
    } else if (*correlate_cmd) {
      const exp::CorrelationOutcome res = exp::run_bound_correlation(cfg);
      report_outcome(res.out, cfg.out_dir);
      if (res.rho_defined) {
        std::printf("pearson rho = %.4f over %zu pairs\n", res.rho, res.n_points);
      } else {
        std::printf("pearson rho undefined (degenerate variance) over %zu pairs\n", res.n_points);
      }
    } else if (*plot_cmd) {
      const std::string out = cfg.out_dir.empty() ? "." : cfg.out_dir;
      for (const std::string& f : exp::emit_plots(plot_csv, out)) {
        std::cout << "wrote " << out << "/" << f << "\n";
      }
    } else if (*verify_cmd) {
      return cmd_verify_oracles(cfg.seed);
    } else if (*minr_cmd || *margin_cmd || *bound_cmd) {
      const vae::VaeModel model = require_model(model_path);
      const data::Dataset ds = data::ingest_dataset(cfg.dataset);
      if (input_index >= ds.items.size()) throw exp::ConfigError("--input-index out of range");
      const num::Tensor& x = ds.items[input_index];
      num::RngStream rng(cfg.seed, 0xc11);

      if (*minr_cmd) {
        const rob::MinRResult res = rob::estimate_min_r(model, x, cfg.estimator, rng);
        std::printf("min-r input=%zu r=%.6f p_inside=%.4f\n", input_index, res.r, res.p_inside);
      } else {
        const double r =
            radius_set ? radius : exp::select_radius(cfg, model, x, rng.substream(0));
        if (*margin_cmd) {
          atk::AttackConfig ac = cfg.attack;
          const rob::AttackFn attack = [&ac](const vae::VaeModel& m, const num::Tensor& xx,
                                             double budget, num::RngStream& r2) {
            atk::AttackConfig local = ac;
            local.budget = budget;
            return atk::max_damage_attack(m, xx, local, r2).delta;
          };
          const rob::MarginEstimate me =
              rob::estimate_margin(model, x, r, cfg.estimator, attack, rng.substream(1));
          std::printf("margin input=%zu r=%.6f margin=%.6f p=%.4f%s\n", input_index, r, me.margin,
                      me.p_at_margin, me.not_robust ? " (not robust)" : "");
        } else {
          const rob::RobustnessReport rep =
              rob::margin_bound(model, x, r, rng.substream(1), cfg.eval_samples);
          std::printf(
              "bound input=%zu r=%.6f p_inside=%.4f [%.4f,%.4f] bound=%.6f min_sigma=%.6f "
              "jac_norm=%.6f r_min_bound=%.6f%s%s\n",
              input_index, r, rep.p_inside, rep.p_lo, rep.p_hi, rep.margin_bound, rep.min_sigma,
              rep.jac_norm, rob::min_r_bound(model, x), rep.flat_encoder ? " (flat encoder)" : "",
              rep.trust_region_exceeded ? " (outside linear trust region)" : "");
        }
      }
    }
    return exp::kExitOk;
  } catch (const exp::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exp::kExitConfig;
  } catch (const data::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exp::kExitDataFormat;
  } catch (const vae::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exp::kExitDivergence;
  } catch (const rob::CapExceededError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exp::kExitCapExceeded;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exp::kExitFailure;
  }
}
