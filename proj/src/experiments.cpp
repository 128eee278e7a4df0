#include "vaecert/experiments.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "vaecert/csv.hpp"
#include "vaecert/sha256.hpp"
#include "vaecert/special.hpp"
#include "vaecert/svg.hpp"

namespace vaecert::exp {

namespace fs = std::filesystem;
using json = nlohmann::json;
using io::CsvTable;
using io::format_double;
using num::RngStream;
using num::Tensor;

// --- profiles and config io ---

ExperimentConfig desk_profile() {
  ExperimentConfig cfg;
  cfg.dataset = "bars:n=256,side=4,seed=11";
  cfg.arch.data_dim = 16;
  cfg.arch.latent_dim = 8;
  cfg.arch.encoder_hidden = {64, 64};
  cfg.arch.decoder_hidden = {64, 64};
  cfg.arch.activation = vae::Activation::relu;
  cfg.arch.family = vae::Likelihood::gaussian;
  cfg.arch.gamma = 0.25;
  cfg.train.lr = 0.002;
  cfg.train.batch = 128;
  cfg.train.epochs = 40;
  cfg.estimator.step = 0.05;
  cfg.estimator.samples = 400;
  cfg.estimator.initial_margin = 2.5;
  cfg.estimator.bisection_refine = true;
  cfg.attack.steps = 25;
  cfg.attack.restarts = 3;
  cfg.attack.n_mc = 4;
  cfg.budget_grid = {0.0, 0.25, 0.5, 1.0, 1.5};
  cfg.eval_samples = 2000;
  cfg.n_models = 5;
  cfg.n_inputs = 25;
  return cfg;
}

ExperimentConfig paper_profile() {
  ExperimentConfig cfg;
  cfg.dataset = "bars:n=2048,side=8,seed=11";
  cfg.arch.data_dim = 64;
  cfg.arch.latent_dim = 20;
  cfg.arch.encoder_hidden = {400, 400};
  cfg.arch.decoder_hidden = {400, 400};
  cfg.arch.activation = vae::Activation::relu;
  cfg.arch.family = vae::Likelihood::gaussian;
  cfg.arch.gamma = 0.25;
  cfg.train.lr = 0.001;
  cfg.train.batch = 512;
  cfg.train.epochs = 100;
  cfg.beta_list = {0.1, 0.5, 1.0, 5.0, 10.0};
  cfg.estimator.step = 0.05;
  cfg.estimator.samples = 2000;
  cfg.estimator.initial_margin = 10.0;
  cfg.estimator.bisection_refine = false;
  cfg.attack.steps = 60;
  cfg.attack.restarts = 5;
  cfg.attack.n_mc = 8;
  cfg.budget_grid = {0.0, 0.5, 1.0, 2.0, 5.0, 10.0};
  cfg.eval_samples = 10000;
  return cfg;
}

namespace {

const char* activation_name(vae::Activation a) {
  switch (a) {
    case vae::Activation::identity: return "identity";
    case vae::Activation::relu: return "relu";
    case vae::Activation::tanh: return "tanh";
  }
  return "relu";
}

vae::Activation activation_from(const std::string& s) {
  if (s == "identity") return vae::Activation::identity;
  if (s == "relu") return vae::Activation::relu;
  if (s == "tanh") return vae::Activation::tanh;
  throw ConfigError("unknown activation '" + s + "'");
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["dataset"] = c.dataset;
  j["arch"] = {{"data_dim", c.arch.data_dim},
               {"latent_dim", c.arch.latent_dim},
               {"encoder_hidden", c.arch.encoder_hidden},
               {"decoder_hidden", c.arch.decoder_hidden},
               {"activation", activation_name(c.arch.activation)},
               {"family", c.arch.family == vae::Likelihood::gaussian ? "gaussian" : "bernoulli"},
               {"gamma", c.arch.gamma},
               {"tau", c.arch.tau}};
  j["train"] = {{"beta", c.train.beta},   {"lr", c.train.lr},
                {"batch", c.train.batch}, {"epochs", c.train.epochs},
                {"adam_beta1", c.train.adam_beta1}, {"adam_beta2", c.train.adam_beta2},
                {"adam_eps", c.train.adam_eps},     {"n_mc", c.train.n_mc}};
  j["beta_list"] = c.beta_list;
  j["tau_list"] = c.tau_list;
  j["budget_grid"] = c.budget_grid;
  j["sigma_eps_grid"] = c.sigma_eps_grid;
  j["estimator"] = {{"m", c.estimator.m},
                    {"step", c.estimator.step},
                    {"samples", c.estimator.samples},
                    {"restarts", c.estimator.restarts},
                    {"initial_margin", c.estimator.initial_margin},
                    {"r_cap", c.estimator.r_cap},
                    {"variant", c.estimator.variant == rob::DeltaVariant::perturbed_sigma
                                    ? "perturbed_sigma"
                                    : "fixed_sigma"},
                    {"bisection_refine", c.estimator.bisection_refine}};
  j["attack"] = {{"budget", c.attack.budget},
                 {"steps", c.attack.steps},
                 {"restarts", c.attack.restarts},
                 {"n_mc", c.attack.n_mc},
                 {"target", atk::target_name(c.attack.target)},
                 {"single_sample", c.attack.single_sample}};
  j["r_rule"] = c.r_rule;
  j["seed"] = c.seed;
  j["n_models"] = c.n_models;
  j["n_inputs"] = c.n_inputs;
  j["eval_samples"] = c.eval_samples;
  j["correlate_vary_beta"] = c.correlate_vary_beta;
  j["out_dir"] = c.out_dir;
  j["format"] = c.format;
  return j;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void apply_json_obj(ExperimentConfig& c, const json& j) {
  static const std::vector<std::string> known = {
      "dataset", "arch", "train", "beta_list", "tau_list", "budget_grid", "sigma_eps_grid",
      "estimator", "attack", "r_rule", "seed", "n_models", "n_inputs", "eval_samples",
      "correlate_vary_beta", "out_dir", "format", "notes"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ConfigError("unknown key '" + it.key() + "'");
    }
  }
  maybe(j, "dataset", c.dataset);
  if (j.contains("arch")) {
    const json& a = j.at("arch");
    maybe(a, "data_dim", c.arch.data_dim);
    maybe(a, "latent_dim", c.arch.latent_dim);
    maybe(a, "encoder_hidden", c.arch.encoder_hidden);
    maybe(a, "decoder_hidden", c.arch.decoder_hidden);
    if (a.contains("activation")) c.arch.activation = activation_from(a.at("activation"));
    if (a.contains("family")) {
      const std::string f = a.at("family");
      if (f == "gaussian") c.arch.family = vae::Likelihood::gaussian;
      else if (f == "bernoulli") c.arch.family = vae::Likelihood::bernoulli;
      else throw ConfigError("unknown likelihood family '" + f + "'");
    }
    maybe(a, "gamma", c.arch.gamma);
    maybe(a, "tau", c.arch.tau);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    maybe(t, "beta", c.train.beta);
    maybe(t, "lr", c.train.lr);
    maybe(t, "batch", c.train.batch);
    maybe(t, "epochs", c.train.epochs);
    maybe(t, "adam_beta1", c.train.adam_beta1);
    maybe(t, "adam_beta2", c.train.adam_beta2);
    maybe(t, "adam_eps", c.train.adam_eps);
    maybe(t, "n_mc", c.train.n_mc);
  }
  maybe(j, "beta_list", c.beta_list);
  maybe(j, "tau_list", c.tau_list);
  maybe(j, "budget_grid", c.budget_grid);
  maybe(j, "sigma_eps_grid", c.sigma_eps_grid);
  if (j.contains("estimator")) {
    const json& e = j.at("estimator");
    maybe(e, "m", c.estimator.m);
    maybe(e, "step", c.estimator.step);
    maybe(e, "samples", c.estimator.samples);
    maybe(e, "restarts", c.estimator.restarts);
    maybe(e, "initial_margin", c.estimator.initial_margin);
    maybe(e, "r_cap", c.estimator.r_cap);
    if (e.contains("variant")) {
      const std::string v = e.at("variant");
      if (v == "perturbed_sigma") c.estimator.variant = rob::DeltaVariant::perturbed_sigma;
      else if (v == "fixed_sigma") c.estimator.variant = rob::DeltaVariant::fixed_sigma;
      else throw ConfigError("unknown estimator variant '" + v + "'");
    }
    maybe(e, "bisection_refine", c.estimator.bisection_refine);
  }
  if (j.contains("attack")) {
    const json& a = j.at("attack");
    maybe(a, "budget", c.attack.budget);
    maybe(a, "steps", c.attack.steps);
    maybe(a, "restarts", c.attack.restarts);
    maybe(a, "n_mc", c.attack.n_mc);
    if (a.contains("target")) c.attack.target = atk::target_from_name(a.at("target"));
    maybe(a, "single_sample", c.attack.single_sample);
  }
  maybe(j, "r_rule", c.r_rule);
  maybe(j, "seed", c.seed);
  maybe(j, "n_models", c.n_models);
  maybe(j, "n_inputs", c.n_inputs);
  maybe(j, "eval_samples", c.eval_samples);
  maybe(j, "correlate_vary_beta", c.correlate_vary_beta);
  maybe(j, "out_dir", c.out_dir);
  maybe(j, "format", c.format);
}

void validate(const ExperimentConfig& c) {
  if (c.beta_list.empty()) throw ConfigError("beta_list must be non-empty");
  if (c.tau_list.empty()) throw ConfigError("tau_list must be non-empty");
  if (c.budget_grid.empty()) throw ConfigError("budget_grid must be non-empty");
  if (c.sigma_eps_grid.empty()) throw ConfigError("sigma_eps_grid must be non-empty");
  if (!(c.estimator.m > 0.0 && c.estimator.m < 1.0)) throw ConfigError("estimator.m must be in (0,1)");
  if (c.estimator.step <= 0.0) throw ConfigError("estimator.step must be positive");
  if (c.estimator.samples < 1) throw ConfigError("estimator.samples must be >= 1");
  if (c.n_models < 1 || c.n_inputs < 1) throw ConfigError("n_models and n_inputs must be >= 1");
  if (c.format != "csv" && c.format != "json") throw ConfigError("format must be csv or json");
  if (c.train.beta <= 0.0) throw ConfigError("train.beta must be positive");
  for (double b : c.beta_list) {
    if (b <= 0.0) throw ConfigError("beta_list entries must be positive");
  }
  for (double t : c.tau_list) {
    if (t < 0.0) throw ConfigError("tau_list entries must be non-negative");
  }
  const std::size_t colon = c.r_rule.find(':');
  const std::string kind = c.r_rule.substr(0, colon);
  if (kind != "fixed" && kind != "quantile" && kind != "shared_quantile") {
    throw ConfigError("r_rule must be fixed:<v>, quantile:<p> or shared_quantile:<p>");
  }
}

}  // namespace

ExperimentConfig apply_config_json(ExperimentConfig base, const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  try {
    apply_json_obj(base, j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value: ") + e.what());
  }
  validate(base);
  return base;
}

ExperimentConfig load_config_file(const std::string& path, const std::string& profile) {
  ExperimentConfig base;
  if (profile == "desk") base = desk_profile();
  else if (profile == "paper") base = paper_profile();
  else throw ConfigError("unknown profile '" + profile + "'");
  if (path.empty()) {
    validate(base);
    return base;
  }
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return apply_config_json(std::move(base), ss.str());
}

void write_config_template(const std::string& path, const std::string& profile) {
  ExperimentConfig cfg = profile == "paper" ? paper_profile() : desk_profile();
  json j = config_to_json(cfg);
  j["notes"] = {
      {"train.lr", "published default learning rate 0.001 (paper profile)"},
      {"train.batch", "published default batch size 512 (paper profile)"},
      {"train.epochs", "published default 100 epochs (paper profile)"},
      {"arch.encoder_hidden", "two hidden layers sharing the first; 400 units at paper scale"},
      {"arch.latent_dim", "20 at paper scale, 8 at desk scale"},
      {"tau_list", "encoder-std offsets 0, 0.1, 0.5, 1"},
      {"beta_list", "KL penalty sweep; published grid is 0.1, 0.5, 1, 5, 10"},
      {"attack.budget", "attack norms capped to 10 at image scale"},
      {"sigma_eps_grid", "input noise study up to sigma 0.5"},
      {"estimator.initial_margin", "margin search starts at 10"},
      {"estimator.restarts", "5 attack restarts per candidate margin"},
      {"r_rule", "quantile:0.9 selects r with inside-probability 0.9"},
  };
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write template to " + path);
  out << j.dump(2) << "\n";
}

std::string config_canonical_json(const ExperimentConfig& cfg) {
  return config_to_json(cfg).dump();
}

// --- shared helpers ---

std::vector<std::size_t> pick_input_indices(std::size_t dataset_size, std::size_t n) {
  n = std::min(n, dataset_size);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i * dataset_size / n;
  return idx;
}

namespace {

struct RRule {
  std::string kind;
  double value = 0.9;
};

RRule parse_r_rule(const std::string& rule) {
  const std::size_t colon = rule.find(':');
  if (colon == std::string::npos) throw ConfigError("malformed r_rule '" + rule + "'");
  return {rule.substr(0, colon), std::stod(rule.substr(colon + 1))};
}

double quantile_radius(const ExperimentConfig& cfg, const vae::VaeModel& model, const Tensor& x,
                       double p, RngStream rng) {
  rob::EstimatorConfig ec = cfg.estimator;
  ec.m = p;
  return rob::estimate_min_r(model, x, ec, rng).r;
}

}  // namespace

double select_radius(const ExperimentConfig& cfg, const vae::VaeModel& model, const Tensor& x,
                     RngStream rng) {
  const RRule rule = parse_r_rule(cfg.r_rule);
  if (rule.kind == "fixed") return rule.value;
  return quantile_radius(cfg, model, x, rule.value, rng);
}

namespace {

vae::VaeModel train_model(const ExperimentConfig& cfg, double beta, double tau,
                          std::uint64_t model_index, const std::vector<Tensor>& data,
                          std::vector<double>* trace_out) {
  vae::ArchitectureConfig arch = cfg.arch;
  arch.tau = tau;
  vae::TrainConfig tc = cfg.train;
  tc.beta = beta;
  tc.seed = cfg.seed + 7919 * (model_index + 1);
  vae::VaeModel model = vae::build_model(arch, RngStream(tc.seed, 1));
  vae::TrainResult res = vae::train(model, data, tc);
  if (trace_out) *trace_out = res.loss_trace;
  return model;
}

rob::AttackFn make_attack_fn(const ExperimentConfig& cfg) {
  atk::AttackConfig base = cfg.attack;
  return [base](const vae::VaeModel& m, const Tensor& x, double budget,
                RngStream& rng) -> Tensor {
    atk::AttackConfig ac = base;
    ac.budget = budget;
    return atk::max_damage_attack(m, x, ac, rng).delta;
  };
}

std::string join_path(const std::string& dir, const std::string& file) {
  return (fs::path(dir) / file).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir);
}

// Mean/sd over a vector.
std::pair<double, double> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return {m, sd};
}

void write_table(const ExperimentConfig& cfg, const CsvTable& table, const std::string& stem,
                 std::vector<std::string>& files) {
  const std::string csv_path = join_path(cfg.out_dir, stem + ".csv");
  io::write_csv(table, csv_path);
  files.push_back(stem + ".csv");
  if (cfg.format == "json") {
    json rows = json::array();
    for (const auto& row : table.rows) {
      json r;
      for (std::size_t i = 0; i < table.columns.size(); ++i) r[table.columns[i]] = row[i];
      rows.push_back(std::move(r));
    }
    json doc = {{"schema", table.schema}, {"version", table.version}, {"rows", rows}};
    const std::string json_path = join_path(cfg.out_dir, stem + ".json");
    std::ofstream out(json_path, std::ios::binary);
    out << doc.dump(2) << "\n";
    files.push_back(stem + ".json");
  }
}

void plot_and_collect(const ExperimentConfig& cfg, const std::string& stem,
                      std::vector<std::string>& files) {
  const std::vector<std::string> plots =
      emit_plots(join_path(cfg.out_dir, stem + ".csv"), cfg.out_dir);
  for (const std::string& p : plots) files.push_back(p);
}

}  // namespace

// --- manifest ---

void write_manifest(const std::string& out_dir, const ExperimentConfig& cfg,
                    const std::vector<std::string>& files, double elapsed_seconds) {
  json j;
  j["format"] = "vaecert-manifest-v1";
  j["config_hash"] = io::sha256_hex(config_canonical_json(cfg));
  j["config"] = json::parse(config_canonical_json(cfg));
  j["elapsed_seconds"] = elapsed_seconds;
  json list = json::array();
  for (const std::string& f : files) {
    const std::string full = join_path(out_dir, f);
    list.push_back({{"path", f},
                    {"sha256", io::sha256_file(full)},
                    {"bytes", fs::file_size(full)}});
  }
  j["files"] = list;
  std::ofstream out(join_path(out_dir, "manifest.json"), std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest in " + out_dir);
  out << j.dump(2) << "\n";
}

std::vector<std::string> manifest_orphans(const std::string& out_dir) {
  std::ifstream in(join_path(out_dir, "manifest.json"));
  if (!in) throw std::runtime_error("no manifest.json in " + out_dir);
  json j = json::parse(in);
  std::vector<std::string> listed;
  for (const json& f : j.at("files")) listed.push_back(f.at("path").get<std::string>());
  std::vector<std::string> orphans;
  for (const auto& entry : fs::directory_iterator(out_dir)) {
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json") continue;
    if (std::find(listed.begin(), listed.end(), name) == listed.end()) orphans.push_back(name);
  }
  std::sort(orphans.begin(), orphans.end());
  return orphans;
}

// --- sweeps ---

SweepOutcome run_tau_sweep(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  ensure_dir(cfg.out_dir);
  SweepOutcome outcome;

  const data::Dataset ds = data::ingest_dataset(cfg.dataset);
  const std::vector<std::size_t> inputs = pick_input_indices(ds.items.size(), cfg.n_inputs);

  struct TauModel {
    double tau;
    vae::VaeModel model;
  };
  std::vector<TauModel> models;
  for (std::size_t ti = 0; ti < cfg.tau_list.size(); ++ti) {
    try {
      // matched seed across the sweep: only tau varies between the models
      models.push_back({cfg.tau_list[ti],
                        train_model(cfg, cfg.train.beta, cfg.tau_list[ti], 0, ds.items, nullptr)});
    } catch (const vae::DivergenceError&) {
      outcome.failures.push_back("tau=" + format_double(cfg.tau_list[ti]) + ": training diverged");
    }
  }
  if (models.empty()) {
    write_manifest(cfg.out_dir, cfg, outcome.files, 0.0);
    return outcome;
  }

  // Shared operating radius, chosen on the noisiest model so every tau is
  // robust at delta = 0.
  const RRule rule = parse_r_rule(cfg.r_rule);
  double radius = rule.value;
  if (rule.kind != "fixed") {
    const vae::VaeModel& noisiest = models.back().model;
    std::vector<double> rs;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      rs.push_back(quantile_radius(cfg, noisiest, ds.items[inputs[k]], rule.value,
                                   RngStream(cfg.seed, 0x2000 + k)));
    }
    radius = mean_sd(rs).first;
  }

  const rob::AttackFn attack = make_attack_fn(cfg);

  CsvTable margins;
  margins.schema = "vaecert.tau_margins";
  margins.columns = {"tau", "input_id", "r", "margin", "p_at_margin", "not_robust",
                     "margin_bound", "min_sigma", "jac_norm"};
  CsvTable pdelta;
  pdelta.schema = "vaecert.tau_pdelta";
  pdelta.columns = {"tau", "budget", "p_mean", "p_sd"};
  CsvTable noise;
  noise.schema = "vaecert.tau_noise";
  noise.columns = {"tau", "sigma_eps", "loglik_mean", "loglik_sd"};
  CsvTable attacklik;
  attacklik.schema = "vaecert.tau_attacklik";
  attacklik.columns = {"tau", "budget", "loglik_mean", "loglik_sd"};

  for (std::size_t ti = 0; ti < models.size(); ++ti) {
    const double tau = models[ti].tau;
    const vae::VaeModel& model = models[ti].model;

    for (std::size_t bi = 0; bi < cfg.budget_grid.size(); ++bi) {
      const double budget = cfg.budget_grid[bi];
      std::vector<double> ps, lls;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Tensor& x = ds.items[inputs[k]];
        RngStream rng(cfg.seed, 0x3000 + ti * 1000 + bi * 50 + k);
        Tensor delta({model.data_dim});
        if (budget > 0.0) {
          atk::AttackConfig ac = cfg.attack;
          ac.budget = budget;
          delta = atk::max_damage_attack(model, x, ac, rng.substream(0)).delta;
        }
        RngStream srng = rng.substream(1);
        const std::vector<double> d = rob::delta_sample_perturbed(
            model, x, delta, cfg.estimator.variant, srng, cfg.eval_samples);
        std::size_t inside = 0;
        for (double v : d) {
          if (v < radius) ++inside;
        }
        ps.push_back(static_cast<double>(inside) / static_cast<double>(d.size()));
        const auto [mu_star, sig_star] = vae::encode(model, num::add(x, delta));
        (void)sig_star;
        lls.push_back(vae::log_likelihood(model, x, mu_star));
      }
      const auto [pm, psd] = mean_sd(ps);
      pdelta.add_row({format_double(tau), format_double(budget), format_double(pm),
                      format_double(psd)});
      const auto [lm, lsd] = mean_sd(lls);
      attacklik.add_row({format_double(tau), format_double(budget), format_double(lm),
                         format_double(lsd)});
    }

    for (double se : cfg.sigma_eps_grid) {
      std::vector<double> lls;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        RngStream rng(cfg.seed, 0x4000 + ti * 1000 + k);
        const auto pts = atk::noise_sensitivity(model, ds.items[inputs[k]], {se}, rng,
                                                std::max<std::size_t>(cfg.eval_samples / 10, 50));
        lls.push_back(pts[0].mean_loglik);
      }
      const auto [lm, lsd] = mean_sd(lls);
      noise.add_row({format_double(tau), format_double(se), format_double(lm),
                     format_double(lsd)});
    }

    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const Tensor& x = ds.items[inputs[k]];
      RngStream rng(cfg.seed, 0x5000 + ti * 1000 + k);
      const rob::MarginEstimate me =
          rob::estimate_margin(model, x, radius, cfg.estimator, attack, rng.substream(0));
      const rob::RobustnessReport rep =
          rob::margin_bound(model, x, radius, rng.substream(1), cfg.eval_samples);
      margins.add_row({format_double(tau), std::to_string(inputs[k]), format_double(radius),
                       format_double(me.margin), format_double(me.p_at_margin),
                       me.not_robust ? "1" : "0", format_double(rep.margin_bound),
                       format_double(rep.min_sigma), format_double(rep.jac_norm)});
    }
  }

  write_table(cfg, margins, "tau_margins", outcome.files);
  write_table(cfg, pdelta, "tau_pdelta", outcome.files);
  write_table(cfg, noise, "tau_noise", outcome.files);
  write_table(cfg, attacklik, "tau_attacklik", outcome.files);
  for (const char* stem : {"tau_margins", "tau_pdelta", "tau_noise", "tau_attacklik"}) {
    plot_and_collect(cfg, stem, outcome.files);
  }

  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(cfg.out_dir, cfg, outcome.files, elapsed);
  return outcome;
}

SweepOutcome run_beta_sweep(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  ensure_dir(cfg.out_dir);
  SweepOutcome outcome;

  const data::Dataset ds = data::ingest_dataset(cfg.dataset);
  const std::vector<std::size_t> inputs = pick_input_indices(ds.items.size(), cfg.n_inputs);
  const rob::AttackFn attack = make_attack_fn(cfg);

  CsvTable stats;
  stats.schema = "vaecert.beta_stats";
  stats.columns = {"beta", "mean_min_sigma", "sd_min_sigma", "mean_jac_norm", "sd_jac_norm",
                   "mean_margin", "sd_margin", "mean_bound", "sd_bound"};
  CsvTable rows;
  rows.schema = "vaecert.beta_margins";
  rows.columns = {"beta", "input_id", "r", "margin", "margin_bound", "p_inside", "min_sigma",
                  "jac_norm", "not_robust"};
  CsvTable attacklik;
  attacklik.schema = "vaecert.beta_attacklik";
  attacklik.columns = {"beta", "budget", "loglik_mean", "loglik_sd"};

  for (std::size_t bi = 0; bi < cfg.beta_list.size(); ++bi) {
    const double beta = cfg.beta_list[bi];
    vae::VaeModel model;
    try {
      // matched seed across the sweep: only beta varies between the models
      model = train_model(cfg, beta, cfg.arch.tau, 0, ds.items, nullptr);
    } catch (const vae::DivergenceError&) {
      outcome.failures.push_back("beta=" + format_double(beta) + ": training diverged");
      continue;
    }

    std::vector<double> min_sigmas, jac_norms, margins_v, bounds_v;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const Tensor& x = ds.items[inputs[k]];
      RngStream rng(cfg.seed, 0x6000 + bi * 1000 + k);
      const double radius = select_radius(cfg, model, x, rng.substream(0));
      const rob::RobustnessReport rep =
          rob::margin_bound(model, x, radius, rng.substream(1), cfg.eval_samples);
      const rob::MarginEstimate me =
          rob::estimate_margin(model, x, radius, cfg.estimator, attack, rng.substream(2));
      min_sigmas.push_back(rep.min_sigma);
      jac_norms.push_back(rep.jac_norm);
      margins_v.push_back(me.margin);
      if (std::isfinite(rep.margin_bound)) bounds_v.push_back(rep.margin_bound);
      rows.add_row({format_double(beta), std::to_string(inputs[k]), format_double(radius),
                    format_double(me.margin), format_double(rep.margin_bound),
                    format_double(rep.p_inside), format_double(rep.min_sigma),
                    format_double(rep.jac_norm), me.not_robust ? "1" : "0"});
    }

    for (std::size_t gi = 0; gi < cfg.budget_grid.size(); ++gi) {
      const double budget = cfg.budget_grid[gi];
      std::vector<double> lls;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Tensor& x = ds.items[inputs[k]];
        RngStream rng(cfg.seed, 0x7000 + bi * 1000 + gi * 50 + k);
        Tensor delta({model.data_dim});
        if (budget > 0.0) {
          atk::AttackConfig ac = cfg.attack;
          ac.budget = budget;
          delta = atk::max_damage_attack(model, x, ac, rng).delta;
        }
        const auto [mu_star, sig_star] = vae::encode(model, num::add(x, delta));
        (void)sig_star;
        lls.push_back(vae::log_likelihood(model, x, mu_star));
      }
      const auto [lm, lsd] = mean_sd(lls);
      attacklik.add_row({format_double(beta), format_double(budget), format_double(lm),
                         format_double(lsd)});
    }

    const auto [ms, ss] = mean_sd(min_sigmas);
    const auto [mj, sj] = mean_sd(jac_norms);
    const auto [mm, sm] = mean_sd(margins_v);
    const auto [mb, sb] = mean_sd(bounds_v);
    stats.add_row({format_double(beta), format_double(ms), format_double(ss), format_double(mj),
                   format_double(sj), format_double(mm), format_double(sm), format_double(mb),
                   format_double(sb)});
  }

  write_table(cfg, stats, "beta_stats", outcome.files);
  write_table(cfg, rows, "beta_margins", outcome.files);
  write_table(cfg, attacklik, "beta_attacklik", outcome.files);
  for (const char* stem : {"beta_stats", "beta_margins", "beta_attacklik"}) {
    plot_and_collect(cfg, stem, outcome.files);
  }

  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(cfg.out_dir, cfg, outcome.files, elapsed);
  return outcome;
}

CorrelationOutcome run_bound_correlation(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.n_models < 2) throw ConfigError("correlate: at least 2 models required");
  if (cfg.n_inputs < 5) throw ConfigError("correlate: at least 5 inputs per model required");
  ensure_dir(cfg.out_dir);
  CorrelationOutcome res;

  const data::Dataset ds = data::ingest_dataset(cfg.dataset);
  const std::vector<std::size_t> inputs = pick_input_indices(ds.items.size(), cfg.n_inputs);
  const rob::AttackFn attack = make_attack_fn(cfg);

  CsvTable table;
  table.schema = "vaecert.robustness_report";
  table.columns = {"model_id", "input_id", "r", "p_inside", "p_lo", "p_hi", "r_min_estimate",
                   "r_min_bound", "margin_estimate", "margin_bound", "min_sigma", "jac_norm",
                   "n_samples", "seed", "flat_encoder", "trust_region_exceeded", "not_robust"};

  std::vector<std::pair<double, double>> points;  // (bound, estimate)
  for (std::size_t mi = 0; mi < cfg.n_models; ++mi) {
    const double beta = cfg.correlate_vary_beta ? cfg.beta_list[mi % cfg.beta_list.size()]
                                                : cfg.train.beta;
    vae::VaeModel model;
    try {
      model = train_model(cfg, beta, cfg.arch.tau, mi, ds.items, nullptr);
    } catch (const vae::DivergenceError&) {
      res.out.failures.push_back("model " + std::to_string(mi) + ": training diverged");
      continue;
    }
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const Tensor& x = ds.items[inputs[k]];
      RngStream rng(cfg.seed, 0x8000 + mi * 1000 + k);
      const rob::MinRResult mr = [&] {
        rob::EstimatorConfig ec = cfg.estimator;
        const RRule rule = parse_r_rule(cfg.r_rule);
        ec.m = rule.kind == "fixed" ? cfg.estimator.m : rule.value;
        return rob::estimate_min_r(model, x, ec, rng.substream(0));
      }();
      const RRule rule = parse_r_rule(cfg.r_rule);
      const double radius = rule.kind == "fixed" ? rule.value : mr.r;
      rob::RobustnessReport rep =
          rob::margin_bound(model, x, radius, rng.substream(1), cfg.eval_samples);
      rep.input_id = std::to_string(inputs[k]);
      rep.r_min_estimate = mr.r;
      rep.r_min_bound = rob::min_r_bound(model, x);
      const rob::MarginEstimate me =
          rob::estimate_margin(model, x, radius, cfg.estimator, attack, rng.substream(2));
      rep.margin_estimate = me.margin;
      rep.not_robust = rep.not_robust || me.not_robust;

      table.add_row({std::to_string(mi), rep.input_id, format_double(rep.r),
                     format_double(rep.p_inside), format_double(rep.p_lo),
                     format_double(rep.p_hi), format_double(rep.r_min_estimate),
                     format_double(rep.r_min_bound), format_double(rep.margin_estimate),
                     format_double(rep.margin_bound), format_double(rep.min_sigma),
                     format_double(rep.jac_norm), std::to_string(rep.n_samples),
                     std::to_string(rep.seed), rep.flat_encoder ? "1" : "0",
                     rep.trust_region_exceeded ? "1" : "0", rep.not_robust ? "1" : "0"});
      if (std::isfinite(rep.margin_bound)) {
        points.emplace_back(rep.margin_bound, rep.margin_estimate);
      }
    }
  }

  res.n_points = points.size();
  if (points.size() >= 2) {
    double sx = 0, sy = 0;
    for (const auto& [x, y] : points) {
      sx += x;
      sy += y;
    }
    const double n = static_cast<double>(points.size());
    const double mx = sx / n, my = sy / n;
    double cxy = 0, cxx = 0, cyy = 0;
    for (const auto& [x, y] : points) {
      cxy += (x - mx) * (y - my);
      cxx += (x - mx) * (x - mx);
      cyy += (y - my) * (y - my);
    }
    if (cxx > 0.0 && cyy > 0.0) {
      res.rho = cxy / std::sqrt(cxx * cyy);
      res.rho_defined = true;
    }
  }

  CsvTable summary;
  summary.schema = "vaecert.correlation_summary";
  summary.columns = {"rho", "rho_defined", "n_points"};
  summary.add_row({res.rho_defined ? format_double(res.rho) : "undefined",
                   res.rho_defined ? "1" : "0", std::to_string(res.n_points)});

  write_table(cfg, table, "robustness_reports", res.out.files);
  write_table(cfg, summary, "correlation_summary", res.out.files);
  plot_and_collect(cfg, "robustness_reports", res.out.files);

  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(cfg.out_dir, cfg, res.out.files, elapsed);
  return res;
}

SweepOutcome run_attack_study(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  ensure_dir(cfg.out_dir);
  SweepOutcome outcome;

  const data::Dataset ds = data::ingest_dataset(cfg.dataset);
  const std::vector<std::size_t> inputs = pick_input_indices(ds.items.size(), cfg.n_inputs);

  vae::VaeModel model;
  try {
    model = train_model(cfg, cfg.train.beta, cfg.arch.tau, 0, ds.items, nullptr);
  } catch (const vae::DivergenceError&) {
    outcome.failures.push_back("training diverged");
    write_manifest(cfg.out_dir, cfg, outcome.files, 0.0);
    return outcome;
  }

  CsvTable results;
  results.schema = "vaecert.attack_results";
  results.columns = {"input_id", "target", "budget", "damage", "degradation", "delta_norm",
                     "seed"};
  CsvTable traces;
  traces.schema = "vaecert.attack_traces";
  traces.columns = {"input_id", "target", "iteration", "objective"};

  for (const atk::Target target : {atk::Target::mu_only, atk::Target::sigma_only,
                                   atk::Target::both}) {
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      atk::AttackConfig ac = cfg.attack;
      ac.target = target;
      RngStream rng(cfg.seed, 0x9000 + static_cast<std::uint64_t>(target) * 1000 + k);
      const atk::AttackResult ar = atk::max_damage_attack(model, ds.items[inputs[k]], ac, rng);
      results.add_row({std::to_string(inputs[k]), atk::target_name(target),
                       format_double(ac.budget), format_double(ar.damage),
                       format_double(ar.degradation), format_double(num::l2_norm(ar.delta)),
                       std::to_string(ar.seed)});
      for (std::size_t it = 0; it < ar.trace.size(); ++it) {
        traces.add_row({std::to_string(inputs[k]), atk::target_name(target), std::to_string(it),
                        format_double(ar.trace[it])});
      }
    }
  }

  write_table(cfg, results, "attack_results", outcome.files);
  write_table(cfg, traces, "attack_traces", outcome.files);
  plot_and_collect(cfg, "attack_results", outcome.files);

  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(cfg.out_dir, cfg, outcome.files, elapsed);
  return outcome;
}

SweepOutcome run_train(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  ensure_dir(cfg.out_dir);
  SweepOutcome outcome;

  const data::Dataset ds = data::ingest_dataset(cfg.dataset);
  std::vector<double> trace;
  vae::VaeModel model = train_model(cfg, cfg.train.beta, cfg.arch.tau, 0, ds.items, &trace);

  vae::TrainConfig tc = cfg.train;
  tc.seed = cfg.seed + 7919;
  vae::save_checkpoint(model, tc, join_path(cfg.out_dir, "checkpoint.json"));
  outcome.files.push_back("checkpoint.json");

  CsvTable loss;
  loss.schema = "vaecert.loss_trace";
  loss.columns = {"epoch", "negative_elbo"};
  for (std::size_t e = 0; e < trace.size(); ++e) {
    loss.add_row({std::to_string(e), format_double(trace[e])});
  }
  write_table(cfg, loss, "loss_trace", outcome.files);

  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(cfg.out_dir, cfg, outcome.files, elapsed);
  return outcome;
}

// --- plotting ---

namespace {

std::vector<double> column_values(const CsvTable& t, const std::string& name) {
  const std::size_t idx = t.column_index(name);
  std::vector<double> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) out.push_back(std::stod(row[idx]));
  return out;
}

// Group rows by a key column (preserving first-seen order) and build one
// series per group from (xcol, ycol).
std::vector<io::Series> grouped_series(const CsvTable& t, const std::string& key,
                                       const std::string& xcol, const std::string& ycol) {
  const std::size_t ki = t.column_index(key);
  const std::size_t xi = t.column_index(xcol);
  const std::size_t yi = t.column_index(ycol);
  std::vector<io::Series> series;
  for (const auto& row : t.rows) {
    const std::string label = key + "=" + row[ki];
    auto it = std::find_if(series.begin(), series.end(),
                           [&](const io::Series& s) { return s.label == label; });
    if (it == series.end()) {
      series.push_back({label, {}});
      it = series.end() - 1;
    }
    it->points.emplace_back(std::stod(row[xi]), std::stod(row[yi]));
  }
  return series;
}

std::string save_svg(const std::string& out_dir, const std::string& name,
                     const std::string& content) {
  std::ofstream out((fs::path(out_dir) / name).string(), std::ios::binary);
  if (!out) throw std::runtime_error("cannot write plot " + name);
  out << content;
  return name;
}

}  // namespace

std::vector<std::string> emit_plots(const std::string& csv_path, const std::string& out_dir) {
  const CsvTable t = io::read_csv(csv_path);
  std::vector<std::string> files;
  io::PlotOptions opts;

  if (t.schema == "vaecert.tau_pdelta") {
    io::require_columns(t, {"tau", "budget", "p_mean"});
    opts.title = "Inside probability vs perturbation size";
    opts.xlabel = "attack budget";
    opts.ylabel = "p(reconstruction within r)";
    files.push_back(save_svg(out_dir, "tau_pdelta.svg",
                             svg_line_chart(grouped_series(t, "tau", "budget", "p_mean"), opts)));
  } else if (t.schema == "vaecert.tau_noise") {
    io::require_columns(t, {"tau", "sigma_eps", "loglik_mean"});
    opts.title = "Noise sensitivity";
    opts.xlabel = "input noise std";
    opts.ylabel = "mean log-likelihood of original";
    files.push_back(
        save_svg(out_dir, "tau_noise.svg",
                 svg_line_chart(grouped_series(t, "tau", "sigma_eps", "loglik_mean"), opts)));
  } else if (t.schema == "vaecert.tau_attacklik") {
    io::require_columns(t, {"tau", "budget", "loglik_mean"});
    opts.title = "Likelihood under attack";
    opts.xlabel = "attack budget";
    opts.ylabel = "mean log-likelihood of original";
    files.push_back(
        save_svg(out_dir, "tau_attacklik.svg",
                 svg_line_chart(grouped_series(t, "tau", "budget", "loglik_mean"), opts)));
  } else if (t.schema == "vaecert.tau_margins") {
    io::require_columns(t, {"tau", "margin"});
    const std::size_t ti = t.column_index("tau");
    const std::size_t mi = t.column_index("margin");
    std::vector<std::string> labels;
    std::vector<std::vector<double>> groups;
    for (const auto& row : t.rows) {
      const std::string label = "tau=" + row[ti];
      auto it = std::find(labels.begin(), labels.end(), label);
      if (it == labels.end()) {
        labels.push_back(label);
        groups.emplace_back();
        it = labels.end() - 1;
      }
      groups[static_cast<std::size_t>(it - labels.begin())].push_back(std::stod(row[mi]));
    }
    opts.title = "Estimated robustness margin by tau";
    opts.ylabel = "margin";
    files.push_back(save_svg(out_dir, "tau_margins.svg", svg_box_summary(labels, groups, opts)));
  } else if (t.schema == "vaecert.beta_stats") {
    io::require_columns(t, {"beta", "mean_min_sigma", "sd_min_sigma", "mean_jac_norm",
                            "sd_jac_norm", "mean_margin", "sd_margin", "mean_bound", "sd_bound"});
    const std::size_t bi = t.column_index("beta");
    std::vector<std::string> labels;
    for (const auto& row : t.rows) labels.push_back("beta=" + row[bi]);
    const struct {
      const char* value;
      const char* err;
      const char* name;
      const char* title;
    } charts[] = {
        {"mean_min_sigma", "sd_min_sigma", "beta_min_sigma.svg", "Encoder std floor vs beta"},
        {"mean_jac_norm", "sd_jac_norm", "beta_jac_norm.svg", "Encoder Jacobian norm vs beta"},
        {"mean_margin", "sd_margin", "beta_margin.svg", "Estimated margin vs beta"},
        {"mean_bound", "sd_bound", "beta_bound.svg", "Margin bound vs beta"},
    };
    for (const auto& ch : charts) {
      opts.title = ch.title;
      opts.ylabel = ch.value;
      files.push_back(save_svg(out_dir, ch.name,
                               svg_bar_chart(labels, column_values(t, ch.value),
                                             column_values(t, ch.err), opts)));
    }
  } else if (t.schema == "vaecert.beta_margins") {
    io::require_columns(t, {"beta", "margin"});
    const std::size_t bi = t.column_index("beta");
    const std::size_t mi = t.column_index("margin");
    std::vector<std::string> labels;
    std::vector<std::vector<double>> groups;
    for (const auto& row : t.rows) {
      const std::string label = "beta=" + row[bi];
      auto it = std::find(labels.begin(), labels.end(), label);
      if (it == labels.end()) {
        labels.push_back(label);
        groups.emplace_back();
        it = labels.end() - 1;
      }
      groups[static_cast<std::size_t>(it - labels.begin())].push_back(std::stod(row[mi]));
    }
    opts.title = "Margin distribution by beta";
    opts.ylabel = "margin";
    files.push_back(save_svg(out_dir, "beta_margins.svg", svg_box_summary(labels, groups, opts)));
  } else if (t.schema == "vaecert.beta_attacklik") {
    io::require_columns(t, {"beta", "budget", "loglik_mean"});
    opts.title = "Likelihood under attack";
    opts.xlabel = "attack budget";
    opts.ylabel = "mean log-likelihood of original";
    files.push_back(
        save_svg(out_dir, "beta_attacklik.svg",
                 svg_line_chart(grouped_series(t, "beta", "budget", "loglik_mean"), opts)));
  } else if (t.schema == "vaecert.robustness_report") {
    io::require_columns(t, {"margin_bound", "margin_estimate"});
    std::vector<std::pair<double, double>> pts;
    const std::size_t xi = t.column_index("margin_bound");
    const std::size_t yi = t.column_index("margin_estimate");
    for (const auto& row : t.rows) {
      const double x = std::stod(row[xi]);
      const double y = std::stod(row[yi]);
      if (std::isfinite(x) && std::isfinite(y)) pts.emplace_back(x, y);
    }
    opts.title = "Estimated margin vs closed-form bound";
    opts.xlabel = "margin bound";
    opts.ylabel = "estimated margin";
    files.push_back(
        save_svg(out_dir, "correlation_scatter.svg", svg_scatter(pts, opts, true, true)));
  } else if (t.schema == "vaecert.attack_results") {
    io::require_columns(t, {"target", "damage"});
    const std::size_t ti = t.column_index("target");
    const std::size_t di = t.column_index("damage");
    std::vector<std::string> labels;
    std::vector<std::vector<double>> groups;
    for (const auto& row : t.rows) {
      auto it = std::find(labels.begin(), labels.end(), row[ti]);
      if (it == labels.end()) {
        labels.push_back(row[ti]);
        groups.emplace_back();
        it = labels.end() - 1;
      }
      groups[static_cast<std::size_t>(it - labels.begin())].push_back(std::stod(row[di]));
    }
    opts.title = "Attack damage by encoder target";
    opts.ylabel = "damage";
    files.push_back(
        save_svg(out_dir, "attack_damage.svg", svg_box_summary(labels, groups, opts)));
  } else if (t.schema == "vaecert.loss_trace") {
    io::require_columns(t, {"epoch", "negative_elbo"});
    std::vector<io::Series> series(1);
    series[0].label = "loss";
    const std::size_t ei = t.column_index("epoch");
    const std::size_t li = t.column_index("negative_elbo");
    for (const auto& row : t.rows) {
      series[0].points.emplace_back(std::stod(row[ei]), std::stod(row[li]));
    }
    opts.title = "Training loss";
    opts.xlabel = "epoch";
    opts.ylabel = "negative ELBO";
    files.push_back(save_svg(out_dir, "loss_trace.svg", svg_line_chart(series, opts)));
  } else {
    throw std::runtime_error("emit_plots: unknown schema '" + t.schema + "'");
  }
  return files;
}

}  // namespace vaecert::exp
