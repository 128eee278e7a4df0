// Acceptance suite: runs every acceptance criterion end to end against the
// library and the experiment pipeline, printing one PASS/FAIL line per
// criterion. Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "vaecert/attacks.hpp"
#include "vaecert/autodiff.hpp"
#include "vaecert/csv.hpp"
#include "vaecert/dataset.hpp"
#include "vaecert/experiments.hpp"
#include "vaecert/oracles.hpp"
#include "vaecert/robustness.hpp"
#include "vaecert/special.hpp"
#include "vaecert/vae.hpp"

using namespace vaecert;
using num::RngStream;
using num::Tensor;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  std::string id;
  std::string name;
  std::function<bool(std::string&)> run;
};

int failures = 0;

void run_criterion(const Criterion& c) {
  std::string detail;
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = false;
  try {
    ok = c.run(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("[%s] %s: %s (%s) [%.1fs]\n", ok ? "PASS" : "FAIL", c.id.c_str(), c.name.c_str(),
              detail.c_str(), secs);
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

// --- shared model helpers ---

vae::VaeModel linear_test_model(const Tensor& w_mu, double sigma_const, const Tensor& a_dec) {
  vae::VaeModel m;
  m.data_dim = w_mu.cols();
  m.latent_dim = w_mu.rows();
  m.mu_head.push_back({w_mu, Tensor({w_mu.rows()}), vae::Activation::identity});
  Tensor bs({w_mu.rows()});
  for (std::size_t i = 0; i < bs.size(); ++i) {
    bs[i] = sigma_const > 0.0 ? num::inverse_softplus(sigma_const) : -40.0;
  }
  m.sigma_head.push_back({Tensor({w_mu.rows(), w_mu.cols()}), bs, vae::Activation::identity});
  m.decoder.push_back({a_dec, Tensor({a_dec.rows()}), vae::Activation::identity});
  return m;
}

vae::VaeModel identity_test_model(std::size_t d, double sigma_const) {
  return linear_test_model(Tensor::identity(d), sigma_const, Tensor::identity(d));
}

// The training recipe used by the trend criteria.
vae::VaeModel train_bars_model(double beta, double gamma, std::uint64_t seed,
                               const std::vector<Tensor>& data) {
  vae::ArchitectureConfig arch;
  arch.data_dim = 16;
  arch.latent_dim = 8;
  arch.encoder_hidden = {64, 64};
  arch.decoder_hidden = {64, 64};
  arch.activation = vae::Activation::relu;
  arch.gamma = gamma;
  vae::TrainConfig tc;
  tc.beta = beta;
  tc.lr = 0.003;
  tc.batch = 64;
  tc.epochs = 300;
  tc.seed = seed;
  vae::VaeModel model = vae::build_model(arch, RngStream(seed, 1));
  vae::train(model, data, tc);
  return model;
}

std::vector<double> csv_column(const io::CsvTable& t, const std::string& name) {
  const std::size_t i = t.column_index(name);
  std::vector<double> out;
  for (const auto& row : t.rows) out.push_back(std::stod(row[i]));
  return out;
}

std::map<double, double> mean_by_key(const io::CsvTable& t, const std::string& key,
                                     const std::string& value) {
  const std::size_t ki = t.column_index(key);
  const std::size_t vi = t.column_index(value);
  std::map<double, double> sums;
  std::map<double, std::size_t> counts;
  for (const auto& row : t.rows) {
    sums[std::stod(row[ki])] += std::stod(row[vi]);
    counts[std::stod(row[ki])] += 1;
  }
  for (auto& [k, v] : sums) v /= static_cast<double>(counts[k]);
  return sums;
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- criteria ---

// Central differences are only a valid oracle where the function is locally
// smooth; near a relu kink the two-sided estimate is step-size dependent.
// Comparing the h and h/2 estimates detects that and the coordinate is
// skipped (their fraction is capped below).
struct FdCheck {
  double value = 0.0;
  bool smooth = true;
};

FdCheck gated_fd(const std::function<double(double)>& eval_at_offset, double h, double ref_scale) {
  const double f1 = (eval_at_offset(h) - eval_at_offset(-h)) / (2.0 * h);
  const double f2 = (eval_at_offset(0.5 * h) - eval_at_offset(-0.5 * h)) / h;
  FdCheck out;
  out.value = f1;
  out.smooth = std::abs(f1 - f2) <= 0.3 * 1e-4 * std::max(ref_scale, 1.0) + 1e-12;
  return out;
}

// Smallest |pre-activation| across every relu unit touched when encoding x
// and decoding each z. Points this close to a kink are re-rolled before any
// finite-difference check.
double min_relu_preact(const vae::VaeModel& m, const Tensor& x, const std::vector<Tensor>& zs) {
  double closest = std::numeric_limits<double>::infinity();
  auto walk = [&closest](const vae::Mlp& mlp, Tensor h) {
    for (const vae::DenseLayer& l : mlp) {
      h = num::add(num::matmul(l.weight, h), l.bias);
      if (l.act == vae::Activation::relu) {
        for (std::size_t i = 0; i < h.size(); ++i) closest = std::min(closest, std::abs(h[i]));
        h = num::relu(h);
      } else if (l.act == vae::Activation::tanh) {
        h = num::tanh(h);
      }
    }
    return h;
  };
  const Tensor trunk_out = walk(m.trunk, x);
  walk(m.mu_head, trunk_out);
  walk(m.sigma_head, trunk_out);
  for (const Tensor& z : zs) walk(m.decoder, z);
  return closest;
}

// Gradients of the training objective, the attack objective and encoder
// Jacobians all match central finite differences.
bool c1_gradient_correctness(std::string& detail) {
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  for (int pair = 0; pair < 50; ++pair) {
    const bool smooth = pair % 2 == 0;
    vae::ArchitectureConfig arch;
    arch.data_dim = 4 + pair % 3;
    arch.latent_dim = 2 + pair % 2;
    arch.encoder_hidden = {6, 5};
    arch.decoder_hidden = {6};
    arch.activation = smooth ? vae::Activation::tanh : vae::Activation::relu;
    vae::VaeModel model = vae::build_model(arch, RngStream(900 + pair, 1));
    RngStream rng(901, pair);
    const double tol = smooth ? 1e-5 : 1e-4;
    const double h = smooth ? 1e-6 : 1e-5;

    // draw (x, noise) pairs until every relu unit is clear of its kink
    Tensor x({arch.data_dim});
    std::vector<Tensor> etas;
    for (int attempt = 0; attempt < 100; ++attempt) {
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
      etas = {num::gaussian_sample(rng, {arch.latent_dim})};
      const auto [mu_c, sigma_c] = vae::encode(model, x);
      const Tensor z_c = num::add(mu_c, num::hadamard(etas[0], sigma_c));
      if (smooth || min_relu_preact(model, x, {mu_c, z_c}) > 1e-3) break;
    }
    ad::Tape tape;
    vae::ModelVars mv = vae::lift_parameters(tape, model);
    ad::Var loss = vae::negative_elbo_graph(tape, model, mv, x, 1.5, etas);
    tape.backward(loss);
    auto eval_loss = [&](const vae::VaeModel& m2) {
      ad::Tape t2;
      vae::ModelVars mv2 = vae::lift_parameters(t2, m2);
      return t2.value(vae::negative_elbo_graph(t2, m2, mv2, x, 1.5, etas))[0];
    };
    std::vector<std::pair<ad::Var, ad::Var>> lifted;
    for (const auto& mlp : {mv.trunk, mv.mu_head, mv.sigma_head, mv.decoder}) {
      for (const auto& l : mlp.layers) lifted.push_back(l);
    }
    std::vector<Tensor*> params = model.parameters();
    for (std::size_t li = 0; li < lifted.size(); ++li) {
      for (int wb = 0; wb < 2; ++wb) {
        Tensor* p = params[2 * li + wb];
        const Tensor g = tape.grad(wb == 0 ? lifted[li].first : lifted[li].second);
        const std::size_t stride = std::max<std::size_t>(1, p->size() / 3);
        for (std::size_t i = 0; i < p->size(); i += stride) {
          const double orig = (*p)[i];
          const FdCheck fd = gated_fd(
              [&](double off) {
                (*p)[i] = orig + off;
                const double v = eval_loss(model);
                (*p)[i] = orig;
                return v;
              },
              h, std::abs(g[i]));
          if (!fd.smooth) {
            ++skipped;
            continue;
          }
          ++checked;
          const double rel =
              std::abs(g[i] - fd.value) / std::max({std::abs(fd.value), std::abs(g[i]), 1.0});
          worst = std::max(worst, rel / tol);
          if (rel > tol) {
            detail = fmt("ELBO grad mismatch rel=%.2e (pair %d)", rel, pair);
            return false;
          }
        }
      }
    }

    // attack objective gradient wrt the perturbation
    const auto [mu0, sigma0] = vae::encode(model, x);
    const Tensor g0 = vae::decode(model, mu0);
    Tensor delta({arch.data_dim});
    for (int attempt = 0; attempt < 100; ++attempt) {
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = 0.1 * rng.gaussian();
      const Tensor xd = num::add(x, delta);
      const auto [mu_d, sigma_d] = vae::encode(model, xd);
      const Tensor z_d = num::add(mu_d, num::hadamard(etas[0], sigma_d));
      if (smooth || min_relu_preact(model, xd, {z_d}) > 1e-3) break;
    }
    auto attack_value = [&](const Tensor& d) {
      ad::Tape t2;
      vae::ModelVars mv2 = vae::lift_constants(t2, model);
      ad::Var dv = t2.constant(d);
      ad::Var xpd = t2.add(t2.constant(x), dv);
      ad::Var mu_t = vae::encode_mu(t2, model, mv2, xpd);
      ad::Var sg_t = vae::encode_sigma(t2, model, mv2, xpd);
      ad::Var z = t2.add(mu_t, t2.mul(t2.constant(etas[0]), sg_t));
      return t2.value(t2.l2norm(t2.sub(vae::decode_mean(t2, model, mv2, z), t2.constant(g0))))[0];
    };
    ad::Tape ta;
    vae::ModelVars mva = vae::lift_constants(ta, model);
    ad::Var dv = ta.leaf(delta);
    ad::Var xpd = ta.add(ta.constant(x), dv);
    ad::Var z = ta.add(vae::encode_mu(ta, model, mva, xpd),
                       ta.mul(ta.constant(etas[0]), vae::encode_sigma(ta, model, mva, xpd)));
    ad::Var obj = ta.l2norm(ta.sub(vae::decode_mean(ta, model, mva, z), ta.constant(g0)));
    ta.backward(obj);
    const Tensor ga = ta.grad(dv);
    for (std::size_t i = 0; i < delta.size(); ++i) {
      const FdCheck fd = gated_fd(
          [&](double off) {
            Tensor d2 = delta;
            d2[i] += off;
            return attack_value(d2);
          },
          h, std::abs(ga[i]));
      if (!fd.smooth) {
        ++skipped;
        continue;
      }
      ++checked;
      const double rel =
          std::abs(ga[i] - fd.value) / std::max({std::abs(fd.value), std::abs(ga[i]), 1.0});
      worst = std::max(worst, rel / tol);
      if (rel > tol) {
        detail = fmt("attack grad mismatch rel=%.2e (pair %d)", rel, pair);
        return false;
      }
    }

    // encoder-mean Jacobian entries
    const Tensor jac = ad::jacobian(
        [&model](ad::Tape& t2, ad::Var v) {
          vae::ModelVars mv2 = vae::lift_constants(t2, model);
          return vae::encode_mu(t2, model, mv2, v);
        },
        x);
    for (std::size_t col = 0; col < arch.data_dim; ++col) {
      for (std::size_t row = 0; row < arch.latent_dim; ++row) {
        const FdCheck fd = gated_fd(
            [&](double off) {
              Tensor x2 = x;
              x2[col] += off;
              return vae::encode(model, x2).first[row];
            },
            h, std::abs(jac.at2(row, col)));
        if (!fd.smooth) {
          ++skipped;
          continue;
        }
        ++checked;
        const double rel =
            std::abs(jac.at2(row, col) - fd.value) /
            std::max({std::abs(fd.value), std::abs(jac.at2(row, col)), 1.0});
        worst = std::max(worst, rel / tol);
        if (rel > tol) {
          detail = fmt("jacobian mismatch rel=%.2e (pair %d)", rel, pair);
          return false;
        }
      }
    }
  }
  const double skip_frac =
      static_cast<double>(skipped) / static_cast<double>(std::max<std::size_t>(checked + skipped, 1));
  detail = fmt("%zu entries checked, worst relative error %.1f%% of tolerance, %.1f%% kink-skipped",
               checked, 100.0 * worst, 100.0 * skip_frac);
  return checked > 1000 && skip_frac < 0.05;
}

bool c2_probit_accuracy(std::string& detail) {
  double worst = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double t = -5.0 + 10.0 * i / 1000.0;
    worst = std::max(worst, std::abs(num::probit(num::normal_cdf(t)) - t));
  }
  detail = fmt("max |probit(Phi(t)) - t| = %.2e over 1000 points", worst);
  return worst <= 1e-6;
}

bool c3_estimator_vs_oracle(std::string& detail) {
  rob::EstimatorConfig cfg;
  cfg.m = 0.5;
  cfg.step = 0.05;
  cfg.samples = 100000;
  const double se = 3.0 * num::binomial_stderr(0.5, cfg.samples);

  // half-normal: median is the 0.75 normal quantile
  vae::VaeModel m1 = identity_test_model(1, 1.0);
  const rob::MinRResult r1 = rob::estimate_min_r(m1, Tensor::vector({0.4}), cfg, RngStream(31, 1));
  const double median1 = num::probit(0.75);
  const oracle::McEstimate mc1 = oracle::mc_reference(
      [](RngStream& r) { return std::abs(r.gaussian()); }, oracle::Statistic::median, 1000000,
      RngStream(32, 1));
  const bool oracle1_ok = std::abs(mc1.value - median1) < 3.0 * mc1.std_error;

  // 2-d identity: median of the gaussian norm is sqrt(2 ln 2)
  vae::VaeModel m2 = identity_test_model(2, 1.0);
  const rob::MinRResult r2 =
      rob::estimate_min_r(m2, Tensor::vector({0.4, 0.6}), cfg, RngStream(33, 1));
  const double median2 = std::sqrt(2.0 * std::log(2.0));
  const oracle::McEstimate mc2 = oracle::mc_reference(
      [](RngStream& r) {
        const double a = r.gaussian(), b = r.gaussian();
        return std::sqrt(a * a + b * b);
      },
      oracle::Statistic::median, 1000000, RngStream(34, 1));
  const bool oracle2_ok = std::abs(mc2.value - median2) < 3.0 * mc2.std_error;

  detail = fmt("half-normal est %.4f vs %.4f; chi est %.4f vs %.4f", r1.r, median1, r2.r, median2);
  return oracle1_ok && oracle2_ok && std::abs(r1.r - median1) <= cfg.step + se &&
         std::abs(r2.r - median2) <= cfg.step + se;
}

bool c4_margin_vs_oracle(std::string& detail) {
  // true boundary of the 1-d linear model at r=1 solves
  // Phi(1-R) - Phi(-1-R) = 0.5
  double lo = 0.0, hi = 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (num::normal_cdf(1.0 - mid) - num::normal_cdf(-1.0 - mid) > 0.5 ? lo : hi) = mid;
  }
  const double r_star = 0.5 * (lo + hi);

  // MC cross-check of the root
  RngStream mc(41, 0);
  std::size_t inside = 0;
  for (int i = 0; i < 100000; ++i) {
    if (std::abs(r_star + mc.gaussian()) < 1.0) ++inside;
  }
  const double p_at_root = inside / 100000.0;
  if (std::abs(p_at_root - 0.5) > 3.0 * num::binomial_stderr(0.5, 100000)) {
    detail = fmt("oracle cross-check failed: p(R*)=%.4f", p_at_root);
    return false;
  }

  vae::VaeModel model = identity_test_model(1, 1.0);
  rob::EstimatorConfig cfg;
  cfg.step = 0.05;
  cfg.samples = 10000;
  cfg.initial_margin = 10.0;
  const rob::AttackFn attack = [](const vae::VaeModel& m, const Tensor& x, double budget,
                                  RngStream& rng) {
    atk::AttackConfig ac;
    ac.budget = budget;
    ac.steps = 25;
    ac.restarts = 5;
    ac.n_mc = 4;
    return atk::max_damage_attack(m, x, ac, rng).delta;
  };
  const rob::MarginEstimate me =
      rob::estimate_margin(model, Tensor::vector({0.5}), 1.0, cfg, attack, RngStream(42, 1));
  detail = fmt("estimate %.3f vs root %.4f (tolerance %.2f)", me.margin, r_star, 2.0 * cfg.step);
  return !me.not_robust && std::abs(me.margin - r_star) <= 2.0 * cfg.step;
}

bool c5_soundness(std::string& detail) {
  const data::Dataset ds = data::ingest_dataset("bars:n=256,side=4,seed=11");
  const std::vector<std::size_t> inputs = exp::pick_input_indices(ds.items.size(), 10);
  const std::size_t n_mc = 10000;
  const double p_floor = 0.5 - 3.0 * num::binomial_stderr(0.5, n_mc);

  std::size_t checked = 0, flagged = 0, zero_bound = 0;
  double worst_p = 1.0;
  for (int mi = 0; mi < 5; ++mi) {
    const vae::VaeModel model = train_bars_model(1.0, 0.25, 2 + 7919 * (mi + 1), ds.items);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const Tensor& x = ds.items[inputs[k]];
      RngStream rng(50, mi * 100 + k);

      rob::EstimatorConfig ec;
      ec.m = 0.9;
      ec.step = 0.05;
      ec.samples = 2000;
      const double r = rob::estimate_min_r(model, x, ec, rng.substream(0)).r;
      const rob::RobustnessReport rep = rob::margin_bound(model, x, r, rng.substream(1), n_mc);
      if (!std::isfinite(rep.margin_bound) || rep.margin_bound <= 0.0) {
        ++zero_bound;
        continue;
      }
      if (rep.trust_region_exceeded) {
        ++flagged;
        continue;
      }

      atk::AttackConfig ac;
      ac.budget = 0.9 * rep.margin_bound;
      ac.steps = 30;
      ac.restarts = 4;
      ac.n_mc = 4;
      ac.target = atk::Target::both;
      RngStream arng = rng.substream(2);
      const atk::AttackResult ar = atk::max_damage_attack(model, x, ac, arng);

      RngStream srng = rng.substream(3);
      const std::vector<double> d = rob::delta_sample_perturbed(
          model, x, ar.delta, rob::DeltaVariant::fixed_sigma, srng, n_mc);
      std::size_t in_count = 0;
      for (double v : d) {
        if (v < r) ++in_count;
      }
      const double p = static_cast<double>(in_count) / static_cast<double>(n_mc);
      worst_p = std::min(worst_p, p);
      ++checked;
      if (p <= p_floor) {
        detail = fmt("violated at model %d input %zu: p=%.4f <= %.4f", mi, inputs[k], p, p_floor);
        return false;
      }
    }
  }
  detail = fmt("%zu points checked, worst p=%.4f (floor %.4f), %zu flagged, %zu zero-bound",
               checked, worst_p, p_floor, flagged, zero_bound);
  return checked > 0;
}

bool c6_correlation(std::string& detail) {
  exp::ExperimentConfig cfg = exp::desk_profile();
  cfg.dataset = "bars:n=256,side=4,seed=11";
  cfg.arch.gamma = 0.25;
  cfg.train.epochs = 300;
  cfg.train.batch = 64;
  cfg.train.lr = 0.003;
  cfg.beta_list = {0.5, 0.8, 1.2, 1.8, 2.5};
  cfg.correlate_vary_beta = true;
  cfg.estimator.initial_margin = 4.0;
  cfg.estimator.samples = 800;
  cfg.estimator.restarts = 4;
  cfg.estimator.step = 0.02;
  cfg.estimator.bisection_refine = true;
  cfg.n_models = 5;
  cfg.n_inputs = 25;
  cfg.r_rule = "quantile:0.9";
  cfg.seed = 2;
  cfg.out_dir = "acceptance_out/correlate";
  const exp::CorrelationOutcome res = exp::run_bound_correlation(cfg);

  // the scatter must stay on the sound side of y = x within estimator noise
  const io::CsvTable t = io::read_csv("acceptance_out/correlate/robustness_reports.csv");
  const std::size_t bi = t.column_index("margin_bound");
  const std::size_t ei = t.column_index("margin_estimate");
  const double slack = 3.0 * cfg.estimator.step;
  std::size_t unsound = 0;
  for (const auto& row : t.rows) {
    const double bound = std::stod(row[bi]);
    if (std::isfinite(bound) && bound > std::stod(row[ei]) + slack) ++unsound;
  }
  detail = fmt("rho=%.4f over %zu (model,input) pairs; %zu points below the y=x band", res.rho,
               res.n_points, unsound);
  return res.rho_defined && res.n_points == 125 && res.rho >= 0.5 && unsound == 0;
}

bool c7_attack_target_trend(std::string& detail) {
  exp::ExperimentConfig cfg = exp::desk_profile();
  cfg.dataset = "bars:n=256,side=4,seed=11";
  cfg.arch.gamma = 0.25;
  cfg.train.epochs = 300;
  cfg.train.batch = 64;
  cfg.train.lr = 0.003;
  // the image-scale budget 10 scaled by sqrt(16/784) to the desk data range
  cfg.attack.budget = 10.0 * std::sqrt(16.0 / 784.0);
  cfg.attack.steps = 30;
  cfg.attack.restarts = 4;
  cfg.attack.n_mc = 4;
  cfg.n_inputs = 20;
  cfg.seed = 2;
  cfg.out_dir = "acceptance_out/attack";
  exp::run_attack_study(cfg);

  const io::CsvTable t = io::read_csv("acceptance_out/attack/attack_results.csv");
  const std::size_t ti = t.column_index("target");
  const std::size_t ii = t.column_index("input_id");
  const std::size_t di = t.column_index("damage");
  std::map<std::string, std::map<std::string, double>> damage;  // input -> target -> damage
  for (const auto& row : t.rows) damage[row[ii]][row[ti]] = std::stod(row[di]);
  std::size_t wins = 0, both_ok = 0, total = 0;
  for (const auto& [input, by_target] : damage) {
    ++total;
    if (by_target.at("mu_only") > by_target.at("sigma_only")) ++wins;
    if (by_target.at("both") >= 0.9 * by_target.at("mu_only")) ++both_ok;
  }
  detail = fmt("mu_only > sigma_only on %zu/%zu inputs; both >= 0.9*mu on %zu", wins, total,
               both_ok);
  return total == 20 && wins >= 16;
}

bool c8_tau_sweep_trend(std::string& detail) {
  exp::ExperimentConfig cfg = exp::desk_profile();
  cfg.dataset = "bars:n=256,side=4,seed=11";
  cfg.arch.gamma = 0.05;  // sharp likelihood so the smallest tau offsets bind
  cfg.train.beta = 1.0;
  cfg.train.epochs = 600;
  cfg.train.batch = 64;
  cfg.train.lr = 0.0015;
  cfg.tau_list = {0.0, 0.1, 0.5, 1.0};
  cfg.estimator.initial_margin = 4.0;
  cfg.estimator.samples = 800;
  cfg.estimator.restarts = 4;
  cfg.estimator.step = 0.02;
  cfg.estimator.bisection_refine = true;
  cfg.n_inputs = 30;
  cfg.r_rule = "shared_quantile:0.9";
  cfg.seed = 2;
  cfg.out_dir = "acceptance_out/tau";
  const exp::SweepOutcome out = exp::run_tau_sweep(cfg);
  if (!out.failures.empty()) {
    detail = "training failures during the sweep";
    return false;
  }

  const io::CsvTable margins = io::read_csv("acceptance_out/tau/tau_margins.csv");
  const std::map<double, double> mean_margin = mean_by_key(margins, "tau", "margin");
  std::vector<double> ordered;
  for (const auto& [tau, mm] : mean_margin) ordered.push_back(mm);
  bool strictly_increasing = ordered.size() == 4;
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    strictly_increasing = strictly_increasing && ordered[i] > ordered[i - 1];
  }

  const io::CsvTable noise = io::read_csv("acceptance_out/tau/tau_noise.csv");
  const std::size_t taui = noise.column_index("tau");
  const std::size_t sei = noise.column_index("sigma_eps");
  const std::size_t lli = noise.column_index("loglik_mean");
  double ll_tau0 = 0.0, ll_tau1 = 0.0;
  for (const auto& row : noise.rows) {
    if (std::stod(row[sei]) == 0.5) {
      if (std::stod(row[taui]) == 0.0) ll_tau0 = std::stod(row[lli]);
      if (std::stod(row[taui]) == 1.0) ll_tau1 = std::stod(row[lli]);
    }
  }
  detail = fmt("margins %.3f/%.3f/%.3f/%.3f; noisy loglik tau1 %.1f vs tau0 %.1f", ordered[0],
               ordered[1], ordered[2], ordered[3], ll_tau1, ll_tau0);
  return strictly_increasing && ll_tau1 > ll_tau0;
}

bool c9_beta_sweep_trend(std::string& detail) {
  exp::ExperimentConfig cfg = exp::desk_profile();
  cfg.dataset = "bars:n=256,side=4,seed=11";
  cfg.arch.gamma = 0.25;
  cfg.train.epochs = 300;
  cfg.train.batch = 64;
  cfg.train.lr = 0.003;
  cfg.beta_list = {0.1, 1.0, 10.0};
  cfg.estimator.initial_margin = 4.0;
  cfg.estimator.samples = 800;
  cfg.estimator.restarts = 4;
  cfg.estimator.step = 0.02;
  cfg.estimator.bisection_refine = true;
  cfg.n_inputs = 25;
  cfg.r_rule = "quantile:0.9";
  cfg.seed = 2;
  cfg.out_dir = "acceptance_out/beta";
  const exp::SweepOutcome out = exp::run_beta_sweep(cfg);
  if (!out.failures.empty()) {
    detail = "training failures during the sweep";
    return false;
  }

  const io::CsvTable stats = io::read_csv("acceptance_out/beta/beta_stats.csv");
  const std::vector<double> betas = csv_column(stats, "beta");
  const std::vector<double> sig = csv_column(stats, "mean_min_sigma");
  const std::vector<double> sig_sd = csv_column(stats, "sd_min_sigma");
  const std::vector<double> jac = csv_column(stats, "mean_jac_norm");
  const std::vector<double> jac_sd = csv_column(stats, "sd_jac_norm");
  const std::vector<double> margin = csv_column(stats, "mean_margin");
  const std::vector<double> bound = csv_column(stats, "mean_bound");
  if (betas.size() != 3) {
    detail = "expected 3 beta rows";
    return false;
  }
  const double n = 25.0;
  // monotone with at most one adjacent-pair violation within 1 MC s.e.
  auto monotone = [&](const std::vector<double>& v, const std::vector<double>& sd, bool up) {
    int violations = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
      const double diff = up ? v[i] - v[i - 1] : v[i - 1] - v[i];
      if (diff <= 0.0) {
        const double se = std::sqrt(sd[i] * sd[i] + sd[i - 1] * sd[i - 1]) / std::sqrt(n);
        if (-diff > se) return false;
        ++violations;
      }
    }
    return violations <= 1;
  };
  const bool sig_ok = monotone(sig, sig_sd, true);
  const bool jac_ok = monotone(jac, jac_sd, false);
  const bool margin_ok = margin.back() > margin.front();
  const bool bound_ok = bound.back() > bound.front();
  detail = fmt("min-sigma %.3f/%.3f/%.3f; jac %.2f/%.2f/%.2f; margin %.2f->%.2f; bound %.3f->%.3f",
               sig[0], sig[1], sig[2], jac[0], jac[1], jac[2], margin.front(), margin.back(),
               bound.front(), bound.back());
  return sig_ok && jac_ok && margin_ok && bound_ok;
}

bool c10_tempered_posterior(std::string& detail) {
  RngStream rng(60, 0);
  const double betas[] = {0.25, 0.5, 1.0, 2.0, 4.0, 10.0};
  double worst_grad = 0.0;
  for (int inst = 0; inst < 5; ++inst) {
    oracle::LinearGaussianVae lg;
    lg.w = Tensor({static_cast<std::size_t>(2 + inst % 3), static_cast<std::size_t>(1 + inst % 2)});
    num::gaussian_fill(rng, lg.w);
    lg.b = Tensor({lg.w.rows()});
    num::gaussian_fill(rng, lg.b);
    lg.gamma = 0.4 + rng.uniform();
    Tensor x({lg.w.rows()});
    num::gaussian_fill(rng, x);
    for (double beta : betas) {
      const oracle::TemperedOptimumReport rep = oracle::verify_tempered_optimum(lg, x, beta, 1e-6, 100, inst);
      worst_grad = std::max(worst_grad, rep.grad_norm);
      if (!rep.passed) {
        detail = fmt("failed at instance %d beta %g: grad=%.2e, %zu perturbations not lower",
                     inst, beta, rep.grad_norm, rep.perturbations_not_lower);
        return false;
      }
    }
  }
  detail = fmt("30 (beta, instance) cells, worst gradient norm %.2e", worst_grad);
  return true;
}

bool c11_attack_optimality(std::string& detail) {
  const Tensor w = Tensor::matrix(2, 3, {0.9, -0.4, 0.2, 0.1, 1.2, -0.7});
  const Tensor a = Tensor::matrix(3, 2, {1.4, 0.2, -0.3, 0.8, 0.5, -1.1});
  vae::VaeModel model = linear_test_model(w, 1e-15, a);
  const Tensor x = Tensor::vector({0.1, 0.4, -0.2});
  double worst_ratio = 1.0;
  for (double budget : {0.1, 1.0, 10.0}) {
    const oracle::SvdOptimum opt = oracle::svd_attack_optimum(w, a, budget);
    atk::AttackConfig ac;
    ac.budget = budget;
    ac.steps = 60;
    ac.restarts = 5;
    ac.n_mc = 2;
    ac.target = atk::Target::mu_only;
    const atk::AttackResult res = atk::max_damage_attack(model, x, ac, RngStream(61, 7));
    const double ratio = res.damage / opt.damage;
    worst_ratio = std::min(worst_ratio, ratio);
    if (ratio < 0.98 || ratio > 1.02) {
      detail = fmt("budget %g: achieved/optimal = %.4f", budget, ratio);
      return false;
    }
  }
  detail = fmt("worst achieved/optimal ratio %.4f over budgets {0.1, 1, 10}", worst_ratio);
  return true;
}

bool c12_min_r_consistency(std::string& detail) {
  // 50 random linear-decoder models evaluated at the strict operating
  // convention (inside probability 0.9)
  RngStream gen(70, 0);
  rob::EstimatorConfig ec;
  ec.m = 0.9;
  ec.step = 0.05;
  ec.samples = 4000;
  const double slack = ec.step + 3.0 * num::binomial_stderr(0.9, ec.samples);
  std::size_t passed = 0;
  double worst_gap = 1e9;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t dz = 1 + trial % 3;
    const std::size_t dx = dz + trial % 2;
    Tensor a({dx, dz});
    num::gaussian_fill(gen, a);
    const double sigma = 0.3 + gen.uniform();
    vae::VaeModel model = linear_test_model(Tensor({dz, dx}), sigma, a);
    const Tensor x = Tensor({dx});
    const rob::MinRResult res = rob::estimate_min_r(model, x, ec, RngStream(71 + trial, 1));
    const double bound = rob::min_r_bound(model, x);
    const double gap = res.r - (bound - slack);
    worst_gap = std::min(worst_gap, gap);
    if (res.p_inside > 0.5 && gap > 0.0) ++passed;
  }
  detail = fmt("%zu/50 trials with operating r above bound - slack (worst gap %.4f)", passed,
               worst_gap);
  return passed == 50;
}

bool c13_reproducibility(std::string& detail) {
  exp::ExperimentConfig cfg = exp::desk_profile();
  cfg.dataset = "bars:n=64,side=4,seed=11";
  cfg.arch.gamma = 0.25;
  cfg.train.epochs = 3;
  cfg.train.batch = 32;
  cfg.tau_list = {0.0, 0.5};
  cfg.beta_list = {0.5, 2.0};
  cfg.budget_grid = {0.0, 0.5};
  cfg.sigma_eps_grid = {0.0, 0.25};
  cfg.estimator.initial_margin = 1.0;
  cfg.estimator.samples = 100;
  cfg.estimator.step = 0.05;
  cfg.estimator.bisection_refine = true;
  cfg.attack.steps = 5;
  cfg.attack.restarts = 2;
  cfg.attack.n_mc = 2;
  cfg.n_models = 2;
  cfg.n_inputs = 5;
  cfg.eval_samples = 200;
  cfg.seed = 77;

  const std::vector<std::pair<std::string, std::function<void()>>> sweeps = {
      {"tau", [&] { exp::run_tau_sweep(cfg); }},
      {"beta", [&] { exp::run_beta_sweep(cfg); }},
      {"correlate", [&] { exp::run_bound_correlation(cfg); }},
      {"attack", [&] { exp::run_attack_study(cfg); }},
  };
  std::size_t compared = 0;
  for (const auto& [name, run] : sweeps) {
    const std::string dir_a = "acceptance_out/repro_a_" + name;
    const std::string dir_b = "acceptance_out/repro_b_" + name;
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    cfg.out_dir = dir_a;
    run();
    cfg.out_dir = dir_b;
    run();
    for (const auto& entry : fs::directory_iterator(dir_a)) {
      const std::string fname = entry.path().filename().string();
      if (fname.size() < 4 || fname.substr(fname.size() - 4) != ".csv") continue;
      if (read_file_bytes(entry.path().string()) != read_file_bytes(dir_b + "/" + fname)) {
        detail = fmt("%s/%s differs between reruns", name.c_str(), fname.c_str());
        return false;
      }
      ++compared;
    }
  }
  detail = fmt("%zu CSV files byte-identical across reruns of all four sweeps", compared);
  return compared > 0;
}

}  // namespace

int main() {
  fs::create_directories("acceptance_out");
  const std::vector<Criterion> criteria = {
      {"C1", "gradient correctness vs finite differences", c1_gradient_correctness},
      {"C2", "probit accuracy on [-5, 5]", c2_probit_accuracy},
      {"C3", "radius estimator vs closed-form medians", c3_estimator_vs_oracle},
      {"C4", "margin estimator vs 1-d analytic boundary", c4_margin_vs_oracle},
      {"C5", "margin bound soundness under attack", c5_soundness},
      {"C6", "bound vs estimate correlation", c6_correlation},
      {"C7", "encoder-mean attacks dominate encoder-std attacks", c7_attack_target_trend},
      {"C8", "tau sweep: margins rise, noisy likelihood crosses", c8_tau_sweep_trend},
      {"C9", "beta sweep: sigma up, jacobian down, margins and bounds up", c9_beta_sweep_trend},
      {"C10", "tempered posterior maximizes the beta-ELBO", c10_tempered_posterior},
      {"C11", "attack reaches the singular-value optimum", c11_attack_optimality},
      {"C12", "operating radius stays above the minimum-radius bound", c12_min_r_consistency},
      {"C13", "sweep reruns are byte-identical", c13_reproducibility},
  };
  for (const Criterion& c : criteria) run_criterion(c);
  if (failures == 0) {
    std::printf("acceptance: all %zu criteria passed\n", criteria.size());
  } else {
    std::printf("acceptance: %d criteria FAILED\n", failures);
  }
  return failures;
}
