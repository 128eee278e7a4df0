#include "vaecert/attacks.hpp"

#include <cmath>
#include <stdexcept>

#include "vaecert/autodiff.hpp"

namespace vaecert::atk {

const char* target_name(Target t) {
  switch (t) {
    case Target::mu_only: return "mu_only";
    case Target::sigma_only: return "sigma_only";
    case Target::both: return "both";
  }
  return "both";
}

Target target_from_name(const std::string& name) {
  if (name == "mu_only") return Target::mu_only;
  if (name == "sigma_only") return Target::sigma_only;
  if (name == "both") return Target::both;
  throw std::invalid_argument("unknown attack target '" + name + "'");
}

namespace {

struct Objective {
  const vae::VaeModel& model;
  const Tensor& x;
  Tensor mu0, sigma0, g0;
  Target target;
  std::vector<Tensor> etas;

  // Value and gradient of the damage objective at delta.
  std::pair<double, Tensor> eval(const Tensor& delta) const {
    ad::Tape tape;
    vae::ModelVars mv = vae::lift_constants(tape, model);
    ad::Var dv = tape.leaf(delta);
    ad::Var xpd = tape.add(tape.constant(x), dv);

    ad::Var mu_t = target == Target::sigma_only ? tape.constant(mu0)
                                                : vae::encode_mu(tape, model, mv, xpd);
    ad::Var sigma_t = target == Target::mu_only ? tape.constant(sigma0)
                                                : vae::encode_sigma(tape, model, mv, xpd);
    ad::Var ref = tape.constant(g0);

    ad::Var obj{};
    for (std::size_t k = 0; k < etas.size(); ++k) {
      ad::Var z = tape.add(mu_t, tape.mul(tape.constant(etas[k]), sigma_t));
      ad::Var dist = tape.l2norm(tape.sub(vae::decode_mean(tape, model, mv, z), ref));
      obj = k == 0 ? dist : tape.add(obj, dist);
    }
    obj = tape.scale(obj, 1.0 / static_cast<double>(etas.size()));

    const double value = tape.value(obj)[0];
    tape.backward(obj);
    return {value, tape.grad(dv)};
  }
};

}  // namespace

AttackResult max_damage_attack(const vae::VaeModel& m, const Tensor& x, const AttackConfig& cfg,
                               RngStream rng, const Tensor* warm_start) {
  if (cfg.budget < 0.0) throw std::domain_error("max_damage_attack: negative budget");
  if (cfg.steps < 1) throw std::invalid_argument("max_damage_attack: steps must be >= 1");
  if (x.size() != m.data_dim) throw std::invalid_argument("max_damage_attack: dimension mismatch");

  Objective obj{m, x, {}, {}, {}, cfg.target, {}};
  std::tie(obj.mu0, obj.sigma0) = vae::encode(m, x);
  obj.g0 = vae::decode(m, obj.mu0);

  const std::size_t n_eta = cfg.single_sample ? 1 : cfg.n_mc;
  const double step_size = cfg.budget / static_cast<double>(cfg.steps);

  AttackResult best;
  best.target = cfg.target;
  best.seed = rng.seed();
  best.delta = Tensor({m.data_dim});
  best.damage = -1.0;
  bool any_valid = false;

  const int extra = warm_start != nullptr ? 1 : 0;
  for (int restart = 0; restart < cfg.restarts + extra; ++restart) {
    RngStream rs = rng.substream(static_cast<std::uint64_t>(restart));
    obj.etas.clear();
    for (std::size_t k = 0; k < n_eta; ++k) {
      obj.etas.push_back(num::gaussian_sample(rs, {m.latent_dim}));
    }

    Tensor delta({m.data_dim});
    if (restart == cfg.restarts) {
      delta = num::l2_project(*warm_start, cfg.budget);
    } else if (restart > 0 && cfg.budget > 0.0) {
      Tensor dir = num::gaussian_sample(rs, {m.data_dim});
      const double norm = num::l2_norm(dir);
      if (norm > 0.0) delta = num::scale(dir, cfg.budget / norm);
    }

    std::vector<double> trace;
    Tensor restart_best_delta = delta;
    double restart_best = -1.0;
    bool valid = true;

    const int iters = cfg.budget > 0.0 ? cfg.steps : 1;
    for (int it = 0; it < iters; ++it) {
      auto [value, grad] = obj.eval(delta);
      if (!std::isfinite(value) || !num::all_finite(grad)) {
        valid = false;
        break;
      }
      trace.push_back(value);
      if (value > restart_best) {
        restart_best = value;
        restart_best_delta = delta;
      }
      if (cfg.budget == 0.0) break;
      const double gnorm = num::l2_norm(grad);
      if (gnorm == 0.0) continue;
      delta = num::l2_project(num::add(delta, num::scale(grad, step_size / gnorm)), cfg.budget);
    }
    if (!valid) continue;

    // final iterate
    auto [value, grad] = obj.eval(delta);
    (void)grad;
    if (std::isfinite(value)) {
      trace.push_back(value);
      if (value > restart_best) {
        restart_best = value;
        restart_best_delta = delta;
      }
    }

    any_valid = true;
    if (restart_best > best.damage) {
      best.damage = restart_best;
      best.delta = restart_best_delta;
      best.trace = std::move(trace);
    }
  }

  if (!any_valid) throw std::runtime_error("max_damage_attack: all restarts produced non-finite objectives");
  best.degradation = degradation(m, x, best.delta);
  return best;
}

double degradation(const vae::VaeModel& m, const Tensor& x, const Tensor& delta) {
  const auto [mu, sigma] = vae::encode(m, x);
  (void)sigma;
  const auto [mu_star, sigma_star] = vae::encode(m, num::add(x, delta));
  (void)sigma_star;
  const double lp = vae::log_likelihood(m, x, mu);
  if (lp == 0.0) throw std::domain_error("degradation: log p(x|z) is zero");
  const double lp_star = vae::log_likelihood(m, x, mu_star);
  return std::abs(lp_star - lp) / std::abs(lp);
}

std::vector<NoisePoint> noise_sensitivity(const vae::VaeModel& m, const Tensor& x,
                                          const std::vector<double>& sigma_eps_grid,
                                          RngStream rng, std::size_t n) {
  if (sigma_eps_grid.empty()) throw std::invalid_argument("noise_sensitivity: empty grid");
  std::vector<NoisePoint> out;
  out.reserve(sigma_eps_grid.size());
  for (std::size_t gi = 0; gi < sigma_eps_grid.size(); ++gi) {
    const double se = sigma_eps_grid[gi];
    RngStream rs = rng.substream(gi);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      Tensor xs = x;
      if (se > 0.0) {
        for (std::size_t j = 0; j < xs.size(); ++j) xs[j] += se * rs.gaussian();
      }
      const auto [mu, sigma] = vae::encode(m, xs);
      (void)sigma;
      acc += vae::log_likelihood(m, x, mu);
    }
    out.push_back({se, acc / static_cast<double>(n)});
  }
  return out;
}

std::vector<AttackResult> budget_sweep(const vae::VaeModel& m, const Tensor& x,
                                       const std::vector<double>& budgets, AttackConfig cfg,
                                       RngStream rng) {
  std::vector<AttackResult> out;
  const Tensor* warm = nullptr;
  Tensor warm_delta;
  for (double budget : budgets) {
    cfg.budget = budget;
    // one shared substream: the noise draws coincide across budgets, so the
    // warm-started objective can only improve
    AttackResult res = max_damage_attack(m, x, cfg, rng.substream(0), warm);
    warm_delta = res.delta;
    warm = &warm_delta;
    out.push_back(std::move(res));
  }
  return out;
}

}  // namespace vaecert::atk
