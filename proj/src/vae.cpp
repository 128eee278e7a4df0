#include "vaecert/vae.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "vaecert/special.hpp"

namespace vaecert::vae {

using json = nlohmann::json;

std::vector<Tensor*> VaeModel::parameters() {
  std::vector<Tensor*> out;
  for (Mlp* mlp : {&trunk, &mu_head, &sigma_head, &decoder}) {
    for (DenseLayer& l : *mlp) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
  }
  return out;
}

std::vector<const Tensor*> VaeModel::parameters() const {
  std::vector<const Tensor*> out;
  for (const Mlp* mlp : {&trunk, &mu_head, &sigma_head, &decoder}) {
    for (const DenseLayer& l : *mlp) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
  }
  return out;
}

namespace {

DenseLayer random_layer(std::size_t out, std::size_t in, Activation act, RngStream& rng) {
  DenseLayer l;
  l.weight = Tensor({out, in});
  const double s = 1.0 / std::sqrt(static_cast<double>(in));
  for (std::size_t i = 0; i < l.weight.size(); ++i) l.weight[i] = s * rng.gaussian();
  l.bias = Tensor({out});
  l.act = act;
  return l;
}

}  // namespace

VaeModel build_model(const ArchitectureConfig& cfg, RngStream rng) {
  VaeModel m;
  m.tau = cfg.tau;
  m.family = cfg.family;
  m.gamma = cfg.gamma;
  m.data_dim = cfg.data_dim;
  m.latent_dim = cfg.latent_dim;

  std::size_t width = cfg.data_dim;
  if (!cfg.encoder_hidden.empty()) {
    m.trunk.push_back(random_layer(cfg.encoder_hidden[0], width, cfg.activation, rng));
    width = cfg.encoder_hidden[0];
  }
  std::size_t head_in = width;
  for (Mlp* head : {&m.mu_head, &m.sigma_head}) {
    std::size_t w = head_in;
    for (std::size_t i = 1; i < cfg.encoder_hidden.size(); ++i) {
      head->push_back(random_layer(cfg.encoder_hidden[i], w, cfg.activation, rng));
      w = cfg.encoder_hidden[i];
    }
    head->push_back(random_layer(cfg.latent_dim, w, Activation::identity, rng));
  }
  std::size_t w = cfg.latent_dim;
  for (std::size_t h : cfg.decoder_hidden) {
    m.decoder.push_back(random_layer(h, w, cfg.activation, rng));
    w = h;
  }
  m.decoder.push_back(random_layer(cfg.data_dim, w, Activation::identity, rng));
  return m;
}

namespace {

Tensor apply_activation(const Tensor& t, Activation act) {
  switch (act) {
    case Activation::identity: return t;
    case Activation::relu: return num::relu(t);
    case Activation::tanh: return num::tanh(t);
  }
  return t;
}

}  // namespace

Tensor mlp_forward(const Mlp& mlp, const Tensor& x) {
  Tensor h = x;
  for (const DenseLayer& l : mlp) {
    h = apply_activation(num::add(num::matmul(l.weight, h), l.bias), l.act);
  }
  return h;
}

std::pair<Tensor, Tensor> encode(const VaeModel& m, const Tensor& x) {
  if (x.size() != m.data_dim) throw std::invalid_argument("encode: input dimension mismatch");
  const Tensor h = mlp_forward(m.trunk, x);
  const Tensor mu = mlp_forward(m.mu_head, h);
  const Tensor raw = mlp_forward(m.sigma_head, h);
  num::require_finite(mu, "encode: mu");
  num::require_finite(raw, "encode: sigma head");
  const Tensor sigma = num::add_const(num::softplus(raw), m.tau);
  return {mu, sigma};
}

Tensor reparam_sample(const VaeModel&, const Tensor& mu, const Tensor& sigma, RngStream& rng) {
  if (!mu.same_shape(sigma)) throw std::invalid_argument("reparam_sample: shape mismatch");
  Tensor z = mu;
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = mu[i] + rng.gaussian() * sigma[i];
  return z;
}

Tensor decode_raw(const VaeModel& m, const Tensor& z) {
  if (z.size() != m.latent_dim) throw std::invalid_argument("decode: latent dimension mismatch");
  Tensor out = mlp_forward(m.decoder, z);
  num::require_finite(out, "decode");
  return out;
}

Tensor decode(const VaeModel& m, const Tensor& z) {
  Tensor out = decode_raw(m, z);
  if (m.family == Likelihood::bernoulli) out = num::sigmoid(out);
  return out;
}

double log_likelihood(const VaeModel& m, const Tensor& x, const Tensor& z) {
  if (x.size() != m.data_dim) throw std::invalid_argument("log_likelihood: data dimension mismatch");
  const Tensor raw = decode_raw(m, z);
  if (m.family == Likelihood::gaussian) {
    const double d = static_cast<double>(m.data_dim);
    const double g2 = m.gamma * m.gamma;
    const double ss = num::sum_squares(num::sub(x, raw));
    return -0.5 * d * std::log(2.0 * std::numbers::pi * g2) - ss / (2.0 * g2);
  }
  // bernoulli with [0,1]-valued targets, evaluated from logits for stability
  double ll = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0.0 || x[i] > 1.0) {
      throw std::domain_error("log_likelihood: bernoulli data must lie in [0,1]");
    }
    ll += x[i] * raw[i] - num::softplus(raw[i]);
  }
  return ll;
}

double gaussian_kl(const Tensor& mu, const Tensor& sigma) {
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    kl += mu[i] * mu[i] + sigma[i] * sigma[i] - 1.0 - 2.0 * std::log(sigma[i]);
  }
  return 0.5 * kl;
}

double elbo(const VaeModel& m, const Tensor& x, double beta, RngStream& rng, std::size_t n_mc) {
  if (n_mc < 1) throw std::invalid_argument("elbo: n_mc must be at least 1");
  const auto [mu, sigma] = encode(m, x);
  double recon = 0.0;
  for (std::size_t k = 0; k < n_mc; ++k) {
    const Tensor z = reparam_sample(m, mu, sigma, rng);
    recon += log_likelihood(m, x, z);
  }
  recon /= static_cast<double>(n_mc);
  return recon - beta * gaussian_kl(mu, sigma);
}

// --- tape builders ---

namespace {

MlpVars lift_mlp(ad::Tape& tape, const Mlp& mlp, bool track) {
  MlpVars v;
  for (const DenseLayer& l : mlp) {
    ad::Var w = track ? tape.leaf(l.weight) : tape.constant(l.weight);
    ad::Var b = track ? tape.leaf(l.bias) : tape.constant(l.bias);
    v.layers.emplace_back(w, b);
  }
  return v;
}

}  // namespace

ModelVars lift_parameters(ad::Tape& tape, const VaeModel& m) {
  return {lift_mlp(tape, m.trunk, true), lift_mlp(tape, m.mu_head, true),
          lift_mlp(tape, m.sigma_head, true), lift_mlp(tape, m.decoder, true)};
}

ModelVars lift_constants(ad::Tape& tape, const VaeModel& m) {
  return {lift_mlp(tape, m.trunk, false), lift_mlp(tape, m.mu_head, false),
          lift_mlp(tape, m.sigma_head, false), lift_mlp(tape, m.decoder, false)};
}

ad::Var mlp_apply(ad::Tape& tape, const Mlp& mlp, const MlpVars& vars, ad::Var x) {
  ad::Var h = x;
  for (std::size_t i = 0; i < mlp.size(); ++i) {
    h = tape.add(tape.matmul(vars.layers[i].first, h), vars.layers[i].second);
    switch (mlp[i].act) {
      case Activation::identity: break;
      case Activation::relu: h = tape.relu(h); break;
      case Activation::tanh: h = tape.tanh(h); break;
    }
  }
  return h;
}

ad::Var encode_mu(ad::Tape& tape, const VaeModel& m, const ModelVars& mv, ad::Var x) {
  return mlp_apply(tape, m.mu_head, mv.mu_head, mlp_apply(tape, m.trunk, mv.trunk, x));
}

ad::Var encode_sigma(ad::Tape& tape, const VaeModel& m, const ModelVars& mv, ad::Var x) {
  ad::Var raw = mlp_apply(tape, m.sigma_head, mv.sigma_head, mlp_apply(tape, m.trunk, mv.trunk, x));
  return tape.add_const(tape.softplus(raw), m.tau);
}

ad::Var decode_mean(ad::Tape& tape, const VaeModel& m, const ModelVars& mv, ad::Var z) {
  ad::Var out = mlp_apply(tape, m.decoder, mv.decoder, z);
  if (m.family == Likelihood::bernoulli) out = tape.sigmoid(out);
  return out;
}

ad::Var log_likelihood_graph(ad::Tape& tape, const VaeModel& m, const ModelVars& mv,
                             const Tensor& x, ad::Var z) {
  ad::Var raw = mlp_apply(tape, m.decoder, mv.decoder, z);
  ad::Var xc = tape.constant(x);
  if (m.family == Likelihood::gaussian) {
    const double d = static_cast<double>(m.data_dim);
    const double g2 = m.gamma * m.gamma;
    ad::Var ss = tape.sum(tape.square(tape.sub(xc, raw)));
    return tape.add_const(tape.scale(ss, -1.0 / (2.0 * g2)),
                          -0.5 * d * std::log(2.0 * std::numbers::pi * g2));
  }
  // sum(x * logits - softplus(logits))
  return tape.sum(tape.sub(tape.mul(xc, raw), tape.softplus(raw)));
}

ad::Var negative_elbo_graph(ad::Tape& tape, const VaeModel& m, const ModelVars& mv,
                            const Tensor& x, double beta, const std::vector<Tensor>& etas) {
  ad::Var xv = tape.constant(x);
  ad::Var h = mlp_apply(tape, m.trunk, mv.trunk, xv);
  ad::Var mu = mlp_apply(tape, m.mu_head, mv.mu_head, h);
  ad::Var sigma = tape.add_const(
      tape.softplus(mlp_apply(tape, m.sigma_head, mv.sigma_head, h)), m.tau);

  ad::Var recon{};
  for (std::size_t k = 0; k < etas.size(); ++k) {
    ad::Var z = tape.add(mu, tape.mul(tape.constant(etas[k]), sigma));
    ad::Var ll = log_likelihood_graph(tape, m, mv, x, z);
    recon = (k == 0) ? ll : tape.add(recon, ll);
  }
  recon = tape.scale(recon, 1.0 / static_cast<double>(etas.size()));

  // 0.5 * sum(mu^2 + sigma^2 - 1 - 2 log sigma)
  ad::Var t = tape.add_const(tape.add(tape.square(mu), tape.square(sigma)), -1.0);
  t = tape.sub(t, tape.scale(tape.log(sigma), 2.0));
  ad::Var kl = tape.scale(tape.sum(t), 0.5);

  return tape.sub(tape.scale(kl, beta), recon);
}

// --- training ---

namespace {

struct AdamState {
  std::vector<Tensor> m1, m2;
  double t = 0.0;
};

}  // namespace

TrainResult train(VaeModel& model, const std::vector<Tensor>& data, const TrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("train: dataset must be non-empty");
  if (cfg.n_mc < 1) throw std::invalid_argument("train: n_mc must be at least 1");

  TrainResult res;
  std::vector<Tensor*> params = model.parameters();
  AdamState adam;
  for (Tensor* p : params) {
    adam.m1.emplace_back(p->shape());
    adam.m2.emplace_back(p->shape());
  }

  RngStream shuffle_rng = RngStream(cfg.seed, 0x5u);
  RngStream noise_rng = RngStream(cfg.seed, 0x6u);

  const std::size_t batch = std::min<std::size_t>(std::max<std::size_t>(cfg.batch, 1), data.size());
  ad::Tape tape;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled_indices(shuffle_rng, data.size());
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;

    for (std::size_t start = 0; start < data.size(); start += batch) {
      const std::size_t count = std::min(batch, data.size() - start);
      tape.clear();
      ModelVars mv = lift_parameters(tape, model);

      ad::Var total{};
      for (std::size_t b = 0; b < count; ++b) {
        const Tensor& x = data[order[start + b]];
        std::vector<Tensor> etas;
        etas.reserve(cfg.n_mc);
        for (std::size_t k = 0; k < cfg.n_mc; ++k) {
          etas.push_back(num::gaussian_sample(noise_rng, {model.latent_dim}));
        }
        ad::Var loss = negative_elbo_graph(tape, model, mv, x, cfg.beta, etas);
        total = (b == 0) ? loss : tape.add(total, loss);
      }
      total = tape.scale(total, 1.0 / static_cast<double>(count));

      const double loss_value = tape.value(total)[0];
      if (!std::isfinite(loss_value)) throw DivergenceError(std::move(res.loss_trace));
      epoch_loss += loss_value;
      ++n_batches;

      tape.backward(total);

      adam.t += 1.0;
      const double corr1 = 1.0 - std::pow(cfg.adam_beta1, adam.t);
      const double corr2 = 1.0 - std::pow(cfg.adam_beta2, adam.t);
      std::size_t pi = 0;
      for (Mlp* mlp : {&model.trunk, &model.mu_head, &model.sigma_head, &model.decoder}) {
        const MlpVars& vars = (mlp == &model.trunk)      ? mv.trunk
                              : (mlp == &model.mu_head)  ? mv.mu_head
                              : (mlp == &model.sigma_head) ? mv.sigma_head
                                                           : mv.decoder;
        for (std::size_t li = 0; li < mlp->size(); ++li) {
          for (int wb = 0; wb < 2; ++wb) {
            Tensor& p = wb == 0 ? (*mlp)[li].weight : (*mlp)[li].bias;
            const ad::Var v = wb == 0 ? vars.layers[li].first : vars.layers[li].second;
            const Tensor g = tape.grad(v);
            Tensor& m1 = adam.m1[pi];
            Tensor& m2 = adam.m2[pi];
            for (std::size_t i = 0; i < p.size(); ++i) {
              m1[i] = cfg.adam_beta1 * m1[i] + (1.0 - cfg.adam_beta1) * g[i];
              m2[i] = cfg.adam_beta2 * m2[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
              const double mhat = m1[i] / corr1;
              const double vhat = m2[i] / corr2;
              p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
            }
            ++pi;
          }
        }
      }
    }
    res.loss_trace.push_back(epoch_loss / static_cast<double>(n_batches));
  }
  return res;
}

// --- checkpoint io ---

namespace {

constexpr const char* kFormatTag = "vaecert-checkpoint-v1";

json mlp_to_json(const Mlp& mlp) {
  json arr = json::array();
  for (const DenseLayer& l : mlp) {
    arr.push_back({{"rows", l.weight.rows()},
                   {"cols", l.weight.cols()},
                   {"weight", std::vector<double>(l.weight.data().begin(), l.weight.data().end())},
                   {"bias", std::vector<double>(l.bias.data().begin(), l.bias.data().end())},
                   {"act", static_cast<int>(l.act)}});
  }
  return arr;
}

Mlp mlp_from_json(const json& arr) {
  Mlp mlp;
  for (const json& j : arr) {
    DenseLayer l;
    l.weight = Tensor::matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                              j.at("weight").get<std::vector<double>>());
    l.bias = Tensor::vector(j.at("bias").get<std::vector<double>>());
    l.act = static_cast<Activation>(j.at("act").get<int>());
    mlp.push_back(std::move(l));
  }
  return mlp;
}

}  // namespace

void save_checkpoint(const VaeModel& m, const TrainConfig& cfg, const std::string& path) {
  json j;
  j["format"] = kFormatTag;
  j["tau"] = m.tau;
  j["family"] = m.family == Likelihood::gaussian ? "gaussian" : "bernoulli";
  j["gamma"] = m.gamma;
  j["data_dim"] = m.data_dim;
  j["latent_dim"] = m.latent_dim;
  j["trunk"] = mlp_to_json(m.trunk);
  j["mu_head"] = mlp_to_json(m.mu_head);
  j["sigma_head"] = mlp_to_json(m.sigma_head);
  j["decoder"] = mlp_to_json(m.decoder);
  j["train_config"] = {{"beta", cfg.beta},     {"lr", cfg.lr},
                       {"batch", cfg.batch},   {"epochs", cfg.epochs},
                       {"adam_beta1", cfg.adam_beta1}, {"adam_beta2", cfg.adam_beta2},
                       {"adam_eps", cfg.adam_eps},     {"seed", cfg.seed},
                       {"n_mc", cfg.n_mc}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  json j = json::parse(in);
  if (j.value("format", "") != kFormatTag) {
    throw std::runtime_error("load_checkpoint: unrecognized format tag");
  }
  Checkpoint ck;
  ck.model.tau = j.at("tau").get<double>();
  ck.model.family = j.at("family").get<std::string>() == "bernoulli" ? Likelihood::bernoulli
                                                                     : Likelihood::gaussian;
  ck.model.gamma = j.at("gamma").get<double>();
  ck.model.data_dim = j.at("data_dim").get<std::size_t>();
  ck.model.latent_dim = j.at("latent_dim").get<std::size_t>();
  ck.model.trunk = mlp_from_json(j.at("trunk"));
  ck.model.mu_head = mlp_from_json(j.at("mu_head"));
  ck.model.sigma_head = mlp_from_json(j.at("sigma_head"));
  ck.model.decoder = mlp_from_json(j.at("decoder"));
  const json& tc = j.at("train_config");
  ck.train_config.beta = tc.at("beta").get<double>();
  ck.train_config.lr = tc.at("lr").get<double>();
  ck.train_config.batch = tc.at("batch").get<std::size_t>();
  ck.train_config.epochs = tc.at("epochs").get<std::size_t>();
  ck.train_config.adam_beta1 = tc.at("adam_beta1").get<double>();
  ck.train_config.adam_beta2 = tc.at("adam_beta2").get<double>();
  ck.train_config.adam_eps = tc.at("adam_eps").get<double>();
  ck.train_config.seed = tc.at("seed").get<std::uint64_t>();
  ck.train_config.n_mc = tc.at("n_mc").get<std::size_t>();
  return ck;
}

}  // namespace vaecert::vae
