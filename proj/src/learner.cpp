#include "beacon/learner.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace beacon {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// log(1 + exp(t)) without overflow
double softplus(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

void check_dims(const LearnerState& s, const LabeledSample& sample) {
  if (sample.x.size() != static_cast<std::size_t>(s.opts.input_dim))
    throw std::invalid_argument("learner: input dimension mismatch");
  if (sample.y.size() != static_cast<std::size_t>(s.opts.output_dim))
    throw std::invalid_argument("learner: output dimension mismatch");
}

}  // namespace

void ParamBlocks::zero_like(const LearnerState& s) {
  enc_w.assign(s.enc_w.size(), 0.0);
  enc_b.assign(s.enc_b.size(), 0.0);
  head_w.assign(s.head_w.size(), 0.0);
  head_b.assign(s.head_b.size(), 0.0);
}

LearnerState make_learner(const LearnerOptions& opts, RngState& rng) {
  if (opts.input_dim < 1 || opts.output_dim < 1 || opts.embed_dim < 1)
    throw std::invalid_argument("make_learner: dimensions must be >= 1");
  LearnerState s;
  s.opts = opts;
  const auto in = static_cast<std::size_t>(opts.input_dim);
  const auto em = static_cast<std::size_t>(opts.embed_dim);
  const auto out = static_cast<std::size_t>(opts.output_dim);
  const double enc_scale = 1.0 / std::sqrt(static_cast<double>(in));
  const double head_scale = 1.0 / std::sqrt(static_cast<double>(em));
  s.enc_w.resize(em * in);
  s.enc_b.resize(em);
  s.head_w.resize(out * em);
  s.head_b.resize(out);
  for (auto& p : s.enc_w) p = rng.uniform(-enc_scale, enc_scale);
  for (auto& p : s.enc_b) p = rng.uniform(-enc_scale, enc_scale);
  for (auto& p : s.head_w) p = rng.uniform(-head_scale, head_scale);
  for (auto& p : s.head_b) p = rng.uniform(-head_scale, head_scale);
  s.adam_m.zero_like(s);
  s.adam_v.zero_like(s);
  return s;
}

std::vector<double> embed(const LearnerState& s, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(s.opts.input_dim))
    throw std::invalid_argument("embed: input dimension mismatch");
  const auto in = x.size();
  const auto em = static_cast<std::size_t>(s.opts.embed_dim);
  std::vector<double> z(em);
  for (std::size_t r = 0; r < em; ++r) {
    double acc = s.enc_b[r];
    const double* row = s.enc_w.data() + r * in;
    for (std::size_t c = 0; c < in; ++c) acc += row[c] * x[c];
    z[r] = std::tanh(acc);
  }
  return z;
}

std::vector<double> predict(const LearnerState& s, std::span<const double> x) {
  const std::vector<double> z = embed(s, x);
  const auto em = z.size();
  const auto out = static_cast<std::size_t>(s.opts.output_dim);
  std::vector<double> p(out);
  for (std::size_t r = 0; r < out; ++r) {
    double acc = s.head_b[r];
    const double* row = s.head_w.data() + r * em;
    for (std::size_t c = 0; c < em; ++c) acc += row[c] * z[c];
    p[r] = acc;
  }
  return p;
}

double per_example_loss(const LearnerState& s, const LabeledSample& sample) {
  check_dims(s, sample);
  const std::vector<double> p = predict(s, sample.x);
  double loss = 0.0;
  if (s.opts.loss == LossKind::kSquared) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double r = p[j] - sample.y[j];
      loss += 0.5 * r * r;
    }
  } else {
    for (std::size_t j = 0; j < p.size(); ++j)
      loss += softplus(p[j]) - sample.y[j] * p[j];
    loss /= static_cast<double>(p.size());
  }
  if (s.opts.clip_loss) loss = std::min(loss, 1.0);
  return loss;
}

double weighted_loss_grad(const LearnerState& s, const Dataset& data,
                          std::span<const std::size_t> indices,
                          std::span<const double> weights, ParamBlocks* grads) {
  if (indices.size() != weights.size())
    throw std::invalid_argument("weighted_loss_grad: index/weight size mismatch");
  const auto in = static_cast<std::size_t>(s.opts.input_dim);
  const auto em = static_cast<std::size_t>(s.opts.embed_dim);
  const auto out = static_cast<std::size_t>(s.opts.output_dim);

  double total = 0.0;
  std::vector<double> residual(out), dz(em);
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const LabeledSample& sample = data.samples[indices[j]];
    check_dims(s, sample);
    const double w = weights[j];
    const std::vector<double> z = embed(s, sample.x);
    std::vector<double> p(out);
    for (std::size_t r = 0; r < out; ++r) {
      double acc = s.head_b[r];
      const double* row = s.head_w.data() + r * em;
      for (std::size_t c = 0; c < em; ++c) acc += row[c] * z[c];
      p[r] = acc;
    }

    double loss = 0.0;
    if (s.opts.loss == LossKind::kSquared) {
      for (std::size_t r = 0; r < out; ++r) {
        const double rr = p[r] - sample.y[r];
        loss += 0.5 * rr * rr;
        residual[r] = rr;
      }
    } else {
      const double inv = 1.0 / static_cast<double>(out);
      for (std::size_t r = 0; r < out; ++r) {
        loss += (softplus(p[r]) - sample.y[r] * p[r]) * inv;
        residual[r] = (sigmoid(p[r]) - sample.y[r]) * inv;
      }
    }

    bool clipped = false;
    if (s.opts.clip_loss && loss > 1.0) {
      loss = 1.0;
      clipped = true;  // flat region of min(loss, 1): zero gradient
    }
    total += w * loss;
    if (grads == nullptr || w == 0.0 || clipped) continue;

    for (std::size_t r = 0; r < out; ++r) {
      const double g = w * residual[r];
      double* gw = grads->head_w.data() + r * em;
      for (std::size_t c = 0; c < em; ++c) gw[c] += g * z[c];
      grads->head_b[r] += g;
    }
    if (!s.opts.freeze_encoder) {
      for (std::size_t c = 0; c < em; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < out; ++r) acc += s.head_w[r * em + c] * residual[r];
        dz[c] = w * acc * (1.0 - z[c] * z[c]);
      }
      for (std::size_t r = 0; r < em; ++r) {
        const double g = dz[r];
        if (g == 0.0) continue;
        double* gw = grads->enc_w.data() + r * in;
        for (std::size_t c = 0; c < in; ++c) gw[c] += g * sample.x[c];
        grads->enc_b[r] += g;
      }
    }
  }
  return total;
}

namespace {

void adam_block(std::vector<double>& theta, const std::vector<double>& g, std::vector<double>& m,
                std::vector<double>& v, double lr, double bc1, double bc2) {
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
    v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    theta[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
  }
}

void gd_block(std::vector<double>& theta, const std::vector<double>& g, double lr) {
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * g[i];
}

void decay_block(std::vector<double>& theta, double factor) {
  for (auto& p : theta) p *= factor;
}

}  // namespace

void weighted_update(LearnerState& s, const Dataset& data, std::span<const std::size_t> batch,
                     const std::vector<double>& q, double lr, double decay) {
  if (batch.empty()) throw std::invalid_argument("weighted_update: empty batch");
  if (lr < 0.0 || decay < 0.0) throw std::invalid_argument("weighted_update: negative lr or decay");

  const double inv = 1.0 / static_cast<double>(batch.size());
  std::vector<double> w(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) w[j] = q[batch[j]] * inv;

  ParamBlocks g;
  g.zero_like(s);
  weighted_loss_grad(s, data, batch, w, &g);

  if (s.opts.update_rule == UpdateRule::kAdam) {
    s.adam_t += 1;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(s.adam_t));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(s.adam_t));
    if (!s.opts.freeze_encoder) {
      adam_block(s.enc_w, g.enc_w, s.adam_m.enc_w, s.adam_v.enc_w, lr, bc1, bc2);
      adam_block(s.enc_b, g.enc_b, s.adam_m.enc_b, s.adam_v.enc_b, lr, bc1, bc2);
    }
    adam_block(s.head_w, g.head_w, s.adam_m.head_w, s.adam_v.head_w, lr, bc1, bc2);
    adam_block(s.head_b, g.head_b, s.adam_m.head_b, s.adam_v.head_b, lr, bc1, bc2);
  } else {
    if (!s.opts.freeze_encoder) {
      gd_block(s.enc_w, g.enc_w, lr);
      gd_block(s.enc_b, g.enc_b, lr);
    }
    gd_block(s.head_w, g.head_w, lr);
    gd_block(s.head_b, g.head_b, lr);
  }

  if (decay > 0.0) {
    const double factor = 1.0 - lr * decay;
    if (!s.opts.freeze_encoder) {
      decay_block(s.enc_w, factor);
      decay_block(s.enc_b, factor);
    }
    decay_block(s.head_w, factor);
    decay_block(s.head_b, factor);
  }
}

double complexity(const LearnerState& s) {
  double acc = 0.0;
  for (const auto* block : {&s.enc_w, &s.enc_b, &s.head_w, &s.head_b})
    for (double p : *block) acc += p * p;
  return 0.5 * acc;
}

LearnerState train_reference(const Dataset& data, const LearnerOptions& opts, int epochs,
                             double lr, RngState& rng) {
  const Dataset targets = data.m == 0 && data.n == data.size() ? data : data.target_subset();
  if (targets.n < 1) throw std::invalid_argument("train_reference: no target samples");
  LearnerState s = make_learner(opts, rng);
  std::vector<std::size_t> idx(targets.n);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const std::vector<double> q(targets.n, 1.0);
  for (int e = 0; e < epochs; ++e) weighted_update(s, targets, idx, q, lr, 0.0);
  return s;
}

std::string learner_to_json(const LearnerState& s) {
  nlohmann::json j;
  j["input_dim"] = s.opts.input_dim;
  j["output_dim"] = s.opts.output_dim;
  j["embed_dim"] = s.opts.embed_dim;
  j["loss"] = to_string(s.opts.loss);
  j["clip_loss"] = s.opts.clip_loss;
  j["enc_w"] = s.enc_w;
  j["enc_b"] = s.enc_b;
  j["head_w"] = s.head_w;
  j["head_b"] = s.head_b;
  return j.dump();
}

LearnerState learner_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  LearnerState s;
  s.opts.input_dim = j.at("input_dim").get<int>();
  s.opts.output_dim = j.at("output_dim").get<int>();
  s.opts.embed_dim = j.at("embed_dim").get<int>();
  s.opts.loss = j.at("loss").get<std::string>() == "logistic" ? LossKind::kLogistic : LossKind::kSquared;
  s.opts.clip_loss = j.value("clip_loss", false);
  s.enc_w = j.at("enc_w").get<std::vector<double>>();
  s.enc_b = j.at("enc_b").get<std::vector<double>>();
  s.head_w = j.at("head_w").get<std::vector<double>>();
  s.head_b = j.at("head_b").get<std::vector<double>>();
  s.adam_m.zero_like(s);
  s.adam_v.zero_like(s);
  return s;
}

}  // namespace beacon
