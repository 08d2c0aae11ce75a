#include "beacon/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace beacon {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  if (v.empty()) {
    mean = kNan;
    sd = kNan;
    return;
  }
  double acc = 0.0;
  for (double x : v) acc += x;
  mean = acc / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  sd = std::sqrt(var / static_cast<double>(v.size()));
}

// deterministic epoch-wise shuffled minibatch stream
class BatchSampler {
 public:
  BatchSampler(std::size_t begin, std::size_t count, std::size_t batch)
      : perm_(count), batch_(std::min(batch, count)), pos_(count) {
    for (std::size_t i = 0; i < count; ++i) perm_[i] = begin + i;
  }

  std::span<const std::size_t> next(RngState& rng) {
    if (pos_ + batch_ > perm_.size()) {
      rng.shuffle(perm_);
      pos_ = 0;
    }
    const std::span<const std::size_t> out(perm_.data() + pos_, batch_);
    pos_ += batch_;
    return out;
  }

 private:
  std::vector<std::size_t> perm_;
  std::size_t batch_;
  std::size_t pos_;
};

std::vector<double> forward_losses(const LearnerState& s, const Dataset& data) {
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = per_example_loss(s, data.samples[i]);
  return out;
}

DiscrepancyScores refresh_scores(const LearnerState& s, const Dataset& data,
                                 const HyperParams& hp, int epoch, RngState& rd) {
  DiscrepancyScores scores;
  scores.estimator = hp.estimator;
  scores.refresh_epoch = epoch;
  if (data.m == 0) return scores;
  const EmbeddingSet src = embed_samples(s, data, /*sources=*/true);
  const EmbeddingSet tgt = embed_samples(s, data, /*sources=*/false);
  if (hp.estimator == Estimator::kClassifier) {
    ClassifierResult res = classifier_discrepancy(src, tgt, rd);
    scores.d = std::move(res.d);
    scores.aux = res.auc;
  } else {
    scores.d = knn_discrepancy(src, tgt, hp.k);
  }
  return scores;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNan;
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

LearnerState initial_learner(const LearnerOptions& opts, const TrainContext& ctx, RngState& rinit) {
  if (ctx.init != nullptr) {
    LearnerState s = *ctx.init;
    s.opts.freeze_encoder = opts.freeze_encoder;
    s.opts.update_rule = opts.update_rule;
    return s;
  }
  return make_learner(opts, rinit);
}

void record_epoch(TrainReport& report, const LearnerState& s, const Dataset& data,
                  const std::vector<double>& q, const TrainContext& ctx) {
  EpochMetric em;
  const std::vector<double> losses = forward_losses(s, data);
  double acc = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) acc += q[i] * losses[i];
  em.weighted_train_loss = acc / static_cast<double>(losses.size());
  em.target_risk = ctx.heldout != nullptr ? evaluate(s, *ctx.heldout) : kNan;
  em.q = weight_stats(data, q);
  report.epochs.push_back(em);
}

void record_refresh(TrainReport& report, const Dataset& data, const std::vector<double>& q,
                    const DiscrepancyScores& d, int epoch, const std::vector<double>& w,
                    const TrainContext& ctx) {
  RefreshLog log;
  log.epoch = epoch;
  log.q = weight_stats(data, q);
  log.d_mean = mean_of(d.d);
  log.d_aux = d.aux;
  log.w = w;
  if (ctx.log_full_q) log.q_full = q;
  report.refreshes.push_back(log);
}

// discrepancy preparation shared by the two reweighting loops; localized
// scores are computed once up front and never refreshed
DiscrepancyScores prepare_scores(const Dataset& data, const HyperParams& hp,
                                 const LearnerOptions& opts, RngState& rd) {
  DiscrepancyScores scores;
  scores.estimator = hp.estimator;
  if (hp.estimator != Estimator::kLocalized || data.m == 0) return scores;
  LearnerOptions ref_opts = opts;
  ref_opts.freeze_encoder = false;
  ref_opts.update_rule = UpdateRule::kAdam;
  const LearnerState ref =
      train_reference(data, ref_opts, hp.localized.ref_epochs, hp.eta_theta, rd);
  const double gap = localized_discrepancy(ref, data, hp.localized);
  scores.d.assign(data.m, std::max(gap, 0.0));
  scores.aux = gap;
  scores.refresh_epoch = 0;
  return scores;
}

}  // namespace

QStats weight_stats(const Dataset& data, const std::vector<double>& q) {
  std::vector<double> src, tgt, clean, corrupt;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.is_source(i)) {
      src.push_back(q[i]);
      (data.samples[i].corrupt ? corrupt : clean).push_back(q[i]);
    } else {
      tgt.push_back(q[i]);
    }
  }
  QStats s;
  mean_std(src, s.mean_source, s.std_source);
  mean_std(tgt, s.mean_target, s.std_target);
  mean_std(clean, s.mean_clean, s.std_clean);
  mean_std(corrupt, s.mean_corrupt, s.std_corrupt);
  return s;
}

double evaluate(const LearnerState& s, const Dataset& heldout) {
  if (heldout.samples.empty()) throw std::invalid_argument("evaluate: empty held-out set");
  double acc = 0.0;
  for (const auto& sample : heldout.samples) acc += per_example_loss(s, sample);
  return acc / static_cast<double>(heldout.samples.size());
}

double objective_value(const LearnerState& s, const Dataset& data, const WeightState& ws,
                       const DiscrepancyScores& d, const HyperParams& hp) {
  const std::vector<double> losses = forward_losses(s, data);
  double obj = 0.0;
  double q_inf = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const double di = i < ws.m && !d.d.empty() ? d.d[i] : 0.0;
    obj += ws.q[i] * (losses[i] + hp.lambda_d * di);
    obj += hp.lambda1 * std::abs(ws.q[i] - ws.p0[i]);
    obj += hp.lambda2 * ws.q[i] * ws.q[i];
    q_inf = std::max(q_inf, ws.q[i]);
  }
  obj += hp.gamma * q_inf * complexity(s);
  return obj;
}

TrainReport train_beacon_single(const Dataset& data, const HyperParams& hp,
                                const LearnerOptions& opts, RngState& rng,
                                const TrainContext& ctx) {
  data.validate();
  RngState rinit = rng.fork();
  RngState rd = rng.fork();
  RngState rq = rng.fork();
  RngState rh = rng.fork();

  HyperParams eff = hp;
  if (hp.estimator == Estimator::kLocalized) eff.lambda_d = 1.0;

  TrainReport report;
  report.learner = initial_learner(opts, ctx, rinit);
  WeightState ws = make_weight_state(data.m, data.n, eff);
  ws.project();
  DiscrepancyScores scores = prepare_scores(data, hp, opts, rd);

  BatchSampler h_batches(0, data.size(), static_cast<std::size_t>(eff.batch_size));
  for (int e = 1; e <= eff.epochs; ++e) {
    if (e % eff.k_q == 0) {
      if (eff.estimator != Estimator::kLocalized)
        scores = refresh_scores(report.learner, data, eff, e, rd);
      const std::vector<double> losses = forward_losses(report.learner, data);
      if (eff.q_update == QUpdate::kConvexSolve) {
        q_solve_convex(ws, losses, scores, eff, complexity(report.learner));
      } else {
        q_sweep_stochastic(ws, losses, scores, eff, complexity(report.learner), rq);
      }
      if (!ws.valid()) throw std::runtime_error("train_beacon_single: weight invariants violated");
      record_refresh(report, data, ws.q, scores, e, {}, ctx);
      if (ctx.track_objective)
        report.objective_trace.push_back(objective_value(report.learner, data, ws, scores, eff));
    }
    const double q_inf = *std::max_element(ws.q.begin(), ws.q.end());
    for (int s = 0; s < eff.s_h; ++s)
      weighted_update(report.learner, data, h_batches.next(rh), ws.q, eff.eta_theta,
                      eff.gamma * q_inf);
    if (ctx.track_objective)
      report.objective_trace.push_back(objective_value(report.learner, data, ws, scores, eff));
    record_epoch(report, report.learner, data, ws.q, ctx);
  }

  report.final_weights = ws;
  report.final_d = scores;
  return report;
}

TrainReport train_beacon_multi(const Dataset& data, const HyperParams& hp,
                               const LearnerOptions& opts, RngState& rng,
                               const TrainContext& ctx) {
  data.validate();
  RngState rinit = rng.fork();
  RngState rd = rng.fork();
  RngState rq = rng.fork();
  RngState rh = rng.fork();

  HyperParams eff = hp;
  if (hp.estimator == Estimator::kLocalized) eff.lambda_d = 1.0;

  TrainReport report;
  report.learner = initial_learner(opts, ctx, rinit);

  CompositeWeights cw;
  cw.domains = make_domain_weights(data);
  WeightState ws = make_weight_state(data.m, data.n, eff);
  cw.q_tilde = ws.p0;
  ws = compose_weights(cw, data.m, data.n, eff);
  ws.project();
  cw.q_tilde = split_back(ws, cw.domains, cw.q_tilde);
  DiscrepancyScores scores = prepare_scores(data, hp, opts, rd);

  BatchSampler h_batches(0, data.size(), static_cast<std::size_t>(eff.batch_size));
  for (int e = 1; e <= eff.epochs; ++e) {
    if (e % eff.k_q == 0) {
      if (eff.estimator != Estimator::kLocalized)
        scores = refresh_scores(report.learner, data, eff, e, rd);
      // one loss sweep shared by the w-step and the q-tilde-step
      const std::vector<double> losses = forward_losses(report.learner, data);

      const std::vector<double> grad =
          w_gradient(cw.domains, cw.q_tilde, losses, scores, eff, ws.p0);
      w_step(cw.domains, grad, eff.eta_w);

      std::vector<std::size_t> order(data.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rq.shuffle(order);
      const auto batch = static_cast<std::size_t>(eff.batch_size);
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t stop = std::min(start + batch, order.size());
        for (std::size_t pos = start; pos < stop; ++pos) {
          const std::size_t i = order[pos];
          const bool is_src = data.is_source(i);
          const double scale =
              is_src ? cw.domains.w[static_cast<std::size_t>(cw.domains.assignment[i])] : 1.0;
          const double di = is_src && !scores.d.empty() ? scores.d[i] : 0.0;
          const double g = q_tilde_subgradient(losses[i], di, cw.q_tilde[i], scale, ws.p0[i], eff);
          const double eta = is_src ? eff.eta_q : eff.eta_t;
          cw.q_tilde[i] = clip(cw.q_tilde[i] - eta * g, ws.lo[i], ws.hi);
        }
      }

      WeightState composed = compose_weights(cw, data.m, data.n, eff);
      composed.project();
      cw.q_tilde = split_back(composed, cw.domains, cw.q_tilde);
      ws = composed;
      if (!ws.valid()) throw std::runtime_error("train_beacon_multi: weight invariants violated");
      record_refresh(report, data, ws.q, scores, e, cw.domains.w, ctx);
      if (ctx.track_objective)
        report.objective_trace.push_back(objective_value(report.learner, data, ws, scores, eff));
    }
    const double q_inf = *std::max_element(ws.q.begin(), ws.q.end());
    for (int s = 0; s < eff.s_h; ++s)
      weighted_update(report.learner, data, h_batches.next(rh), ws.q, eff.eta_theta,
                      eff.gamma * q_inf);
    if (ctx.track_objective)
      report.objective_trace.push_back(objective_value(report.learner, data, ws, scores, eff));
    record_epoch(report, report.learner, data, ws.q, ctx);
  }

  report.final_weights = ws;
  report.final_d = scores;
  report.final_w = cw.domains.w;
  return report;
}

TrainReport train_target_only(const Dataset& data, const HyperParams& hp,
                              const LearnerOptions& opts, RngState& rng,
                              const TrainContext& ctx) {
  data.validate();
  RngState rinit = rng.fork();
  (void)rng.fork();  // discrepancy stream unused; keep the fork layout shared
  (void)rng.fork();  // weight stream unused
  RngState rh = rng.fork();

  TrainReport report;
  report.learner = initial_learner(opts, ctx, rinit);
  std::vector<double> q(data.size(), 0.0);
  for (std::size_t j = data.m; j < data.size(); ++j) q[j] = 1.0;

  BatchSampler h_batches(data.m, data.n, static_cast<std::size_t>(hp.batch_size));
  for (int e = 1; e <= hp.epochs; ++e) {
    for (int s = 0; s < hp.s_h; ++s)
      weighted_update(report.learner, data, h_batches.next(rh), q, hp.eta_theta, hp.gamma);
    record_epoch(report, report.learner, data, q, ctx);
  }
  return report;
}

TrainReport train_cotrain_fixed(const Dataset& data, const HyperParams& hp,
                                const LearnerOptions& opts, double mix_ratio, RngState& rng,
                                const TrainContext& ctx) {
  data.validate();
  if (mix_ratio <= 0.0 || mix_ratio >= 1.0)
    throw std::invalid_argument("train_cotrain_fixed: mix_ratio must be in (0, 1)");
  RngState rinit = rng.fork();
  (void)rng.fork();
  (void)rng.fork();
  RngState rh = rng.fork();

  TrainReport report;
  report.learner = initial_learner(opts, ctx, rinit);
  const std::vector<double> q(data.size(), 1.0);

  std::vector<std::size_t> batch(static_cast<std::size_t>(hp.batch_size));
  for (int e = 1; e <= hp.epochs; ++e) {
    for (int s = 0; s < hp.s_h; ++s) {
      for (auto& slot : batch) {
        const bool from_source = data.m > 0 && rh.uniform() < mix_ratio;
        slot = from_source ? static_cast<std::size_t>(rh.uniform_int(data.m))
                           : data.m + static_cast<std::size_t>(rh.uniform_int(data.n));
      }
      weighted_update(report.learner, data, batch, q, hp.eta_theta, hp.gamma);
    }
    record_epoch(report, report.learner, data, q, ctx);
  }
  return report;
}

}  // namespace beacon
