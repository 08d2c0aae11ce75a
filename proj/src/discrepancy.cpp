#include "beacon/discrepancy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace beacon {

void EmbeddingSet::validate() const {
  if (vectors.empty()) throw std::invalid_argument("EmbeddingSet: empty");
  for (const auto& v : vectors)
    if (v.size() != dim) throw std::invalid_argument("EmbeddingSet: inconsistent dimension");
}

EmbeddingSet embed_samples(const LearnerState& s, const Dataset& data, bool sources) {
  EmbeddingSet out;
  out.dim = static_cast<std::size_t>(s.opts.embed_dim);
  const std::size_t begin = sources ? 0 : data.m;
  const std::size_t end = sources ? data.m : data.size();
  out.vectors.reserve(end - begin);
  out.origin.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    out.vectors.push_back(embed(s, data.samples[i].x));
    out.origin.push_back(data.samples[i].domain);
  }
  return out;
}

namespace {

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// mean of the k smallest entries; distances are fully sorted so the reduction
// order is deterministic
double mean_k_smallest(std::vector<double>& dists, int k) {
  std::sort(dists.begin(), dists.end());
  double acc = 0.0;
  for (int i = 0; i < k; ++i) acc += dists[static_cast<std::size_t>(i)];
  return acc / static_cast<double>(k);
}

}  // namespace

std::vector<double> knn_discrepancy(const EmbeddingSet& source, const EmbeddingSet& target, int k) {
  target.validate();
  if (k < 1) throw std::invalid_argument("knn_discrepancy: k < 1");
  const std::size_t n = target.vectors.size();
  if (n < 2) throw std::invalid_argument("knn_discrepancy: needs at least two target embeddings");
  if (!source.vectors.empty()) {
    source.validate();
    if (source.dim != target.dim)
      throw std::invalid_argument("knn_discrepancy: dimension mismatch");
  }

  const int k_within = std::min<int>(k, static_cast<int>(n) - 1);
  const int k_query = std::min<int>(k, static_cast<int>(n));

  // normalization: mean within-target k-NN distance
  double z = 0.0;
  std::vector<double> dists;
  for (std::size_t j = 0; j < n; ++j) {
    dists.clear();
    for (std::size_t l = 0; l < n; ++l)
      if (l != j) dists.push_back(euclidean(target.vectors[j], target.vectors[l]));
    z += mean_k_smallest(dists, k_within);
  }
  z /= static_cast<double>(n);
  if (z <= 0.0)
    throw std::runtime_error("knn_discrepancy: degenerate target spread (all embeddings identical)");

  std::vector<double> d(source.vectors.size());
  for (std::size_t i = 0; i < source.vectors.size(); ++i) {
    dists.clear();
    for (std::size_t l = 0; l < n; ++l)
      dists.push_back(euclidean(source.vectors[i], target.vectors[l]));
    d[i] = mean_k_smallest(dists, k_query) / z;
  }
  return d;
}

namespace {

constexpr int kDiscriminatorSteps = 500;
constexpr double kDiscriminatorLr = 0.1;
constexpr double kDiscriminatorL2 = 1e-4;

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// rank-sum AUC with ties counted as half
double auc_from_scores(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t l = i; l < j; ++l)
      if (labels[order[l]] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  for (int lab : labels) (lab == 1 ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0) return 0.5;
  const double np = static_cast<double>(n_pos);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

}  // namespace

ClassifierResult classifier_discrepancy(const EmbeddingSet& source, const EmbeddingSet& target,
                                        RngState& rng) {
  source.validate();
  target.validate();
  if (source.dim != target.dim)
    throw std::invalid_argument("classifier_discrepancy: dimension mismatch");
  const std::size_t m = source.vectors.size();
  const std::size_t n = target.vectors.size();
  const std::size_t dim = source.dim;

  // class-balanced training set: undersample sources when m > n
  std::vector<std::size_t> src_train(m);
  for (std::size_t i = 0; i < m; ++i) src_train[i] = i;
  if (m > n) {
    rng.shuffle(src_train);
    src_train.resize(n);
  }

  std::vector<double> w(dim, 0.0);
  double b = 0.0;
  const double inv_count = 1.0 / static_cast<double>(src_train.size() + n);
  std::vector<double> gw(dim);
  for (int step = 0; step < kDiscriminatorSteps; ++step) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    auto accumulate = [&](const std::vector<double>& zv, double label) {
      double t = b;
      for (std::size_t c = 0; c < dim; ++c) t += w[c] * zv[c];
      const double r = (sigmoid(t) - label) * inv_count;
      for (std::size_t c = 0; c < dim; ++c) gw[c] += r * zv[c];
      gb += r;
    };
    for (std::size_t idx : src_train) accumulate(source.vectors[idx], 0.0);
    for (const auto& zv : target.vectors) accumulate(zv, 1.0);
    for (std::size_t c = 0; c < dim; ++c)
      w[c] -= kDiscriminatorLr * (gw[c] + 2.0 * kDiscriminatorL2 * w[c]);
    b -= kDiscriminatorLr * gb;
  }

  auto score = [&](const std::vector<double>& zv) {
    double t = b;
    for (std::size_t c = 0; c < dim; ++c) t += w[c] * zv[c];
    return sigmoid(t);
  };

  ClassifierResult res;
  res.d.resize(m);
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(m + n);
  labels.reserve(m + n);
  for (std::size_t i = 0; i < m; ++i) {
    const double g = score(source.vectors[i]);
    res.d[i] = 1.0 - g;  // estimated P(source | x)
    scores.push_back(g);
    labels.push_back(0);
  }
  for (const auto& zv : target.vectors) {
    scores.push_back(score(zv));
    labels.push_back(1);
  }
  res.auc = auc_from_scores(scores, labels);
  return res;
}

std::vector<double> ball_project(const std::vector<double>& v, const std::vector<double>& center,
                                 double radius) {
  if (v.size() != center.size()) throw std::invalid_argument("ball_project: size mismatch");
  if (radius < 0.0) throw std::invalid_argument("ball_project: negative radius");
  double norm2 = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - center[i];
    norm2 += d * d;
  }
  const double norm = std::sqrt(norm2);
  if (norm <= radius) return v;
  std::vector<double> out(v.size());
  if (norm == 0.0) return center;
  const double scale = radius / norm;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = center[i] + scale * (v[i] - center[i]);
  return out;
}

namespace {

std::vector<double> free_params(const LearnerState& s) {
  std::vector<double> out;
  out.reserve(s.head_w.size() + s.head_b.size());
  out.insert(out.end(), s.head_w.begin(), s.head_w.end());
  out.insert(out.end(), s.head_b.begin(), s.head_b.end());
  return out;
}

void set_free_params(LearnerState& s, const std::vector<double>& v) {
  std::copy(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(s.head_w.size()), s.head_w.begin());
  std::copy(v.begin() + static_cast<std::ptrdiff_t>(s.head_w.size()), v.end(), s.head_b.begin());
}

}  // namespace

double localized_discrepancy(const LearnerState& reference, const Dataset& data,
                             const LocalizedSpec& spec) {
  if (data.m < 1 || data.n < 1)
    throw std::invalid_argument("localized_discrepancy: needs source and target samples");
  if (spec.radius < 0.0) throw std::invalid_argument("localized_discrepancy: negative radius");
  if (spec.steps < 1 || spec.eval_period < 1 || spec.eval_period > spec.steps)
    throw std::invalid_argument("localized_discrepancy: bad step schedule");
  if (spec.noise_draws < 1) throw std::invalid_argument("localized_discrepancy: noise_draws < 1");
  if (spec.step_size <= 0.0) throw std::invalid_argument("localized_discrepancy: step_size <= 0");

  LearnerState probe = reference;
  probe.opts.freeze_encoder = true;  // the encoder stays at the reference
  const std::vector<double> center = free_params(probe);

  std::vector<std::size_t> src_idx(data.m), tgt_idx(data.n);
  for (std::size_t i = 0; i < data.m; ++i) src_idx[i] = i;
  for (std::size_t j = 0; j < data.n; ++j) tgt_idx[j] = data.m + j;
  const std::vector<double> src_w(data.m, 1.0 / static_cast<double>(data.m));
  const std::vector<double> tgt_w(data.n, 1.0 / static_cast<double>(data.n));

  const auto gap = [&]() {
    double acc = 0.0;
    for (int draw = 0; draw < spec.noise_draws; ++draw) {
      const double lt = weighted_loss_grad(probe, data, tgt_idx, tgt_w, nullptr);
      const double ls = weighted_loss_grad(probe, data, src_idx, src_w, nullptr);
      acc += lt - ls;
    }
    return acc / static_cast<double>(spec.noise_draws);
  };

  double best = gap();
  std::vector<double> free = center;
  ParamBlocks gt, gs;
  for (int step = 1; step <= spec.steps; ++step) {
    gt.zero_like(probe);
    gs.zero_like(probe);
    weighted_loss_grad(probe, data, tgt_idx, tgt_w, &gt);
    weighted_loss_grad(probe, data, src_idx, src_w, &gs);
    // ascent on the gap minus the proximity penalty, over the head block only
    std::size_t off = 0;
    for (std::size_t i = 0; i < gt.head_w.size(); ++i, ++off) {
      const double g = gt.head_w[i] - gs.head_w[i] - 2.0 * spec.beta * (free[off] - center[off]);
      free[off] += spec.step_size * g;
    }
    for (std::size_t i = 0; i < gt.head_b.size(); ++i, ++off) {
      const double g = gt.head_b[i] - gs.head_b[i] - 2.0 * spec.beta * (free[off] - center[off]);
      free[off] += spec.step_size * g;
    }
    free = ball_project(free, center, spec.radius);
    set_free_params(probe, free);
    if (step % spec.eval_period == 0) best = std::max(best, gap());
  }
  return best;
}

}  // namespace beacon
