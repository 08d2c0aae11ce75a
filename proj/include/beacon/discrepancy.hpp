#pragma once

#include <optional>
#include <vector>

#include "beacon/config.hpp"
#include "beacon/data.hpp"
#include "beacon/learner.hpp"
#include "beacon/rng.hpp"

namespace beacon {

struct EmbeddingSet {
  std::size_t dim = 0;
  std::vector<std::vector<double>> vectors;
  std::vector<int> origin;  // domain tag per vector, kTargetDomain for targets

  void validate() const;  // nonempty, uniform dimension
};

// Per-source-sample mismatch scores plus estimator bookkeeping.
struct DiscrepancyScores {
  std::vector<double> d;  // length m, nonnegative
  Estimator estimator = Estimator::kKnn;
  int refresh_epoch = -1;
  std::optional<double> aux;  // AUC for the classifier, gap value for localized
};

EmbeddingSet embed_samples(const LearnerState& s, const Dataset& data, bool sources);

// Mean distance from each source embedding to its k nearest target embeddings,
// normalized by the mean within-target k-NN distance. Requires at least two
// targets; throws when the target embeddings have zero spread.
std::vector<double> knn_discrepancy(const EmbeddingSet& source, const EmbeddingSet& target, int k);

struct ClassifierResult {
  std::vector<double> d;  // estimated P(source | x_i) per source sample
  double auc = 0.0;       // separability on the full pooled sets
};

// Linear logistic discriminator (target = 1) fit on a class-balanced subsample
// by full-batch gradient descent; scores all source embeddings.
ClassifierResult classifier_discrepancy(const EmbeddingSet& source, const EmbeddingSet& target,
                                        RngState& rng);

// Projects a free-parameter vector onto the ball of given radius around center.
std::vector<double> ball_project(const std::vector<double>& v, const std::vector<double>& center,
                                 double radius);

// Maximizes (mean target loss - mean source loss) over head parameters inside
// a radius ball around the reference, by projected gradient ascent with a soft
// proximity penalty; returns the largest penalty-free gap observed.
double localized_discrepancy(const LearnerState& reference, const Dataset& data,
                             const LocalizedSpec& spec);

}  // namespace beacon
