#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "beacon/config.hpp"
#include "beacon/data.hpp"
#include "beacon/rng.hpp"

namespace beacon {

struct LearnerOptions {
  int input_dim = 0;
  int output_dim = 0;
  int embed_dim = 8;
  LossKind loss = LossKind::kSquared;
  bool clip_loss = false;        // truncate per-example loss at 1
  bool freeze_encoder = false;
  UpdateRule update_rule = UpdateRule::kAdam;

  friend bool operator==(const LearnerOptions&, const LearnerOptions&) = default;
};

// Gradients (or optimizer moments) laid out like the parameter blocks.
struct ParamBlocks {
  std::vector<double> enc_w, enc_b, head_w, head_b;

  void zero_like(const struct LearnerState& s);
};

// Two-block predictor: a tanh encoder z = tanh(A x + a) and an affine head
// p = B z + c. The encoder block is the representation, the head block is the
// free part that local hypothesis classes range over.
struct LearnerState {
  LearnerOptions opts;
  std::vector<double> enc_w;   // embed_dim x input_dim, row-major
  std::vector<double> enc_b;   // embed_dim
  std::vector<double> head_w;  // output_dim x embed_dim, row-major
  std::vector<double> head_b;  // output_dim

  // adaptive-moment optimizer state
  ParamBlocks adam_m, adam_v;
  long adam_t = 0;

  std::size_t param_count() const {
    return enc_w.size() + enc_b.size() + head_w.size() + head_b.size();
  }
};

LearnerState make_learner(const LearnerOptions& opts, RngState& rng);

std::vector<double> embed(const LearnerState& s, std::span<const double> x);
std::vector<double> predict(const LearnerState& s, std::span<const double> x);

double per_example_loss(const LearnerState& s, const LabeledSample& sample);

// Computes sum_j weights[j] * loss(indices[j]) and, when grads != nullptr,
// accumulates the matching parameter gradient into *grads (encoder blocks are
// skipped when the encoder is frozen).
double weighted_loss_grad(const LearnerState& s, const Dataset& data,
                          std::span<const std::size_t> indices,
                          std::span<const double> weights, ParamBlocks* grads);

// One optimizer step on (1/|B|) sum_i q[i] * loss_i, followed by decoupled
// weight decay theta *= (1 - lr * decay) on every trainable parameter.
void weighted_update(LearnerState& s, const Dataset& data, std::span<const std::size_t> batch,
                     const std::vector<double>& q, double lr, double decay);

// R(theta) = 0.5 * ||theta||^2 over all parameters, frozen blocks included
double complexity(const LearnerState& s);

// Plain full-batch training on the target portion with uniform weights;
// used to build the reference for the localized discrepancy estimator.
LearnerState train_reference(const Dataset& data, const LearnerOptions& opts, int epochs,
                             double lr, RngState& rng);

std::string learner_to_json(const LearnerState& s);
LearnerState learner_from_json(const std::string& text);

}  // namespace beacon
