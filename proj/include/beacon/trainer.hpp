#pragma once

#include <optional>
#include <vector>

#include "beacon/config.hpp"
#include "beacon/data.hpp"
#include "beacon/discrepancy.hpp"
#include "beacon/learner.hpp"
#include "beacon/rng.hpp"
#include "beacon/weights.hpp"

namespace beacon {

// Summary statistics of a weight vector split by sample group. Empty groups
// report NaN.
struct QStats {
  double mean_source = 0.0, std_source = 0.0;
  double mean_target = 0.0, std_target = 0.0;
  double mean_clean = 0.0, std_clean = 0.0;      // clean source samples
  double mean_corrupt = 0.0, std_corrupt = 0.0;  // corrupted source samples
};

QStats weight_stats(const Dataset& data, const std::vector<double>& q);

struct EpochMetric {
  double weighted_train_loss = 0.0;
  double target_risk = 0.0;  // NaN when no held-out set was supplied
  QStats q;
};

struct RefreshLog {
  int epoch = 0;
  QStats q;
  double d_mean = 0.0;                    // mean refreshed discrepancy over sources
  std::optional<double> d_aux;            // estimator side channel
  std::vector<double> w;                  // domain weights (multi-source only)
  std::optional<std::vector<double>> q_full;
};

struct TrainReport {
  LearnerState learner;
  std::vector<EpochMetric> epochs;
  std::vector<RefreshLog> refreshes;
  WeightState final_weights;
  DiscrepancyScores final_d;
  std::vector<double> final_w;            // multi-source only
  std::vector<double> objective_trace;    // per phase, when tracked
};

struct TrainContext {
  const Dataset* heldout = nullptr;       // held-out target set for per-epoch risk
  const LearnerState* init = nullptr;     // shared initial learner, if any
  bool log_full_q = false;
  bool track_objective = false;           // record the objective after every phase
};

// Mean per-example loss on a held-out set.
double evaluate(const LearnerState& s, const Dataset& heldout);

// Full weighted objective at the current learner and weights:
//   sum_i q_i (loss_i + lambda_d d_i) + gamma ||q||_inf R(theta)
//   + lambda1 ||q - p0||_1 + lambda2 ||q||_2^2
double objective_value(const LearnerState& s, const Dataset& data, const WeightState& ws,
                       const DiscrepancyScores& d, const HyperParams& hp);

TrainReport train_beacon_single(const Dataset& data, const HyperParams& hp,
                                const LearnerOptions& opts, RngState& rng,
                                const TrainContext& ctx = {});

TrainReport train_beacon_multi(const Dataset& data, const HyperParams& hp,
                               const LearnerOptions& opts, RngState& rng,
                               const TrainContext& ctx = {});

TrainReport train_target_only(const Dataset& data, const HyperParams& hp,
                              const LearnerOptions& opts, RngState& rng,
                              const TrainContext& ctx = {});

TrainReport train_cotrain_fixed(const Dataset& data, const HyperParams& hp,
                                const LearnerOptions& opts, double mix_ratio, RngState& rng,
                                const TrainContext& ctx = {});

}  // namespace beacon
