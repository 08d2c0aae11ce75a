#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace beacon {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Estimator { kKnn, kClassifier, kLocalized };
enum class QUpdate { kStochastic, kConvexSolve };
enum class UpdateRule { kAdam, kGd };
enum class LossKind { kSquared, kLogistic };
enum class Corruption { kLabelFlip, kLabelOffset };
enum class WeightLogMode { kSummary, kFull };

// Knobs of the localized labeled-discrepancy estimator. The radius has no
// sensible default and must be supplied when the estimator is selected.
struct LocalizedSpec {
  double radius = -1.0;   // parameter-ball radius over the free block; required
  double beta = 1.0;      // soft proximity coefficient
  int steps = 200;        // ascent iterations
  int eval_period = 10;   // evaluate the penalty-free gap every this many steps
  int noise_draws = 1;    // loss evaluations averaged per measurement
  double step_size = 0.05;
  int ref_epochs = 300;   // target-only reference training epochs

  friend bool operator==(const LocalizedSpec&, const LocalizedSpec&) = default;
};

struct HyperParams {
  double lambda1 = 0.01;   // L1 deviation from the reference weighting
  double lambda2 = 0.01;   // L2 shrinkage on the weights
  double lambda_d = 0.1;   // discrepancy penalty scale
  double gamma = 1e-4;     // capacity coefficient (optimizer weight decay scale)
  double rho1 = 0.01;      // L1 deviation of domain weights from uniform
  double rho2 = 0.01;      // L2 shrinkage on domain weights
  double alpha = 0.45;     // source mass fraction in the sum budget n + alpha*m
  double q_max = 5.0;      // per-sample weight upper bound
  double q_t_min = 0.05;   // target weight floor
  double eta_q = 0.01;     // weight step size (source entries)
  double eta_theta = 0.01; // learner step size
  double eta_w = 0.05;     // domain-weight step size
  double eta_t = 0.01;     // weight step size on target entries (multi-source)
  int k_q = 1;             // weight refresh period in epochs
  int s_h = 10;            // learner steps per epoch
  int epochs = 100;        // serialized as "e"
  int k = 5;               // neighbor count for the k-NN estimator
  int batch_size = 32;
  Estimator estimator = Estimator::kKnn;
  QUpdate q_update = QUpdate::kStochastic;
  UpdateRule update_rule = UpdateRule::kAdam;
  bool freeze_encoder = false;
  LocalizedSpec localized;

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

// Synthetic domain-shift task description.
struct ShiftSpec {
  int input_dim = 4;
  int output_dim = 1;
  int n_target = 20;
  int m_per_source = 200;
  int num_domains = 1;  // K; serialized as "k"
  std::vector<std::vector<double>> covariate_shift;  // per-domain mean offset
  std::vector<double> concept_shift;                 // per-domain rotation angle (radians)
  std::vector<double> corrupt_fraction;              // per-domain corrupted fraction
  double label_noise_sigma = 0.1;
  Corruption corruption = Corruption::kLabelOffset;
  double corruption_offset = 5.0;
  // learner shape for this task
  int embed_dim = 8;
  LossKind loss = LossKind::kSquared;
  bool clip_loss = false;

  friend bool operator==(const ShiftSpec&, const ShiftSpec&) = default;
};

struct RunSpec {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::vector<std::string> methods = {"beacon", "target_only", "cotrain_fixed"};
  double mix_ratio = 0.5;  // source fraction for fixed co-training
  WeightLogMode log_weights = WeightLogMode::kSummary;
  int seeds = 5;           // seed count for bench runs

  friend bool operator==(const RunSpec&, const RunSpec&) = default;
};

struct Config {
  HyperParams hyper;
  ShiftSpec benchmark;
  RunSpec run;

  friend bool operator==(const Config&, const Config&) = default;
};

// Parses and range-checks the config document; missing fields get defaults.
// Throws ConfigError with the offending field name.
Config load_config(const std::string& path);
Config parse_config(const std::string& text);
void save_config(const Config& cfg, const std::string& path);
std::string dump_config(const Config& cfg);

std::string to_string(Estimator e);
std::string to_string(QUpdate q);
std::string to_string(UpdateRule u);
std::string to_string(LossKind l);
std::string to_string(Corruption c);
std::string to_string(WeightLogMode m);

}  // namespace beacon
