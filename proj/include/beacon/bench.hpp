#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "beacon/config.hpp"
#include "beacon/data.hpp"
#include "beacon/rng.hpp"
#include "beacon/trainer.hpp"

namespace beacon {

struct GeneratedTask {
  Dataset train;
  Dataset heldout;  // disjoint target samples, same size as the training targets
  std::uint64_t fingerprint = 0;
};

// Linear-label task with per-domain covariate shift (mean offset), concept
// shift (rotation of the true weights), and label corruption on a flagged
// subset of each source domain.
GeneratedTask gen_shifted_task(const ShiftSpec& spec, RngState& rng);

struct BenchCell {
  std::string method;
  std::uint64_t seed = 0;
  std::uint64_t dataset_fingerprint = 0;
  double final_risk = 0.0;
  QStats final_q;
  double wall_seconds = 0.0;
  TrainReport report;
};

struct BenchReport {
  std::vector<BenchCell> cells;
};

// Runs every method on the identical (dataset, seed) pair with a shared
// initial learner per seed.
BenchReport run_experiment(const Config& cfg, const std::vector<std::string>& methods,
                           const std::vector<std::uint64_t>& seeds);

// Trains one method on a prepared task; used by run_experiment and the tests.
TrainReport run_method(const std::string& method, const GeneratedTask& task, const Config& cfg,
                       const LearnerState& init, std::uint64_t seed,
                       bool log_full_q = false);

struct SweepFieldResult {
  std::string field;
  std::vector<double> values;
  std::vector<double> mean_risks;
  double chosen = 0.0;
};

struct SweepReport {
  std::vector<SweepFieldResult> fields;
  HyperParams tuned;
};

// Greedy coordinate-wise sweep: one hyperparameter at a time, fixing the value
// with the lowest mean held-out risk before moving on. Exact ties resolve
// toward the default value, then toward the smaller one.
SweepReport run_sweep(const Config& cfg, const std::vector<std::string>& field_order,
                      const std::map<std::string, std::vector<double>>& grids,
                      const std::vector<std::uint64_t>& seeds);

// Writes metrics.csv, weights.jsonl, and summary.json into dir.
void export_metrics(const BenchReport& report, const std::string& dir);

void export_sweep(const SweepReport& report, const std::string& dir);

// numeric CSV input ('.' decimal, ',' separator); a leading header row is
// skipped when its first field is not a number
std::vector<std::vector<double>> read_matrix_csv(const std::string& path);

// shortest round-trip decimal formatting, used by all exports
std::string format_double(double v);

// names accepted by run_sweep
std::vector<std::string> sweepable_fields();

}  // namespace beacon
