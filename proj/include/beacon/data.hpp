#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace beacon {

inline constexpr int kTargetDomain = -1;

struct LabeledSample {
  std::vector<double> x;
  std::vector<double> y;
  int domain = kTargetDomain;  // source domain index in [0, K), or kTargetDomain
  bool corrupt = false;        // benchmark ground truth; never visible to training

  bool is_target() const { return domain == kTargetDomain; }
};

// Combined source+target container. Samples are stored source-first:
// indices [0, m) are source, [m, m+n) are target.
struct Dataset {
  std::vector<LabeledSample> samples;
  std::size_t m = 0;       // source count
  std::size_t n = 0;       // target count
  int num_domains = 0;     // K

  std::size_t size() const { return samples.size(); }
  bool is_source(std::size_t i) const { return i < m; }

  std::size_t input_dim() const { return samples.empty() ? 0 : samples.front().x.size(); }
  std::size_t output_dim() const { return samples.empty() ? 0 : samples.front().y.size(); }

  // target-only view as its own dataset (m = 0)
  Dataset target_subset() const;

  // throws std::invalid_argument on layout violations
  void validate() const;
};

// FNV-1a over sample contents; identifies a generated dataset in reports
std::uint64_t dataset_fingerprint(const Dataset& data);

}  // namespace beacon
