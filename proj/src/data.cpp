#include "beacon/data.hpp"

#include <cstring>
#include <stdexcept>
#include <string>

namespace beacon {

Dataset Dataset::target_subset() const {
  Dataset out;
  out.m = 0;
  out.n = n;
  out.num_domains = 0;
  out.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(m), samples.end());
  return out;
}

void Dataset::validate() const {
  if (samples.size() != m + n)
    throw std::invalid_argument("Dataset: sample count does not match m + n");
  if (n < 1) throw std::invalid_argument("Dataset: needs at least one target sample");
  const std::size_t xd = input_dim();
  const std::size_t yd = output_dim();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.x.size() != xd || s.y.size() != yd)
      throw std::invalid_argument("Dataset: inconsistent dimensions at index " + std::to_string(i));
    if (i < m) {
      if (s.is_target())
        throw std::invalid_argument("Dataset: target sample in source range at index " + std::to_string(i));
      if (s.domain < 0 || s.domain >= num_domains)
        throw std::invalid_argument("Dataset: source domain out of range at index " + std::to_string(i));
    } else if (!s.is_target()) {
      throw std::invalid_argument("Dataset: source sample in target range at index " + std::to_string(i));
    }
  }
}

namespace {

void fnv_mix(std::uint64_t& h, const void* p, std::size_t len) {
  const auto* b = static_cast<const unsigned char*>(p);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= b[i];
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

std::uint64_t dataset_fingerprint(const Dataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  fnv_mix(h, &data.m, sizeof(data.m));
  fnv_mix(h, &data.n, sizeof(data.n));
  for (const auto& s : data.samples) {
    fnv_mix(h, s.x.data(), s.x.size() * sizeof(double));
    fnv_mix(h, s.y.data(), s.y.size() * sizeof(double));
    fnv_mix(h, &s.domain, sizeof(s.domain));
    const unsigned char c = s.corrupt ? 1 : 0;
    fnv_mix(h, &c, 1);
  }
  return h;
}

}  // namespace beacon
