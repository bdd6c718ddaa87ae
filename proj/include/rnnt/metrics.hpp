#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rnnt {

struct EditOps {
  std::uint64_t substitutions = 0;
  std::uint64_t insertions = 0;
  std::uint64_t deletions = 0;
  std::uint64_t total() const { return substitutions + insertions + deletions; }
};

// Minimal-edit alignment; ties prefer substitution over deletion over
// insertion.
EditOps edit_distance(std::span<const int> hyp, std::span<const int> ref);

// total / ref_len; an empty reference divides by 1.
double error_rate(const EditOps& ops, std::uint64_t ref_len);

struct TimingSample {
  double wall_time_s = 0.0;
  double audio_duration_s = 0.0;
};

double rtf(const TimingSample& s);

// Nearest-rank percentile: sort ascending, take element ceil(p/100 * n),
// 1-based, clamped to [1, n].
double percentile(std::vector<double> values, double p);

}  // namespace rnnt
