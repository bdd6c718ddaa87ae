#include "rnnt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rnnt {

EditOps edit_distance(std::span<const int> hyp, std::span<const int> ref) {
  const std::size_t n = hyp.size(), m = ref.size();
  struct Cell {
    std::uint64_t cost;
    std::uint8_t op;  // 0 match, 1 substitution, 2 deletion, 3 insertion
  };
  std::vector<Cell> dp((n + 1) * (m + 1));
  auto cell = [&](std::size_t i, std::size_t j) -> Cell& {
    return dp[i * (m + 1) + j];
  };
  cell(0, 0) = {0, 0};
  for (std::size_t j = 1; j <= m; ++j) cell(0, j) = {j, 2};  // missing ref tokens
  for (std::size_t i = 1; i <= n; ++i) cell(i, 0) = {i, 3};  // extra hyp tokens
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      if (hyp[i - 1] == ref[j - 1]) {
        cell(i, j) = {cell(i - 1, j - 1).cost, 0};
        continue;
      }
      std::uint64_t sub = cell(i - 1, j - 1).cost + 1;
      std::uint64_t del = cell(i, j - 1).cost + 1;
      std::uint64_t ins = cell(i - 1, j).cost + 1;
      // Tie preference: substitution > deletion > insertion.
      Cell best = {sub, 1};
      if (del < best.cost) best = {del, 2};
      if (ins < best.cost) best = {ins, 3};
      cell(i, j) = best;
    }
  }
  EditOps ops;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    switch (cell(i, j).op) {
      case 0:
        --i, --j;
        break;
      case 1:
        ops.substitutions++, --i, --j;
        break;
      case 2:
        ops.deletions++, --j;
        break;
      default:
        ops.insertions++, --i;
        break;
    }
  }
  return ops;
}

double error_rate(const EditOps& ops, std::uint64_t ref_len) {
  if (ref_len == 0) return static_cast<double>(ops.total());
  return static_cast<double>(ops.total()) / static_cast<double>(ref_len);
}

double rtf(const TimingSample& s) {
  if (s.wall_time_s <= 0.0 || s.audio_duration_s <= 0.0)
    throw std::invalid_argument("rtf: durations must be positive");
  return s.wall_time_s / s.audio_duration_s;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile: empty input");
  if (p < 0.0 || p > 100.0)
    throw std::invalid_argument("percentile: p out of [0, 100]");
  std::sort(values.begin(), values.end());
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(p / 100.0 * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

}  // namespace rnnt
