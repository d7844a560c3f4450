#pragma once

// Independent test oracles. These deliberately re-derive results with
// different algorithms than the library (plain full-table DP, explicit
// bijection recursion, grid counting) so agreement is meaningful.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "glad/mixsim.hpp"
#include "glad/sot.hpp"

namespace glad::test {

/// Minimal S+D+I errors via a full-table forward DP (no backtrace).
inline std::int64_t oracle_edit_errors(const Words& ref, const Words& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<std::int64_t>> dp(n + 1,
                                            std::vector<std::int64_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) dp[i][0] = static_cast<std::int64_t>(i);
  for (std::size_t j = 0; j <= m; ++j) dp[0][j] = static_cast<std::int64_t>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::int64_t sub = dp[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]);
      dp[i][j] = std::min({sub, dp[i - 1][j] + 1, dp[i][j - 1] + 1});
    }
  }
  return dp[n][m];
}

/// Exhaustive minimum over all bijections between padded segment lists,
/// by explicit recursion over assignments.
inline std::int64_t oracle_pi_errors(std::vector<Words> refs,
                                     std::vector<Words> hyps) {
  const std::size_t k = std::max(refs.size(), hyps.size());
  refs.resize(k);
  hyps.resize(k);
  std::vector<std::vector<std::int64_t>> cost(k, std::vector<std::int64_t>(k));
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t h = 0; h < k; ++h)
      cost[r][h] = oracle_edit_errors(refs[r], hyps[h]);

  std::vector<bool> used(k, false);
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  auto recurse = [&](auto&& self, std::size_t r, std::int64_t acc) -> void {
    if (r == k) {
      best = std::min(best, acc);
      return;
    }
    for (std::size_t h = 0; h < k; ++h) {
      if (used[h]) continue;
      used[h] = true;
      self(self, r + 1, acc + cost[r][h]);
      used[h] = false;
    }
  };
  recurse(recurse, 0, 0);
  return best;
}

/// Overlapped seconds by counting 10 ms grid cells whose midpoint has at
/// least two active intervals.
inline double oracle_overlap_seconds(const std::vector<Interval>& intervals,
                                     double cell = 0.01) {
  double lo = intervals[0].start, hi = intervals[0].end;
  for (const Interval& iv : intervals) {
    lo = std::min(lo, iv.start);
    hi = std::max(hi, iv.end);
  }
  double overlapped = 0.0;
  const std::size_t cells = static_cast<std::size_t>((hi - lo) / cell) + 1;
  for (std::size_t k = 0; k < cells; ++k) {
    const double t = lo + (static_cast<double>(k) + 0.5) * cell;
    if (t >= hi) break;
    int active = 0;
    for (const Interval& iv : intervals) {
      if (iv.start <= t && t < iv.end) ++active;
    }
    if (active >= 2) overlapped += cell;
  }
  return overlapped;
}

}  // namespace glad::test
