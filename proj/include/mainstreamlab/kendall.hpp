#pragma once

#include <cstdint>
#include <span>

namespace mainstreamlab {

// Pair bookkeeping for Kendall's tau-b over n paired observations.
struct KendallCounts {
  std::int64_t pairs = 0;    // n(n-1)/2
  std::int64_t x_ties = 0;   // pairs tied in x
  std::int64_t y_ties = 0;   // pairs tied in y
  std::int64_t score = 0;    // concordant minus discordant pairs

  bool operator==(const KendallCounts&) const = default;
};

// O(n log n): sort by (x, y), then count y inversions with a bottom-up
// merge sort (Knight's method).
KendallCounts kendall_counts(std::span<const double> x, std::span<const double> y);

// score / sqrt((pairs - x_ties) * (pairs - y_ties)). Throws
// UndefinedCorrelationError when either side is constant.
double tau_b(const KendallCounts& counts);

// Tie-corrected Kendall tau. Requires equal lengths >= 2.
double kendall_tau_b(std::span<const double> x, std::span<const double> y);

}  // namespace mainstreamlab
