#include "mainstreamlab/kendall.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mainstreamlab/error.hpp"

namespace mainstreamlab {
namespace {

std::int64_t tied_pairs(std::int64_t run) { return run * (run - 1) / 2; }

// Sorts keys ascending and returns the number of strictly inverted pairs.
std::int64_t count_inversions(std::vector<double>& keys) {
  const std::size_t n = keys.size();
  std::vector<double> buf(n);
  std::int64_t inversions = 0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo < n; lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, n);
      const std::size_t hi = std::min(lo + 2 * width, n);
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (keys[j] < keys[i]) {
          inversions += static_cast<std::int64_t>(mid - i);
          buf[k++] = keys[j++];
        } else {
          buf[k++] = keys[i++];
        }
      }
      while (i < mid) buf[k++] = keys[i++];
      while (j < hi) buf[k++] = keys[j++];
    }
    keys.swap(buf);
  }
  return inversions;
}

}  // namespace

KendallCounts kendall_counts(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("kendall: vectors differ in length");
  const std::size_t n = x.size();
  KendallCounts out;
  out.pairs = tied_pairs(static_cast<std::int64_t>(n));
  if (n < 2) return out;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });

  std::int64_t joint_ties = 0;
  std::int64_t x_run = 1, joint_run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    const auto a = order[i - 1], b = order[i];
    if (x[a] == x[b]) {
      ++x_run;
      if (y[a] == y[b]) {
        ++joint_run;
      } else {
        joint_ties += tied_pairs(joint_run);
        joint_run = 1;
      }
    } else {
      out.x_ties += tied_pairs(x_run);
      joint_ties += tied_pairs(joint_run);
      x_run = joint_run = 1;
    }
  }
  out.x_ties += tied_pairs(x_run);
  joint_ties += tied_pairs(joint_run);

  std::vector<double> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = y[order[i]];
  const std::int64_t discordant = count_inversions(keys);

  std::int64_t y_run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (keys[i] == keys[i - 1]) {
      ++y_run;
    } else {
      out.y_ties += tied_pairs(y_run);
      y_run = 1;
    }
  }
  out.y_ties += tied_pairs(y_run);

  out.score = out.pairs - out.x_ties - out.y_ties + joint_ties - 2 * discordant;
  return out;
}

double tau_b(const KendallCounts& counts) {
  const std::int64_t nx = counts.pairs - counts.x_ties;
  const std::int64_t ny = counts.pairs - counts.y_ties;
  if (nx <= 0 || ny <= 0) {
    throw UndefinedCorrelationError("kendall tau-b is undefined for a constant vector");
  }
  // Equal factors take the exact path so identical and reversed rankings
  // give exactly +1 and -1.
  const double denom = nx == ny ? static_cast<double>(nx)
                                : std::sqrt(static_cast<double>(nx) * static_cast<double>(ny));
  return std::clamp(static_cast<double>(counts.score) / denom, -1.0, 1.0);
}

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("kendall: vectors differ in length");
  if (x.size() < 2) throw UndefinedCorrelationError("kendall tau-b needs at least two pairs");
  return tau_b(kendall_counts(x, y));
}

}  // namespace mainstreamlab
