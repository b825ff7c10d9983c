#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mainstreamlab/popularity.hpp"

namespace mainstreamlab {

enum class Polarity { kPositive, kNegative };
enum class Detector { kSlidingWindow, kGlobalDifference };

std::string_view to_string(Polarity polarity);
std::string_view to_string(Detector detector);

// Percentages are signed, e.g. +114.3 or -54.5. A percentage is absent when
// its detector had nothing to compare against (zero window mean or zero
// scaled global value).
struct OutlierRecord {
  ArtistId artist = 0;
  std::size_t global_rank = 0;  // 1-based
  std::optional<double> sliding_pct;
  std::optional<double> global_diff_pct;
  Polarity polarity = Polarity::kPositive;
  Detector detector = Detector::kSlidingWindow;
};

struct OutlierThresholds {
  double positive_pct = 100.0;  // flagged when d >= this
  double negative_pct = -50.0;  // flagged when d <= this
};

struct SlidingWindowOptions {
  std::size_t window = 5;
  std::size_t horizon = kDefaultHorizon;
  OutlierThresholds thresholds;
  // The window mean covers the artist and its window-1 successors. With
  // this flag the artist itself is left out of the mean.
  bool exclude_self = false;
};

// Relative deviation of each ranked artist from the mean of its window,
// 100 * (v - mean) / mean. Windows run along rank_order; near the end of the
// order they shrink to the artists that remain (at least two). Entry i is
// absent when the window mean is zero or the window is too short.
std::vector<std::optional<double>> sliding_window_deviation(
    const PopularityProfile& country_profile, std::span<const std::size_t> rank_order,
    std::size_t window, bool exclude_self = false);

// 100 * (country - scaled) / scaled per ranked artist; absent when scaled is 0.
std::vector<std::optional<double>> global_difference_deviation(
    const PopularityProfile& country_profile, const PopularityProfile& scaled_global_profile,
    std::span<const std::size_t> rank_order);

// Records for artists within the horizon whose sliding-window deviation
// crosses a threshold. Sorted by global rank. Both percentage columns are
// filled; scaled_global_profile is optional and only feeds global_diff_pct.
std::vector<OutlierRecord> sliding_window_outliers(
    const PopularityProfile& country_profile, std::span<const std::size_t> rank_order,
    const SlidingWindowOptions& options = {},
    const PopularityProfile* scaled_global_profile = nullptr);

std::vector<OutlierRecord> global_difference_outliers(
    const PopularityProfile& country_profile, const PopularityProfile& scaled_global_profile,
    std::span<const std::size_t> rank_order, std::size_t horizon = kDefaultHorizon,
    const OutlierThresholds& thresholds = {}, std::size_t sliding_window = 5);

// The n most extreme positive and n most extreme negative records by the
// triggering percentage, each group ordered by decreasing |d|.
std::vector<OutlierRecord> top_outliers(std::span<const OutlierRecord> records, std::size_t n);

// header `artist_id,global_rank,sliding_pct,global_diff_pct,polarity,detector`
std::string outliers_csv(std::span<const OutlierRecord> records);

}  // namespace mainstreamlab
