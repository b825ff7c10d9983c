#include "mainstreamlab/outliers.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>
#include <fmt/format.h>

#include "mainstreamlab/diagnostics.hpp"
#include "mainstreamlab/error.hpp"

namespace mainstreamlab {
namespace {

std::size_t clamp_horizon(std::size_t horizon, std::size_t available) {
  if (horizon > available) {
    warn(fmt::format("outlier horizon {} exceeds {} ranked artists; truncating", horizon,
                     available));
    return available;
  }
  return horizon;
}

std::optional<Polarity> classify(double pct, const OutlierThresholds& t) {
  if (pct >= t.positive_pct) return Polarity::kPositive;
  if (pct <= t.negative_pct) return Polarity::kNegative;
  return std::nullopt;
}

double triggering_pct(const OutlierRecord& r) {
  return r.detector == Detector::kSlidingWindow ? *r.sliding_pct : *r.global_diff_pct;
}

std::vector<OutlierRecord> collect(const PopularityProfile& country_profile,
                                   std::span<const std::size_t> rank_order, std::size_t horizon,
                                   const std::vector<std::optional<double>>& sliding,
                                   const std::vector<std::optional<double>>& global_diff,
                                   Detector detector, const OutlierThresholds& thresholds) {
  std::vector<OutlierRecord> out;
  const auto& gate = detector == Detector::kSlidingWindow ? sliding : global_diff;
  for (std::size_t i = 0; i < horizon; ++i) {
    if (!gate[i]) continue;
    const auto polarity = classify(*gate[i], thresholds);
    if (!polarity) continue;
    out.push_back({country_profile.artist_id(rank_order[i]), i + 1,
                   sliding.empty() ? std::nullopt : sliding[i],
                   global_diff.empty() ? std::nullopt : global_diff[i], *polarity, detector});
  }
  return out;
}

}  // namespace

std::string_view to_string(Polarity polarity) {
  return polarity == Polarity::kPositive ? "positive" : "negative";
}

std::string_view to_string(Detector detector) {
  return detector == Detector::kSlidingWindow ? "sliding_window" : "global_difference";
}

std::vector<std::optional<double>> sliding_window_deviation(
    const PopularityProfile& country_profile, std::span<const std::size_t> rank_order,
    std::size_t window, bool exclude_self) {
  if (window < 2) throw Error("sliding window must cover at least two artists");
  const std::size_t n = rank_order.size();
  std::vector<std::optional<double>> out(n);

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t end = std::min(i + window, n);
    const std::size_t len = end - i;
    if (len < 2) continue;
    double sum = 0.0;
    for (std::size_t j = i; j < end; ++j) sum += country_profile.values[rank_order[j]];
    const double self = country_profile.values[rank_order[i]];
    const double mean = exclude_self ? (sum - self) / static_cast<double>(len - 1)
                                     : sum / static_cast<double>(len);
    if (mean > 0.0) out[i] = 100.0 * (self - mean) / mean;
  }
  return out;
}

std::vector<std::optional<double>> global_difference_deviation(
    const PopularityProfile& country_profile, const PopularityProfile& scaled_global_profile,
    std::span<const std::size_t> rank_order) {
  if (country_profile.size() != scaled_global_profile.size()) {
    throw Error("profiles use different artist indices");
  }
  std::vector<std::optional<double>> out(rank_order.size());
  for (std::size_t i = 0; i < rank_order.size(); ++i) {
    const double scaled = scaled_global_profile.values[rank_order[i]];
    if (scaled > 0.0) {
      out[i] = 100.0 * (country_profile.values[rank_order[i]] - scaled) / scaled;
    }
  }
  return out;
}

std::vector<OutlierRecord> sliding_window_outliers(const PopularityProfile& country_profile,
                                                   std::span<const std::size_t> rank_order,
                                                   const SlidingWindowOptions& options,
                                                   const PopularityProfile* scaled_global_profile) {
  const auto horizon = clamp_horizon(options.horizon, rank_order.size());
  const auto sliding = sliding_window_deviation(country_profile, rank_order, options.window,
                                                options.exclude_self);
  std::vector<std::optional<double>> global_diff;
  if (scaled_global_profile) {
    global_diff = global_difference_deviation(country_profile, *scaled_global_profile, rank_order);
  }
  return collect(country_profile, rank_order, horizon, sliding, global_diff,
                 Detector::kSlidingWindow, options.thresholds);
}

std::vector<OutlierRecord> global_difference_outliers(
    const PopularityProfile& country_profile, const PopularityProfile& scaled_global_profile,
    std::span<const std::size_t> rank_order, std::size_t horizon,
    const OutlierThresholds& thresholds, std::size_t sliding_window) {
  horizon = clamp_horizon(horizon, rank_order.size());
  const auto global_diff =
      global_difference_deviation(country_profile, scaled_global_profile, rank_order);
  const auto sliding = sliding_window_deviation(country_profile, rank_order, sliding_window);
  return collect(country_profile, rank_order, horizon, sliding, global_diff,
                 Detector::kGlobalDifference, thresholds);
}

std::vector<OutlierRecord> top_outliers(std::span<const OutlierRecord> records, std::size_t n) {
  std::vector<OutlierRecord> positive, negative;
  for (const auto& r : records) {
    (r.polarity == Polarity::kPositive ? positive : negative).push_back(r);
  }
  const auto by_extremeness = [](const OutlierRecord& a, const OutlierRecord& b) {
    const double da = std::abs(triggering_pct(a)), db = std::abs(triggering_pct(b));
    if (da != db) return da > db;
    return a.global_rank < b.global_rank;
  };
  std::stable_sort(positive.begin(), positive.end(), by_extremeness);
  std::stable_sort(negative.begin(), negative.end(), by_extremeness);
  if (positive.size() > n) positive.resize(n);
  if (negative.size() > n) negative.resize(n);
  positive.insert(positive.end(), negative.begin(), negative.end());
  return positive;
}

std::string outliers_csv(std::span<const OutlierRecord> records) {
  fmt::memory_buffer buf;
  auto out = std::back_inserter(buf);
  fmt::format_to(out, "artist_id,global_rank,sliding_pct,global_diff_pct,polarity,detector\n");
  for (const auto& r : records) {
    fmt::format_to(out, "{},{},", r.artist, r.global_rank);
    if (r.sliding_pct) fmt::format_to(out, "{}", *r.sliding_pct);
    fmt::format_to(out, ",");
    if (r.global_diff_pct) fmt::format_to(out, "{}", *r.global_diff_pct);
    fmt::format_to(out, ",{},{}\n", to_string(r.polarity), to_string(r.detector));
  }
  return fmt::to_string(buf);
}

}  // namespace mainstreamlab
