#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "mainstreamlab/outliers.hpp"
#include "mainstreamlab/popularity.hpp"
#include "test_support.hpp"

using namespace mainstreamlab;

namespace {

PopularityProfile prof(std::vector<double> v, Scope scope = Scope::global()) {
  std::vector<ArtistId> ids(v.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<ArtistId>(i + 1);
  return PopularityProfile::from_values(Basis::kApc, std::move(scope), std::move(ids), std::move(v));
}

std::vector<std::size_t> identity_order(std::size_t n) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  return order;
}

std::set<std::size_t> ranks(const std::vector<OutlierRecord>& records, Polarity polarity) {
  std::set<std::size_t> out;
  for (const auto& r : records) {
    if (r.polarity == polarity) out.insert(r.global_rank);
  }
  return out;
}

}  // namespace

TEST(SlidingWindow, FlatCurveHasNoOutliers) {
  const auto country = prof(std::vector<double>(40, 10.0));
  EXPECT_TRUE(sliding_window_outliers(country, identity_order(40)).empty());
}

TEST(SlidingWindow, FirstWindowPositive) {
  const auto country = prof({30, 10, 10, 10, 10, 10, 10, 10, 10, 10});
  const auto d = sliding_window_deviation(country, identity_order(10), 5);
  ASSERT_TRUE(d[0].has_value());
  EXPECT_NEAR(*d[0], 100.0 * (30 - 14) / 14, 1e-12);
  const auto records = sliding_window_outliers(country, identity_order(10));
  ASSERT_FALSE(records.empty());
  EXPECT_EQ(records[0].global_rank, 1u);
  EXPECT_EQ(records[0].polarity, Polarity::kPositive);
  EXPECT_NEAR(*records[0].sliding_pct, 114.2857142857, 1e-9);
}

TEST(SlidingWindow, FirstWindowNegative) {
  const auto country = prof({4, 10, 10, 10, 10, 10, 10, 10});
  const auto records = sliding_window_outliers(country, identity_order(8));
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].polarity, Polarity::kNegative);
  EXPECT_NEAR(*records[0].sliding_pct, 100.0 * (4 - 8.8) / 8.8, 1e-12);
}

TEST(SlidingWindow, ThresholdsAreInclusive) {
  // v = 2m exactly with the artist excluded from the mean
  const auto country = prof({20, 10, 10, 10, 10, 10});
  SlidingWindowOptions o;
  o.exclude_self = true;
  const auto records = sliding_window_outliers(country, identity_order(6), o);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(*records[0].sliding_pct, 100.0);
}

TEST(SlidingWindow, ZeroMeanIsSkipped) {
  const auto country = prof({0, 0, 0, 0, 0, 0});
  const auto d = sliding_window_deviation(country, identity_order(6), 5);
  for (const auto& v : d) EXPECT_FALSE(v.has_value());
}

TEST(SlidingWindow, LastArtistHasNoWindow) {
  const auto country = prof({5, 5, 5});
  const auto d = sliding_window_deviation(country, identity_order(3), 5);
  EXPECT_TRUE(d[1].has_value());
  EXPECT_FALSE(d[2].has_value());
}

TEST(GlobalDifference, Examples) {
  const auto country = prof({30, 10, 4}, Scope::of_country("FI"));
  const auto scaled = prof({10, 10, 10}, Scope::of_country("FI"));
  const auto records = global_difference_outliers(country, scaled, identity_order(3));
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].global_rank, 1u);
  EXPECT_EQ(*records[0].global_diff_pct, 200.0);
  EXPECT_EQ(records[0].detector, Detector::kGlobalDifference);
  EXPECT_EQ(records[1].global_rank, 3u);
  EXPECT_EQ(*records[1].global_diff_pct, -60.0);
}

TEST(GlobalDifference, ProportionalCountryHasNoOutliers) {
  Rng rng(70);
  std::vector<double> g(300), c(300);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = 1 + rng.index(1000);
    c[i] = g[i] * 0.013;
  }
  const auto global = prof(g);
  const auto country = prof(c, Scope::of_country("FI"));
  const auto scaled = scale_global_to_country(global, country);
  const auto order = global_rank_order(global, g.size());
  EXPECT_TRUE(global_difference_outliers(country, scaled, order).empty());
  for (const auto& d : global_difference_deviation(country, scaled, order)) {
    EXPECT_NEAR(*d, 0.0, 1e-9);
  }
}

TEST(Outliers, PlantedSpikesAndDipsRecovered) {
  Rng rng(80);
  for (int trial = 0; trial < 5; ++trial) {
    const auto curve = testkit::planted_curve(rng);
    const auto order = global_rank_order(curve.global, curve.global.size());
    const auto scaled = scale_global_to_country(curve.global, curve.country);
    const auto sliding = sliding_window_outliers(curve.country, order, {}, &scaled);
    const auto global = global_difference_outliers(curve.country, scaled, order);
    const std::set<std::size_t> spikes(curve.spikes.begin(), curve.spikes.end());
    const std::set<std::size_t> dips(curve.dips.begin(), curve.dips.end());
    for (const auto* records : {&sliding, &global}) {
      EXPECT_EQ(ranks(*records, Polarity::kPositive), spikes);
      EXPECT_EQ(ranks(*records, Polarity::kNegative), dips);
    }
  }
}

TEST(Outliers, CountryScaleInvariance) {
  Rng rng(81);
  const auto curve = testkit::planted_curve(rng, 600, 5, 1.0);
  auto bigger = curve.country;
  for (auto& v : bigger.values) v *= 123.25;
  const auto order = global_rank_order(curve.global, curve.global.size());
  const auto a = sliding_window_outliers(curve.country, order);
  const auto b = sliding_window_outliers(bigger, order);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].artist, b[i].artist);
    EXPECT_NEAR(*a[i].sliding_pct, *b[i].sliding_pct, 1e-9);
  }
  const auto ga = global_difference_outliers(
      curve.country, scale_global_to_country(curve.global, curve.country), order);
  const auto gb =
      global_difference_outliers(bigger, scale_global_to_country(curve.global, bigger), order);
  ASSERT_EQ(ga.size(), gb.size());
  for (std::size_t i = 0; i < ga.size(); ++i) {
    EXPECT_NEAR(*ga[i].global_diff_pct, *gb[i].global_diff_pct, 1e-9);
  }
}

TEST(Outliers, SortedByRankAndThresholdsHold) {
  Rng rng(82);
  std::vector<double> c(500);
  for (auto& v : c) v = static_cast<double>(rng.index(100));
  const auto country = prof(c);
  const auto records = sliding_window_outliers(country, identity_order(c.size()));
  ASSERT_FALSE(records.empty());
  for (std::size_t i = 1; i < records.size(); ++i) {
    EXPECT_LT(records[i - 1].global_rank, records[i].global_rank);
  }
  for (const auto& r : records) {
    if (r.polarity == Polarity::kPositive) {
      EXPECT_GE(*r.sliding_pct, 100.0);
    } else {
      EXPECT_LE(*r.sliding_pct, -50.0);
    }
  }
}

TEST(Outliers, HorizonLimitsScan) {
  const auto country = prof({10, 10, 10, 10, 10, 10, 40, 10, 10, 10, 10, 10});
  SlidingWindowOptions o;
  o.horizon = 5;
  EXPECT_TRUE(sliding_window_outliers(country, identity_order(12), o).empty());
  o.horizon = 12;
  EXPECT_FALSE(sliding_window_outliers(country, identity_order(12), o).empty());
}

TEST(TopOutliers, ExtremesPerPolarity) {
  std::vector<OutlierRecord> records;
  const double pct[] = {150, 400, 120, -60, -90, -55};
  for (std::size_t i = 0; i < 6; ++i) {
    OutlierRecord r;
    r.artist = static_cast<ArtistId>(i);
    r.global_rank = i + 1;
    r.sliding_pct = pct[i];
    r.polarity = pct[i] > 0 ? Polarity::kPositive : Polarity::kNegative;
    records.push_back(r);
  }
  const auto top = top_outliers(records, 2);
  ASSERT_EQ(top.size(), 4u);
  EXPECT_EQ(*top[0].sliding_pct, 400);
  EXPECT_EQ(*top[1].sliding_pct, 150);
  EXPECT_EQ(*top[2].sliding_pct, -90);
  EXPECT_EQ(*top[3].sliding_pct, -60);
}

TEST(OutliersCsv, Header) {
  const auto csv = outliers_csv({});
  EXPECT_EQ(csv, "artist_id,global_rank,sliding_pct,global_diff_pct,polarity,detector\n");
}
