#include <gtest/gtest.h>

#include <numeric>

#include "mainstreamlab/error.hpp"
#include "mainstreamlab/popularity.hpp"
#include "test_support.hpp"

using namespace mainstreamlab;
using mainstreamlab::testkit::make_matrix;

namespace {

// u1:(a:2), u2:(a:3, b:1) with a=10, b=20
UserArtistMatrix two_users() {
  return make_matrix({{1, "FI"}, {2, "SE"}}, {{{1, 10}, 2}, {{2, 10}, 3}, {{2, 20}, 1}});
}

PopularityProfile values(std::vector<ArtistId> ids, std::vector<double> v) {
  return PopularityProfile::from_values(Basis::kApc, Scope::global(), std::move(ids), std::move(v));
}

}  // namespace

TEST(Profile, GlobalApc) {
  const auto p = profile(two_users(), Basis::kApc, Scope::global());
  EXPECT_EQ(p.values, (std::vector<double>{5, 1}));
}

TEST(Profile, GlobalAlc) {
  const auto p = profile(two_users(), Basis::kAlc, Scope::global());
  EXPECT_EQ(p.values, (std::vector<double>{2, 1}));
}

TEST(Profile, CountryAndUserScopes) {
  const auto m = two_users();
  EXPECT_EQ(profile(m, Basis::kApc, Scope::of_country("SE")).values, (std::vector<double>{3, 1}));
  EXPECT_EQ(profile(m, Basis::kAlc, Scope::of_user(2)).values, (std::vector<double>{1, 1}));
  EXPECT_EQ(profile(m, Basis::kApc, Scope::of_user(1)).values, (std::vector<double>{2, 0}));
}

TEST(Profile, UnknownScopeFails) {
  const auto m = two_users();
  EXPECT_THROW(profile(m, Basis::kApc, Scope::of_country("US")), Error);
  EXPECT_THROW(profile(m, Basis::kApc, Scope::of_user(42)), Error);
}

TEST(ScaleGlobalToCountry, Arithmetic) {
  auto global = values({1, 2}, {100, 900});
  auto country = values({1, 2}, {20, 30});
  const auto scaled = scale_global_to_country(global, country);
  EXPECT_DOUBLE_EQ(scaled.values[0], 5.0);
  EXPECT_DOUBLE_EQ(scaled.total(), 50.0);
}

TEST(ScaleGlobalToCountry, EqualTotalsIsIdentity) {
  auto global = values({1, 2, 3}, {4, 5, 6});
  auto country = values({1, 2, 3}, {6, 5, 4});
  EXPECT_EQ(scale_global_to_country(global, country).values, global.values);
}

TEST(ScaleGlobalToCountry, ZeroGlobalTotalFails) {
  EXPECT_THROW(scale_global_to_country(values({1}, {0}), values({1}, {1})), Error);
}

TEST(TopK, OrdersByValue) {
  const auto top = top_k(values({1, 2}, {5, 1}), 1);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].artist, 1);
  EXPECT_EQ(top[0].value, 5);
}

TEST(TopK, TiesByAscendingId) {
  const auto top = top_k(values({3, 1, 2}, {5, 5, 1}), 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].artist, 1);
  EXPECT_EQ(top[1].artist, 3);
}

TEST(TopK, KLargerThanProfile) {
  EXPECT_EQ(top_k(values({1, 2}, {1, 2}), 10).size(), 2u);
}

TEST(GlobalRankOrder, MatchesTopKAndTruncates) {
  const auto p = values({1, 2, 3}, {1, 3, 2});
  EXPECT_EQ(global_rank_order(p, 2), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(global_rank_order(p, 50), (std::vector<std::size_t>{1, 2, 0}));
}

TEST(PlotData, OneRowPerRankedArtist) {
  const auto global = values({1, 2, 3}, {3, 2, 1});
  const auto country = values({1, 2, 3}, {1, 1, 4});
  const auto scaled = scale_global_to_country(global, country);
  const auto order = global_rank_order(global, 3);
  const auto rows = plot_data(country, scaled, order);
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(rows[i].global_rank, i + 1);
  EXPECT_EQ(rows[2].artist, 3);
  EXPECT_DOUBLE_EQ(rows[2].country_value, 4);
  EXPECT_DOUBLE_EQ(rows[0].scaled_global_value, 3);
  const auto csv = plot_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "global_rank,artist_id,country_value,scaled_global_value");
}

TEST(ToDistribution, NearZeroEpsilon) {
  const std::vector<double> v{3, 1};
  const std::vector<std::size_t> s{0, 1};
  const auto d = to_distribution(v, s, 1e-12);
  EXPECT_NEAR(d.probabilities[0], 0.75, 1e-12);
  EXPECT_NEAR(d.probabilities[1], 0.25, 1e-12);
}

TEST(ToDistribution, AllZeroIsUniform) {
  const std::vector<double> v{0, 0};
  const std::vector<std::size_t> s{0, 1};
  const auto d = to_distribution(v, s, 1e-8);
  EXPECT_DOUBLE_EQ(d.probabilities[0], 0.5);
  EXPECT_DOUBLE_EQ(d.probabilities[1], 0.5);
}

TEST(ToDistribution, SmoothingArithmetic) {
  const std::vector<double> v{1, 0};
  const std::vector<std::size_t> s{0, 1};
  const auto d = to_distribution(v, s, 1.0);
  EXPECT_DOUBLE_EQ(d.probabilities[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(d.probabilities[1], 1.0 / 3.0);
}

TEST(ToDistribution, EmptySupportFails) {
  const std::vector<double> v{1};
  EXPECT_THROW(to_distribution(v, {}, 1e-8), Error);
}

TEST(UnionSupport, EitherNonzero) {
  const std::vector<double> a{0, 1, 0, 0};
  const std::vector<double> b{0, 0, 2, 0};
  EXPECT_EQ(union_support(a, b), (std::vector<std::size_t>{1, 2}));
}

TEST(ScaleGlobalToCountry, TotalsMatchOnRandomMatrices) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = testkit::random_matrix(rng, 40, 60, {"AT", "BE", "CH"});
    const auto global = profile(m, Basis::kApc, Scope::global());
    for (const auto& code : m.index().countries) {
      const auto country = profile(m, Basis::kApc, Scope::of_country(code));
      const auto scaled = scale_global_to_country(global, country);
      EXPECT_NEAR(scaled.total() / country.total(), 1.0, 1e-9);
    }
  }
}
