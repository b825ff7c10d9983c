#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "mainstreamlab/dataset.hpp"
#include "mainstreamlab/error.hpp"
#include "test_support.hpp"

using namespace mainstreamlab;
using mainstreamlab::testkit::make_matrix;

namespace {

std::vector<UserRecord> users_from(const std::string& text) {
  std::istringstream in(text);
  return parse_users(in);
}

std::vector<PlaycountTriple> events_from(const std::string& text) {
  std::istringstream in(text);
  return parse_events(in);
}

}  // namespace

TEST(ParseUsers, MapsIdAndCountry) {
  const auto users = users_from("7\tFI\n");
  ASSERT_EQ(users.size(), 1u);
  EXPECT_EQ(users[0].user_id, 7);
  EXPECT_EQ(users[0].country, "FI");
}

TEST(ParseUsers, EmptyCountryIsAbsent) {
  const auto users = users_from("9\t\textra\n");
  ASSERT_EQ(users.size(), 1u);
  EXPECT_EQ(users[0].user_id, 9);
  EXPECT_FALSE(users[0].country.has_value());
}

TEST(ParseUsers, NonIntegerIdReportsLine) {
  try {
    users_from("x\tFI\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(ParseUsers, SkipsHeaderCommentsAndCarriageReturns) {
  const auto users = users_from("user_id\tcountry\r\n# note\n\n3\tSE\r\n4\tzz\n");
  ASSERT_EQ(users.size(), 2u);
  EXPECT_EQ(users[0].country, "SE");
  EXPECT_FALSE(users[1].country.has_value());
}

TEST(ParseUsers, BadLineNumberCountsSkippedLines) {
  try {
    users_from("user_id\tcountry\n1\tFI\n\nabc\tSE\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(ParseEvents, AggregatedRow) {
  const auto t = events_from("1\t5\t3\n");
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0], (PlaycountTriple{1, 5, 3}));
}

TEST(ParseEvents, RawEventsAggregate) {
  const auto t = events_from("1\t5\t0\t0\t100\n1\t5\t0\t0\t200\n2\t5\t0\t0\t300\n");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0], (PlaycountTriple{1, 5, 2}));
  EXPECT_EQ(t[1], (PlaycountTriple{2, 5, 1}));
}

TEST(ParseEvents, NegativePlaycountFails) {
  EXPECT_THROW(events_from("1\t5\t-2\n"), ParseError);
}

TEST(ParseEvents, MixedColumnCountsFail) {
  EXPECT_THROW(events_from("1\t5\t3\n1\t5\t0\t0\t1\n"), ParseError);
}

TEST(ParseEvents, ZeroCountsDropped) {
  const auto t = events_from("1\t5\t0\n1\t6\t2\n");
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].artist_id, 6);
}

TEST(ParseEvents, SortedByUserThenArtist) {
  const auto t = events_from("2\t1\t1\n1\t9\t1\n1\t3\t1\n");
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[0], (PlaycountTriple{1, 3, 1}));
  EXPECT_EQ(t[1], (PlaycountTriple{1, 9, 1}));
  EXPECT_EQ(t[2], (PlaycountTriple{2, 1, 1}));
}

TEST(BuildMatrix, SumsDuplicates) {
  const std::vector<PlaycountTriple> triples{{1, 5, 3}, {1, 5, 2}};
  const auto m = build_matrix(triples, std::vector<UserRecord>{{1, "FI"}});
  ASSERT_EQ(m.num_users(), 1u);
  ASSERT_EQ(m.nnz(), 1u);
  EXPECT_EQ(m.row_values(0)[0], 5u);
  EXPECT_EQ(m.artist_id(m.row_artists(0)[0]), 5);
}

TEST(BuildMatrix, DropsUnknownUsers) {
  const std::vector<PlaycountTriple> triples{{1, 5, 3}, {99, 5, 1}};
  BuildReport report;
  const auto m = build_matrix(triples, std::vector<UserRecord>{{1, "FI"}}, &report);
  EXPECT_EQ(report.dropped_triples, 1u);
  EXPECT_EQ(m.num_users(), 1u);
}

TEST(BuildMatrix, EmptyTriplesGiveEmptyMatrix) {
  const auto m = build_matrix({}, std::vector<UserRecord>{{1, "FI"}});
  EXPECT_TRUE(m.empty());
  EXPECT_EQ(m.nnz(), 0u);
}

TEST(BuildMatrix, DuplicateUserRecordFails) {
  const std::vector<PlaycountTriple> triples{{1, 5, 3}};
  EXPECT_THROW(build_matrix(triples, std::vector<UserRecord>{{1, "FI"}, {1, "SE"}}), Error);
}

TEST(FilterByCountrySupport, ThresholdIsInclusive) {
  std::map<UserId, std::string> users;
  std::map<std::pair<UserId, ArtistId>, Playcount> cells;
  for (UserId u = 1; u <= 100; ++u) {
    users[u] = "FI";
    cells[{u, 1}] = 1;
  }
  for (UserId u = 101; u <= 199; ++u) {
    users[u] = "SE";
    cells[{u, 2}] = 1;
  }
  const auto filtered = filter_by_country_support(make_matrix(users, cells), 100);
  EXPECT_EQ(filtered.num_users(), 100u);
  ASSERT_EQ(filtered.num_countries(), 1u);
  EXPECT_EQ(filtered.country_code(0), "FI");
  // artist 2 was only heard in SE
  EXPECT_EQ(filtered.num_artists(), 1u);
}

TEST(FilterByCountrySupport, NoCountriesIsEmptyDatasetError) {
  const auto m = make_matrix({{1, ""}, {2, ""}}, {{{1, 1}, 1}, {{2, 1}, 1}});
  EXPECT_THROW(filter_by_country_support(m, 1), EmptyDatasetError);
}

TEST(NormalizePerUser, DividesByRowMax) {
  const auto m = make_matrix({{1, "FI"}, {2, "FI"}},
                             {{{1, 1}, 2}, {{1, 2}, 8}, {{1, 3}, 4}, {{2, 1}, 7}});
  const auto n = normalize_per_user(m);
  const auto row = n.row_values(0);
  ASSERT_EQ(row.size(), 3u);
  EXPECT_DOUBLE_EQ(row[0], 0.25);
  EXPECT_DOUBLE_EQ(row[1], 1.0);
  EXPECT_DOUBLE_EQ(row[2], 0.5);
  EXPECT_DOUBLE_EQ(n.row_values(1)[0], 1.0);
}

TEST(NormalizePerUser, RowMaximumIsOne) {
  Rng rng(3);
  const auto m = testkit::random_matrix(rng, 50, 80, {"FI", "SE"});
  const auto n = normalize_per_user(m);
  for (std::size_t r = 0; r < n.num_users(); ++r) {
    const auto v = n.row_values(r);
    EXPECT_EQ(*std::max_element(v.begin(), v.end()), 1.0);
  }
}

TEST(Dataset, CountsAndTotals) {
  const auto m = make_matrix({{1, "FI"}, {2, "SE"}, {3, "FI"}},
                             {{{1, 1}, 2}, {{2, 1}, 3}, {{3, 2}, 4}});
  EXPECT_EQ(total_playcount(m), 9u);
  EXPECT_EQ(country_user_counts(m), (std::vector<std::size_t>{2, 1}));
}

TEST(Dataset, BundledFixtureLoads) {
  std::ifstream users_in(testkit::data_path("users.tsv"));
  std::ifstream events_in(testkit::data_path("events.tsv"));
  const auto m = build_matrix(parse_events(events_in), parse_users(users_in));
  EXPECT_EQ(m.num_users(), 500u);
  const auto filtered = filter_by_country_support(m, 20);
  EXPECT_EQ(filtered.num_countries(), 6u);
}
