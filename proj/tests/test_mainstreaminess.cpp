#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mainstreamlab/error.hpp"
#include "mainstreamlab/mainstreaminess.hpp"
#include "test_support.hpp"

using namespace mainstreamlab;
using mainstreamlab::testkit::make_matrix;

namespace {

ProbabilityVector pv(std::vector<double> p) {
  ProbabilityVector v;
  for (std::size_t i = 0; i < p.size(); ++i) v.support.push_back(i);
  v.probabilities = std::move(p);
  return v;
}

PopularityProfile prof(std::vector<double> v) {
  std::vector<ArtistId> ids(v.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<ArtistId>(i + 1);
  return PopularityProfile::from_values(Basis::kApc, Scope::global(), std::move(ids), std::move(v));
}

std::vector<double> random_simplex(Rng& rng, std::size_t n) {
  std::vector<double> p(n);
  double s = 0;
  for (auto& x : p) s += (x = 0.01 + rng.uniform());
  for (auto& x : p) x /= s;
  return p;
}

}  // namespace

TEST(KlDivergence, IdenticalIsZero) {
  EXPECT_EQ(kl_divergence(pv({0.5, 0.5}), pv({0.5, 0.5})), 0.0);
}

TEST(KlDivergence, ClosedForm) {
  EXPECT_NEAR(kl_divergence(pv({0.75, 0.25}), pv({0.25, 0.75})), 0.5 * std::log(3.0), 1e-15);
}

TEST(KlDivergence, ApproachesLog2) {
  const double d = 1e-9;
  EXPECT_NEAR(kl_divergence(pv({1 - d, d}), pv({0.5, 0.5})), std::log(2.0), 1e-7);
}

TEST(KlDivergence, MismatchedSupportFails) {
  auto q = pv({0.5, 0.5});
  q.support = {0, 2};
  EXPECT_THROW(kl_divergence(pv({0.5, 0.5}), q), Error);
}

TEST(NormalizedSymmetrizedDivergence, Examples) {
  EXPECT_EQ(normalized_symmetrized_divergence(pv({0.3, 0.7}), pv({0.3, 0.7})), 0.0);
  EXPECT_NEAR(normalized_symmetrized_divergence(pv({0.75, 0.25}), pv({0.25, 0.75})),
              1 - 1 / std::sqrt(3.0), 1e-12);
}

TEST(NormalizedSymmetrizedDivergence, MatchesDirectEvaluation) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = 1 + rng.index(10);
    const auto p = random_simplex(rng, n);
    const auto q = random_simplex(rng, n);
    EXPECT_NEAR(normalized_symmetrized_divergence(pv(p), pv(q)), testkit::direct_nsd(p, q), 1e-12);
  }
}

TEST(DistributionMeasure, ProportionalIsOne) {
  EXPECT_NEAR(distribution_measure(prof({2, 4, 6, 0}), prof({1, 2, 3, 0})), 1.0, 1e-9);
}

TEST(DistributionMeasure, TwoArtistExample) {
  EXPECT_NEAR(distribution_measure(prof({3, 1}), prof({1, 3}), 1e-14), 1 / std::sqrt(3.0), 1e-9);
}

TEST(DistributionMeasure, EmptyUnionFails) {
  EXPECT_THROW(distribution_measure(prof({0, 0}), prof({0, 0})), Error);
}

TEST(DistributionMeasure, ScaleInvariantWithDisjointSupports) {
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> u(30, 0.0), r(30, 0.0), us(30), rs(30);
    for (std::size_t i = 0; i < 30; ++i) {
      if (rng.uniform() < 0.3) u[i] = 1 + static_cast<double>(rng.index(40));
      if (rng.uniform() < 0.6) r[i] = 1 + static_cast<double>(rng.index(900));
    }
    u[0] = 1;
    const double cu = rng.uniform(0.01, 100), cr = rng.uniform(0.01, 100);
    for (std::size_t i = 0; i < 30; ++i) {
      us[i] = u[i] * cu;
      rs[i] = r[i] * cr;
    }
    EXPECT_NEAR(distribution_measure(prof(us), prof(rs)), distribution_measure(prof(u), prof(r)),
                1e-12);
    EXPECT_NEAR(distribution_measure(prof(u), prof(r)), distribution_measure(prof(r), prof(u)),
                1e-15);
  }
}

TEST(RankMeasure, IdenticalAndReversed) {
  EXPECT_EQ(rank_measure(prof({5, 3, 1}), prof({5, 3, 1})), 1.0);
  EXPECT_EQ(rank_measure(prof({1, 3, 5}), prof({5, 3, 1})), -1.0);
}

TEST(RankMeasure, ConstantUserIsUndefined) {
  EXPECT_THROW(rank_measure(prof({2, 2, 2}), prof({1, 2, 3})), UndefinedCorrelationError);
}

TEST(RankMeasure, AlcIsRejected) {
  auto user = prof({1, 1, 0});
  user.basis = Basis::kAlc;
  auto ref = prof({3, 2, 1});
  ref.basis = Basis::kAlc;
  EXPECT_THROW(rank_measure(user, ref), Error);
}

TEST(MeasureKeys, ColumnNamesRoundTrip) {
  for (const auto& key : all_measures()) {
    EXPECT_TRUE(is_valid(key));
    EXPECT_EQ(parse_measure(column_name(key)), key);
  }
  EXPECT_EQ(column_name(all_measures()[5]), "M_R_APC_country");
  EXPECT_FALSE(is_valid({Method::kRank, Basis::kAlc, Reference::kGlobal}));
  EXPECT_THROW(parse_measure("M_R_ALC_global"), Error);
}

// The precomputed path must reproduce the dense evaluation over the union support.
TEST(ReferenceStats, MatchesDenseEvaluation) {
  Rng rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 5 + rng.index(60);
    std::vector<double> ref(n, 0.0);
    for (auto& v : ref) {
      if (rng.uniform() < 0.7) v = static_cast<double>(1 + rng.index(trial % 3 ? 20 : 3));
    }
    std::vector<double> user(n, 0.0);
    std::vector<std::uint32_t> artists;
    std::vector<double> user_values;
    for (std::size_t a = 0; a < n; ++a) {
      if (rng.uniform() < 0.3) {
        user[a] = static_cast<double>(1 + rng.index(5));
        artists.push_back(static_cast<std::uint32_t>(a));
        user_values.push_back(user[a]);
      }
    }
    if (artists.empty()) continue;
    for (const bool loo : {false, true}) {
      auto reference = ref;
      if (loo) {
        // the user belongs to the reference cohort
        for (std::size_t a = 0; a < n; ++a) reference[a] += user[a];
      }
      const ReferenceStats stats(reference, kDefaultEpsilon);
      const auto dense_ref = loo ? ref : reference;
      double expected = 0;
      if (!loo) {
        expected = distribution_measure(prof(user), prof(dense_ref));
      } else {
        // reference smoothing comes from the full reference mass
        double full = 0, user_mass = 0;
        for (std::size_t a = 0; a < n; ++a) {
          full += reference[a];
          user_mass += user[a];
        }
        const auto support = union_support(user, dense_ref);
        std::vector<double> p, q;
        double zp = 0, zq = 0;
        for (auto a : support) {
          p.push_back(user[a] + kDefaultEpsilon * user_mass);
          q.push_back(dense_ref[a] + kDefaultEpsilon * full);
          zp += p.back();
          zq += q.back();
        }
        for (auto& v : p) v /= zp;
        for (auto& v : q) v /= zq;
        expected = 1 - testkit::direct_nsd(p, q);
      }
      EXPECT_NEAR(stats.distribution_score(artists, user_values, loo), expected, 1e-9);
      double dense_rank = 0;
      bool defined = true;
      try {
        dense_rank = rank_measure(prof(user), prof(dense_ref));
      } catch (const UndefinedCorrelationError&) {
        defined = false;
      }
      if (defined) {
        EXPECT_NEAR(stats.rank_score(artists, user_values, loo), dense_rank, 1e-12);
      } else {
        EXPECT_THROW(stats.rank_score(artists, user_values, loo), UndefinedCorrelationError);
      }
    }
  }
}

TEST(ComputeTable, SingleUserScoresOneAgainstOwnCountry) {
  const auto m = make_matrix({{1, "FI"}}, {{{1, 1}, 5}, {{1, 2}, 3}, {{1, 3}, 1}});
  const auto table = compute_table(m);
  ASSERT_EQ(table.size(), 1u);
  const auto& row = table.rows()[0];
  for (const auto& key : all_measures()) {
    ASSERT_TRUE(row.scores[measure_slot(key)].has_value()) << column_name(key);
    if (key.method == Method::kRank) {
      EXPECT_EQ(*row.scores[measure_slot(key)], 1.0);
    } else {
      EXPECT_NEAR(*row.scores[measure_slot(key)], 1.0, 1e-9);
    }
  }
}

TEST(ComputeTable, SingleArtistUserHasNoRankScore) {
  const auto m = make_matrix({{1, "FI"}, {2, "FI"}}, {{{1, 1}, 5}, {{2, 1}, 4}});
  const auto table = compute_table(m);
  const auto* row = table.find(1);
  ASSERT_NE(row, nullptr);
  EXPECT_FALSE(row->scores[measure_slot({Method::kRank, Basis::kApc, Reference::kGlobal})]);
  EXPECT_TRUE(row->scores[measure_slot({Method::kDistribution, Basis::kApc, Reference::kGlobal})]);
}

TEST(ComputeTable, UserWithoutCountryHasOnlyGlobalScores) {
  const auto m = make_matrix({{1, "FI"}, {2, ""}},
                             {{{1, 1}, 5}, {{1, 2}, 1}, {{2, 1}, 1}, {{2, 2}, 4}});
  const auto table = compute_table(m);
  const auto* row = table.find(2);
  ASSERT_NE(row, nullptr);
  EXPECT_TRUE(row->country.empty());
  for (const auto& key : all_measures()) {
    EXPECT_EQ(row->scores[measure_slot(key)].has_value(), key.reference == Reference::kGlobal);
  }
}

TEST(ComputeTable, MatchesDenseRoute) {
  Rng rng(8);
  const auto m = testkit::random_matrix(rng, 60, 40, {"FI", "SE", "NO"});
  const auto table = compute_table(m);
  const auto global = profile(m, Basis::kApc, Scope::global());
  for (std::size_t r = 0; r < m.num_users(); r += 7) {
    const auto user = profile(m, Basis::kApc, Scope::of_user(m.user_id(r)));
    const auto country =
        profile(m, Basis::kApc, Scope::of_country(m.country_code(m.user_country(r))));
    EXPECT_NEAR(*table.score(m.user_id(r), all_measures()[0]), distribution_measure(user, global),
                1e-9);
    EXPECT_NEAR(*table.score(m.user_id(r), all_measures()[1]), distribution_measure(user, country),
                1e-9);
    const auto rank = table.score(m.user_id(r), all_measures()[4]);
    if (rank) EXPECT_NEAR(*rank, rank_measure(user, global), 1e-12);
  }
}

TEST(ComputeTable, ScaleInvariantUnderRowScaling) {
  Rng rng(12);
  const auto m = testkit::random_matrix(rng, 40, 30, {"FI", "SE"});
  // multiply every user row by an integer constant
  std::map<UserId, std::string> users;
  std::map<std::pair<UserId, ArtistId>, Playcount> cells;
  for (std::size_t r = 0; r < m.num_users(); ++r) {
    users[m.user_id(r)] = m.country_code(m.user_country(r));
    const auto factor = 1 + rng.index(9);
    const auto cols = m.row_artists(r);
    const auto vals = m.row_values(r);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      cells[{m.user_id(r), m.artist_id(cols[j])}] = vals[j] * factor;
    }
  }
  const auto scaled = make_matrix(users, cells);
  const auto a = compute_table(m);
  const auto b = compute_table(scaled);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& ra = a.rows()[i];
    const auto& rb = b.rows()[i];
    // user-level and rank measures do not depend on the user's own scale
    for (std::size_t k : {2u, 3u}) {
      ASSERT_EQ(ra.scores[k].has_value(), rb.scores[k].has_value());
      if (ra.scores[k]) EXPECT_NEAR(*ra.scores[k], *rb.scores[k], 1e-9);
    }
  }
}

TEST(MainstreaminessTable, CsvRoundTrip) {
  Rng rng(4);
  const auto m = testkit::random_matrix(rng, 30, 25, {"FI", "SE"});
  const auto table = compute_table(m);
  const auto csv = table.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "user_id,country,M_D_APC_global,M_D_APC_country,M_D_ALC_global,M_D_ALC_country,"
            "M_R_APC_global,M_R_APC_country");
  std::istringstream in(csv);
  const auto back = MainstreaminessTable::from_csv(in);
  EXPECT_EQ(back.rows(), table.rows());
}

TEST(ComputeTable, LeaveOneOutChangesCountryScores) {
  Rng rng(6);
  const auto m = testkit::random_matrix(rng, 20, 30, {"FI"});
  const auto plain = compute_table(m);
  const auto loo = compute_table(m, {kDefaultEpsilon, true});
  int differs = 0;
  for (std::size_t i = 0; i < plain.size(); ++i) {
    const auto a = plain.rows()[i].scores[1];
    const auto b = loo.rows()[i].scores[1];
    if (a && b && std::abs(*a - *b) > 1e-6) ++differs;
  }
  EXPECT_GT(differs, 0);
}
