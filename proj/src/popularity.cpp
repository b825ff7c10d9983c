#include "mainstreamlab/popularity.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include <fmt/core.h>
#include <fmt/format.h>

#include "mainstreamlab/diagnostics.hpp"
#include "mainstreamlab/error.hpp"

namespace mainstreamlab {

std::string_view to_string(Basis basis) { return basis == Basis::kApc ? "APC" : "ALC"; }

Basis parse_basis(std::string_view text) {
  std::string lower;
  for (const char c : text) lower.push_back(static_cast<char>(std::tolower(c)));
  if (lower == "apc") return Basis::kApc;
  if (lower == "alc") return Basis::kAlc;
  throw Error(fmt::format("unknown basis '{}'", text));
}

double PopularityProfile::total() const {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

PopularityProfile PopularityProfile::from_values(Basis basis, Scope scope,
                                                 std::vector<ArtistId> ids,
                                                 std::vector<double> values) {
  if (ids.size() != values.size()) throw Error("artist ids and values differ in length");
  return {basis, std::move(scope), std::make_shared<const std::vector<ArtistId>>(std::move(ids)),
          std::move(values)};
}

PopularityProfile profile(const UserArtistMatrix& matrix, Basis basis, const Scope& scope) {
  PopularityProfile out;
  out.basis = basis;
  out.scope = scope;
  out.artists = std::shared_ptr<const std::vector<ArtistId>>(matrix.shared_index(),
                                                             &matrix.index().artist_ids);
  out.values.assign(matrix.num_artists(), 0.0);

  auto add_row = [&](std::size_t r) {
    const auto cols = matrix.row_artists(r);
    const auto vals = matrix.row_values(r);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      out.values[cols[j]] += basis == Basis::kApc ? static_cast<double>(vals[j]) : 1.0;
    }
  };

  switch (scope.kind) {
    case Scope::Kind::kGlobal:
      for (std::size_t r = 0; r < matrix.num_users(); ++r) add_row(r);
      break;
    case Scope::Kind::kCountry: {
      const auto c = matrix.index().find_country(scope.country);
      if (!c) throw Error(fmt::format("unknown country '{}'", scope.country));
      for (std::size_t r = 0; r < matrix.num_users(); ++r) {
        if (matrix.user_country(r) == *c) add_row(r);
      }
      break;
    }
    case Scope::Kind::kUser: {
      const auto r = matrix.index().find_user(scope.user);
      if (!r) throw Error(fmt::format("unknown user {}", scope.user));
      add_row(*r);
      break;
    }
  }
  return out;
}

PopularityProfile scale_global_to_country(const PopularityProfile& global_profile,
                                          const PopularityProfile& country_profile) {
  if (global_profile.basis != country_profile.basis) throw Error("profiles differ in basis");
  if (global_profile.size() != country_profile.size()) {
    throw Error("profiles use different artist indices");
  }
  const double global_total = global_profile.total();
  if (global_total <= 0.0) throw Error("global profile has zero total");
  const double factor = country_profile.total() / global_total;

  PopularityProfile out = global_profile;
  out.scope = country_profile.scope;
  for (auto& v : out.values) v *= factor;
  return out;
}

namespace {

std::vector<std::size_t> ranked_positions(const PopularityProfile& profile, std::size_t n) {
  std::vector<std::size_t> order(profile.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto before = [&](std::size_t a, std::size_t b) {
    if (profile.values[a] != profile.values[b]) return profile.values[a] > profile.values[b];
    return profile.artist_id(a) < profile.artist_id(b);
  };
  n = std::min(n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    before);
  order.resize(n);
  return order;
}

}  // namespace

std::vector<RankedArtist> top_k(const PopularityProfile& profile, std::size_t k) {
  if (k < 1) throw Error("k must be at least 1");
  std::vector<RankedArtist> out;
  for (const auto pos : ranked_positions(profile, k)) {
    out.push_back({profile.artist_id(pos), pos, profile.values[pos]});
  }
  return out;
}

std::vector<std::size_t> global_rank_order(const PopularityProfile& global_profile,
                                           std::size_t n) {
  if (n > global_profile.size()) {
    warn(fmt::format("rank horizon {} exceeds {} artists; truncating", n, global_profile.size()));
  }
  return ranked_positions(global_profile, n);
}

std::vector<PlotRow> plot_data(const PopularityProfile& country_profile,
                               const PopularityProfile& scaled_global_profile,
                               std::span<const std::size_t> rank_order) {
  if (country_profile.size() != scaled_global_profile.size()) {
    throw Error("profiles use different artist indices");
  }
  std::vector<PlotRow> rows;
  rows.reserve(rank_order.size());
  for (std::size_t i = 0; i < rank_order.size(); ++i) {
    const auto pos = rank_order[i];
    rows.push_back({i + 1, country_profile.artist_id(pos), country_profile.values[pos],
                    scaled_global_profile.values[pos]});
  }
  return rows;
}

std::string plot_csv(std::span<const PlotRow> rows) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "global_rank,artist_id,country_value,scaled_global_value\n");
  for (const auto& r : rows) {
    fmt::format_to(std::back_inserter(buf), "{},{},{},{}\n", r.global_rank, r.artist,
                   r.country_value, r.scaled_global_value);
  }
  return fmt::to_string(buf);
}

ProbabilityVector to_distribution(std::span<const double> values,
                                  std::span<const std::size_t> support, double epsilon) {
  if (support.empty()) throw Error("empty support");
  if (!(epsilon > 0.0)) throw Error("epsilon must be positive");
  ProbabilityVector out;
  out.support.assign(support.begin(), support.end());
  out.probabilities.reserve(support.size());
  // epsilon is relative to the profile's mass, which keeps the result
  // invariant under rescaling of the profile
  double mass = 0.0;
  for (const auto pos : support) mass += values[pos];
  const double smoothing = epsilon * (mass > 0.0 ? mass : 1.0);
  const double total = mass + smoothing * static_cast<double>(support.size());
  for (const auto pos : support) out.probabilities.push_back((values[pos] + smoothing) / total);
  return out;
}

ProbabilityVector to_distribution(const PopularityProfile& profile,
                                  std::span<const std::size_t> support, double epsilon) {
  return to_distribution(profile.values, support, epsilon);
}

std::vector<std::size_t> union_support(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("profiles use different artist indices");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != 0.0 || b[i] != 0.0) out.push_back(i);
  }
  return out;
}

}  // namespace mainstreamlab
