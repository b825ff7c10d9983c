#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mainstreamlab/dataset.hpp"

namespace mainstreamlab {

// APC: artist playcount, the summed listening events.
// ALC: artist listener count, the number of distinct listeners.
enum class Basis { kApc, kAlc };

std::string_view to_string(Basis basis);
Basis parse_basis(std::string_view text);  // "apc" / "alc", any case

struct Scope {
  enum class Kind { kGlobal, kCountry, kUser };

  Kind kind = Kind::kGlobal;
  std::string country;  // kCountry
  UserId user = 0;      // kUser

  static Scope global() { return {}; }
  static Scope of_country(std::string code) { return {Kind::kCountry, std::move(code), 0}; }
  static Scope of_user(UserId id) { return {Kind::kUser, {}, id}; }

  bool operator==(const Scope&) const = default;
};

// Dense popularity values over an artist index.
struct PopularityProfile {
  Basis basis = Basis::kApc;
  Scope scope;
  std::shared_ptr<const std::vector<ArtistId>> artists;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double total() const;
  ArtistId artist_id(std::size_t pos) const { return (*artists)[pos]; }

  // Profile over explicit ids; mainly for tests and small tools.
  static PopularityProfile from_values(Basis basis, Scope scope, std::vector<ArtistId> ids,
                                       std::vector<double> values);
};

// Throws Error for an unknown country or user.
PopularityProfile profile(const UserArtistMatrix& matrix, Basis basis, const Scope& scope);

// Rescales global popularity to the numeric range of a country:
// scaled[a] = global[a] * sum(country) / sum(global).
PopularityProfile scale_global_to_country(const PopularityProfile& global_profile,
                                          const PopularityProfile& country_profile);

struct RankedArtist {
  ArtistId artist = 0;
  std::size_t position = 0;  // column in the profile's artist index
  double value = 0.0;

  bool operator==(const RankedArtist&) const = default;
};

// Descending by value, ties by ascending artist id.
std::vector<RankedArtist> top_k(const PopularityProfile& profile, std::size_t k);

inline constexpr std::size_t kDefaultHorizon = 10'000;

// Artist positions of the n most popular artists, same order as top_k.
// Truncates with a warning when n exceeds the artist count.
std::vector<std::size_t> global_rank_order(const PopularityProfile& global_profile,
                                           std::size_t n = kDefaultHorizon);

struct PlotRow {
  std::size_t global_rank = 0;  // 1-based
  ArtistId artist = 0;
  double country_value = 0.0;
  double scaled_global_value = 0.0;
};

std::vector<PlotRow> plot_data(const PopularityProfile& country_profile,
                               const PopularityProfile& scaled_global_profile,
                               std::span<const std::size_t> rank_order);

// header `global_rank,artist_id,country_value,scaled_global_value`
std::string plot_csv(std::span<const PlotRow> rows);

struct ProbabilityVector {
  std::vector<std::size_t> support;  // artist positions, ascending
  std::vector<double> probabilities;
};

inline constexpr double kDefaultEpsilon = 1e-8;

// Restricts values to support, adds epsilon * (restricted mass) to each entry
// and renormalizes. An all-zero restriction becomes uniform.
ProbabilityVector to_distribution(std::span<const double> values,
                                  std::span<const std::size_t> support, double epsilon);
ProbabilityVector to_distribution(const PopularityProfile& profile,
                                  std::span<const std::size_t> support, double epsilon);

// Ascending positions where either profile is nonzero.
std::vector<std::size_t> union_support(std::span<const double> a, std::span<const double> b);

}  // namespace mainstreamlab
