#pragma once

#include <array>
#include <cstddef>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mainstreamlab/dataset.hpp"
#include "mainstreamlab/popularity.hpp"

namespace mainstreamlab {

enum class Method { kDistribution, kRank };
enum class Reference { kGlobal, kCountry };

// One of the six user-level mainstreaminess measures. Rank-based measures
// only exist for APC: a user's ALC vector is all ones, so it has no ranking.
struct MeasureKey {
  Method method = Method::kDistribution;
  Basis basis = Basis::kApc;
  Reference reference = Reference::kGlobal;

  bool operator==(const MeasureKey&) const = default;
};

inline constexpr std::size_t kNumMeasures = 6;

// CSV column order: D_APC_global, D_APC_country, D_ALC_global,
// D_ALC_country, R_APC_global, R_APC_country.
const std::array<MeasureKey, kNumMeasures>& all_measures();
std::size_t measure_slot(const MeasureKey& key);  // position in all_measures()
bool is_valid(const MeasureKey& key);
std::string column_name(const MeasureKey& key);  // e.g. "M_R_APC_country"
MeasureKey parse_measure(std::string_view column);

std::string_view to_string(Method method);
std::string_view to_string(Reference reference);

// Kullback-Leibler divergence with natural log. Both vectors must share the
// same support and q must be strictly positive there.
double kl_divergence(const ProbabilityVector& p, const ProbabilityVector& q);

// avg(1 - exp(-KL(p||q)), 1 - exp(-KL(q||p))), in [0, 1).
double normalized_symmetrized_divergence(const ProbabilityVector& p, const ProbabilityVector& q);

// 1 - normalized_symmetrized_divergence over the epsilon-smoothed union
// support of the two profiles. In (0, 1]; 1 means identical distributions.
double distribution_measure(const PopularityProfile& user_profile,
                            const PopularityProfile& reference_profile,
                            double epsilon = kDefaultEpsilon);

// Kendall tau-b between the reference and user values over the union
// support. APC only.
double rank_measure(const PopularityProfile& user_profile,
                    const PopularityProfile& reference_profile);

// Precomputed sums over one reference profile so that a user's score costs
// O(m log n) for a user with m artists, instead of touching every artist in
// the reference support. Produces the same values as distribution_measure
// and rank_measure on dense profiles.
class ReferenceStats {
 public:
  ReferenceStats(std::vector<double> values, double epsilon);

  // `artists` ascending positions with user values `user_values` > 0. With
  // leave_one_out the user's own values are subtracted from the reference
  // first; the user must then be part of the reference cohort. The reference
  // smoothing stays relative to the full reference mass in that case.
  double distribution_score(std::span<const std::uint32_t> artists,
                            std::span<const double> user_values,
                            bool leave_one_out = false) const;
  double rank_score(std::span<const std::uint32_t> artists,
                    std::span<const double> user_values,
                    bool leave_one_out = false) const;

  std::size_t support_size() const { return sorted_.size(); }

 private:
  std::vector<double> values_;
  std::vector<double> sorted_;  // positive values, ascending
  double epsilon_;
  double smoothing_ = 0.0;  // epsilon times the reference mass
  double total_ = 0.0;
  double log_sum_ = 0.0;      // sum log(g + eps) over the support
  double xlogx_sum_ = 0.0;    // sum (g + eps) log(g + eps) over the support
  std::int64_t tied_pairs_ = 0;
};

struct MainstreaminessRow {
  UserId user = 0;
  std::string country;  // empty when unknown
  std::array<std::optional<double>, kNumMeasures> scores;

  bool operator==(const MainstreaminessRow&) const = default;
};

class MainstreaminessTable {
 public:
  MainstreaminessTable() = default;
  explicit MainstreaminessTable(std::vector<MainstreaminessRow> rows);

  const std::vector<MainstreaminessRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  const MainstreaminessRow* find(UserId user) const;
  std::optional<double> score(UserId user, const MeasureKey& key) const;

  // Header: user_id,country,M_D_APC_global,...,M_R_APC_country.
  std::string to_csv() const;
  static MainstreaminessTable from_csv(std::istream& in);

 private:
  std::vector<MainstreaminessRow> rows_;  // ascending user id
};

struct MeasureOptions {
  double epsilon = kDefaultEpsilon;
  bool leave_one_out = false;
};

// All six scores for every user. The country reference is always the
// user's own country. Undefined rank correlations are stored as absent.
MainstreaminessTable compute_table(const UserArtistMatrix& matrix,
                                   const MeasureOptions& options = {});

}  // namespace mainstreamlab
