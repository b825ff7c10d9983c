#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mainstreamlab/clustering.hpp"
#include "mainstreamlab/dataset.hpp"
#include "mainstreamlab/mainstreaminess.hpp"

namespace mainstreamlab::recsys {

// user is a matrix row, item an artist position.
struct Interaction {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  double rating = 0.0;  // (0, 1] for observed pairs, 0 for sampled negatives

  bool operator==(const Interaction&) const = default;
};

struct MfConfig {
  std::size_t k = 32;
  double learning_rate = 0.01;
  double reg = 0.05;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  double init_scale = 0.01;  // factors start uniform in (-init_scale, init_scale)
};

// Plain dot-product model r(u, i) = p_u . q_i without biases.
struct FactorModel {
  std::size_t k = 0;
  DenseMatrix user_factors;  // n_users x k
  DenseMatrix item_factors;  // n_items x k
  std::vector<char> user_seen;
  std::vector<char> item_seen;
  std::vector<double> epoch_loss;  // regularized training loss after each epoch

  bool operator==(const FactorModel&) const = default;
};

// SGD on sum (r - p.q)^2 + reg (|p|^2 + |q|^2), visiting the training set in
// a freshly shuffled order each epoch. Throws Error naming the epoch if the
// loss stops being finite.
FactorModel train_mf(std::span<const Interaction> train, std::size_t n_users,
                     std::size_t n_items, const MfConfig& config);

// p_u . q_i, or 0 when the user or the item never appeared in training.
double predict(const FactorModel& model, std::uint32_t user, std::uint32_t item);
bool is_cold(const FactorModel& model, std::uint32_t user, std::uint32_t item);

double mae(std::span<const double> residuals);
double rmse(std::span<const double> residuals);
double mae(std::span<const Interaction> test, const FactorModel& model);
double rmse(std::span<const Interaction> test, const FactorModel& model);

enum class UserSet { kLow, kMid, kHigh, kAll };
std::string_view to_string(UserSet set);
UserSet parse_user_set(std::string_view text);

struct Tertiles {
  std::vector<UserId> low, mid, high;
};

// Sorts by (score, user id) and cuts three blocks whose sizes differ by at
// most one; remainder users go to low first, then mid.
Tertiles tertile_split(std::vector<std::pair<UserId, double>> scores);

struct Split {
  std::vector<Interaction> train;
  std::vector<Interaction> test;
};

// round(train_frac * n) interactions go to train; both parts keep input order.
Split holdout_split(std::span<const Interaction> interactions, double train_frac,
                    std::uint64_t seed);

// One rating-0 pair per positive in `train`, drawn uniformly from the user's
// items outside `known_positives` (which should include `train`) without
// repeats. Users with too few unobserved items get fewer negatives and a
// warning. Returns train followed by the negatives.
std::vector<Interaction> negative_sample(std::span<const Interaction> train,
                                         std::span<const Interaction> known_positives,
                                         std::size_t n_items, std::uint64_t seed);

enum class RatingScale { kNormalized, kRaw };
enum class ColdPolicy { kPredictZero, kDrop };

// measure is absent exactly for the baseline, which uses UserSet::kAll.
// country empty means all countries.
struct ExperimentSpec {
  std::optional<MeasureKey> measure;
  UserSet user_set = UserSet::kAll;
  std::string country;
  std::size_t folds = 3;
  std::uint64_t seed = 0;

  std::string label() const;  // seed stream name, e.g. "M_R_APC_country/low/FI"
};

struct ExperimentOptions {
  MfConfig mf;
  double train_frac = 0.8;
  RatingScale scale = RatingScale::kNormalized;
  ColdPolicy cold = ColdPolicy::kPredictZero;
  std::size_t min_country_users = 1000;
};

struct FoldResult {
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t n_test = 0;
  std::size_t n_cold = 0;  // test pairs with an unseen user or item
};

struct EvalReport {
  ExperimentSpec spec;
  std::vector<FoldResult> folds;
  double rmse_mean = 0.0;
  double mae_mean = 0.0;
  std::size_t n_users = 0;
  std::size_t n_test = 0;

  // {measure, scope, basis, method, country, user_set, folds:[{rmse,mae}],
  //  rmse_mean, mae_mean, n_users, n_test}
  std::string to_json() const;
};

// Users selected by spec; universe optionally masks matrix rows (size
// num_users, nonzero = available). Global-reference tertiles are cut over
// all available users with a score, country-reference tertiles within each
// country's available users.
std::vector<std::size_t> select_cohort(const UserArtistMatrix& matrix,
                                       const MainstreaminessTable& table,
                                       const ExperimentSpec& spec,
                                       std::span<const char> universe = {});

// Averages `spec.folds` independent seeded train/test splits.
EvalReport run_experiment(const UserArtistMatrix& matrix, const MainstreaminessTable& table,
                          const ExperimentSpec& spec, const ExperimentOptions& options,
                          std::span<const char> universe = {});

// Countries with at least min_users users, ascending.
std::vector<std::string> eligible_countries(const UserArtistMatrix& matrix, std::size_t min_users);

// The baseline plus every (measure, user set, country) combination.
std::vector<ExperimentSpec> standard_specs(std::span<const std::string> countries,
                                           std::size_t folds, std::uint64_t seed);

struct ApproachSummary {
  std::string approach;  // measure column name or "baseline"
  std::optional<UserSet> user_set;
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t n_experiments = 0;
};

// Per approach, averaged over countries and user sets.
std::vector<ApproachSummary> summarize_by_approach(std::span<const EvalReport> reports);
// Per approach and user set, averaged over countries.
std::vector<ApproachSummary> summarize_by_user_set(std::span<const EvalReport> reports);

std::string summary_csv(std::span<const ApproachSummary> rows, bool with_user_set);

struct CountryEffect {
  std::string country;
  double cohens_d = 0.0;
};

struct ValidationOptions {
  std::size_t subsamples = 5;
  std::size_t subsample_users = 500;
  std::uint64_t seed = 0;
};

struct ValidationReport {
  double icc = 0.0;  // folds x specs matrix of per-fold RMSE
  std::vector<CountryEffect> effects;

  std::string to_json() const;
};

// Reruns every country-specific spec on seeded random subsamples of each
// country and compares per-spec RMSEs of the full and subsampled runs.
ValidationReport validation_suite(const UserArtistMatrix& matrix,
                                  const MainstreaminessTable& table,
                                  std::span<const EvalReport> full_reports,
                                  const ExperimentOptions& options,
                                  const ValidationOptions& validation = {});

}  // namespace mainstreamlab::recsys
