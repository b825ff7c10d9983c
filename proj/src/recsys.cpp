#include "mainstreamlab/recsys.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_set>

#include <fmt/core.h>
#include <fmt/format.h>
#include <json.hpp>

#include "mainstreamlab/diagnostics.hpp"
#include "mainstreamlab/error.hpp"
#include "mainstreamlab/rng.hpp"
#include "mainstreamlab/stats.hpp"

namespace mainstreamlab::recsys {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t f = 0; f < a.size(); ++f) s += a[f] * b[f];
  return s;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

bool available(std::span<const char> universe, std::size_t row) {
  return universe.empty() || universe[row] != 0;
}

}  // namespace

FactorModel train_mf(std::span<const Interaction> train, std::size_t n_users,
                     std::size_t n_items, const MfConfig& config) {
  if (train.empty()) throw Error("train_mf: empty training set");
  if (config.k < 1) throw Error("train_mf: k must be at least 1");

  FactorModel model;
  model.k = config.k;
  model.user_factors = DenseMatrix(n_users, config.k);
  model.item_factors = DenseMatrix(n_items, config.k);
  model.user_seen.assign(n_users, 0);
  model.item_seen.assign(n_items, 0);
  for (const auto& x : train) {
    if (x.user >= n_users || x.item >= n_items) throw Error("train_mf: index out of range");
    model.user_seen[x.user] = 1;
    model.item_seen[x.item] = 1;
  }

  Rng rng(config.seed);
  // Initialize in index order, seen rows only, so the draw sequence does not
  // depend on how many unseen rows exist.
  for (std::size_t u = 0; u < n_users; ++u) {
    if (!model.user_seen[u]) continue;
    for (auto& v : model.user_factors.row(u)) v = rng.uniform(-config.init_scale, config.init_scale);
  }
  for (std::size_t i = 0; i < n_items; ++i) {
    if (!model.item_seen[i]) continue;
    for (auto& v : model.item_factors.row(i)) v = rng.uniform(-config.init_scale, config.init_scale);
  }

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const double lr = config.learning_rate;
  const double reg = config.reg;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (const auto idx : order) {
      const auto& x = train[idx];
      auto p = model.user_factors.row(x.user);
      auto q = model.item_factors.row(x.item);
      const double err = x.rating - dot(p, q);
      for (std::size_t f = 0; f < config.k; ++f) {
        const double pf = p[f];
        const double qf = q[f];
        p[f] += lr * (err * qf - reg * pf);
        q[f] += lr * (err * pf - reg * qf);
      }
    }

    double loss = 0.0;
    for (const auto& x : train) {
      const double err = x.rating - dot(model.user_factors.row(x.user), model.item_factors.row(x.item));
      loss += err * err;
    }
    double penalty = 0.0;
    for (std::size_t u = 0; u < n_users; ++u) {
      if (model.user_seen[u]) penalty += squared_norm(model.user_factors.row(u));
    }
    for (std::size_t i = 0; i < n_items; ++i) {
      if (model.item_seen[i]) penalty += squared_norm(model.item_factors.row(i));
    }
    loss += reg * penalty;
    if (!std::isfinite(loss)) {
      throw Error(fmt::format("train_mf: loss diverged at epoch {}", epoch + 1));
    }
    model.epoch_loss.push_back(loss);
  }
  return model;
}

bool is_cold(const FactorModel& model, std::uint32_t user, std::uint32_t item) {
  return user >= model.user_seen.size() || item >= model.item_seen.size() ||
         !model.user_seen[user] || !model.item_seen[item];
}

double predict(const FactorModel& model, std::uint32_t user, std::uint32_t item) {
  if (is_cold(model, user, item)) return 0.0;
  return dot(model.user_factors.row(user), model.item_factors.row(item));
}

double mae(std::span<const double> residuals) {
  if (residuals.empty()) throw Error("mae: empty test set");
  double s = 0.0;
  for (const double r : residuals) s += std::abs(r);
  return s / static_cast<double>(residuals.size());
}

double rmse(std::span<const double> residuals) {
  if (residuals.empty()) throw Error("rmse: empty test set");
  double s = 0.0;
  for (const double r : residuals) s += r * r;
  return std::sqrt(s / static_cast<double>(residuals.size()));
}

namespace {

std::vector<double> residuals_of(std::span<const Interaction> test, const FactorModel& model) {
  std::vector<double> out;
  out.reserve(test.size());
  for (const auto& x : test) out.push_back(x.rating - predict(model, x.user, x.item));
  return out;
}

}  // namespace

double mae(std::span<const Interaction> test, const FactorModel& model) {
  return mae(residuals_of(test, model));
}

double rmse(std::span<const Interaction> test, const FactorModel& model) {
  return rmse(residuals_of(test, model));
}

std::string_view to_string(UserSet set) {
  switch (set) {
    case UserSet::kLow: return "low";
    case UserSet::kMid: return "mid";
    case UserSet::kHigh: return "high";
    case UserSet::kAll: return "all";
  }
  return "all";
}

UserSet parse_user_set(std::string_view text) {
  for (const auto s : {UserSet::kLow, UserSet::kMid, UserSet::kHigh, UserSet::kAll}) {
    if (to_string(s) == text) return s;
  }
  throw Error(fmt::format("unknown user set '{}'", text));
}

Tertiles tertile_split(std::vector<std::pair<UserId, double>> scores) {
  if (scores.size() < 3) throw Error("tertile_split needs at least three users");
  std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  const std::size_t n = scores.size();
  const std::size_t base = n / 3, rem = n % 3;
  const std::size_t low = base + (rem > 0 ? 1 : 0);
  const std::size_t mid = base + (rem > 1 ? 1 : 0);
  Tertiles out;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = i < low ? out.low : (i < low + mid ? out.mid : out.high);
    dst.push_back(scores[i].first);
  }
  return out;
}

Split holdout_split(std::span<const Interaction> interactions, double train_frac,
                    std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw Error("train_frac must be in (0, 1)");
  const std::size_t n = interactions.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span(order));
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  std::vector<char> in_train(n, 0);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = 1;

  Split out;
  out.train.reserve(n_train);
  out.test.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i) {
    (in_train[i] ? out.train : out.test).push_back(interactions[i]);
  }
  return out;
}

std::vector<Interaction> negative_sample(std::span<const Interaction> train,
                                         std::span<const Interaction> known_positives,
                                         std::size_t n_items, std::uint64_t seed) {
  std::map<std::uint32_t, std::size_t> wanted;  // user -> positives in train
  for (const auto& x : train) ++wanted[x.user];
  std::map<std::uint32_t, std::vector<std::uint32_t>> positives;
  for (const auto& x : known_positives) positives[x.user].push_back(x.item);
  for (const auto& x : train) positives[x.user].push_back(x.item);

  std::vector<Interaction> out(train.begin(), train.end());
  Rng rng(seed);
  for (auto& [user, count] : wanted) {
    auto& pos = positives[user];
    std::sort(pos.begin(), pos.end());
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
    const std::size_t unobserved = n_items - pos.size();
    if (unobserved == 0) {
      warn(fmt::format("user row {} has listened to every artist; no negatives sampled", user));
      continue;
    }
    if (count > unobserved) {
      warn(fmt::format("user row {} has only {} unobserved artists for {} negatives", user,
                       unobserved, count));
      count = unobserved;
    }
    const auto is_positive = [&](std::uint32_t item) {
      return std::binary_search(pos.begin(), pos.end(), item);
    };
    if (2 * count > unobserved) {
      // Dense case: draw without replacement from the explicit complement.
      std::vector<std::uint32_t> pool;
      pool.reserve(unobserved);
      for (std::uint32_t i = 0; i < n_items; ++i) {
        if (!is_positive(i)) pool.push_back(i);
      }
      for (std::size_t j = 0; j < count; ++j) {
        const auto pick = j + static_cast<std::size_t>(rng.index(pool.size() - j));
        std::swap(pool[j], pool[pick]);
        out.push_back({user, pool[j], 0.0});
      }
    } else {
      std::unordered_set<std::uint32_t> drawn;
      while (drawn.size() < count) {
        const auto item = static_cast<std::uint32_t>(rng.index(n_items));
        if (is_positive(item) || !drawn.insert(item).second) continue;
        out.push_back({user, item, 0.0});
      }
    }
  }
  return out;
}

std::string ExperimentSpec::label() const {
  return fmt::format("{}/{}/{}", measure ? column_name(*measure) : std::string("baseline"),
                     to_string(user_set), country.empty() ? std::string("all") : country);
}

std::vector<std::size_t> select_cohort(const UserArtistMatrix& matrix,
                                       const MainstreaminessTable& table,
                                       const ExperimentSpec& spec,
                                       std::span<const char> universe) {
  if (!universe.empty() && universe.size() != matrix.num_users()) {
    throw Error("universe mask has the wrong size");
  }
  if (spec.measure.has_value() == (spec.user_set == UserSet::kAll)) {
    throw Error("the baseline uses user set 'all'; every other experiment needs a measure");
  }
  std::int32_t country = kNoCountry;
  if (!spec.country.empty()) {
    const auto c = matrix.index().find_country(spec.country);
    if (!c) throw Error(fmt::format("unknown country '{}'", spec.country));
    country = *c;
  }
  const auto in_country = [&](std::size_t r) {
    return country == kNoCountry || matrix.user_country(r) == country;
  };

  std::vector<std::size_t> cohort;
  if (!spec.measure) {
    for (std::size_t r = 0; r < matrix.num_users(); ++r) {
      if (available(universe, r) && in_country(r)) cohort.push_back(r);
    }
    return cohort;
  }

  // Tertiles are cut within groups: one group for a global reference, one
  // group per country for a country reference.
  std::map<std::int32_t, std::vector<std::pair<UserId, double>>> groups;
  for (std::size_t r = 0; r < matrix.num_users(); ++r) {
    if (!available(universe, r)) continue;
    const auto score = table.score(matrix.user_id(r), *spec.measure);
    if (!score) continue;
    const auto group = spec.measure->reference == Reference::kGlobal ? 0 : matrix.user_country(r);
    if (spec.measure->reference == Reference::kCountry && !in_country(r)) continue;
    groups[group].emplace_back(matrix.user_id(r), *score);
  }
  for (auto& [group, scores] : groups) {
    if (scores.size() < 3) {
      warn(fmt::format("fewer than three scored users for {}; skipping group", spec.label()));
      continue;
    }
    const auto tertiles = tertile_split(std::move(scores));
    const auto& chosen = spec.user_set == UserSet::kLow   ? tertiles.low
                         : spec.user_set == UserSet::kMid ? tertiles.mid
                                                          : tertiles.high;
    for (const auto id : chosen) {
      const auto r = *matrix.index().find_user(id);
      if (in_country(r)) cohort.push_back(r);
    }
  }
  std::sort(cohort.begin(), cohort.end());
  return cohort;
}

EvalReport run_experiment(const UserArtistMatrix& matrix, const MainstreaminessTable& table,
                          const ExperimentSpec& spec, const ExperimentOptions& options,
                          std::span<const char> universe) {
  if (spec.folds < 2) throw Error("at least two folds are required");
  if (!spec.country.empty()) {
    const auto c = matrix.index().find_country(spec.country);
    if (!c) throw Error(fmt::format("unknown country '{}'", spec.country));
    const auto users = matrix.users_in_country(*c).size();
    if (users < options.min_country_users) {
      throw Error(fmt::format("country {} has {} users, below the {} required for rating "
                              "prediction",
                              spec.country, users, options.min_country_users));
    }
  }
  const auto cohort = select_cohort(matrix, table, spec, universe);
  if (cohort.size() < 3) {
    throw Error(fmt::format("cohort {} has {} users; at least 3 are needed", spec.label(),
                            cohort.size()));
  }

  std::vector<Interaction> positives;
  for (const auto r : cohort) {
    const auto cols = matrix.row_artists(r);
    const auto vals = matrix.row_values(r);
    const double peak = static_cast<double>(*std::max_element(vals.begin(), vals.end()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double raw = static_cast<double>(vals[j]);
      positives.push_back({static_cast<std::uint32_t>(r), cols[j],
                           options.scale == RatingScale::kNormalized ? raw / peak : raw});
    }
  }
  if (positives.size() < 5) throw Error("too few interactions for a train/test split");

  EvalReport report;
  report.spec = spec;
  report.n_users = cohort.size();
  const auto label = "recsys/" + spec.label();
  for (std::size_t fold = 0; fold < spec.folds; ++fold) {
    const auto fold_seed = derive_seed(spec.seed, fmt::format("{}/fold{}", label, fold + 1));
    const auto split = holdout_split(positives, options.train_frac, derive_seed(fold_seed, "split"));
    const auto train = negative_sample(split.train, positives, matrix.num_artists(),
                                       derive_seed(fold_seed, "negatives"));
    auto mf = options.mf;
    mf.seed = derive_seed(fold_seed, "train");
    const auto model = train_mf(train, matrix.num_users(), matrix.num_artists(), mf);

    FoldResult result;
    std::vector<double> residuals;
    for (const auto& x : split.test) {
      const bool cold = is_cold(model, x.user, x.item);
      result.n_cold += cold ? 1 : 0;
      if (cold && options.cold == ColdPolicy::kDrop) continue;
      residuals.push_back(x.rating - predict(model, x.user, x.item));
    }
    result.n_test = residuals.size();
    result.rmse = rmse(residuals);
    result.mae = mae(residuals);
    report.folds.push_back(result);
    report.n_test += result.n_test;
  }
  for (const auto& f : report.folds) {
    report.rmse_mean += f.rmse;
    report.mae_mean += f.mae;
  }
  report.rmse_mean /= static_cast<double>(report.folds.size());
  report.mae_mean /= static_cast<double>(report.folds.size());
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  if (spec.measure) {
    j["measure"] = column_name(*spec.measure);
    j["scope"] = to_string(spec.measure->reference);
    j["basis"] = to_string(spec.measure->basis);
    j["method"] = to_string(spec.measure->method);
  } else {
    j["measure"] = "baseline";
    j["scope"] = nullptr;
    j["basis"] = nullptr;
    j["method"] = nullptr;
  }
  j["country"] = spec.country.empty() ? "all" : spec.country;
  j["user_set"] = to_string(spec.user_set);
  auto folds_json = nlohmann::ordered_json::array();
  for (const auto& f : folds) {
    folds_json.push_back({{"rmse", f.rmse}, {"mae", f.mae}, {"n_test", f.n_test}, {"n_cold", f.n_cold}});
  }
  j["folds"] = std::move(folds_json);
  j["rmse_mean"] = rmse_mean;
  j["mae_mean"] = mae_mean;
  j["n_users"] = n_users;
  j["n_test"] = n_test;
  return j.dump();
}

std::vector<std::string> eligible_countries(const UserArtistMatrix& matrix, std::size_t min_users) {
  std::vector<std::string> out;
  const auto counts = country_user_counts(matrix);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] >= min_users) out.push_back(matrix.index().countries[c]);
  }
  return out;
}

std::vector<ExperimentSpec> standard_specs(std::span<const std::string> countries,
                                           std::size_t folds, std::uint64_t seed) {
  std::vector<ExperimentSpec> specs;
  specs.push_back({std::nullopt, UserSet::kAll, "", folds, seed});
  for (const auto& key : all_measures()) {
    for (const auto set : {UserSet::kLow, UserSet::kMid, UserSet::kHigh}) {
      for (const auto& country : countries) specs.push_back({key, set, country, folds, seed});
    }
  }
  return specs;
}

namespace {

std::vector<ApproachSummary> summarize(std::span<const EvalReport> reports, bool by_set) {
  std::vector<ApproachSummary> rows;
  const auto add = [&](const std::string& approach, std::optional<UserSet> set,
                       const EvalReport& r) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const ApproachSummary& s) {
      return s.approach == approach && s.user_set == set;
    });
    if (it == rows.end()) {
      rows.push_back({approach, set, 0.0, 0.0, 0});
      it = rows.end() - 1;
    }
    it->rmse += r.rmse_mean;
    it->mae += r.mae_mean;
    ++it->n_experiments;
  };
  for (const auto& r : reports) {
    if (!r.spec.measure) add("baseline", std::nullopt, r);
  }
  for (const auto& key : all_measures()) {
    const auto name = column_name(key);
    for (const auto set : {UserSet::kLow, UserSet::kMid, UserSet::kHigh}) {
      for (const auto& r : reports) {
        if (r.spec.measure == key && r.spec.user_set == set) {
          add(name, by_set ? std::optional(set) : std::nullopt, r);
        }
      }
    }
  }
  for (auto& s : rows) {
    s.rmse /= static_cast<double>(s.n_experiments);
    s.mae /= static_cast<double>(s.n_experiments);
  }
  return rows;
}

}  // namespace

std::vector<ApproachSummary> summarize_by_approach(std::span<const EvalReport> reports) {
  return summarize(reports, false);
}

std::vector<ApproachSummary> summarize_by_user_set(std::span<const EvalReport> reports) {
  return summarize(reports, true);
}

std::string summary_csv(std::span<const ApproachSummary> rows, bool with_user_set) {
  fmt::memory_buffer buf;
  auto out = std::back_inserter(buf);
  if (with_user_set) {
    fmt::format_to(out, "approach,user_set,rmse,mae,n_experiments\n");
  } else {
    fmt::format_to(out, "approach,rmse,mae,n_experiments\n");
  }
  for (const auto& r : rows) {
    fmt::format_to(out, "{}", r.approach);
    if (with_user_set) fmt::format_to(out, ",{}", r.user_set ? to_string(*r.user_set) : "all");
    fmt::format_to(out, ",{},{},{}\n", r.rmse, r.mae, r.n_experiments);
  }
  return fmt::to_string(buf);
}

std::string ValidationReport::to_json() const {
  nlohmann::ordered_json j;
  j["icc"] = icc;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : effects) arr.push_back({{"country", e.country}, {"cohens_d", e.cohens_d}});
  j["cohens_d"] = std::move(arr);
  return j.dump(2) + "\n";
}

ValidationReport validation_suite(const UserArtistMatrix& matrix,
                                  const MainstreaminessTable& table,
                                  std::span<const EvalReport> full_reports,
                                  const ExperimentOptions& options,
                                  const ValidationOptions& validation) {
  if (full_reports.size() < 2) throw Error("validation needs at least two experiment reports");
  const std::size_t folds = full_reports.front().folds.size();
  std::vector<std::vector<double>> runs(folds);
  for (const auto& r : full_reports) {
    if (r.folds.size() != folds) throw Error("validation: reports differ in fold count");
    for (std::size_t f = 0; f < folds; ++f) runs[f].push_back(r.folds[f].rmse);
  }

  ValidationReport out;
  out.icc = stats::icc(runs);

  std::map<std::string, std::vector<const EvalReport*>> by_country;
  for (const auto& r : full_reports) {
    if (!r.spec.country.empty()) by_country[r.spec.country].push_back(&r);
  }
  for (const auto& [code, reports] : by_country) {
    const auto c = *matrix.index().find_country(code);
    auto members = matrix.users_in_country(c);
    if (members.size() <= validation.subsample_users) {
      warn(fmt::format("country {} has {} users; subsamples of {} cover all of them", code,
                       members.size(), validation.subsample_users));
    }
    std::vector<double> full_rmse, sub_rmse;
    for (const auto* r : reports) full_rmse.push_back(r->rmse_mean);
    for (std::size_t s = 0; s < validation.subsamples; ++s) {
      Rng rng(derive_seed(validation.seed, fmt::format("validation/{}/sub{}", code, s + 1)));
      rng.shuffle(std::span(members));
      std::vector<char> universe(matrix.num_users(), 1);
      for (std::size_t i = validation.subsample_users; i < members.size(); ++i) {
        universe[members[i]] = 0;
      }
      auto sub_options = options;
      sub_options.min_country_users = 0;
      for (const auto* r : reports) {
        sub_rmse.push_back(run_experiment(matrix, table, r->spec, sub_options, universe).rmse_mean);
      }
    }
    double d = 0.0;
    if (full_rmse.size() >= 2) {
      try {
        d = stats::cohens_d(full_rmse, sub_rmse);
      } catch (const Error& e) {
        warn(fmt::format("cohen's d for {}: {}", code, e.what()));
      }
    }
    out.effects.push_back({code, d});
  }
  return out;
}

}  // namespace mainstreamlab::recsys
