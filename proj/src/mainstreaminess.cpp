#include "mainstreamlab/mainstreaminess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include <fmt/core.h>
#include <fmt/format.h>

#include "mainstreamlab/error.hpp"
#include "mainstreamlab/kendall.hpp"

namespace mainstreamlab {
namespace {

constexpr std::array<MeasureKey, kNumMeasures> kMeasures{{
    {Method::kDistribution, Basis::kApc, Reference::kGlobal},
    {Method::kDistribution, Basis::kApc, Reference::kCountry},
    {Method::kDistribution, Basis::kAlc, Reference::kGlobal},
    {Method::kDistribution, Basis::kAlc, Reference::kCountry},
    {Method::kRank, Basis::kApc, Reference::kGlobal},
    {Method::kRank, Basis::kApc, Reference::kCountry},
}};

std::int64_t choose2(std::int64_t n) { return n * (n - 1) / 2; }

double xlogx(double v) { return v * std::log(v); }

}  // namespace

const std::array<MeasureKey, kNumMeasures>& all_measures() { return kMeasures; }

bool is_valid(const MeasureKey& key) {
  return !(key.method == Method::kRank && key.basis == Basis::kAlc);
}

std::size_t measure_slot(const MeasureKey& key) {
  for (std::size_t i = 0; i < kMeasures.size(); ++i) {
    if (kMeasures[i] == key) return i;
  }
  throw Error("rank-based measures are undefined for ALC");
}

std::string_view to_string(Method method) {
  return method == Method::kDistribution ? "distribution" : "rank";
}

std::string_view to_string(Reference reference) {
  return reference == Reference::kGlobal ? "global" : "country";
}

std::string column_name(const MeasureKey& key) {
  return fmt::format("M_{}_{}_{}", key.method == Method::kDistribution ? "D" : "R",
                     to_string(key.basis), to_string(key.reference));
}

MeasureKey parse_measure(std::string_view column) {
  for (const auto& key : kMeasures) {
    if (column_name(key) == column) return key;
  }
  throw Error(fmt::format("unknown measure '{}'", column));
}

double kl_divergence(const ProbabilityVector& p, const ProbabilityVector& q) {
  if (p.support != q.support || p.probabilities.size() != q.probabilities.size()) {
    throw Error("kl_divergence: distributions have different supports");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < p.probabilities.size(); ++i) {
    const double pi = p.probabilities[i];
    const double qi = q.probabilities[i];
    if (pi == 0.0) continue;
    if (!(qi > 0.0)) throw Error("kl_divergence: q has a zero where p does not");
    sum += pi * std::log(pi / qi);
  }
  return std::max(sum, 0.0);
}

double normalized_symmetrized_divergence(const ProbabilityVector& p, const ProbabilityVector& q) {
  const double forward = 1.0 - std::exp(-kl_divergence(p, q));
  const double backward = 1.0 - std::exp(-kl_divergence(q, p));
  return 0.5 * (forward + backward);
}

double distribution_measure(const PopularityProfile& user_profile,
                            const PopularityProfile& reference_profile, double epsilon) {
  if (user_profile.basis != reference_profile.basis) throw Error("profiles differ in basis");
  const auto support = union_support(user_profile.values, reference_profile.values);
  if (support.empty()) throw Error("distribution_measure: empty union support");
  const auto p = to_distribution(user_profile, support, epsilon);
  const auto q = to_distribution(reference_profile, support, epsilon);
  return 1.0 - normalized_symmetrized_divergence(p, q);
}

double rank_measure(const PopularityProfile& user_profile,
                    const PopularityProfile& reference_profile) {
  if (user_profile.basis != Basis::kApc || reference_profile.basis != Basis::kApc) {
    throw Error("rank_measure is defined for APC profiles only");
  }
  const auto support = union_support(user_profile.values, reference_profile.values);
  std::vector<double> x, y;
  x.reserve(support.size());
  y.reserve(support.size());
  for (const auto pos : support) {
    x.push_back(reference_profile.values[pos]);
    y.push_back(user_profile.values[pos]);
  }
  return kendall_tau_b(x, y);
}

ReferenceStats::ReferenceStats(std::vector<double> values, double epsilon)
    : values_(std::move(values)), epsilon_(epsilon) {
  if (!(epsilon > 0.0)) throw Error("epsilon must be positive");
  for (const double g : values_) {
    if (g < 0.0) throw Error("reference values must be non-negative");
    if (g == 0.0) continue;
    sorted_.push_back(g);
    total_ += g;
  }
  // Smoothing is relative to the full reference mass, also under leave-one-out.
  smoothing_ = epsilon_ * (total_ > 0.0 ? total_ : 1.0);
  for (const double g : sorted_) {
    log_sum_ += std::log(g + smoothing_);
    xlogx_sum_ += xlogx(g + smoothing_);
  }
  std::sort(sorted_.begin(), sorted_.end());
  std::int64_t run = 1;
  for (std::size_t i = 1; i <= sorted_.size(); ++i) {
    if (i < sorted_.size() && sorted_[i] == sorted_[i - 1]) {
      ++run;
    } else {
      tied_pairs_ += choose2(run);
      run = 1;
    }
  }
}

// Notation: U is the user's artist set with values v, R the remaining
// artists of the union support. The user side is smoothed with eu, the
// reference side with eg. Artists in R carry p = eu / Zu on the user side,
// so their contribution collapses into the precomputed sums.
double ReferenceStats::distribution_score(std::span<const std::uint32_t> artists,
                                          std::span<const double> user_values,
                                          bool leave_one_out) const {
  if (artists.size() != user_values.size()) throw Error("artist/value length mismatch");
  const double eg = smoothing_;
  const std::size_t m = artists.size();
  if (m == 0) throw Error("distribution_score: user has no artists");

  std::size_t outside = 0;  // user artists absent from the reference support
  double user_total = 0.0;
  double old_sum = 0.0, new_sum = 0.0;
  double removed_log = 0.0, removed_xlogx = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double g = values_[artists[j]];
    const double gn = leave_one_out ? std::max(g - user_values[j], 0.0) : g;
    user_total += user_values[j];
    old_sum += g;
    new_sum += gn;
    if (g > 0.0) {
      removed_log += std::log(g + eg);
      removed_xlogx += xlogx(g + eg);
    } else {
      ++outside;
    }
  }
  const double n = static_cast<double>(sorted_.size() + outside);
  const double rest = n - static_cast<double>(m);
  const double eu = epsilon_ * user_total;
  const double log_eu = std::log(eu);
  const double zu = user_total + n * eu;
  const double zg = total_ - old_sum + new_sum + n * eg;
  if (!(zg > 0.0) || n == 0.0) throw Error("distribution_score: empty union support");

  double pq = 0.0;  // sum over U of (v + eu) * log((v + eu) / (gn + eg))
  double qp = 0.0;  // sum over U of (gn + eg) * log((gn + eg) / (v + eu))
  for (std::size_t j = 0; j < m; ++j) {
    const double g = values_[artists[j]];
    const double gn = leave_one_out ? std::max(g - user_values[j], 0.0) : g;
    const double lv = std::log(user_values[j] + eu);
    const double lg = std::log(gn + eg);
    pq += (user_values[j] + eu) * (lv - lg);
    qp += (gn + eg) * (lg - lv);
  }
  const double rest_log = log_sum_ - removed_log;
  const double rest_xlogx = xlogx_sum_ - removed_xlogx;
  const double rest_mass = (total_ - old_sum) + rest * eg;

  const double kl_pq = std::max(
      (pq + eu * (rest * log_eu - rest_log)) / zu + std::log(zg / zu), 0.0);
  const double kl_qp = std::max(
      (qp + rest_xlogx - rest_mass * log_eu) / zg + std::log(zu / zg), 0.0);
  const double divergence = 0.5 * ((1.0 - std::exp(-kl_pq)) + (1.0 - std::exp(-kl_qp)));
  return 1.0 - divergence;
}

double ReferenceStats::rank_score(std::span<const std::uint32_t> artists,
                                  std::span<const double> user_values,
                                  bool leave_one_out) const {
  if (artists.size() != user_values.size()) throw Error("artist/value length mismatch");
  const std::size_t m = artists.size();

  std::vector<double> x(m), removed;
  std::vector<std::pair<double, int>> touched;
  std::size_t outside = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const double g = values_[artists[j]];
    x[j] = leave_one_out ? std::max(g - user_values[j], 0.0) : g;
    if (g > 0.0) {
      removed.push_back(g);
      touched.emplace_back(g, -1);
    } else {
      ++outside;
    }
    touched.emplace_back(x[j], +1);
  }
  std::sort(removed.begin(), removed.end());
  std::sort(touched.begin(), touched.end());

  const auto n = static_cast<std::int64_t>(sorted_.size() + outside);
  const auto rest = n - static_cast<std::int64_t>(m);

  // Ties in x: adjust the reference tie count for every value the user
  // touches.
  std::int64_t x_ties = tied_pairs_;
  for (std::size_t i = 0; i < touched.size();) {
    const double w = touched[i].first;
    std::int64_t delta = 0;
    for (; i < touched.size() && touched[i].first == w; ++i) delta += touched[i].second;
    const auto [lo, hi] = std::equal_range(sorted_.begin(), sorted_.end(), w);
    const auto before = static_cast<std::int64_t>(hi - lo);
    x_ties += choose2(before + delta) - choose2(before);
  }

  const auto inside = kendall_counts(x, user_values);

  // Every user artist has y > 0 = y of the rest, so each (U, R) pair is
  // concordant iff x_u > x_r.
  std::int64_t cross = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const double w = x[j];
    const auto less_all = std::lower_bound(sorted_.begin(), sorted_.end(), w) - sorted_.begin();
    const auto less_removed =
        std::lower_bound(removed.begin(), removed.end(), w) - removed.begin();
    const auto greater_all = sorted_.end() - std::upper_bound(sorted_.begin(), sorted_.end(), w);
    const auto greater_removed =
        removed.end() - std::upper_bound(removed.begin(), removed.end(), w);
    cross += (less_all - less_removed) - (greater_all - greater_removed);
  }

  KendallCounts counts;
  counts.pairs = choose2(n);
  counts.x_ties = x_ties;
  counts.y_ties = choose2(rest) + inside.y_ties;
  counts.score = inside.score + cross;
  if (n < 2) throw UndefinedCorrelationError("kendall tau-b needs at least two artists");
  return tau_b(counts);
}

MainstreaminessTable::MainstreaminessTable(std::vector<MainstreaminessRow> rows)
    : rows_(std::move(rows)) {
  std::sort(rows_.begin(), rows_.end(),
            [](const MainstreaminessRow& a, const MainstreaminessRow& b) { return a.user < b.user; });
}

const MainstreaminessRow* MainstreaminessTable::find(UserId user) const {
  const auto it = std::lower_bound(
      rows_.begin(), rows_.end(), user,
      [](const MainstreaminessRow& r, UserId id) { return r.user < id; });
  return it != rows_.end() && it->user == user ? &*it : nullptr;
}

std::optional<double> MainstreaminessTable::score(UserId user, const MeasureKey& key) const {
  const auto* row = find(user);
  if (!row) return std::nullopt;
  return row->scores[measure_slot(key)];
}

std::string MainstreaminessTable::to_csv() const {
  fmt::memory_buffer buf;
  auto out = std::back_inserter(buf);
  fmt::format_to(out, "user_id,country");
  for (const auto& key : kMeasures) fmt::format_to(out, ",{}", column_name(key));
  fmt::format_to(out, "\n");
  for (const auto& row : rows_) {
    fmt::format_to(out, "{},{}", row.user, row.country);
    for (const auto& s : row.scores) {
      if (s) {
        fmt::format_to(out, ",{}", *s);
      } else {
        fmt::format_to(out, ",");
      }
    }
    fmt::format_to(out, "\n");
  }
  return fmt::to_string(buf);
}

MainstreaminessTable MainstreaminessTable::from_csv(std::istream& in) {
  std::string line;
  std::size_t number = 0;
  std::vector<MainstreaminessRow> rows;
  std::array<std::size_t, kNumMeasures> column_of{};
  bool have_header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string::npos ? comma : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!have_header) {
      if (fields.size() != 2 + kNumMeasures || fields[0] != "user_id" || fields[1] != "country") {
        throw ParseError(number, "unexpected mainstreaminess header");
      }
      for (std::size_t i = 0; i < kNumMeasures; ++i) {
        column_of[measure_slot(parse_measure(fields[2 + i]))] = 2 + i;
      }
      have_header = true;
      continue;
    }
    if (fields.size() != 2 + kNumMeasures) throw ParseError(number, "wrong number of columns");
    MainstreaminessRow row;
    const auto& id = fields[0];
    if (std::from_chars(id.data(), id.data() + id.size(), row.user).ec != std::errc{}) {
      throw ParseError(number, fmt::format("invalid user id '{}'", id));
    }
    row.country = fields[1];
    for (std::size_t slot = 0; slot < kNumMeasures; ++slot) {
      const auto& cell = fields[column_of[slot]];
      if (cell.empty()) continue;
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw ParseError(number, fmt::format("invalid score '{}'", cell));
      }
      row.scores[slot] = v;
    }
    rows.push_back(std::move(row));
  }
  return MainstreaminessTable(std::move(rows));
}

MainstreaminessTable compute_table(const UserArtistMatrix& matrix, const MeasureOptions& options) {
  const auto global_apc = profile(matrix, Basis::kApc, Scope::global());
  const auto global_alc = profile(matrix, Basis::kAlc, Scope::global());
  const ReferenceStats global_ref_apc(global_apc.values, options.epsilon);
  const ReferenceStats global_ref_alc(global_alc.values, options.epsilon);

  std::vector<ReferenceStats> country_apc, country_alc;
  for (const auto& code : matrix.index().countries) {
    country_apc.emplace_back(profile(matrix, Basis::kApc, Scope::of_country(code)).values,
                             options.epsilon);
    country_alc.emplace_back(profile(matrix, Basis::kAlc, Scope::of_country(code)).values,
                             options.epsilon);
  }

  const bool loo = options.leave_one_out;
  std::vector<MainstreaminessRow> rows;
  rows.reserve(matrix.num_users());
  std::vector<double> apc, ones;
  for (std::size_t r = 0; r < matrix.num_users(); ++r) {
    const auto artists = matrix.row_artists(r);
    const auto counts = matrix.row_values(r);
    apc.assign(counts.begin(), counts.end());
    ones.assign(counts.size(), 1.0);

    MainstreaminessRow row;
    row.user = matrix.user_id(r);
    const auto c = matrix.user_country(r);
    if (c != kNoCountry) row.country = matrix.country_code(c);

    auto rank_or_absent = [&](const ReferenceStats& ref) -> std::optional<double> {
      try {
        return ref.rank_score(artists, apc, loo);
      } catch (const UndefinedCorrelationError&) {
        return std::nullopt;
      }
    };

    row.scores[0] = global_ref_apc.distribution_score(artists, apc, loo);
    row.scores[2] = global_ref_alc.distribution_score(artists, ones, loo);
    row.scores[4] = rank_or_absent(global_ref_apc);
    if (c != kNoCountry) {
      const auto ci = static_cast<std::size_t>(c);
      row.scores[1] = country_apc[ci].distribution_score(artists, apc, loo);
      row.scores[3] = country_alc[ci].distribution_score(artists, ones, loo);
      row.scores[5] = rank_or_absent(country_apc[ci]);
    }
    rows.push_back(std::move(row));
  }
  return MainstreaminessTable(std::move(rows));
}

}  // namespace mainstreamlab
