#include "mainstreamlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>
#include <fmt/core.h>
#include <fmt/format.h>

#include "mainstreamlab/error.hpp"

namespace mainstreamlab::stats {
namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

// Mid-ranks (1-based) of the pooled data; also returns sum(t^3 - t) over
// tie groups.
std::vector<double> mid_ranks(std::span<const double> pooled, double* tie_term) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<double> ranks(n);
  double ties = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    const double t = static_cast<double>(j - i + 1);
    ties += t * t * t - t;
    i = j + 1;
  }
  if (tie_term) *tie_term = ties;
  return ranks;
}

double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2));
}

double ks_p_value(double d, double effective_n) {
  const double root = std::sqrt(effective_n);
  return kolmogorov_sf((root + 0.12 + 0.11 / root) * d);
}

}  // namespace

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

DescriptiveSummary describe(std::span<const double> values) {
  if (values.size() < 2) throw Error("describe needs at least two values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  DescriptiveSummary s;
  s.n = values.size();
  s.mean = mean_of(values);
  s.sd = std::sqrt(sample_variance(values, s.mean));
  s.min = sorted.front();
  s.max = sorted.back();
  s.q1 = quantile_sorted(sorted, 0.25);
  s.median = quantile_sorted(sorted, 0.5);
  s.q3 = quantile_sorted(sorted, 0.75);

  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (const double x : values) {
    const double d = x - s.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  const double n = static_cast<double>(s.n);
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 > 0.0) {
    s.skewness = m3 / std::pow(m2, 1.5);
    s.kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return s;
}

double chi_square_sf(double x, double df) {
  if (!(df > 0.0)) throw Error("chi-square needs positive degrees of freedom");
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Theta-function form converges fast for small lambda.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double odd = 2.0 * k - 1.0;
      cdf += std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw Error("kruskal_wallis needs at least two groups");
  std::vector<double> pooled;
  for (const auto& g : groups) {
    if (g.empty()) throw Error("kruskal_wallis: empty group");
    pooled.insert(pooled.end(), g.begin(), g.end());
  }
  const double n = static_cast<double>(pooled.size());
  if (pooled.size() < 3) throw Error("kruskal_wallis needs at least three observations");
  const double df = static_cast<double>(groups.size() - 1);

  double tie_term = 0.0;
  const auto ranks = mid_ranks(pooled, &tie_term);
  const double correction = 1.0 - tie_term / (n * n * n - n);
  if (correction <= 0.0) return {0.0, 1.0, df};

  double sum = 0.0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) rank_sum += ranks[offset + i];
    offset += g.size();
    sum += rank_sum * rank_sum / static_cast<double>(g.size());
  }
  const double h = std::max((12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction, 0.0);
  return {h, chi_square_sf(h, df), df};
}

TestResult ks_test_normal(std::span<const double> sample) {
  if (sample.size() < 2) throw Error("ks_test needs at least two observations");
  const double mu = mean_of(sample);
  const double sd = std::sqrt(sample_variance(sample, mu));
  if (!(sd > 0.0)) throw Error("ks_test: degenerate sample with zero variance");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = normal_cdf(sorted[i], mu, sd);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, ks_p_value(d, n), std::nullopt};
}

TestResult ks_test(std::span<const double> sample, std::span<const double> reference) {
  if (sample.size() < 2 || reference.empty()) throw Error("ks_test: sample too small");
  std::vector<double> a(sample.begin(), sample.end());
  std::vector<double> b(reference.begin(), reference.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return {d, ks_p_value(d, na * nb / (na + nb)), std::nullopt};
}

double icc(const std::vector<std::vector<double>>& runs_by_subjects) {
  const std::size_t k = runs_by_subjects.size();
  if (k < 2) throw Error("icc needs at least two runs");
  const std::size_t n = runs_by_subjects.front().size();
  if (n < 2) throw Error("icc needs at least two subjects");
  for (const auto& run : runs_by_subjects) {
    if (run.size() != n) throw Error("icc: runs have different subject counts");
  }

  double grand = 0.0;
  std::vector<double> subject_mean(n, 0.0), run_mean(k, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t s = 0; s < n; ++s) {
      const double v = runs_by_subjects[r][s];
      grand += v;
      subject_mean[s] += v;
      run_mean[r] += v;
    }
  }
  const double kd = static_cast<double>(k), nd = static_cast<double>(n);
  grand /= kd * nd;
  for (auto& m : subject_mean) m /= kd;
  for (auto& m : run_mean) m /= nd;

  double ss_subjects = 0.0, ss_runs = 0.0, ss_total = 0.0;
  for (const double m : subject_mean) ss_subjects += (m - grand) * (m - grand);
  ss_subjects *= kd;
  for (const double m : run_mean) ss_runs += (m - grand) * (m - grand);
  ss_runs *= nd;
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t s = 0; s < n; ++s) {
      const double d = runs_by_subjects[r][s] - grand;
      ss_total += d * d;
    }
  }
  const double ss_error = std::max(ss_total - ss_subjects - ss_runs, 0.0);
  const double ms_subjects = ss_subjects / (nd - 1.0);
  const double ms_error = ss_error / ((nd - 1.0) * (kd - 1.0));
  // Relative floor: rounding in the sums of squares must not pass as variance.
  if (!(ms_subjects > 1e-12 * std::max(ss_total / (kd * nd - 1.0), 1e-300))) {
    throw Error("icc: zero between-subject variance");
  }
  return (ms_subjects - ms_error) / ms_subjects;
}

double cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error("cohens_d needs at least two values per sample");
  const double ma = mean_of(a), mb = mean_of(b);
  const double va = sample_variance(a, ma), vb = sample_variance(b, mb);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double pooled = std::sqrt(((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0));
  if (pooled == 0.0) {
    if (ma == mb) return 0.0;
    throw Error("cohens_d: zero pooled standard deviation with different means");
  }
  return (ma - mb) / pooled;
}

CountryReport country_report(const MainstreaminessTable& table) {
  if (table.empty()) throw Error("country_report: empty table");
  std::map<std::string, std::vector<const MainstreaminessRow*>> by_country;
  for (const auto& row : table.rows()) {
    if (!row.country.empty()) by_country[row.country].push_back(&row);
  }

  CountryReport report;
  std::array<std::vector<std::vector<double>>, kNumMeasures> groups;
  for (const auto& [code, rows] : by_country) {
    CountryRow out;
    out.country = code;
    out.n_users = rows.size();
    for (std::size_t m = 0; m < kNumMeasures; ++m) {
      std::vector<double> values;
      for (const auto* row : rows) {
        if (row->scores[m]) values.push_back(*row->scores[m]);
      }
      auto& cell = out.cells[m];
      cell.n = values.size();
      if (!values.empty()) cell.mean = mean_of(values);
      if (values.size() >= 2) cell.summary = describe(values);
      if (!values.empty()) groups[m].push_back(std::move(values));
    }
    report.countries.push_back(std::move(out));
  }

  for (std::size_t m = 0; m < kNumMeasures; ++m) {
    std::size_t total = 0;
    for (const auto& g : groups[m]) total += g.size();
    if (groups[m].size() >= 2 && total >= 3) report.kruskal_wallis[m] = kruskal_wallis(groups[m]);
  }
  return report;
}

std::string CountryReport::to_csv() const {
  fmt::memory_buffer buf;
  auto out = std::back_inserter(buf);
  fmt::format_to(out, "country,n_users");
  for (const auto& key : all_measures()) {
    const auto name = column_name(key);
    fmt::format_to(out, ",{}_mean,{}_sd", name, name);
  }
  fmt::format_to(out, "\n");
  for (const auto& row : countries) {
    fmt::format_to(out, "{},{}", row.country, row.n_users);
    for (const auto& cell : row.cells) {
      fmt::format_to(out, ",");
      if (cell.mean) fmt::format_to(out, "{}", *cell.mean);
      fmt::format_to(out, ",");
      if (cell.summary) fmt::format_to(out, "{}", cell.summary->sd);
    }
    fmt::format_to(out, "\n");
  }
  return fmt::to_string(buf);
}

std::vector<OverallRow> overall_report(const MainstreaminessTable& table) {
  std::vector<OverallRow> out;
  for (std::size_t m = 0; m < kNumMeasures; ++m) {
    std::vector<double> values;
    for (const auto& row : table.rows()) {
      if (row.scores[m]) values.push_back(*row.scores[m]);
    }
    OverallRow r{all_measures()[m], std::nullopt, std::nullopt};
    if (values.size() >= 2) {
      r.summary = describe(values);
      if (r.summary->sd > 0.0) r.normality = ks_test_normal(values);
    }
    out.push_back(r);
  }
  return out;
}

std::string overall_csv(const std::vector<OverallRow>& rows) {
  fmt::memory_buffer buf;
  auto out = std::back_inserter(buf);
  fmt::format_to(out, "measure,n,mean,sd,min,q1,median,q3,max,skewness,kurtosis,ks_d,ks_p\n");
  for (const auto& r : rows) {
    fmt::format_to(out, "{}", column_name(r.measure));
    if (r.summary) {
      const auto& s = *r.summary;
      fmt::format_to(out, ",{},{},{},{},{},{},{},{},{},{}", s.n, s.mean, s.sd, s.min, s.q1, s.median,
                     s.q3, s.max, s.skewness, s.kurtosis);
    } else {
      fmt::format_to(out, ",0,,,,,,,,,");
    }
    if (r.normality) {
      fmt::format_to(out, ",{},{}\n", r.normality->statistic, r.normality->p_value);
    } else {
      fmt::format_to(out, ",,\n");
    }
  }
  return fmt::to_string(buf);
}

}  // namespace mainstreamlab::stats
