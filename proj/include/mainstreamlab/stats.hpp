#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mainstreamlab/mainstreaminess.hpp"

namespace mainstreamlab::stats {

// Sample sd uses n-1. Quartiles interpolate linearly between order
// statistics at (n-1)p. Skewness is g1 = m3 / m2^1.5 and kurtosis is the
// excess g2 = m4 / m2^2 - 3; both are 0 for a constant sample.
struct DescriptiveSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;
};

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::optional<double> degrees_of_freedom;
};

DescriptiveSummary describe(std::span<const double> values);

// Linear-interpolation quantile of an ascending sample, p in [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);

// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double df);

// Upper tail of the asymptotic Kolmogorov distribution, P(K > lambda).
double kolmogorov_sf(double lambda);

// H with tie correction, p from chi-square with k-1 df. Identical
// observations everywhere give H = 0, p = 1.
TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

// One-sample test against a normal distribution with mean and sd estimated
// from the sample.
TestResult ks_test_normal(std::span<const double> sample);

// Two-sample test.
TestResult ks_test(std::span<const double> sample, std::span<const double> reference);

// Two-way mixed, consistency, average-measures ICC over a runs x subjects
// matrix: (MS_subjects - MS_error) / MS_subjects.
double icc(const std::vector<std::vector<double>>& runs_by_subjects);

// (mean(a) - mean(b)) / pooled sd with n-1 weights.
double cohens_d(std::span<const double> a, std::span<const double> b);

struct MeasureCell {
  std::size_t n = 0;
  std::optional<double> mean;                 // n >= 1
  std::optional<DescriptiveSummary> summary;  // n >= 2
};

struct CountryRow {
  std::string country;
  std::size_t n_users = 0;
  std::array<MeasureCell, kNumMeasures> cells;
};

struct CountryReport {
  std::vector<CountryRow> countries;  // ascending code
  // Across countries, per measure; absent when fewer than two countries
  // have scores or the test is otherwise not applicable.
  std::array<std::optional<TestResult>, kNumMeasures> kruskal_wallis;

  // `country,n_users,` then `<measure>_mean,<measure>_sd` per measure.
  std::string to_csv() const;
};

CountryReport country_report(const MainstreaminessTable& table);

// Summary over all users with a score for each measure.
struct OverallRow {
  MeasureKey measure;
  std::optional<DescriptiveSummary> summary;
  std::optional<TestResult> normality;  // one-sample KS against a fitted normal
};

std::vector<OverallRow> overall_report(const MainstreaminessTable& table);

// `measure,n,mean,sd,min,q1,median,q3,max,skewness,kurtosis,ks_d,ks_p`
std::string overall_csv(const std::vector<OverallRow>& rows);

}  // namespace mainstreamlab::stats
