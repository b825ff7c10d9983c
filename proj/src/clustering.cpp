#include "mainstreamlab/clustering.hpp"

#include <algorithm>
#include <limits>

#include <fmt/core.h>
#include <fmt/format.h>

#include "mainstreamlab/diagnostics.hpp"
#include "mainstreamlab/error.hpp"

namespace mainstreamlab {
namespace {

std::vector<std::size_t> exemplar_set(const DenseMatrix& r, const DenseMatrix& a) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < r.rows(); ++k) {
    if (r(k, k) + a(k, k) > 0.0) out.push_back(k);
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ClusterAssignment label_points(const DenseMatrix& s, std::vector<std::size_t> exemplars) {
  ClusterAssignment out;
  out.exemplars = std::move(exemplars);
  out.labels.assign(s.rows(), 0);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 0; c < out.exemplars.size(); ++c) {
      if (out.exemplars[c] == i) {
        best = c;
        break;
      }
      if (s(i, out.exemplars[c]) > s(i, out.exemplars[best])) best = c;
    }
    out.labels[i] = best;
  }
  return out;
}

}  // namespace

CountryFeatureMatrix country_features(const UserArtistMatrix& matrix, Basis basis,
                                      std::size_t top_k) {
  CountryFeatureMatrix out;
  out.countries = matrix.index().countries;
  if (top_k == 0) {
    out.artists.resize(matrix.num_artists());
    for (std::size_t a = 0; a < out.artists.size(); ++a) out.artists[a] = a;
  } else {
    out.artists = global_rank_order(profile(matrix, basis, Scope::global()), top_k);
  }
  out.values = DenseMatrix(out.countries.size(), out.artists.size());
  for (std::size_t c = 0; c < out.countries.size(); ++c) {
    const auto p = profile(matrix, basis, Scope::of_country(out.countries[c]));
    for (std::size_t j = 0; j < out.artists.size(); ++j) {
      out.values(c, j) = p.values[out.artists[j]];
    }
  }
  return out;
}

DenseMatrix similarity_matrix(const DenseMatrix& features) {
  const std::size_t n = features.rows();
  if (n == 0) throw Error("similarity_matrix needs at least one row");
  DenseMatrix s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) {
      double d2 = 0.0;
      const auto xi = features.row(i), xk = features.row(k);
      for (std::size_t j = 0; j < xi.size(); ++j) {
        const double d = xi[j] - xk[j];
        d2 += d * d;
      }
      s(i, k) = s(k, i) = -d2;
    }
  }
  return s;
}

ClusterAssignment affinity_propagation(const DenseMatrix& similarities,
                                       const AffinityOptions& options) {
  const std::size_t n = similarities.rows();
  if (n == 0 || similarities.cols() != n) throw Error("affinity_propagation needs a non-empty square matrix");
  if (!(options.damping >= 0.5 && options.damping < 1.0)) {
    throw Error("damping must be in [0.5, 1)");
  }

  DenseMatrix s = similarities;
  if (n == 1) {
    ClusterAssignment out;
    out.labels = {0};
    out.exemplars = {0};
    out.converged = true;
    return out;
  }

  std::vector<double> off_diagonal;
  off_diagonal.reserve(n * (n - 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      if (i != k) off_diagonal.push_back(s(i, k));
    }
  }
  const double preference = options.preference.value_or(median(off_diagonal));
  for (std::size_t i = 0; i < n; ++i) s(i, i) = preference;

  // All similarities equal to each other: messages never break the tie.
  const bool flat = std::all_of(off_diagonal.begin(), off_diagonal.end(),
                                [&](double v) { return v == off_diagonal.front(); });
  if (flat) {
    ClusterAssignment out;
    out.converged = true;
    if (preference > off_diagonal.front()) {
      for (std::size_t i = 0; i < n; ++i) {
        out.exemplars.push_back(i);
        out.labels.push_back(i);
      }
    } else {
      out.exemplars = {0};
      out.labels.assign(n, 0);
    }
    return out;
  }

  const double lambda = options.damping;
  DenseMatrix r(n, n), a(n, n);
  std::vector<double> column_sum(n);
  std::vector<std::size_t> previous;
  std::size_t stable = 0;
  ClusterAssignment result;

  std::size_t it = 0;
  for (; it < options.max_iter; ++it) {
    // Responsibilities.
    for (std::size_t i = 0; i < n; ++i) {
      double first = -std::numeric_limits<double>::infinity();
      double second = first;
      std::size_t arg = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const double v = a(i, k) + s(i, k);
        if (v > first) {
          second = first;
          first = v;
          arg = k;
        } else if (v > second) {
          second = v;
        }
      }
      for (std::size_t k = 0; k < n; ++k) {
        const double update = s(i, k) - (k == arg ? second : first);
        r(i, k) = lambda * r(i, k) + (1.0 - lambda) * update;
      }
    }
    // Availabilities.
    std::fill(column_sum.begin(), column_sum.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        column_sum[k] += i == k ? r(k, k) : std::max(r(i, k), 0.0);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        const double own = i == k ? r(k, k) : std::max(r(i, k), 0.0);
        double update = column_sum[k] - own;
        if (i != k) update = std::min(update, 0.0);
        a(i, k) = lambda * a(i, k) + (1.0 - lambda) * update;
      }
    }

    auto current = exemplar_set(r, a);
    stable = current == previous ? stable + 1 : 1;
    previous = std::move(current);
    if (!previous.empty() && stable >= options.convergence_window) {
      result.converged = true;
      ++it;
      break;
    }
  }

  if (previous.empty()) {
    throw Error(fmt::format(
        "affinity propagation found no exemplar after {} iterations; try a preference "
        "closer to zero",
        it));
  }
  if (!result.converged) {
    warn(fmt::format("affinity propagation did not converge in {} iterations", it));
  }
  auto assignment = label_points(s, previous);
  assignment.n_iterations = it;
  assignment.converged = result.converged;
  return assignment;
}

std::vector<ClusterGroup> cluster_report(const ClusterAssignment& assignment,
                                         std::span<const std::string> names) {
  if (names.size() != assignment.labels.size()) throw Error("cluster_report: name count mismatch");
  std::vector<ClusterGroup> groups(assignment.num_clusters());
  for (std::size_t c = 0; c < groups.size(); ++c) {
    groups[c].cluster_id = c;
    groups[c].exemplar = names[assignment.exemplars[c]];
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (assignment.exemplars[assignment.labels[i]] == i) continue;
    groups[assignment.labels[i]].members.push_back(names[i]);
  }
  for (auto& g : groups) {
    std::sort(g.members.begin(), g.members.end());
    g.members.insert(g.members.begin(), g.exemplar);
  }
  return groups;
}

std::string clusters_csv(const ClusterAssignment& assignment, std::span<const std::string> names) {
  if (names.size() != assignment.labels.size()) throw Error("clusters_csv: name count mismatch");
  fmt::memory_buffer buf;
  auto out = std::back_inserter(buf);
  fmt::format_to(out, "country,cluster_id,is_exemplar\n");
  for (std::size_t i = 0; i < names.size(); ++i) {
    const bool exemplar = assignment.exemplars[assignment.labels[i]] == i;
    fmt::format_to(out, "{},{},{}\n", names[i], assignment.labels[i], exemplar ? 1 : 0);
  }
  return fmt::to_string(buf);
}

}  // namespace mainstreamlab
