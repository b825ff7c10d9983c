#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mainstreamlab/dataset.hpp"
#include "mainstreamlab/popularity.hpp"

namespace mainstreamlab {

// Row-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct CountryFeatureMatrix {
  std::vector<std::string> countries;  // row order
  std::vector<std::size_t> artists;    // column order, artist positions
  DenseMatrix values;
};

// Country popularity vectors. top_k > 0 keeps only the global top-k artists
// of the same basis, in global rank order; top_k == 0 keeps the full index.
CountryFeatureMatrix country_features(const UserArtistMatrix& matrix, Basis basis,
                                      std::size_t top_k = kDefaultHorizon);

// s(i, k) = -||x_i - x_k||^2. The diagonal is 0 here; affinity_propagation
// replaces it with the preference.
DenseMatrix similarity_matrix(const DenseMatrix& features);

struct AffinityOptions {
  double damping = 0.5;
  std::size_t max_iter = 200;
  std::size_t convergence_window = 15;
  std::optional<double> preference;  // default: median off-diagonal similarity
};

struct ClusterAssignment {
  std::vector<std::size_t> labels;     // point -> cluster id
  std::vector<std::size_t> exemplars;  // cluster id -> point, ascending
  std::size_t n_iterations = 0;
  bool converged = false;

  std::size_t num_clusters() const { return exemplars.size(); }
  bool operator==(const ClusterAssignment&) const = default;
};

// Responsibility/availability message passing (Frey & Dueck) with damping
// new = damping * old + (1 - damping) * update. Stops once the exemplar set
// has been stable for convergence_window iterations, or after max_iter.
// Argmax ties go to the lowest index. Throws Error when no exemplar emerges.
ClusterAssignment affinity_propagation(const DenseMatrix& similarities,
                                       const AffinityOptions& options = {});

struct ClusterGroup {
  std::size_t cluster_id = 0;
  std::string exemplar;
  std::vector<std::string> members;  // exemplar first, then the rest sorted
};

std::vector<ClusterGroup> cluster_report(const ClusterAssignment& assignment,
                                         std::span<const std::string> names);

// header `country,cluster_id,is_exemplar`, rows in input order
std::string clusters_csv(const ClusterAssignment& assignment, std::span<const std::string> names);

}  // namespace mainstreamlab
