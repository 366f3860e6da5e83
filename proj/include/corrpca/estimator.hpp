// Copyright 2026 The corrpca Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// PCA by eigendecomposition of the sample second-moment matrix, plus the two
// automatic rank estimators (eigenvalue threshold and largest eigen-gap).

#include <string>
#include <utility>

#include "corrpca/errors.hpp"
#include "corrpca/subspace.hpp"

namespace corrpca {

/// Observed data matrix [y_1, ..., y_alpha], one column per sample.
class DataBatch {
 public:
  explicit DataBatch(Matrix columns) : y_(std::move(columns)) {
    if (y_.cols() < 1 || y_.rows() < 1) throw Error(Errc::empty_batch, "batch has no samples");
  }

  Index n() const noexcept { return y_.rows(); }
  Index alpha() const noexcept { return y_.cols(); }
  const Matrix& columns() const noexcept { return y_; }

 private:
  Matrix y_;
};

/// D = (1/alpha) sum_t y_t y_t'. Accumulated as one symmetric rank-alpha update.
inline Matrix sample_covariance(const DataBatch& batch) {
  const Index n = batch.n();
  Matrix d = Matrix::Zero(n, n);
  d.selfadjointView<Eigen::Lower>().rankUpdate(batch.columns(), 1.0 / static_cast<double>(batch.alpha()));
  d.triangularView<Eigen::StrictlyUpper>() = d.transpose();
  return d;
}

inline BasisMatrix pca_estimate(const DataBatch& batch, Index r) {
  if (r < 1 || r > batch.n()) {
    throw Error(Errc::invalid_rank, "pca_estimate: r=" + std::to_string(r) + " outside [1, n]");
  }
  return top_r_eigvecs(sample_covariance(batch), r);
}

/// Number of eigenvalues at or above lambda_minus / 2; 0 means nothing cleared it.
/// `eigenvalues` must be sorted non-increasing.
inline Index estimate_rank_threshold(const Vector& eigenvalues, double lambda_minus) {
  if (!(lambda_minus > 0.0)) {
    throw Error(Errc::validation_error, "estimate_rank_threshold: lambda_minus must be positive");
  }
  const double threshold = 0.5 * lambda_minus;
  Index r_hat = 0;
  while (r_hat < eigenvalues.size() && eigenvalues(r_hat) >= threshold) ++r_hat;
  return r_hat;
}

inline Index estimate_rank_threshold(const Matrix& d, double lambda_minus) {
  return estimate_rank_threshold(symmetric_eig(d).values, lambda_minus);
}

/// argmax over 1 <= j <= max_rank of lambda_j - lambda_{j+1}; ties go to the smallest j.
inline Index estimate_rank_eigengap(const Vector& eigenvalues, Index max_rank) {
  if (max_rank < 1 || max_rank >= eigenvalues.size()) {
    throw Error(Errc::invalid_rank, "estimate_rank_eigengap: need 1 <= max_rank < n");
  }
  Index best = 1;
  double best_gap = eigenvalues(0) - eigenvalues(1);
  for (Index j = 2; j <= max_rank; ++j) {
    const double gap = eigenvalues(j - 1) - eigenvalues(j);
    if (gap > best_gap) {
      best_gap = gap;
      best = j;
    }
  }
  return best;
}

inline Index estimate_rank_eigengap(const Matrix& d, Index max_rank) {
  return estimate_rank_eigengap(symmetric_eig(d).values, max_rank);
}

/// Default eigen-gap search range floor(n/2), at least 1.
inline Index default_max_rank(Index n) { return n / 2 >= 1 ? n / 2 : 1; }

}  // namespace corrpca
