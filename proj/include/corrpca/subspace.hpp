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

// Dense linear-algebra primitives for subspace estimation: basis matrices,
// subspace error, symmetric eigendecomposition and the Davis-Kahan bound.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "corrpca/errors.hpp"

namespace corrpca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Largest absolute entry of m (0 for empty matrices).
inline double max_abs(const Eigen::Ref<const Matrix>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Largest singular value, taken from the Gram matrix of the thinner side.
inline double spectral_norm(const Eigen::Ref<const Matrix>& m) {
  if (m.size() == 0) return 0.0;
  Matrix gram = m.rows() <= m.cols() ? Matrix(m * m.transpose()) : Matrix(m.transpose() * m);
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

/// Tall matrix with orthonormal columns. Construction validates the invariant.
class BasisMatrix {
 public:
  static constexpr double kOrthonormalityTol = 1e-10;

  explicit BasisMatrix(Matrix entries) : m_(std::move(entries)) {
    if (m_.cols() < 1 || m_.cols() > m_.rows()) {
      throw Error(Errc::invalid_rank, "basis needs 1 <= r <= n, got n=" + std::to_string(m_.rows()) +
                                          " r=" + std::to_string(m_.cols()));
    }
    const double dev = max_abs(m_.transpose() * m_ - Matrix::Identity(m_.cols(), m_.cols()));
    if (!(dev <= kOrthonormalityTol)) {
      throw Error(Errc::rank_deficient, "columns are not orthonormal (max deviation " +
                                            std::to_string(dev) + ")");
    }
  }

  Index n() const noexcept { return m_.rows(); }
  Index r() const noexcept { return m_.cols(); }
  const Matrix& matrix() const noexcept { return m_; }
  operator const Matrix&() const noexcept { return m_; }

 private:
  Matrix m_;
};

/// Eigenvalues in non-increasing order with matching eigenvector columns.
struct SymmetricEig {
  Vector values;
  Matrix vectors;
};

/// Orthonormal basis for the column space of m (QR with a positive R diagonal).
inline BasisMatrix orthonormalize(const Matrix& m) {
  if (m.cols() < 1 || m.cols() > m.rows()) {
    throw Error(Errc::rank_deficient, "need 1 <= r <= n columns to orthonormalize");
  }
  Eigen::BDCSVD<Matrix> svd(m);
  const Vector& sv = svd.singularValues();
  if (!(sv(sv.size() - 1) > 1e-12 * sv(0))) {
    throw Error(Errc::rank_deficient, "input has numerical rank below " + std::to_string(m.cols()));
  }
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j) {
    if (qr.matrixQR()(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return BasisMatrix(std::move(q));
}

/// SE(phat, p) = ||(I - phat phat') p||_2, the sine of the largest principal angle.
inline double subspace_error(const BasisMatrix& phat, const BasisMatrix& p) {
  if (phat.n() != p.n()) {
    throw Error(Errc::dimension_mismatch, "subspace_error: ambient dimensions differ");
  }
  const Matrix& ph = phat.matrix();
  const Matrix residual = p.matrix() - ph * (ph.transpose() * p.matrix());
  return spectral_norm(residual);
}

inline SymmetricEig symmetric_eig(const Matrix& s) {
  if (s.rows() != s.cols()) {
    throw Error(Errc::not_symmetric, "matrix is not square");
  }
  if (max_abs(s - s.transpose()) > 1e-10 * max_abs(s)) {
    throw Error(Errc::not_symmetric, "matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  const Index n = s.rows();
  SymmetricEig out{Vector(n), Matrix(n, n)};
  for (Index j = 0; j < n; ++j) {
    out.values(j) = es.eigenvalues()(n - 1 - j);
    out.vectors.col(j) = es.eigenvectors().col(n - 1 - j);
  }
  return out;
}

/// Basis for the invariant subspace of the r largest eigenvalues.
inline BasisMatrix top_r_eigvecs(const SymmetricEig& eig, Index r) {
  if (r < 1 || r > eig.values.size()) {
    throw Error(Errc::invalid_rank, "top_r_eigvecs: r=" + std::to_string(r) +
                                        " outside [1, " + std::to_string(eig.values.size()) + "]");
  }
  return BasisMatrix(eig.vectors.leftCols(r));
}

inline BasisMatrix top_r_eigvecs(const Matrix& s, Index r) {
  if (r < 1 || r > s.rows()) {
    throw Error(Errc::invalid_rank, "top_r_eigvecs: r=" + std::to_string(r) +
                                        " outside [1, " + std::to_string(s.rows()) + "]");
  }
  return top_r_eigvecs(symmetric_eig(s), r);
}

/// P_perp with P P' + P_perp P_perp' = I.
inline BasisMatrix orthogonal_complement(const BasisMatrix& p) {
  if (p.r() == p.n()) {
    throw Error(Errc::no_complement, "basis already spans the whole space");
  }
  Eigen::HouseholderQR<Matrix> qr(p.matrix());
  Matrix q = qr.householderQ();
  return BasisMatrix(q.rightCols(p.n() - p.r()));
}

/// Davis-Kahan sin-theta bound in its computable-from-D0 form:
///   ||(D - D0) P|| / (lambda_r(D0) - lambda_{r+1}(D0) - lambda_max(D - D0)).
/// P must span the top-r eigenspace of D0. Empty when the denominator is not positive.
inline std::optional<double> davis_kahan_bound(const Matrix& d, const Matrix& d0, const BasisMatrix& p) {
  if (d.rows() != p.n() || d.cols() != p.n() || d0.rows() != p.n() || d0.cols() != p.n()) {
    throw Error(Errc::dimension_mismatch, "davis_kahan_bound: D, D0 and P disagree on n");
  }
  const Index r = p.r();
  if (r == p.n()) return 0.0;  // the only r-dim subspace is the whole space
  const Matrix diff = d - d0;
  const SymmetricEig e0 = symmetric_eig(d0);
  const double lambda_max_diff = symmetric_eig(diff).values(0);
  const double denom = e0.values(r - 1) - e0.values(r) - lambda_max_diff;
  if (!(denom > 0.0)) return std::nullopt;
  return spectral_norm(diff * p.matrix()) / denom;
}

/// Incoherence mu = sqrt(n/r * max_i ||row_i(P)||^2); 1 <= mu <= sqrt(n/r).
inline double incoherence(const BasisMatrix& p) {
  const double max_row = p.matrix().rowwise().squaredNorm().maxCoeff();
  return std::sqrt(static_cast<double>(p.n()) / static_cast<double>(p.r()) * max_row);
}

}  // namespace corrpca
