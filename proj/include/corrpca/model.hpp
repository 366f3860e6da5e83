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

// Generative model y_t = l_t + w_t + v_t: low-rank signal l_t = P a_t,
// uncorrelated (possibly non-isotropic) noise v_t = B c_t, and sparse
// data-dependent noise w_t = I_{T_t} M_{1,t} l_t on a moving support.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "corrpca/errors.hpp"
#include "corrpca/rng.hpp"
#include "corrpca/subspace.hpp"

namespace corrpca {

enum class Distribution { bounded_uniform, gaussian };

struct SignalModel {
  BasisMatrix P;
  Vector lambdas;  // diagonal of Lambda, non-increasing
  Distribution distribution = Distribution::bounded_uniform;
  double eta = 3.0;  // element-wise bound on (a_t)_j^2 / lambda_j; 3 for uniform coefficients

  Index n() const { return P.n(); }
  Index r() const { return P.r(); }
  double lambda_minus() const { return lambdas.minCoeff(); }
  double lambda_plus() const { return lambdas.maxCoeff(); }

  void validate() const {
    if (lambdas.size() != P.r()) {
      throw Error(Errc::validation_error, "signal: need one lambda per basis column");
    }
    for (Index j = 0; j < lambdas.size(); ++j) {
      if (!(lambdas(j) > 0.0)) throw Error(Errc::validation_error, "signal: lambdas must be positive");
      if (j > 0 && lambdas(j) > lambdas(j - 1)) {
        throw Error(Errc::validation_error, "signal: lambdas must be non-increasing");
      }
    }
    if (distribution == Distribution::bounded_uniform && eta != 3.0) {
      throw Error(Errc::validation_error, "signal: uniform coefficients have eta = 3");
    }
    if (!(eta >= 1.0)) throw Error(Errc::validation_error, "signal: eta must be >= 1");
  }
};

/// v_t = B c_t with independent coordinates (c_t)_i of amplitude scales_i.
/// An empty basis means B = I (effective dimension r_v = n).
struct UncorrNoiseModel {
  Index n = 0;
  std::optional<BasisMatrix> basis;
  Vector scales;
  Distribution distribution = Distribution::bounded_uniform;

  Index r_v() const { return scales.size(); }

  /// Per-coordinate variance: scale^2/3 for uniform(-scale, scale), scale^2 for gaussian.
  Vector variances() const {
    Vector v = scales.array().square();
    if (distribution == Distribution::bounded_uniform) v /= 3.0;
    return v;
  }

  Matrix covariance() const {
    if (r_v() == 0) return Matrix::Zero(n, n);
    const Vector var = variances();
    if (!basis) return var.asDiagonal().toDenseMatrix();
    const Matrix& b = basis->matrix();
    return b * var.asDiagonal() * b.transpose();
  }

  void validate() const {
    if (basis) {
      if (basis->n() != n || basis->r() != r_v()) {
        throw Error(Errc::validation_error, "noise: basis shape must be n x r_v");
      }
    } else if (r_v() != 0 && r_v() != n) {
      throw Error(Errc::validation_error, "noise: identity basis requires r_v = n");
    }
    if (r_v() > 0 && (scales.array() < 0.0).any()) {
      throw Error(Errc::validation_error, "noise: scales must be non-negative");
    }
  }
};

/// q_i = base - slope * i / r_v for i = 1..r_v.
inline Vector linear_scales(Index r_v, double base, double slope) {
  Vector s(r_v);
  for (Index i = 0; i < r_v; ++i) {
    s(i) = base - slope * static_cast<double>(i + 1) / static_cast<double>(r_v);
  }
  return s;
}

struct SddnModel {
  Index s = 0;       // support size
  double b0 = 0.05;  // target per-row occupancy
  int rho = 1;       // dwell-length granularity
  double q = 0.0;    // ||M_{1,t} P|| for every t

  void validate(Index n) const {
    if (s < 0 || s > n) throw Error(Errc::invalid_support, "sddn: need 0 <= s <= n");
    if (!(q >= 0.0 && q < 1.0)) throw Error(Errc::validation_error, "sddn: q must lie in [0, 1)");
    if (!(b0 > 0.0 && b0 <= 1.0)) throw Error(Errc::validation_error, "sddn: b0 must lie in (0, 1]");
    if (rho < 1) throw Error(Errc::validation_error, "sddn: rho must be >= 1");
  }
};

using Support = std::vector<Index>;

/// Moving block support: s consecutive rows (mod n) that dwell for
/// rho * ceil(b0 * alpha / rho) frames and then advance by s.
class SupportSchedule {
 public:
  SupportSchedule(Index n, const SddnModel& m, Index alpha) : n_(n), s_(m.s) {
    if (m.s > n) throw Error(Errc::invalid_support, "support size exceeds n");
    if (alpha < 1) throw Error(Errc::empty_batch, "support schedule needs alpha >= 1");
    const double per_block = std::ceil(m.b0 * static_cast<double>(alpha) / m.rho - 1e-9);
    dwell_ = std::max<Index>(1, static_cast<Index>(per_block) * m.rho);
  }

  Index n() const { return n_; }
  Index s() const { return s_; }
  Index dwell() const { return dwell_; }

  /// Position counter of the block holding frame t; frames sharing it share a support.
  Index block(Index t) const { return t / dwell_; }

  /// Row index of the j-th support element during block k.
  Index row(Index k, Index j) const {
    return n_ == 0 ? 0 : static_cast<Index>((static_cast<std::uint64_t>(k) * s_ + j) % n_);
  }

  Support at(Index t) const {
    Support out(static_cast<std::size_t>(s_));
    const Index k = block(t);
    for (Index j = 0; j < s_; ++j) out[static_cast<std::size_t>(j)] = row(k, j);
    return out;
  }

 private:
  Index n_;
  Index s_;
  Index dwell_ = 1;
};

inline std::vector<Support> support_sequence(Index n, const SddnModel& m, Index alpha) {
  const SupportSchedule sched(n, m, alpha);
  std::vector<Support> out;
  out.reserve(static_cast<std::size_t>(alpha));
  for (Index t = 0; t < alpha; ++t) out.push_back(sched.at(t));
  return out;
}

/// b = max over rows of the fraction of frames whose support contains the row.
inline double row_occupancy(const std::vector<Support>& supports, Index n) {
  if (supports.empty()) return 0.0;
  std::vector<Index> count(static_cast<std::size_t>(n), 0);
  for (const auto& t : supports) {
    for (Index i : t) ++count[static_cast<std::size_t>(i)];
  }
  const Index peak = count.empty() ? 0 : *std::max_element(count.begin(), count.end());
  return static_cast<double>(peak) / static_cast<double>(supports.size());
}

/// Orthonormalized n x r matrix of iid standard Gaussians.
inline BasisMatrix make_random_basis(Index n, Index r, Engine& rng) {
  if (r < 1 || r > n) throw Error(Errc::invalid_rank, "make_random_basis: need 1 <= r <= n");
  NormalDist normal;
  Matrix g(n, r);
  for (Index j = 0; j < r; ++j) {
    for (Index i = 0; i < n; ++i) g(i, j) = normal(rng);
  }
  return orthonormalize(g);
}

/// Draws a_t into `a` (length r). Variance of coordinate j is lambdas(j).
inline void draw_coefficients(const SignalModel& m, Engine& rng, Eigen::Ref<Vector> a) {
  if (m.distribution == Distribution::bounded_uniform) {
    for (Index j = 0; j < a.size(); ++j) {
      const double half = std::sqrt(3.0 * m.lambdas(j));
      a(j) = UniformDist(-half, half)(rng);
    }
  } else {
    NormalDist normal;
    for (Index j = 0; j < a.size(); ++j) a(j) = std::sqrt(m.lambdas(j)) * normal(rng);
  }
}

struct SignalDraw {
  Vector l;
  Vector a;
};

inline SignalDraw sample_signal(const SignalModel& m, Engine& rng) {
  SignalDraw d{Vector(m.n()), Vector(m.r())};
  draw_coefficients(m, rng, d.a);
  d.l.noalias() = m.P.matrix() * d.a;
  return d;
}

/// Draws the noise coordinates c_t (length r_v).
inline void draw_noise_coordinates(const UncorrNoiseModel& m, Engine& rng, Eigen::Ref<Vector> c) {
  if (m.distribution == Distribution::bounded_uniform) {
    for (Index i = 0; i < c.size(); ++i) {
      const double s = m.scales(i);
      c(i) = s > 0.0 ? UniformDist(-s, s)(rng) : 0.0;
    }
  } else {
    NormalDist normal;
    for (Index i = 0; i < c.size(); ++i) c(i) = m.scales(i) * normal(rng);
  }
}

inline Vector sample_uncorr_noise(const UncorrNoiseModel& m, Engine& rng) {
  if (m.r_v() == 0) return Vector::Zero(m.n);
  Vector c(m.r_v());
  draw_noise_coordinates(m, rng, c);
  if (!m.basis) return c;
  return m.basis->matrix() * c;
}

/// Scaled dependency matrix M_1 = (q / ||M_s P||) M_s where M_s is s x n with
/// iid |N(0,1)| entries. Guarantees ||M_1 P|| = q.
inline Matrix draw_dependency_matrix(const SddnModel& m, const BasisMatrix& p, Engine& rng) {
  NormalDist normal;
  Matrix ms(m.s, p.n());
  for (;;) {
    for (Index j = 0; j < ms.cols(); ++j) {
      for (Index i = 0; i < ms.rows(); ++i) ms(i, j) = std::abs(normal(rng));
    }
    const double norm = spectral_norm(ms * p.matrix());
    if (m.s == 0 || m.q == 0.0) return Matrix::Zero(m.s, p.n());
    if (norm > 0.0) return (m.q / norm) * ms;
  }
}

inline void check_support(const Support& t, Index n) {
  for (Index i : t) {
    if (i < 0 || i >= n) throw Error(Errc::invalid_support, "support index out of range");
  }
}

/// w_t = I_T M_1 l_t for an already drawn M_1 (|T| x n).
inline Vector apply_dependency(const Matrix& m1, const Support& t, const Vector& l) {
  check_support(t, l.size());
  if (m1.rows() != static_cast<Index>(t.size()) || m1.cols() != l.size()) {
    throw Error(Errc::dimension_mismatch, "dependency matrix must be |T| x n");
  }
  Vector w = Vector::Zero(l.size());
  const Vector vals = m1 * l;
  for (std::size_t j = 0; j < t.size(); ++j) w(t[j]) = vals(static_cast<Index>(j));
  return w;
}

inline Vector sample_sddn(const SddnModel& m, const BasisMatrix& p, const Support& t, const Vector& l,
                          Engine& rng) {
  if (static_cast<Index>(t.size()) != m.s) {
    throw Error(Errc::invalid_support, "support size differs from model s");
  }
  return apply_dependency(draw_dependency_matrix(m, p, rng), t, l);
}

/// Missing-data observation: entries on T are zeroed.
inline Vector apply_missing(const Vector& l, const Support& t) {
  check_support(t, l.size());
  Vector y = l;
  for (Index i : t) y(i) = 0.0;
  return y;
}

/// Scalar spectra of the signal and noise covariances.
struct DerivedSpectra {
  double lambda_minus = 0.0;
  double lambda_plus = 0.0;
  double f = 1.0;
  double lambda_v_plus = 0.0;      // ||Sigma_v||
  double lambda_vP_minus = 0.0;    // lambda_min(P' Sigma_v P)
  double lambda_vrest_plus = 0.0;  // lambda_max(Sigma_v - P P' Sigma_v P P')
  double lambda_vPPperp = 0.0;     // ||P_perp' Sigma_v P||
  double g = 0.0;                  // max(lv/l-, sqrt(lv f / l-))
};

inline double g_factor(double lambda_v_plus, double lambda_minus, double f) {
  const double ratio = lambda_v_plus / lambda_minus;
  return std::max(ratio, std::sqrt(ratio * f));
}

inline DerivedSpectra derived_spectra(const SignalModel& sig, const Matrix& sigma_v) {
  if (sigma_v.rows() != sig.n() || sigma_v.cols() != sig.n()) {
    throw Error(Errc::dimension_mismatch, "noise covariance must be n x n");
  }
  const Matrix& p = sig.P.matrix();
  DerivedSpectra d;
  d.lambda_minus = sig.lambda_minus();
  d.lambda_plus = sig.lambda_plus();
  d.f = d.lambda_plus / d.lambda_minus;

  const Matrix sv_p = sigma_v * p;
  const Matrix inner = p.transpose() * sv_p;
  d.lambda_v_plus = std::max(0.0, symmetric_eig(sigma_v).values(0));
  d.lambda_vP_minus = symmetric_eig(0.5 * (inner + inner.transpose())).values.minCoeff();
  const Matrix rest = sigma_v - p * inner * p.transpose();
  d.lambda_vrest_plus = symmetric_eig(0.5 * (rest + rest.transpose())).values(0);
  d.lambda_vPPperp = spectral_norm(sv_p - p * inner);  // (I - P P') Sigma_v P
  d.g = g_factor(d.lambda_v_plus, d.lambda_minus, d.f);
  return d;
}

inline DerivedSpectra derived_spectra(const SignalModel& sig, const UncorrNoiseModel& noise) {
  return derived_spectra(sig, noise.covariance());
}

/// Eigenvalues (non-increasing) of Lambda + P' Sigma_v P.
inline Vector signal_subspace_spectrum(const SignalModel& sig, const Matrix& sigma_v) {
  const Matrix& p = sig.P.matrix();
  Matrix m = p.transpose() * sigma_v * p;
  m = 0.5 * (m + m.transpose());
  m.diagonal() += sig.lambdas;
  return symmetric_eig(m).values;
}

}  // namespace corrpca
