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

// Closed-form finite-sample bounds on the subspace error of PCA under
// non-isotropic and data-dependent noise. All logarithms are natural.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string_view>

#include "corrpca/errors.hpp"
#include "corrpca/model.hpp"

namespace corrpca {

enum class Regime { bounded, subgaussian };

/// Which form of eps_bnd to use in the bounded regime. `theorem` is the
/// two-term max with g; `proof_level` separates the v v' term into its own
/// third argument (it never exceeds the theorem form).
enum class EpsBndForm { theorem, proof_level };

struct BoundInputs {
  DerivedSpectra spectra;
  Index r = 1;
  Index r_v = 0;
  Index n = 2;
  double eta = 3.0;
  double q = 0.0;
  double b = 0.0;
  Index alpha = 1;
  double c = 1.0;
  Regime regime = Regime::bounded;
  EpsBndForm form = EpsBndForm::theorem;

  void validate() const {
    if (alpha < 1) throw Error(Errc::validation_error, "bounds: alpha must be >= 1");
    if (r < 1 || r > n) throw Error(Errc::validation_error, "bounds: need 1 <= r <= n");
    if (!(q >= 0.0 && q < 1.0)) throw Error(Errc::validation_error, "bounds: q must lie in [0, 1)");
    if (!(b >= 0.0 && b < 1.0)) throw Error(Errc::validation_error, "bounds: b must lie in [0, 1)");
    if (!(c > 0.0)) throw Error(Errc::validation_error, "bounds: c must be positive");
    if (!(spectra.lambda_minus > 0.0)) throw Error(Errc::validation_error, "bounds: lambda_minus must be positive");
  }
};

struct BoundReport {
  double eps_bnd = 0.0;
  double eps_den = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;
  double condition_slack = 0.0;  // 1 minus the feasibility sum
  bool feasible = false;
  bool sample_condition = true;  // alpha^3 > max(r_v, r) log n (bounded regime only)
  std::optional<double> se_bound;
};

namespace detail {
inline double log_n(const BoundInputs& in) { return std::log(static_cast<double>(in.n)); }
inline double as_double(Index v) { return static_cast<double>(v); }

inline BoundReport finish(BoundReport rep, double slack) {
  rep.condition_slack = slack;
  rep.feasible = slack > 0.0;
  if (rep.feasible) rep.se_bound = rep.numerator / rep.denominator;
  return rep;
}
}  // namespace detail

inline double eps_den(const BoundInputs& in) {
  in.validate();
  return in.c * in.eta * in.spectra.f *
         std::sqrt((detail::as_double(in.r) + detail::log_n(in)) / detail::as_double(in.alpha));
}

inline double eps_bnd(const BoundInputs& in) {
  in.validate();
  const DerivedSpectra& s = in.spectra;
  const double alpha = detail::as_double(in.alpha);
  const double ratio_v = s.lambda_v_plus / s.lambda_minus;
  if (in.regime == Regime::subgaussian) {
    return in.c * std::max(ratio_v, s.f) * std::sqrt(detail::as_double(in.n) / alpha);
  }
  const double ln = detail::log_n(in);
  const double rmax = detail::as_double(std::max(in.r_v, in.r));
  const double ddn = in.q * s.f * std::sqrt(detail::as_double(in.r) * ln / alpha);
  if (in.form == EpsBndForm::theorem) {
    return in.c * std::sqrt(in.eta) * std::max(ddn, s.g * std::sqrt(rmax * ln / alpha));
  }
  const double lv = std::sqrt(ratio_v * s.f) * std::sqrt(rmax * ln / alpha);
  const double vv = ratio_v * std::sqrt(detail::as_double(in.r_v) * ln / alpha);
  return in.c * std::sqrt(in.eta) * std::max({ddn, lv, vv});
}

/// sqrt(b) (2q + q^2) f: the time-averaged signal-noise correlation term.
inline double correlation_term(const BoundInputs& in) {
  return std::sqrt(in.b) * (2.0 * in.q + in.q * in.q) * in.spectra.f;
}

/// General subspace error bound for y_t = l_t + w_t + v_t.
inline BoundReport theorem1_bound(const BoundInputs& in) {
  const DerivedSpectra& s = in.spectra;
  BoundReport rep;
  rep.eps_bnd = eps_bnd(in);
  rep.eps_den = eps_den(in);
  const double ddn = correlation_term(in);
  const double excess = (s.lambda_vrest_plus - s.lambda_vP_minus) / s.lambda_minus;
  rep.numerator = s.lambda_vPPperp / s.lambda_minus + ddn + rep.eps_bnd;
  rep.denominator = 1.0 - excess - ddn - rep.eps_bnd - rep.eps_den;
  if (in.regime == Regime::bounded) {
    const double a = detail::as_double(in.alpha);
    rep.sample_condition = a * a * a > detail::as_double(std::max(in.r_v, in.r)) * detail::log_n(in);
  }
  const double slack =
      1.0 - (excess + 3.0 * std::sqrt(in.b) * in.q * s.f + rep.eps_bnd + rep.eps_den);
  return detail::finish(rep, slack);
}

/// Isotropic uncorrelated noise: SE <= eps_bnd / (1 - eps_bnd - eps_den),
/// valid while eps_bnd + eps_den < 0.95. Data-dependent terms are ignored.
inline BoundReport spiked_bound(const BoundInputs& in) {
  const DerivedSpectra& s = in.spectra;
  const double tol = 1e-9 * std::max(1.0, s.lambda_v_plus);
  if (s.lambda_vPPperp > tol || std::abs(s.lambda_vrest_plus - s.lambda_vP_minus) > tol) {
    throw Error(Errc::not_isotropic, "spiked_bound needs Sigma_v proportional to the identity");
  }
  BoundReport rep;
  rep.eps_bnd = eps_bnd(in);
  rep.eps_den = eps_den(in);
  rep.numerator = rep.eps_bnd;
  rep.denominator = 1.0 - rep.eps_bnd - rep.eps_den;
  return detail::finish(rep, 0.95 - rep.eps_bnd - rep.eps_den);
}

/// Slack controlling both rank estimators: ||D - D0|| <= delta * lambda_minus.
inline double delta_rank(const BoundInputs& in) {
  return eps_den(in) + eps_bnd(in) + 3.0 * std::sqrt(in.b) * in.q * in.spectra.f +
         in.spectra.lambda_vrest_plus / in.spectra.lambda_minus;
}

/// Eigen-gap estimator condition: the largest gap between consecutive eigenvalues
/// of Lambda + P' Sigma_v P stays below (1 - 4 delta) lambda_minus + lambda_vP_minus.
inline bool eigengap_condition(const Vector& subspace_spectrum, double delta, const DerivedSpectra& s) {
  double widest = 0.0;
  for (Index j = 0; j + 1 < subspace_spectrum.size(); ++j) {
    widest = std::max(widest, subspace_spectrum(j) - subspace_spectrum(j + 1));
  }
  return widest <= (1.0 - 4.0 * delta) * s.lambda_minus + s.lambda_vP_minus;
}

/// Sparse data-dependent noise only: SE <= (3 sqrt(b) q f + eps_bnd) / (1 - (3 sqrt(b) q f + eps_bnd + eps_den)).
/// The same expression serves PCA with missing data once q comes from missing_q().
inline BoundReport sddn_bound(const BoundInputs& in) {
  BoundReport rep;
  rep.eps_bnd = eps_bnd(in);
  rep.eps_den = eps_den(in);
  const double x = 3.0 * std::sqrt(in.b) * in.q * in.spectra.f;
  rep.numerator = x + rep.eps_bnd;
  rep.denominator = 1.0 - (x + rep.eps_bnd + rep.eps_den);
  if (in.regime == Regime::bounded) {
    const double a = detail::as_double(in.alpha);
    rep.sample_condition = a * a * a > detail::as_double(in.r) * detail::log_n(in);
  }
  return detail::finish(rep, rep.denominator);
}

/// alpha_0 = ceil(C max(q^2 f^2 / eps^2 * r log n, f^2 (r + log n))).
inline Index sddn_required_alpha(double q, double f, Index r, Index n, double eps_se, double big_c) {
  if (!(eps_se > 0.0)) throw Error(Errc::validation_error, "sddn_required_alpha: eps_SE must be positive");
  const double ln = std::log(static_cast<double>(n));
  const double rr = static_cast<double>(r);
  const double sampling = std::isinf(eps_se) ? 0.0 : (q * q * f * f) / (eps_se * eps_se) * rr * ln;
  const double floor_term = f * f * (rr + ln);
  return static_cast<Index>(std::ceil(big_c * std::max(sampling, floor_term) - 1e-9));
}

/// q = sqrt(mu^2 r s / n) for missing data; the corollary needs q < 1.
inline double missing_q(double mu, Index r, Index s, Index n) {
  if (!(mu >= 1.0 - 1e-12)) throw Error(Errc::validation_error, "missing_q: mu must be >= 1");
  const double q = std::sqrt(mu * mu * static_cast<double>(r) * static_cast<double>(s) / static_cast<double>(n));
  if (q >= 1.0) {
    throw Error(Errc::corollary_inapplicable, "missing_q: q = " + std::to_string(q) + " >= 1");
  }
  return q;
}

/// Population-level perturbation terms of E[D - D0].
struct ExpectedPerturbation {
  double signal_noise = 0.0;       // bound on ||avg E[l w']||: sqrt(b) q lambda+
  double noise_power = 0.0;        // bound on ||avg E[w w']||: sqrt(b) q^2 lambda+
  double numerator = 0.0;          // lambda_vPPperp + sqrt(b)(2q + q^2) lambda+
  double denominator_shift = 0.0;  // lambda_vrest_plus + sqrt(b)(2q + q^2) lambda+
};

inline ExpectedPerturbation expected_perturbation(const DerivedSpectra& s, double q, double b) {
  ExpectedPerturbation e;
  const double sb = std::sqrt(b);
  e.signal_noise = sb * q * s.lambda_plus;
  e.noise_power = sb * q * q * s.lambda_plus;
  const double ddn = 2.0 * e.signal_noise + e.noise_power;
  e.numerator = s.lambda_vPPperp + ddn;
  e.denominator_shift = s.lambda_vrest_plus + ddn;
  return e;
}

/// The five deviation quantities tracked by the concentration check.
enum class DeviationTerm { aa, lw, ww, lv, vv };
inline constexpr std::array<DeviationTerm, 5> kDeviationTerms = {
    DeviationTerm::aa, DeviationTerm::lw, DeviationTerm::ww, DeviationTerm::lv, DeviationTerm::vv};

constexpr std::string_view to_string(DeviationTerm t) {
  switch (t) {
    case DeviationTerm::aa: return "aa";
    case DeviationTerm::lw: return "lw";
    case DeviationTerm::ww: return "ww";
    case DeviationTerm::lv: return "lv";
    case DeviationTerm::vv: return "vv";
  }
  return "?";
}

/// High-probability bounds on the five spectral-norm deviations (bounded regime),
/// in absolute units (already multiplied by lambda_minus).
inline std::array<double, 5> deviation_bounds(const BoundInputs& in) {
  in.validate();
  const DerivedSpectra& s = in.spectra;
  const double ln = detail::log_n(in);
  const double alpha = detail::as_double(in.alpha);
  const double se = std::sqrt(in.eta);
  const double ratio_v = s.lambda_v_plus / s.lambda_minus;
  const double root_r = std::sqrt(detail::as_double(in.r) * ln / alpha);
  const double rmax = detail::as_double(std::max(in.r_v, in.r));
  return {
      in.c * in.eta * s.f * std::sqrt((detail::as_double(in.r) + ln) / alpha) * s.lambda_minus,
      in.c * se * in.q * s.f * root_r * s.lambda_minus,
      in.c * se * in.q * in.q * s.f * root_r * s.lambda_minus,
      in.c * se * std::sqrt(ratio_v * s.f) * std::sqrt(rmax * ln / alpha) * s.lambda_minus,
      in.c * se * ratio_v * std::sqrt(detail::as_double(in.r_v) * ln / alpha) * s.lambda_minus,
  };
}

}  // namespace corrpca
