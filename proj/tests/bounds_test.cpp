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


#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "corrpca/bounds.hpp"

namespace corrpca {
namespace {

DerivedSpectra spectra(double lambda_minus, double f, double lv_plus, double lvp_minus,
                       double lvrest_plus, double lvppperp) {
  DerivedSpectra s;
  s.lambda_minus = lambda_minus;
  s.lambda_plus = f * lambda_minus;
  s.f = f;
  s.lambda_v_plus = lv_plus;
  s.lambda_vP_minus = lvp_minus;
  s.lambda_vrest_plus = lvrest_plus;
  s.lambda_vPPperp = lvppperp;
  s.g = g_factor(lv_plus, lambda_minus, f);
  return s;
}

BoundInputs experiment_one(Index alpha) {
  BoundInputs in;
  in.spectra = spectra(12.0, 1.0, 1.1, 0.0, 1.1, 0.0);
  in.r = 5;
  in.r_v = 5;
  in.n = 100;
  in.eta = 3.0;
  in.q = 0.001;
  in.b = 0.05;
  in.alpha = alpha;
  return in;
}

// Written out from the corollary statements, with eta = 1.
std::optional<double> uncorrelated_noise_oracle(const BoundInputs& in) {
  const DerivedSpectra& s = in.spectra;
  const double ln = std::log(double(in.n));
  const double a = double(in.alpha);
  const double ratio = s.lambda_v_plus / s.lambda_minus;
  const double g = std::max(ratio, std::sqrt(ratio * s.f));
  const double e_bnd = in.c * g * std::sqrt(double(std::max(in.r_v, in.r)) * ln / a);
  const double e_den = in.c * s.f * std::sqrt((double(in.r) + ln) / a);
  const double excess = (s.lambda_vrest_plus - s.lambda_vP_minus) / s.lambda_minus;
  if (excess + e_bnd + e_den >= 1.0) return std::nullopt;
  return (s.lambda_vPPperp / s.lambda_minus + e_bnd) / (1.0 - excess - e_bnd - e_den);
}

std::optional<double> dependent_noise_oracle(const BoundInputs& in) {
  const double f = in.spectra.f;
  const double ln = std::log(double(in.n));
  const double a = double(in.alpha);
  const double e_bnd = in.c * in.q * f * std::sqrt(double(in.r) * ln / a);
  const double e_den = in.c * f * std::sqrt((double(in.r) + ln) / a);
  const double corr = std::sqrt(in.b) * (2 * in.q + in.q * in.q) * f;
  if (3 * std::sqrt(in.b) * in.q * f + e_bnd + e_den >= 1.0) return std::nullopt;
  return (corr + e_bnd) / (1.0 - corr - e_bnd - e_den);
}

BoundInputs random_inputs(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BoundInputs in;
  const double lm = 0.5 + 20 * u(rng);
  const double f = 1.0 + 4 * u(rng);
  const double lv = lm * 0.5 * u(rng);
  const double lvp = lv * u(rng);
  const double lvrest = lvp + (lv - lvp) * u(rng);
  const double cross = lv * 0.3 * u(rng);
  in.spectra = spectra(lm, f, lv, lvp, lvrest, cross);
  in.n = 10 + Index(990 * u(rng));
  in.r = 1 + Index((in.n / 2) * u(rng));
  in.r_v = Index(in.n * u(rng));
  in.eta = 1.0 + 3 * u(rng);
  in.q = 0.99 * u(rng);
  in.b = 0.99 * u(rng);
  in.alpha = 1 + Index(1e6 * u(rng) * u(rng));
  in.c = 0.1 + 2 * u(rng);
  return in;
}

TEST(EpsDen, ExampleValue) {
  BoundInputs in = experiment_one(1000);
  EXPECT_NEAR(eps_den(in), 3.0 * std::sqrt((5.0 + std::log(100.0)) / 1000.0), 1e-15);
  EXPECT_NEAR(eps_den(in), 0.2940, 5e-5);
}

TEST(EpsDen, QuadruplingAlphaHalves) {
  BoundInputs a = experiment_one(1000), b = experiment_one(4000);
  EXPECT_NEAR(eps_den(b), 0.5 * eps_den(a), 1e-15);
}

TEST(EpsDen, InvalidInputs) {
  BoundInputs in = experiment_one(1000);
  in.r = 0;
  EXPECT_THROW(eps_den(in), Error);
  in = experiment_one(0);
  EXPECT_THROW(eps_den(in), Error);
}

TEST(EpsBnd, BoundedExample) {
  BoundInputs in = experiment_one(1000);
  const double g = std::sqrt(1.1 / 12.0);
  const double expected = std::sqrt(3.0) * g * std::sqrt(5.0 * std::log(100.0) / 1000.0);
  EXPECT_NEAR(eps_bnd(in), expected, 1e-15);
  EXPECT_NEAR(eps_bnd(in), 0.0795, 1e-4);
}

TEST(EpsBnd, NoiselessIsZero) {
  BoundInputs in = experiment_one(1000);
  in.spectra = spectra(12.0, 1.0, 0, 0, 0, 0);
  in.q = 0.0;
  EXPECT_EQ(eps_bnd(in), 0.0);
}

TEST(EpsBnd, SubGaussianExample) {
  BoundInputs in = experiment_one(400);
  in.regime = Regime::subgaussian;
  EXPECT_NEAR(eps_bnd(in), 0.5, 1e-15);
}

TEST(EpsBnd, ProofFormNeverExceedsTheoremForm) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    BoundInputs in = random_inputs(rng);
    const double thm = eps_bnd(in);
    in.form = EpsBndForm::proof_level;
    EXPECT_LE(eps_bnd(in), thm * (1 + 1e-12));
  }
}

TEST(GeneralBound, ReducesToUncorrelatedNoiseCase) {
  std::mt19937_64 rng(12);
  int compared = 0;
  for (int i = 0; i < 2000; ++i) {
    BoundInputs in = random_inputs(rng);
    in.q = 0.0;
    in.eta = 1.0;
    const BoundReport rep = theorem1_bound(in);
    const auto oracle = uncorrelated_noise_oracle(in);
    ASSERT_EQ(rep.se_bound.has_value(), oracle.has_value());
    if (oracle) {
      EXPECT_NEAR(*rep.se_bound, *oracle, 1e-12 * std::max(1.0, *oracle));
      ++compared;
    }
  }
  EXPECT_GT(compared, 100);
}

TEST(GeneralBound, ReducesToDependentNoiseCase) {
  std::mt19937_64 rng(13);
  int compared = 0;
  for (int i = 0; i < 2000; ++i) {
    BoundInputs in = random_inputs(rng);
    in.spectra = spectra(in.spectra.lambda_minus, in.spectra.f, 0, 0, 0, 0);
    in.eta = 1.0;
    const BoundReport rep = theorem1_bound(in);
    const auto oracle = dependent_noise_oracle(in);
    ASSERT_EQ(rep.se_bound.has_value(), oracle.has_value());
    if (oracle) {
      EXPECT_NEAR(*rep.se_bound, *oracle, 1e-12 * std::max(1.0, *oracle));
      ++compared;
    }
  }
  EXPECT_GT(compared, 100);
}

TEST(GeneralBound, ExperimentOneIsFinite) {
  const BoundReport rep = theorem1_bound(experiment_one(1000));
  ASSERT_TRUE(rep.feasible);
  EXPECT_GT(*rep.se_bound, 0.0);
  EXPECT_LT(*rep.se_bound, 0.2);
  EXPECT_TRUE(rep.sample_condition);
}

TEST(GeneralBound, FiniteIffSlackPositive) {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 5000; ++i) {
    const BoundInputs in = random_inputs(rng);
    for (const BoundReport& rep : {theorem1_bound(in), sddn_bound(in)}) {
      EXPECT_EQ(rep.se_bound.has_value(), rep.condition_slack > 0.0);
      if (rep.se_bound) {
        EXPECT_TRUE(std::isfinite(*rep.se_bound));
      }
    }
  }
}

TEST(Bounds, MonotoneInAlpha) {
  std::mt19937_64 rng(15);
  for (int i = 0; i < 300; ++i) {
    BoundInputs in = random_inputs(rng);
    double prev_t = std::numeric_limits<double>::infinity();
    double prev_s = prev_t, prev_d = prev_t;
    for (Index a = 1; a < 10'000'000; a = a * 3 + 1) {
      in.alpha = a;
      const auto t = theorem1_bound(in).se_bound;
      const auto s = sddn_bound(in).se_bound;
      const double d = delta_rank(in);
      const double tv = t ? *t : std::numeric_limits<double>::infinity();
      const double sv = s ? *s : std::numeric_limits<double>::infinity();
      EXPECT_LE(tv, prev_t * (1 + 1e-12));
      EXPECT_LE(sv, prev_s * (1 + 1e-12));
      EXPECT_LE(d, prev_d * (1 + 1e-12));
      prev_t = tv;
      prev_s = sv;
      prev_d = d;
    }
  }
}

TEST(SpikedBound, NoNoiseIsZero) {
  BoundInputs in = experiment_one(1000);
  in.spectra = spectra(12.0, 1.0, 0, 0, 0, 0);
  in.q = 0.0;
  const BoundReport rep = spiked_bound(in);
  ASSERT_TRUE(rep.feasible);
  EXPECT_EQ(*rep.se_bound, 0.0);
}

TEST(SpikedBound, MatchesGeneralBoundForIsotropicNoise) {
  std::mt19937_64 rng(16);
  for (int i = 0; i < 500; ++i) {
    BoundInputs in = random_inputs(rng);
    const double lv = in.spectra.lambda_v_plus;
    in.spectra = spectra(in.spectra.lambda_minus, in.spectra.f, lv, lv, lv, 0.0);
    in.q = 0.0;
    const BoundReport a = spiked_bound(in);
    const BoundReport b = theorem1_bound(in);
    if (a.feasible && b.feasible) {
      EXPECT_NEAR(*a.se_bound, *b.se_bound, 1e-12 * std::max(1.0, *b.se_bound));
    }
  }
}

TEST(SpikedBound, RejectsNonIsotropicNoise) {
  BoundInputs in = experiment_one(1000);
  try {
    spiked_bound(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::not_isotropic);
  }
}

TEST(SpikedBound, GaussianRankOneLeadingTerm) {
  // For large alpha the bound is its leading term c max(lv/l-, f) sqrt(n/alpha).
  BoundInputs in;
  in.spectra = spectra(100.0, 1.0, 25.0, 25.0, 25.0, 0.0);
  in.r = 1;
  in.n = 100;
  in.eta = 1.0;
  in.c = 2.0;
  in.regime = Regime::subgaussian;
  in.alpha = 100'000'000;
  const double lead = 2.0 * std::sqrt(in.n / double(in.alpha));
  const BoundReport rep = spiked_bound(in);
  ASSERT_TRUE(rep.feasible);
  EXPECT_GE(*rep.se_bound, lead);
  EXPECT_NEAR(*rep.se_bound / lead, 1.0, 1e-2);
}

TEST(DeltaRank, VanishesWithoutNoise) {
  BoundInputs in = experiment_one(1);
  in.spectra = spectra(12.0, 1.0, 0, 0, 0, 0);
  in.q = 0.0;
  in.alpha = 1'000'000'000'000;
  EXPECT_LT(delta_rank(in), 1e-4);
}

TEST(DeltaRank, ExperimentOneBelowHalf) {
  EXPECT_LT(delta_rank(experiment_one(5000)), 0.5);
}

TEST(DeltaRank, Formula) {
  const BoundInputs in = experiment_one(5000);
  EXPECT_NEAR(delta_rank(in),
              eps_den(in) + eps_bnd(in) + 3 * std::sqrt(0.05) * 0.001 + 1.1 / 12.0, 1e-15);
}

TEST(EigengapCondition, Flag) {
  const DerivedSpectra s = spectra(12.0, 1.0, 1.1, 0.0, 1.1, 0.0);
  Vector flat(3);
  flat << 12.5, 12.3, 12.0;
  EXPECT_TRUE(eigengap_condition(flat, 0.2, s));
  Vector wide(3);
  wide << 30.0, 12.3, 12.0;
  EXPECT_FALSE(eigengap_condition(wide, 0.2, s));
}

TEST(SddnBound, ZeroOccupancyMatchesIsotropicForm) {
  BoundInputs in = experiment_one(3000);
  in.spectra = spectra(12.0, 1.0, 0, 0, 0, 0);
  in.b = 0.0;
  const BoundReport rep = sddn_bound(in);
  ASSERT_TRUE(rep.feasible);
  EXPECT_NEAR(*rep.se_bound, rep.eps_bnd / (1 - rep.eps_bnd - rep.eps_den), 1e-15);
}

TEST(SddnBound, ExampleIsSmall) {
  BoundInputs in = experiment_one(3000);
  in.spectra = spectra(12.0, 1.0, 0, 0, 0, 0);
  const BoundReport rep = sddn_bound(in);
  ASSERT_TRUE(rep.feasible);
  EXPECT_LT(*rep.se_bound, 0.01);
}

TEST(SddnBound, InfeasibleWhenCorrelationDominates) {
  BoundInputs in = experiment_one(1'000'000'000);
  in.spectra = spectra(1.0, 4.0, 0, 0, 0, 0);
  in.q = 0.9;
  in.b = 0.9;
  EXPECT_GE(3 * std::sqrt(in.b) * in.q * in.spectra.f, 1.0);
  EXPECT_FALSE(sddn_bound(in).feasible);
}

TEST(SddnRequiredAlpha, Example) {
  EXPECT_EQ(sddn_required_alpha(0.1, 1.0, 5, 100, 0.025, 1.0), 369);
}

TEST(SddnRequiredAlpha, ConstantFractionOfNoise) {
  const double ln = std::log(100.0);
  const Index a = sddn_required_alpha(0.2, 2.0, 5, 100, 0.2, 3.0);
  EXPECT_EQ(a, Index(std::ceil(3.0 * 4.0 * 5 * ln - 1e-9)));
}

TEST(SddnRequiredAlpha, InfiniteTarget) {
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(sddn_required_alpha(0.1, 1.0, 5, 100, inf, 1.0), Index(std::ceil(5 + std::log(100.0))));
  EXPECT_THROW(sddn_required_alpha(0.1, 1.0, 5, 100, 0.0, 1.0), Error);
}

TEST(MissingQ, Examples) {
  EXPECT_EQ(missing_q(1.0, 5, 0, 100), 0.0);
  EXPECT_NEAR(missing_q(1.0, 5, 5, 100), 0.5, 1e-15);
}

TEST(MissingQ, SpikeBasisInapplicable) {
  try {
    missing_q(10.0, 5, 20, 100);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::corollary_inapplicable);
  }
  EXPECT_THROW(missing_q(0.5, 5, 5, 100), Error);
}

TEST(ExpectedPerturbation, Examples) {
  const DerivedSpectra s = spectra(12.0, 1.0, 1.1, 0.2, 0.9, 0.3);
  const ExpectedPerturbation zero = expected_perturbation(s, 0.0, 0.5);
  EXPECT_EQ(zero.numerator, 0.3);
  EXPECT_EQ(zero.denominator_shift, 0.9);
  const ExpectedPerturbation full = expected_perturbation(s, 0.5, 1.0);
  EXPECT_NEAR(full.numerator - 0.3, 15.0, 1e-12);
  EXPECT_NEAR(full.denominator_shift - 0.9, 15.0, 1e-12);
  const ExpectedPerturbation none = expected_perturbation(s, 0.5, 0.0);
  EXPECT_EQ(none.signal_noise, 0.0);
  EXPECT_EQ(none.noise_power, 0.0);
}

TEST(DeviationBounds, ScaleAndZeros) {
  BoundInputs in = experiment_one(2000);
  const auto dev = deviation_bounds(in);
  EXPECT_NEAR(dev[0], eps_den(in) * 12.0, 1e-12);
  in.q = 0.0;
  in.spectra = spectra(12.0, 1.0, 0, 0, 0, 0);
  in.r_v = 0;
  const auto zero = deviation_bounds(in);
  for (int k = 1; k < 5; ++k) EXPECT_EQ(zero[k], 0.0) << to_string(kDeviationTerms[k]);
}

}  // namespace
}  // namespace corrpca
