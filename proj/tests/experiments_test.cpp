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
#include <sstream>
#include <stdexcept>

#include "corrpca/estimator.hpp"
#include "corrpca/experiments.hpp"

namespace corrpca {
namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.model.n = 40;
  cfg.model.r = 3;
  cfg.model.lambdas = {12.0};
  cfg.model.rv_rule = RvRule::equal_r;
  cfg.model.noise_base = 1.1;
  cfg.model.noise_slope = 0.1;
  cfg.model.s = 4;
  cfg.model.b0 = 0.05;
  cfg.model.q = 0.01;
  cfg.alpha_grid = {50, 300, 700, 1500};
  cfg.n_trials = 12;
  cfg.master_seed = 77;
  return cfg;
}

ExperimentConfig noiseless(ExperimentConfig cfg) {
  cfg.model.noise_base = 0.0;
  cfg.model.noise_slope = 0.0;
  cfg.model.q = 0.0;
  return cfg;
}

TEST(Trial, NoiselessDataRecoversSubspace) {
  const ExperimentConfig cfg = noiseless(small_config());
  for (int t = 0; t < 3; ++t) {
    const TrialResult res = run_trial(cfg, GridPoint{40, 3, 200}, t);
    EXPECT_LE(res.se, 1e-8);
    EXPECT_EQ(res.r_hat_threshold, 3);
    EXPECT_EQ(res.r_hat_gap, 3);
  }
}

TEST(Trial, SameKeySameResult) {
  const ExperimentConfig cfg = small_config();
  const TrialResult a = run_trial(cfg, GridPoint{40, 3, 700}, 5);
  const TrialResult b = run_trial(cfg, GridPoint{40, 3, 700}, 5);
  EXPECT_EQ(a.se, b.se);
  EXPECT_EQ(*a.deviations, *b.deviations);
  const TrialResult c = run_trial(cfg, GridPoint{40, 3, 700}, 6);
  EXPECT_NE(a.se, c.se);
}

TEST(Trial, SweepMatchesSingleAlpha) {
  const ExperimentConfig cfg = small_config();
  const ModelInstance m = model_for(cfg, 40, 3, 0);
  TrialSetup setup;
  setup.model = &m;
  setup.deviations = true;
  const TrialKey key{cfg.master_seed, 3, grid_coordinate(40, 3), 0};
  const std::vector<Index> alphas{1, 50, 511, 512, 513, 1500};
  const auto sweep = run_trial_sweep(setup, alphas, key);
  ASSERT_EQ(sweep.size(), alphas.size());
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    const TrialResult one = run_trial(setup, alphas[k], key);
    EXPECT_EQ(sweep[k].alpha, alphas[k]);
    EXPECT_EQ(sweep[k].se, one.se) << alphas[k];
    EXPECT_EQ(sweep[k].r_hat_threshold, one.r_hat_threshold);
    EXPECT_EQ(*sweep[k].deviations, *one.deviations);
  }
}

TEST(Trial, SweepRejectsUnsortedGrid) {
  const ExperimentConfig cfg = small_config();
  const ModelInstance m = model_for(cfg, 40, 3, 0);
  TrialSetup setup;
  setup.model = &m;
  const std::vector<Index> alphas{300, 50};
  EXPECT_THROW(run_trial_sweep(setup, alphas, TrialKey{}), Error);
}

TEST(Trial, ExplicitBatchMatchesStreamingEngine) {
  const ExperimentConfig cfg = small_config();
  const ModelInstance m = model_for(cfg, 40, 3, 0);
  for (Corruption mode : {Corruption::sddn, Corruption::missing}) {
    TrialSetup setup;
    setup.model = &m;
    setup.corruption = mode;
    const TrialKey key{cfg.master_seed, 1, grid_coordinate(40, 3), 0};
    for (Index alpha : {Index(37), Index(1300)}) {
      const DataBatch batch = generate_batch(setup, alpha, key);
      const double se = subspace_error(pca_estimate(batch, 3), m.signal.P);
      EXPECT_NEAR(run_trial(setup, alpha, key).se, se, 1e-9);
    }
  }
}

TEST(Trial, MissingModeZeroesSupportEntries) {
  ExperimentConfig cfg = small_config();
  const ModelInstance m = model_for(cfg, 40, 3, 0);
  TrialSetup setup;
  setup.model = &m;
  setup.corruption = Corruption::missing;
  const Index alpha = 200;
  const DataBatch batch = generate_batch(setup, alpha, TrialKey{1, 0, 0, 0});
  const SupportSchedule sched(m.n(), m.sddn, alpha);
  for (Index t = 0; t < alpha; ++t) {
    for (Index i : sched.at(t)) EXPECT_EQ(batch.columns()(i, t), 0.0);
  }
}

TEST(Experiments, CsvIsByteIdenticalAcrossWorkers) {
  ExperimentConfig cfg = small_config();
  std::string reference;
  for (int workers : {1, 2, 5}) {
    cfg.workers = workers;
    std::ostringstream os;
    write_bound_tightness_csv(os, bound_tightness(cfg));
    if (reference.empty()) {
      reference = os.str();
    } else {
      EXPECT_EQ(os.str(), reference) << workers;
    }
  }
  EXPECT_NE(reference.find("alpha,mean_se,max_se,bound\n"), std::string::npos);
}

TEST(Experiments, PhaseTransitionCsvIsByteIdenticalAcrossWorkers) {
  ExperimentConfig cfg = small_config();
  cfg.r_grid = {1, 3};
  std::ostringstream a, b;
  cfg.workers = 1;
  write_phase_transition_csv(a, phase_transition(cfg));
  cfg.workers = 3;
  write_phase_transition_csv(b, phase_transition(cfg));
  EXPECT_EQ(a.str(), b.str());
}

TEST(Experiments, PhaseTransitionNeedsOneAxis) {
  ExperimentConfig cfg = small_config();
  EXPECT_THROW(phase_transition(cfg), Error);
  cfg.r_grid = {1};
  cfg.n_grid = {40};
  EXPECT_THROW(phase_transition(cfg), Error);
}

TEST(Experiments, BoundTightnessRowsAreOrdered) {
  ExperimentConfig cfg = small_config();
  cfg.alpha_grid = {1500, 50, 300};
  const GridResult g = bound_tightness(cfg);
  ASSERT_EQ(g.rows.size(), 3u);
  EXPECT_EQ(g.rows[0].alpha, 50);
  EXPECT_EQ(g.rows[2].alpha, 1500);
  for (const auto& row : g.rows) {
    EXPECT_LE(row.mean_se, row.max_se);
    if (row.predicted_bound) {
      EXPECT_GE(*row.predicted_bound, row.max_se);
    }
  }
}

TEST(Experiments, RequiredAlpha) {
  GridResult g{"r", {}};
  for (Index a : {100, 200, 400}) {
    GridRow row;
    row.axis = 5;
    row.alpha = a;
    row.success_probability = a >= 200 ? 0.95 : 0.5;
    g.rows.push_back(row);
  }
  EXPECT_EQ(required_alpha(g, 5), 200);
  EXPECT_FALSE(required_alpha(g, 10).has_value());
}

TEST(PaperEpsilon, Formula) {
  DerivedSpectra s;
  s.lambda_minus = 10.0;
  s.lambda_plus = 20.0;
  s.f = 2.0;
  s.lambda_vPPperp = 0.5;
  s.lambda_vrest_plus = 2.0;
  s.lambda_vP_minus = 1.0;
  const double q = 0.1, b = 0.04;
  const double expected = 1.5 * (0.2 * 0.21 * 2.0 + 0.05 / 0.9);
  EXPECT_NEAR(factor_epsilon(s, q, b), expected, 1e-15);
}

TEST(Concentration, DependentTermsVanishWithoutCorruption) {
  ExperimentConfig cfg = small_config();
  cfg.model.q = 0.0;
  cfg.n_trials = 4;
  for (const auto& row : concentration_check(cfg)) {
    if (row.term == DeviationTerm::lw || row.term == DeviationTerm::ww) {
      EXPECT_LE(row.empirical_median, 1e-12);
    }
  }
}

TEST(Concentration, NoiseTermsVanishWithoutNoise) {
  ExperimentConfig cfg = small_config();
  cfg.model.noise_base = 0.0;
  cfg.model.noise_slope = 0.0;
  cfg.n_trials = 4;
  const auto rows = concentration_check(cfg);
  ASSERT_EQ(rows.size(), 5 * cfg.alpha_grid.size());
  for (const auto& row : rows) {
    if (row.term == DeviationTerm::lv || row.term == DeviationTerm::vv) {
      EXPECT_LE(row.empirical_median, 1e-12);
    } else {
      EXPECT_GT(row.empirical_median, 0.0);
    }
  }
}

TEST(Concentration, BoundedRegimeOnly) {
  ExperimentConfig cfg = small_config();
  cfg.regime = Regime::subgaussian;
  EXPECT_THROW(concentration_check(cfg), Error);
}

TEST(RankEstimation, NoiselessAlwaysCorrect) {
  ExperimentConfig cfg = noiseless(small_config());
  cfg.alpha_grid = {400};
  const auto rows = rank_estimation(cfg);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].threshold_success, 1.0);
  EXPECT_EQ(rows[0].eigengap_success, 1.0);
}

TEST(Adversarial, PopulationSubspaceIsOrthogonal) {
  const std::vector<double> lambdas{15, 14, 14, 14, 12};
  const ModelInstance m = adversarial_model(50, 5, lambdas, 3);
  EXPECT_NEAR(population_se(m), 1.0, 1e-10);
  EXPECT_NEAR(m.spectra.lambda_vP_minus, 0.0, 1e-10);
  EXPECT_NEAR(m.spectra.lambda_vrest_plus, 1.2 * 12.0, 1e-9);
}

TEST(Adversarial, WeakNoiseIsHarmless) {
  const std::vector<double> lambdas{15, 14, 14, 14, 12};
  const ModelInstance m = adversarial_model(50, 5, lambdas, 3, 0.5);
  EXPECT_LE(population_se(m), 1e-10);
}

TEST(Adversarial, HypothesisChecked) {
  const std::vector<double> flat{12, 12, 12};
  try {
    adversarial_model(20, 3, flat, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_example);
  }
  EXPECT_THROW(adversarial_model(20, 1, {12.0}, 1), Error);
}

TEST(Adversarial, FiniteSampleTrialIsReproducible) {
  const std::vector<double> lambdas{15, 14, 14, 14, 12};
  const AdversarialResult a = adversarial_sigma(50, 5, 20000, lambdas, 8, 0);
  const AdversarialResult b = adversarial_sigma(50, 5, 20000, lambdas, 8, 0);
  EXPECT_EQ(a.se, b.se);
  EXPECT_GT(a.se, 0.5);
  EXPECT_LT(a.deviation, 0.1);
}

TEST(Refinement, ExactStartStaysExact) {
  ExperimentConfig cfg = noiseless(small_config());
  cfg.model.n = 300;
  cfg.model.s = 1;
  cfg.model.b0 = 0.004;
  cfg.n_trials = 3;
  cfg.big_c = 400.0;
  const RefinementResult res = refinement_loop(cfg, 2, 0.0);
  for (const auto& traj : res.trajectories) {
    ASSERT_EQ(traj.size(), 2u);
    for (const auto& st : traj) EXPECT_LE(st.se, 1e-8);
  }
}

TEST(Refinement, StageSizesFollowRequiredAlpha) {
  ExperimentConfig cfg = noiseless(small_config());
  cfg.model.n = 300;
  cfg.model.s = 1;
  cfg.model.b0 = 0.004;
  cfg.n_trials = 2;
  const RefinementResult res = refinement_loop(cfg, 3, 0.06);
  ASSERT_EQ(res.stage_alpha.size(), 3u);
  for (int k = 0; k < 3; ++k) {
    const double qk = 0.06 * std::pow(0.3, k);
    EXPECT_EQ(res.stage_alpha[std::size_t(k)], sddn_required_alpha(qk, 1.0, 3, 300, qk / 4, 16.0));
    EXPECT_NEAR(res.trajectories[0][std::size_t(k)].stage_bound, 0.25 * qk, 1e-15);
  }
}

TEST(Refinement, RejectsHeavyOccupancy) {
  ExperimentConfig cfg = noiseless(small_config());
  cfg.model.s = 4;
  cfg.model.b0 = 0.5;
  EXPECT_THROW(refinement_loop(cfg, 2, 0.06), Error);
}

TEST(PerturbedBasis, HasRequestedAngle) {
  Engine rng = make_stream(4, "p");
  const BasisMatrix p = make_random_basis(30, 4, rng);
  EXPECT_NEAR(subspace_error(perturbed_basis(p, 0.05), p), 0.05, 1e-12);
}

TEST(MissingData, InapplicableWhenQReachesOne) {
  ExperimentConfig cfg = small_config();
  cfg.model.n = 20;
  cfg.model.r = 5;
  cfg.model.s = 10;
  cfg.n_trials = 2;
  try {
    missing_data_experiment(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::corollary_inapplicable);
  }
}

TEST(ParallelTrials, PropagatesFirstFailure) {
  auto fn = [](int t) -> int {
    if (t == 7) throw std::runtime_error("seven");
    return t;
  };
  EXPECT_THROW(parallel_trials(20, 4, fn), std::runtime_error);
  const auto ok = parallel_trials(20, 4, [](int t) { return t * t; });
  for (int t = 0; t < 20; ++t) EXPECT_EQ(ok[std::size_t(t)], t * t);
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
}

}  // namespace
}  // namespace corrpca
