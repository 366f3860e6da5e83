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

// Monte Carlo experiments: bound tightness, phase transitions, concentration,
// rank estimation, the adversarial covariance example, the staged refinement
// loop and PCA with missing entries. Every result is a pure function of the
// configuration and its master seed, whatever the worker count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "corrpca/bounds.hpp"
#include "corrpca/errors.hpp"
#include "corrpca/model.hpp"
#include "corrpca/rng.hpp"
#include "corrpca/subspace.hpp"
#include "corrpca/trial.hpp"

namespace corrpca {

enum class RvRule { fixed, equal_r, equal_n };
enum class NoiseBasis { random, identity };

/// Descriptor from which a ModelInstance is drawn at a given (n, r).
struct ModelSpec {
  Index n = 100;
  Index r = 5;
  Distribution signal_distribution = Distribution::bounded_uniform;
  std::vector<double> lambdas{12.0};  // one value (broadcast) or r values
  double eta = 3.0;

  RvRule rv_rule = RvRule::equal_r;
  Index r_v = 0;  // used when rv_rule == fixed; 0 disables uncorrelated noise
  NoiseBasis noise_basis = NoiseBasis::random;
  Distribution noise_distribution = Distribution::bounded_uniform;
  double noise_base = 0.0;  // amplitudes q_i = base - slope * i / r_v
  double noise_slope = 0.0;

  Index s = 0;
  double b0 = 0.05;
  int rho = 1;
  double q = 0.0;

  Index resolved_r_v(Index n_, Index r_) const {
    switch (rv_rule) {
      case RvRule::equal_r: return r_;
      case RvRule::equal_n: return n_;
      case RvRule::fixed: return r_v;
    }
    return r_v;
  }
};

/// Draws the bases of `spec` at (n, r). `draw` selects an independent model
/// draw; experiments use 0 for a shared model and trial + 1 for per-trial draws.
inline ModelInstance instantiate_model(const ModelSpec& spec, std::uint64_t seed, Index n, Index r,
                                       std::uint64_t draw = 0) {
  if (r < 1 || r > n) throw Error(Errc::validation_error, "model: need 1 <= r <= n");
  Engine prng =
      make_stream(seed, "basis-P", {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r), draw});
  SignalModel sig{make_random_basis(n, r, prng), Vector(r), spec.signal_distribution, spec.eta};
  if (spec.lambdas.size() == 1) {
    sig.lambdas.setConstant(spec.lambdas.front());
  } else if (static_cast<Index>(spec.lambdas.size()) == r) {
    for (Index j = 0; j < r; ++j) sig.lambdas(j) = spec.lambdas[static_cast<std::size_t>(j)];
  } else {
    throw Error(Errc::validation_error, "model: lambdas must have one entry or r entries");
  }

  UncorrNoiseModel noise;
  noise.n = n;
  noise.distribution = spec.noise_distribution;
  const Index rv = spec.resolved_r_v(n, r);
  if (rv < 0 || rv > n) throw Error(Errc::validation_error, "model: need 0 <= r_v <= n");
  if (rv > 0 && spec.noise_base > 0.0) {
    noise.scales = linear_scales(rv, spec.noise_base, spec.noise_slope);
    if (spec.noise_basis == NoiseBasis::random) {
      Engine brng =
          make_stream(seed, "basis-B", {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rv), draw});
      noise.basis = make_random_basis(n, rv, brng);
    } else if (rv != n) {
      throw Error(Errc::validation_error, "model: identity noise basis requires r_v = n");
    }
  } else {
    noise.scales = Vector(0);
  }
  const SddnModel sddn{spec.s, spec.b0, spec.rho, spec.q};
  return ModelInstance::make(std::move(sig), std::move(noise), sddn);
}

struct EpsilonRule {
  enum class Kind { factor_1_5, fixed } kind = Kind::factor_1_5;
  double value = 0.0;
};

/// eps = 1.5 (sqrt(b)(2q + q^2) f + (lambda_vPPperp / lambda-) / (1 - (lambda_vrest+ - lambda_vP-) / lambda-)).
inline double factor_epsilon(const DerivedSpectra& s, double q, double b) {
  const double ddn = std::sqrt(b) * (2.0 * q + q * q) * s.f;
  const double excess = (s.lambda_vrest_plus - s.lambda_vP_minus) / s.lambda_minus;
  return 1.5 * (ddn + (s.lambda_vPPperp / s.lambda_minus) / (1.0 - excess));
}

struct ExperimentConfig {
  ModelSpec model;
  std::vector<Index> alpha_grid;
  std::vector<Index> r_grid;
  std::vector<Index> n_grid;
  int n_trials = 100;
  std::uint64_t master_seed = 0;
  double c = 1.0;
  EpsilonRule epsilon_rule;
  Regime regime = Regime::bounded;
  EpsBndForm eps_form = EpsBndForm::theorem;
  Index max_rank = 0;
  int workers = 1;

  // refinement loop
  int stages = 4;
  double q0 = 0.06;
  double big_c = 16.0;

  // adversarial example
  double adversarial_factor = 1.2;

  // draw P and B afresh in every trial instead of once per grid point
  bool redraw_model = false;

  void validate() const {
    if (alpha_grid.empty()) throw Error(Errc::validation_error, "experiment: alpha grid is empty");
    for (Index a : alpha_grid) {
      if (a < 1) throw Error(Errc::validation_error, "experiment: alpha values must be >= 1");
    }
    if (n_trials < 1) throw Error(Errc::validation_error, "experiment: n_trials must be >= 1");
    if (workers < 1) throw Error(Errc::validation_error, "experiment: workers must be >= 1");
    if (!(c > 0.0)) throw Error(Errc::validation_error, "experiment: c must be positive");
    if (model.n < 2) throw Error(Errc::validation_error, "experiment: n must be >= 2");
    if (model.r < 1 || model.r > model.n) throw Error(Errc::validation_error, "experiment: need 1 <= r <= n");
    if (!(model.q >= 0.0 && model.q < 1.0)) throw Error(Errc::validation_error, "experiment: q must lie in [0, 1)");
    if (!(model.b0 > 0.0 && model.b0 <= 1.0)) throw Error(Errc::validation_error, "experiment: b0 must lie in (0, 1]");
    if (model.s < 0 || model.s > model.n) throw Error(Errc::validation_error, "experiment: need 0 <= s <= n");
    if (model.rho < 1) throw Error(Errc::validation_error, "experiment: rho must be >= 1");
    if (model.lambdas.empty()) throw Error(Errc::validation_error, "experiment: lambdas missing");
    if (model.noise_base < 0.0) throw Error(Errc::validation_error, "experiment: noise amplitude must be >= 0");
    if (model.noise_base - model.noise_slope < 0.0) {
      throw Error(Errc::validation_error, "experiment: noise amplitudes must stay non-negative");
    }
    if (model.signal_distribution == Distribution::bounded_uniform && model.eta != 3.0) {
      throw Error(Errc::validation_error, "experiment: uniform coefficients have eta = 3");
    }
    if (epsilon_rule.kind == EpsilonRule::Kind::fixed && !(epsilon_rule.value > 0.0)) {
      throw Error(Errc::validation_error, "experiment: fixed epsilon must be positive");
    }
    if (stages < 1) throw Error(Errc::validation_error, "experiment: stages must be >= 1");
    if (!(q0 >= 0.0 && q0 < 1.0)) throw Error(Errc::validation_error, "experiment: q0 must lie in [0, 1)");
  }
};

/// Runs fn(trial) for trial in [0, count) on `workers` threads; results are
/// stored by trial index.
template <typename Fn>
auto parallel_trials(int count, int workers, Fn fn) -> std::vector<decltype(fn(0))> {
  std::vector<decltype(fn(0))> out(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (int t = next++; t < count; t = next++) {
      try {
        out[static_cast<std::size_t>(t)] = fn(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  const int threads = std::max(1, std::min(workers, count));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

struct GridPoint {
  Index n = 0;
  Index r = 0;
  Index alpha = 0;
};

inline std::uint64_t grid_coordinate(Index n, Index r) {
  return (static_cast<std::uint64_t>(n) << 24) | static_cast<std::uint64_t>(r);
}

inline std::vector<Index> sorted_grid(std::vector<Index> g) {
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

/// Model used by `trial` at (n, r).
inline ModelInstance model_for(const ExperimentConfig& cfg, Index n, Index r, int trial) {
  const std::uint64_t draw = cfg.redraw_model ? static_cast<std::uint64_t>(trial) + 1 : 0;
  return instantiate_model(cfg.model, cfg.master_seed, n, r, draw);
}

/// The model quantities the bound evaluators need, without the n x n matrices.
struct ModelSummary {
  DerivedSpectra spectra;
  Index n = 0;
  Index r = 0;
  Index r_v = 0;
  double eta = 3.0;
  double q = 0.0;
  double mu = 1.0;
  Vector subspace_spectrum;  // eigenvalues of Lambda + P' Sigma_v P

  static ModelSummary of(const ModelInstance& m) {
    return {m.spectra, m.n(), m.r(), m.noise.r_v(), m.signal.eta, m.sddn.q, incoherence(m.signal.P),
            signal_subspace_spectrum(m.signal, m.sigma_v)};
  }
};

inline BoundInputs bound_inputs(const ExperimentConfig& cfg, const ModelSummary& m, Index alpha, double b, double q) {
  BoundInputs in;
  in.spectra = m.spectra;
  in.r = m.r;
  in.r_v = m.r_v;
  in.n = m.n;
  in.eta = m.eta;
  in.q = q;
  in.b = b;
  in.alpha = alpha;
  in.c = cfg.c;
  in.regime = cfg.regime;
  in.form = cfg.eps_form;
  return in;
}

inline BoundInputs bound_inputs(const ExperimentConfig& cfg, const ModelInstance& m, Index alpha, double b, double q) {
  return bound_inputs(cfg, ModelSummary::of(m), alpha, b, q);
}

inline double realized_b(const ModelInstance& m, Index alpha) {
  return detail::realized_occupancy(SupportSchedule(m.n(), m.sddn, alpha), alpha);
}

/// One trial at one grid point, with deviation norms.
inline TrialResult run_trial(const ExperimentConfig& cfg, const GridPoint& point, int trial) {
  cfg.validate();
  const ModelInstance m = model_for(cfg, point.n, point.r, trial);
  TrialSetup setup;
  setup.model = &m;
  setup.max_rank = cfg.max_rank;
  setup.deviations = true;
  const TrialKey key{cfg.master_seed, static_cast<std::uint64_t>(trial), grid_coordinate(point.n, point.r), 0};
  return run_trial(setup, point.alpha, key);
}

struct GridRow {
  Index axis = 0;  // r or n for phase transitions, 0 otherwise
  Index alpha = 0;
  double mean_se = 0.0;
  double max_se = 0.0;
  // smallest per-trial bound; empty when some trial's feasibility condition fails
  std::optional<double> predicted_bound;
  double success_probability = 0.0;
  double epsilon = 0.0;  // mean over trials of the per-trial threshold
  double realized_b = 0.0;
};

struct GridResult {
  std::string axis_name;
  std::vector<GridRow> rows;
};

struct TrialSweep {
  ModelSummary model;
  std::vector<TrialResult> results;  // one per alpha
};

namespace detail {

inline std::vector<TrialSweep> sweep_trials(const ExperimentConfig& cfg, Index n, Index r,
                                            const std::vector<Index>& alphas, Corruption corruption,
                                            bool deviations) {
  const std::uint64_t grid = grid_coordinate(n, r);
  return parallel_trials(cfg.n_trials, cfg.workers, [&](int trial) {
    const ModelInstance m = model_for(cfg, n, r, trial);
    TrialSetup setup;
    setup.model = &m;
    setup.corruption = corruption;
    setup.max_rank = cfg.max_rank;
    setup.deviations = deviations;
    return TrialSweep{ModelSummary::of(m),
                      run_trial_sweep(setup, alphas, TrialKey{cfg.master_seed, static_cast<std::uint64_t>(trial), grid, 0})};
  });
}

// Aggregates column k; eps(trial) is the success threshold, bound(trial) the
// per-trial SE bound (empty when infeasible).
template <typename Eps, typename Bound>
GridRow summarize(const std::vector<TrialSweep>& trials, std::size_t k, Eps eps, Bound bound) {
  GridRow row;
  double sum = 0.0;
  double eps_sum = 0.0;
  int hits = 0;
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& t : trials) {
    const double se = t.results[k].se;
    const double e = eps(t);
    sum += se;
    eps_sum += e;
    row.max_se = std::max(row.max_se, se);
    if (se <= e) ++hits;
    const std::optional<double> b = bound(t);
    lowest = std::min(lowest, b ? *b : std::numeric_limits<double>::infinity());
  }
  const auto count = static_cast<double>(trials.size());
  row.alpha = trials.front().results[k].alpha;
  row.realized_b = trials.front().results[k].realized_b;
  row.mean_se = sum / count;
  row.success_probability = hits / count;
  row.epsilon = eps_sum / count;
  if (std::isfinite(lowest)) row.predicted_bound = lowest;
  return row;
}

inline std::optional<double> no_bound(const TrialSweep&) { return std::nullopt; }

}  // namespace detail

/// Mean and max SE per alpha with the Theorem-1 bound evaluated at the realized occupancy.
inline GridResult bound_tightness(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<Index> alphas = sorted_grid(cfg.alpha_grid);
  const auto trials = detail::sweep_trials(cfg, cfg.model.n, cfg.model.r, alphas, Corruption::sddn, false);
  GridResult out{"alpha", {}};
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    const double b = trials.front().results[k].realized_b;
    out.rows.push_back(detail::summarize(
        trials, k, [](const TrialSweep&) { return 0.0; },
        [&](const TrialSweep& t) {
          return theorem1_bound(bound_inputs(cfg, t.model, alphas[k], b, t.model.q)).se_bound;
        }));
  }
  return out;
}

/// Success probability P(SE <= eps) over (r or n) x alpha.
inline GridResult phase_transition(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.r_grid.empty() == cfg.n_grid.empty()) {
    throw Error(Errc::validation_error, "phase transition needs exactly one of r_grid / n_grid");
  }
  const bool by_r = !cfg.r_grid.empty();
  const std::vector<Index> axis = by_r ? cfg.r_grid : cfg.n_grid;
  const std::vector<Index> alphas = sorted_grid(cfg.alpha_grid);
  auto eps = [&](const TrialSweep& t) {
    return cfg.epsilon_rule.kind == EpsilonRule::Kind::fixed ? cfg.epsilon_rule.value
                                                             : factor_epsilon(t.model.spectra, t.model.q, cfg.model.b0);
  };
  GridResult out{by_r ? "r" : "n", {}};
  for (Index v : axis) {
    const Index n = by_r ? cfg.model.n : v;
    const Index r = by_r ? v : cfg.model.r;
    const auto trials = detail::sweep_trials(cfg, n, r, alphas, Corruption::sddn, false);
    for (std::size_t k = 0; k < alphas.size(); ++k) {
      GridRow row = detail::summarize(trials, k, eps, detail::no_bound);
      row.axis = v;
      out.rows.push_back(row);
    }
  }
  return out;
}

/// Smallest alpha at which the success probability for `axis` reaches `level`.
inline std::optional<Index> required_alpha(const GridResult& g, Index axis, double level = 0.9) {
  std::optional<Index> best;
  for (const auto& row : g.rows) {
    if (row.axis == axis && row.success_probability >= level && (!best || row.alpha < *best)) best = row.alpha;
  }
  return best;
}

struct ConcentrationRow {
  Index alpha = 0;
  DeviationTerm term = DeviationTerm::aa;
  double empirical_median = 0.0;
  double lemma_bound = 0.0;
};

/// Median spectral-norm deviation of the five averaged outer products against
/// their expectations (conditional on the dependency matrices for the w terms).
inline std::vector<ConcentrationRow> concentration_check(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.regime != Regime::bounded) {
    throw Error(Errc::validation_error, "concentration check is defined for the bounded regime");
  }
  const std::vector<Index> alphas = sorted_grid(cfg.alpha_grid);
  const auto trials = detail::sweep_trials(cfg, cfg.model.n, cfg.model.r, alphas, Corruption::sddn, true);
  std::vector<ConcentrationRow> out;
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    std::array<double, 5> bounds{};
    for (const auto& t : trials) {
      const auto b = deviation_bounds(bound_inputs(cfg, t.model, alphas[k], t.results[k].realized_b, t.model.q));
      for (std::size_t i = 0; i < bounds.size(); ++i) bounds[i] = std::max(bounds[i], b[i]);
    }
    for (std::size_t term = 0; term < kDeviationTerms.size(); ++term) {
      std::vector<double> vals;
      vals.reserve(trials.size());
      for (const auto& t : trials) vals.push_back((*t.results[k].deviations)[term]);
      out.push_back({alphas[k], kDeviationTerms[term], median(std::move(vals)), bounds[term]});
    }
  }
  return out;
}

struct RankRow {
  Index alpha = 0;
  double delta = 0.0;          // largest over trials
  bool gap_condition = false;  // holds in every trial
  double threshold_success = 0.0;
  double eigengap_success = 0.0;
};

/// Fraction of trials in which each rank estimator returns the true r.
inline std::vector<RankRow> rank_estimation(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<Index> alphas = sorted_grid(cfg.alpha_grid);
  const auto trials = detail::sweep_trials(cfg, cfg.model.n, cfg.model.r, alphas, Corruption::sddn, false);
  std::vector<RankRow> out;
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    RankRow row;
    row.alpha = alphas[k];
    row.gap_condition = true;
    int thr = 0;
    int gap = 0;
    for (const auto& t : trials) {
      const double delta =
          delta_rank(bound_inputs(cfg, t.model, alphas[k], t.results[k].realized_b, t.model.q));
      row.delta = std::max(row.delta, delta);
      row.gap_condition = row.gap_condition && eigengap_condition(t.model.subspace_spectrum, delta, t.model.spectra);
      thr += t.results[k].r_hat_threshold == t.model.r;
      gap += t.results[k].r_hat_gap == t.model.r;
    }
    row.threshold_success = thr / static_cast<double>(trials.size());
    row.eigengap_success = gap / static_cast<double>(trials.size());
    out.push_back(row);
  }
  return out;
}

/// Signal plus noise of power factor * lambda- along the first direction orthogonal to span(P).
inline ModelInstance adversarial_model(Index n, Index r, const std::vector<double>& lambdas, std::uint64_t seed,
                                       double factor = 1.2, std::uint64_t draw = 0) {
  if (r < 2 || static_cast<Index>(lambdas.size()) != r) {
    throw Error(Errc::invalid_example, "adversarial example needs r >= 2 and one lambda per direction");
  }
  if (r >= n) throw Error(Errc::invalid_example, "adversarial example needs r < n");
  Vector lam(r);
  for (Index j = 0; j < r; ++j) lam(j) = lambdas[static_cast<std::size_t>(j)];
  const double lmin = lam.minCoeff();
  if (!(lam(r - 2) >= 1.1 * lmin)) {
    throw Error(Errc::invalid_example, "adversarial example needs lambda_{r-1} >= 1.1 lambda-");
  }
  Engine prng =
      make_stream(seed, "basis-P", {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r), draw});
  BasisMatrix p = make_random_basis(n, r, prng);
  const Matrix perp = orthogonal_complement(p).matrix().leftCols(1);
  UncorrNoiseModel noise;
  noise.n = n;
  noise.basis = BasisMatrix(perp);
  noise.scales = Vector::Constant(1, std::sqrt(factor * lmin));
  noise.distribution = Distribution::gaussian;
  SignalModel sig{std::move(p), lam, Distribution::gaussian, 1.0};
  return ModelInstance::make(std::move(sig), std::move(noise), SddnModel{0, 1.0, 1, 0.0});
}

struct AdversarialResult {
  double se = 0.0;
  double deviation = 0.0;  // ||D - E[D]|| / lambda-
};

/// One trial of the adversarial example: Gaussian data, PCA.
inline AdversarialResult adversarial_sigma(Index n, Index r, Index alpha, const std::vector<double>& lambdas,
                                           std::uint64_t seed, int trial, double factor = 1.2) {
  const auto t = static_cast<std::uint64_t>(trial);
  const ModelInstance m = adversarial_model(n, r, lambdas, seed, factor);
  TrialSetup setup;
  setup.model = &m;
  setup.population_deviation = true;
  const TrialResult res = run_trial(setup, alpha, TrialKey{seed, t, grid_coordinate(n, r), 0});
  return {res.se, *res.population_deviation};
}

/// SE of the top-r eigenspace of E[D] = P Lambda P' + Sigma_v.
inline double population_se(const ModelInstance& m) {
  const Matrix& p = m.signal.P.matrix();
  const Matrix ed = p * m.signal.lambdas.asDiagonal() * p.transpose() + m.sigma_v;
  return subspace_error(top_r_eigvecs(Matrix(0.5 * (ed + ed.transpose())), m.r()), m.signal.P);
}

struct RefinementStage {
  int stage = 0;
  Index alpha = 0;
  double se = 0.0;
  double stage_bound = 0.0;  // 0.25 q0 0.3^(k-1)
  double realized_b = 0.0;
  std::optional<double> sddn_prediction;  // SDDN-corollary bound with q = 1.2 SE(Phat_{k-1}, P)
};

struct RefinementResult {
  std::vector<std::vector<RefinementStage>> trajectories;  // [trial][stage]
  std::vector<Index> stage_alpha;
};

/// Initial estimate at principal angle asin(sin_theta) from span(P) in every direction.
inline BasisMatrix perturbed_basis(const BasisMatrix& p, double sin_theta) {
  if (sin_theta == 0.0) return p;
  if (2 * p.r() > p.n()) throw Error(Errc::validation_error, "perturbed basis needs 2r <= n");
  const Matrix q = orthogonal_complement(p).matrix().leftCols(p.r());
  const double cos_theta = std::sqrt(1.0 - sin_theta * sin_theta);
  return orthonormalize(Matrix(cos_theta * p.matrix() + sin_theta * q));
}

/// Staged PCA in which stage k corrupts the support entries by the
/// projection residual of the previous estimate; Phat_0 sits at SE q0 / 1.2.
inline RefinementResult refinement_loop(const ExperimentConfig& cfg, int stages, double q0) {
  cfg.validate();
  if (stages < 1) throw Error(Errc::validation_error, "refinement needs K >= 1");
  if (!(q0 >= 0.0 && q0 < 1.0)) throw Error(Errc::validation_error, "refinement needs q0 in [0, 1)");
  const Index n = cfg.model.n;
  const Index r = cfg.model.r;
  if (cfg.model.s < 1) throw Error(Errc::validation_error, "refinement needs s >= 1");
  const ModelInstance probe = model_for(cfg, n, r, 0);
  const double f = probe.spectra.f;

  RefinementResult out;
  std::vector<double> q_prev(static_cast<std::size_t>(stages));
  for (int k = 0; k < stages; ++k) {
    const double qk = q0 * std::pow(0.3, k);
    q_prev[static_cast<std::size_t>(k)] = qk;
    const double eps = qk > 0.0 ? qk / 4.0 : std::numeric_limits<double>::infinity();
    out.stage_alpha.push_back(sddn_required_alpha(qk, f, r, n, eps, cfg.big_c));
    const double b = realized_b(probe, out.stage_alpha.back());
    if (!(3.0 * std::sqrt(b) * f < 0.2)) {
      throw Error(Errc::validation_error, "refinement needs 3 sqrt(b) f < 0.2");
    }
  }

  const std::uint64_t grid = grid_coordinate(n, r);
  out.trajectories = parallel_trials(cfg.n_trials, cfg.workers, [&](int trial) {
    const ModelInstance m = model_for(cfg, n, r, trial);
    const ModelSummary summary = ModelSummary::of(m);
    std::vector<RefinementStage> traj;
    BasisMatrix prev = perturbed_basis(m.signal.P, q0 / 1.2);
    for (int k = 0; k < stages; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      TrialSetup setup;
      setup.model = &m;
      setup.corruption = Corruption::residual;
      setup.previous_estimate = &prev;
      setup.max_rank = cfg.max_rank;
      setup.keep_estimate = true;
      TrialResult res = run_trial(setup, out.stage_alpha[ku],
                                  TrialKey{cfg.master_seed, static_cast<std::uint64_t>(trial), grid,
                                           static_cast<std::uint64_t>(k + 1)});
      RefinementStage st;
      st.stage = k + 1;
      st.alpha = out.stage_alpha[ku];
      st.se = res.se;
      st.stage_bound = 0.25 * q_prev[ku];
      st.realized_b = res.realized_b;
      const double q_eff = 1.2 * subspace_error(prev, m.signal.P);
      if (q_eff < 1.0) {
        st.sddn_prediction = sddn_bound(bound_inputs(cfg, summary, st.alpha, st.realized_b, q_eff)).se_bound;
      }
      traj.push_back(st);
      prev = std::move(*res.estimate);
    }
    return traj;
  });
  return out;
}

/// PCA from data whose support entries are zeroed, against the missing-data
/// corollary with q = missing_q(mu) of each trial's basis.
inline GridResult missing_data_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<Index> alphas = sorted_grid(cfg.alpha_grid);
  const auto trials = detail::sweep_trials(cfg, cfg.model.n, cfg.model.r, alphas, Corruption::missing, false);
  std::vector<double> q(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const ModelSummary& m = trials[i].model;
    q[i] = missing_q(m.mu, m.r, cfg.model.s, m.n);
  }
  GridResult out{"alpha", {}};
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    const double b = trials.front().results[k].realized_b;
    out.rows.push_back(detail::summarize(
        trials, k, [](const TrialSweep&) { return 0.0; },
        [&](const TrialSweep& t) {
          const auto i = static_cast<std::size_t>(&t - trials.data());
          return sddn_bound(bound_inputs(cfg, t.model, alphas[k], b, q[i])).se_bound;
        }));
  }
  return out;
}

// ---- CSV -------------------------------------------------------------------

inline std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_bound(const std::optional<double>& v) {
  return v ? format_real(*v) : std::string("inf");
}

inline void write_bound_tightness_csv(std::ostream& os, const GridResult& g) {
  os << "alpha,mean_se,max_se,bound\n";
  for (const auto& r : g.rows) {
    os << r.alpha << ',' << format_real(r.mean_se) << ',' << format_real(r.max_se) << ','
       << format_bound(r.predicted_bound) << '\n';
  }
}

inline void write_phase_transition_csv(std::ostream& os, const GridResult& g) {
  os << g.axis_name << ",alpha,probability\n";
  for (const auto& r : g.rows) os << r.axis << ',' << r.alpha << ',' << format_real(r.success_probability) << '\n';
}

inline void write_concentration_csv(std::ostream& os, const std::vector<ConcentrationRow>& rows) {
  os << "alpha,term_name,empirical_median,lemma_bound\n";
  for (const auto& r : rows) {
    os << r.alpha << ',' << to_string(r.term) << ',' << format_real(r.empirical_median) << ','
       << format_real(r.lemma_bound) << '\n';
  }
}

inline void write_rank_csv(std::ostream& os, const std::vector<RankRow>& rows) {
  os << "alpha,delta,gap_condition,threshold_success,eigengap_success\n";
  for (const auto& r : rows) {
    os << r.alpha << ',' << format_real(r.delta) << ',' << (r.gap_condition ? 1 : 0) << ','
       << format_real(r.threshold_success) << ',' << format_real(r.eigengap_success) << '\n';
  }
}

inline void write_refinement_csv(std::ostream& os, const RefinementResult& res) {
  os << "stage,se,stage_bound\n";
  for (const auto& traj : res.trajectories) {
    for (const auto& st : traj) os << st.stage << ',' << format_real(st.se) << ',' << format_real(st.stage_bound) << '\n';
  }
}

inline void write_adversarial_csv(std::ostream& os, const std::vector<AdversarialResult>& rows) {
  os << "trial,se,deviation\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << i << ',' << format_real(rows[i].se) << ',' << format_real(rows[i].deviation) << '\n';
  }
}

}  // namespace corrpca
