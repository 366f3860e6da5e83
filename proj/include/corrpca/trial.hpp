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

// Streaming Monte Carlo trial engine.
//
// A trial draws columns t = 0, 1, 2, ... from per-purpose random streams
// (signal, uncorrelated noise, dependency matrices), so the first alpha
// columns are the same whatever the largest alpha requested. One pass over
// the columns therefore evaluates PCA at every alpha of a grid. Shared sums
// are accumulated over fixed-size blocks; a grid alpha that falls inside a
// block gets a side partial sum, which keeps the result for a given alpha
// independent of the other grid points.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "corrpca/bounds.hpp"
#include "corrpca/errors.hpp"
#include "corrpca/estimator.hpp"
#include "corrpca/model.hpp"
#include "corrpca/rng.hpp"
#include "corrpca/subspace.hpp"

namespace corrpca {

/// A fully instantiated generative model: random bases drawn, covariances known.
struct ModelInstance {
  SignalModel signal;
  UncorrNoiseModel noise;
  SddnModel sddn;
  Matrix sigma_v;
  DerivedSpectra spectra;

  Index n() const { return signal.n(); }
  Index r() const { return signal.r(); }

  static ModelInstance make(SignalModel sig, UncorrNoiseModel noise, SddnModel sddn) {
    sig.validate();
    noise.validate();
    sddn.validate(sig.n());
    if (noise.n != sig.n()) throw Error(Errc::dimension_mismatch, "signal and noise disagree on n");
    Matrix cov = noise.covariance();
    DerivedSpectra spectra = derived_spectra(sig, cov);
    return ModelInstance{std::move(sig), std::move(noise), sddn, std::move(cov), spectra};
  }
};

/// How the sparse corruption w_t is formed on the support T_t.
enum class Corruption {
  sddn,      // w_t = I_T M_{1,t} l_t with fresh |N(0,1)| dependency matrices
  missing,   // w_t = -I_T I_T' (l_t + v_t): entries on T_t are zeroed
  residual,  // w_t = I_T B_T^{-1} I_T' (I - Phat Phat') l_t, B_T = I_T' (I - Phat Phat') I_T
};

struct TrialSetup {
  const ModelInstance* model = nullptr;
  Corruption corruption = Corruption::sddn;
  const BasisMatrix* previous_estimate = nullptr;  // residual corruption only
  Index max_rank = 0;                              // eigen-gap search range; 0 -> floor(n/2)
  bool deviations = false;                         // five concentration deviation norms
  bool population_deviation = false;               // ||D - (P Lambda P' + Sigma_v)|| / lambda_minus
  bool keep_estimate = false;                      // return Phat
};

/// Identifies the random streams of one trial. `grid` is the non-alpha grid
/// coordinate (e.g. r or n); alpha is deliberately not part of the key.
struct TrialKey {
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;
  std::uint64_t grid = 0;
  std::uint64_t stage = 0;
};

struct TrialResult {
  Index alpha = 0;
  double se = 0.0;
  Index r_hat_threshold = 0;
  Index r_hat_gap = 0;
  double realized_b = 0.0;
  std::optional<std::array<double, 5>> deviations;  // order of kDeviationTerms
  std::optional<double> population_deviation;
  std::optional<BasisMatrix> estimate;
};

namespace detail {

inline constexpr Index kBlock = 512;

struct SharedSums {
  Matrix xx;  // lower triangle of sum x x'
  Matrix aa;  // lower triangle of sum a a'
  Matrix vv;  // lower triangle of sum v v'
  Matrix lv;  // sum l v'
};

struct PerAlphaSums {
  Matrix cross;  // sum x w'
  Matrix ww;     // sum w w'
  Matrix lw;     // sum l w'
  Matrix mp;     // sum I_T M_{1,t} P   (n x r)
  Matrix mpm;    // sum I_T M_{1,t} P Lambda P' M_{1,t}' I_T'
};

struct BlockData {
  Matrix a;   // r x B
  Matrix l;   // n x B
  Matrix v;   // n x B (empty when there is no uncorrelated noise)
  Matrix x;   // l + v
  Matrix mp;  // (s*r) x B, column t holds vec(M_{1,t} P) for sddn corruption
  Matrix u;   // s x B, values M_{1,t} l_t for sddn corruption
};

inline void add_shared(SharedSums& acc, const BlockData& blk, Index cols, bool deviations) {
  if (cols <= 0) return;
  acc.xx.selfadjointView<Eigen::Lower>().rankUpdate(blk.x.leftCols(cols));
  if (!deviations) return;
  acc.aa.selfadjointView<Eigen::Lower>().rankUpdate(blk.a.leftCols(cols));
  if (blk.v.size() > 0) {
    acc.vv.selfadjointView<Eigen::Lower>().rankUpdate(blk.v.leftCols(cols));
    acc.lv.noalias() += blk.l.leftCols(cols) * blk.v.leftCols(cols).transpose();
  }
}

inline Matrix symmetrized(const Matrix& lower) {
  Matrix m = lower;
  m.triangularView<Eigen::StrictlyUpper>() = m.transpose();
  return m;
}

class TrialStreams {
 public:
  TrialStreams(const TrialKey& k)
      : signal_(make_stream(k.seed, "signal", {k.trial, k.grid, k.stage})),
        noise_(make_stream(k.seed, "noise", {k.trial, k.grid, k.stage})),
        dependency_(make_stream(k.seed, "dependency", {k.trial, k.grid, k.stage})) {}

  void fill(const ModelInstance& m, Corruption corruption, BlockData& blk) {
    const Index cols = blk.a.cols();
    const Index r = m.r();
    for (Index t = 0; t < cols; ++t) draw_coefficients(m.signal, signal_, blk.a.col(t));
    blk.l.noalias() = m.signal.P.matrix() * blk.a;
    if (m.noise.r_v() > 0) {
      Matrix c(m.noise.r_v(), cols);
      for (Index t = 0; t < cols; ++t) draw_noise_coordinates(m.noise, noise_, c.col(t));
      if (m.noise.basis) {
        blk.v.noalias() = m.noise.basis->matrix() * c;
      } else {
        blk.v = std::move(c);
      }
      blk.x = blk.l + blk.v;
    } else {
      blk.x = blk.l;
    }
    if (corruption != Corruption::sddn || m.sddn.s == 0 || m.sddn.q == 0.0) return;

    const Index s = m.sddn.s;
    const Matrix& p = m.signal.P.matrix();
    Matrix ms(s, m.n());
    NormalDist normal;
    for (Index t = 0; t < cols; ++t) {
      Matrix msp;
      double norm = 0.0;
      do {
        for (Index j = 0; j < ms.cols(); ++j) {
          for (Index i = 0; i < s; ++i) ms(i, j) = std::abs(normal(dependency_));
        }
        msp.noalias() = ms * p;
        norm = spectral_norm(msp);
      } while (!(norm > 0.0));
      msp *= m.sddn.q / norm;
      blk.mp.col(t) = Eigen::Map<const Vector>(msp.data(), s * r);
      blk.u.col(t).noalias() = msp * blk.a.col(t);
    }
  }

 private:
  Engine signal_;
  Engine noise_;
  Engine dependency_;
};

/// Sparse corruption values on the support for frames [t0, t0 + len) of one
/// constant-support segment, as an s x len matrix.
class CorruptionValues {
 public:
  CorruptionValues(const TrialSetup& setup) : setup_(setup) {
    if (setup.corruption == Corruption::residual) {
      if (!setup.previous_estimate) {
        throw Error(Errc::validation_error, "residual corruption needs a previous estimate");
      }
      const Matrix& ph = setup.previous_estimate->matrix();
      proj_ = Matrix::Identity(ph.rows(), ph.rows()) - ph * ph.transpose();
    }
  }

  Matrix values(const BlockData& blk, const SupportSchedule& sched, Index block_id, Index off, Index len) {
    const Index s = sched.s();
    switch (setup_.corruption) {
      case Corruption::sddn:
        return blk.u.middleCols(off, len);
      case Corruption::missing: {
        Matrix u(s, len);
        for (Index j = 0; j < s; ++j) u.row(j) = -blk.x.row(sched.row(block_id, j)).segment(off, len);
        return u;
      }
      case Corruption::residual:
        return operator_for(sched, block_id) * blk.l.middleCols(off, len);
    }
    return {};
  }

 private:
  // B_T^{-1} I_T' (I - Phat Phat'), cached for the most recent support block.
  const Matrix& operator_for(const SupportSchedule& sched, Index block_id) {
    if (cached_block_ == block_id && cached_dwell_ == sched.dwell()) return cached_;
    const Index s = sched.s();
    Matrix rows(s, proj_.cols());
    Matrix bt(s, s);
    for (Index i = 0; i < s; ++i) {
      rows.row(i) = proj_.row(sched.row(block_id, i));
      for (Index j = 0; j < s; ++j) bt(i, j) = proj_(sched.row(block_id, i), sched.row(block_id, j));
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> es(bt, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e8) {
      throw Error(Errc::support_degenerate, "B_t is singular or ill-conditioned on this support");
    }
    cached_ = bt.ldlt().solve(rows);
    cached_block_ = block_id;
    cached_dwell_ = sched.dwell();
    return cached_;
  }

  const TrialSetup& setup_;
  Matrix proj_;
  Matrix cached_;
  Index cached_block_ = -1;
  Index cached_dwell_ = -1;
};

inline double realized_occupancy(const SupportSchedule& sched, Index alpha) {
  if (sched.s() == 0) return 0.0;
  std::vector<Index> count(static_cast<std::size_t>(sched.n()), 0);
  for (Index k = 0; k * sched.dwell() < alpha; ++k) {
    const Index frames = std::min(sched.dwell(), alpha - k * sched.dwell());
    for (Index j = 0; j < sched.s(); ++j) count[static_cast<std::size_t>(sched.row(k, j))] += frames;
  }
  return static_cast<double>(*std::max_element(count.begin(), count.end())) / static_cast<double>(alpha);
}

}  // namespace detail

/// Runs one trial at every alpha in `alphas` (strictly increasing).
inline std::vector<TrialResult> run_trial_sweep(const TrialSetup& setup, std::span<const Index> alphas,
                                                const TrialKey& key) {
  if (!setup.model) throw Error(Errc::validation_error, "trial setup without a model");
  if (alphas.empty()) throw Error(Errc::empty_batch, "empty alpha grid");
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    if (alphas[k] < 1 || (k > 0 && alphas[k] <= alphas[k - 1])) {
      throw Error(Errc::validation_error, "alpha grid must be positive and strictly increasing");
    }
  }
  const ModelInstance& m = *setup.model;
  const Index n = m.n();
  const Index r = m.r();
  const Index s = m.sddn.s;
  const Index max_rank = setup.max_rank > 0 ? setup.max_rank : default_max_rank(n);
  const bool dev = setup.deviations;
  if (dev && setup.corruption != Corruption::sddn) {
    throw Error(Errc::validation_error, "deviation norms are defined for sddn corruption only");
  }
  const bool has_w = s > 0 && !(setup.corruption == Corruption::sddn && m.sddn.q == 0.0);
  const std::size_t na = alphas.size();

  std::vector<SupportSchedule> sched;
  sched.reserve(na);
  for (Index a : alphas) sched.emplace_back(n, m.sddn, a);

  detail::SharedSums shared{Matrix::Zero(n, n), Matrix::Zero(r, r), Matrix::Zero(n, n), Matrix::Zero(n, n)};
  std::vector<detail::PerAlphaSums> per(na);
  if (has_w) {
    for (auto& p : per) {
      p.cross = Matrix::Zero(n, n);
      p.ww = Matrix::Zero(n, n);
      if (dev) {
        p.lw = Matrix::Zero(n, n);
        p.mp = Matrix::Zero(n, r);
        p.mpm = Matrix::Zero(n, n);
      }
    }
  }
  std::vector<std::optional<detail::SharedSums>> at_alpha(na);

  detail::TrialStreams streams(key);
  detail::CorruptionValues corruption(setup);
  detail::BlockData blk;
  const Matrix lambda = m.signal.lambdas.asDiagonal();

  const Index alpha_max = alphas.back();
  for (Index b0 = 0; b0 < alpha_max; b0 += detail::kBlock) {
    const Index b1 = b0 + detail::kBlock;
    blk.a.resize(r, detail::kBlock);
    if (setup.corruption == Corruption::sddn && has_w) {
      blk.mp.resize(s * r, detail::kBlock);
      blk.u.resize(s, detail::kBlock);
    }
    streams.fill(m, setup.corruption, blk);

    // alpha-dependent sparse-corruption sums, segment by constant support
    if (has_w) {
      for (std::size_t k = 0; k < na; ++k) {
        const Index end = std::min(b1, alphas[k]);
        const SupportSchedule& sc = sched[k];
        auto& acc = per[k];
        for (Index t = b0; t < end;) {
          const Index block_id = sc.block(t);
          const Index seg_end = std::min(end, (block_id + 1) * sc.dwell());
          const Index off = t - b0;
          const Index len = seg_end - t;
          const Matrix u = corruption.values(blk, sc, block_id, off, len);
          const auto xs = blk.x.middleCols(off, len);
          for (Index i = 0; i < s; ++i) {
            const Index ri = sc.row(block_id, i);
            acc.cross.col(ri).noalias() += xs * u.row(i).transpose();
            if (dev) acc.lw.col(ri).noalias() += blk.l.middleCols(off, len) * u.row(i).transpose();
            for (Index j = 0; j < s; ++j) acc.ww(ri, sc.row(block_id, j)) += u.row(i).dot(u.row(j));
          }
          if (dev) {
            for (Index c = off; c < off + len; ++c) {
              const Eigen::Map<const Matrix> mp(blk.mp.col(c).data(), s, r);
              const Matrix mpm = mp * lambda * mp.transpose();
              for (Index i = 0; i < s; ++i) {
                const Index ri = sc.row(block_id, i);
                acc.mp.row(ri) += mp.row(i);
                for (Index j = 0; j < s; ++j) acc.mpm(ri, sc.row(block_id, j)) += mpm(i, j);
              }
            }
          }
          t = seg_end;
        }
      }
    }

    // side partials for grid points strictly inside this block
    for (std::size_t k = 0; k < na; ++k) {
      if (alphas[k] > b0 && alphas[k] < b1) {
        detail::SharedSums part = shared;
        detail::add_shared(part, blk, alphas[k] - b0, dev);
        at_alpha[k] = std::move(part);
      }
    }
    detail::add_shared(shared, blk, detail::kBlock, dev);
    for (std::size_t k = 0; k < na; ++k) {
      if (alphas[k] == b1) at_alpha[k] = shared;
    }
  }

  std::vector<TrialResult> out;
  out.reserve(na);
  const Matrix& p = m.signal.P.matrix();
  for (std::size_t k = 0; k < na; ++k) {
    const double inv = 1.0 / static_cast<double>(alphas[k]);
    const detail::SharedSums& sh = *at_alpha[k];
    Matrix d = detail::symmetrized(sh.xx);
    if (has_w) d += per[k].cross + per[k].cross.transpose() + per[k].ww;
    d *= inv;

    const SymmetricEig eig = symmetric_eig(d);
    BasisMatrix phat = top_r_eigvecs(eig, r);
    TrialResult res;
    res.alpha = alphas[k];
    res.se = subspace_error(phat, m.signal.P);
    res.r_hat_threshold = estimate_rank_threshold(eig.values, m.signal.lambda_minus());
    res.r_hat_gap = n > 1 ? estimate_rank_eigengap(eig.values, std::min(max_rank, n - 1)) : 1;
    res.realized_b = detail::realized_occupancy(sched[k], alphas[k]);
    if (setup.population_deviation) {
      const Matrix expected = p * lambda * p.transpose() + m.sigma_v;
      res.population_deviation = spectral_norm(d - expected) / m.signal.lambda_minus();
    }
    if (dev) {
      std::array<double, 5> devs{};
      devs[0] = spectral_norm(detail::symmetrized(sh.aa) * inv - lambda);
      if (has_w) {
        devs[1] = spectral_norm((per[k].lw - p * lambda * per[k].mp.transpose()) * inv);
        devs[2] = spectral_norm((per[k].ww - per[k].mpm) * inv);
      }
      if (m.noise.r_v() > 0) {
        devs[3] = spectral_norm(sh.lv * inv);
        devs[4] = spectral_norm(detail::symmetrized(sh.vv) * inv - m.sigma_v);
      }
      res.deviations = devs;
    }
    if (setup.keep_estimate) res.estimate = std::move(phat);
    out.push_back(std::move(res));
  }
  return out;
}

inline TrialResult run_trial(const TrialSetup& setup, Index alpha, const TrialKey& key) {
  const Index a[] = {alpha};
  return std::move(run_trial_sweep(setup, a, key).front());
}

/// Materializes the batch y_t = l_t + w_t + v_t that run_trial analyses,
/// column by column through the public model operations. Slow; meant for
/// cross-checking the streaming engine.
inline DataBatch generate_batch(const TrialSetup& setup, Index alpha, const TrialKey& key) {
  const ModelInstance& m = *setup.model;
  const Index n = m.n();
  detail::TrialStreams streams(key);
  detail::BlockData blk;
  const Index blocks = (alpha + detail::kBlock - 1) / detail::kBlock;
  const bool has_w = m.sddn.s > 0 && !(setup.corruption == Corruption::sddn && m.sddn.q == 0.0);
  const SupportSchedule sched(n, m.sddn, alpha);
  Matrix y(n, alpha);
  Matrix proj;
  if (setup.corruption == Corruption::residual) {
    const Matrix& ph = setup.previous_estimate->matrix();
    proj = Matrix::Identity(n, n) - ph * ph.transpose();
  }
  for (Index bi = 0; bi < blocks; ++bi) {
    blk.a.resize(m.r(), detail::kBlock);
    if (setup.corruption == Corruption::sddn && has_w) {
      blk.mp.resize(m.sddn.s * m.r(), detail::kBlock);
      blk.u.resize(m.sddn.s, detail::kBlock);
    }
    streams.fill(m, setup.corruption, blk);
    for (Index c = 0; c < detail::kBlock && bi * detail::kBlock + c < alpha; ++c) {
      const Index t = bi * detail::kBlock + c;
      Vector col = blk.x.col(c);
      if (has_w) {
        const Support sup = sched.at(t);
        switch (setup.corruption) {
          case Corruption::sddn:
            for (Index j = 0; j < m.sddn.s; ++j) col(sup[static_cast<std::size_t>(j)]) += blk.u(j, c);
            break;
          case Corruption::missing:
            col = apply_missing(col, sup);
            break;
          case Corruption::residual: {
            const Index s = m.sddn.s;
            Matrix bt(s, s);
            Matrix rows(s, n);
            for (Index i = 0; i < s; ++i) {
              rows.row(i) = proj.row(sup[static_cast<std::size_t>(i)]);
              for (Index j = 0; j < s; ++j) bt(i, j) = proj(sup[static_cast<std::size_t>(i)], sup[static_cast<std::size_t>(j)]);
            }
            const Vector e = bt.fullPivLu().solve(rows * Vector(blk.l.col(c)));
            for (Index i = 0; i < s; ++i) col(sup[static_cast<std::size_t>(i)]) += e(i);
            break;
          }
        }
      }
      y.col(t) = col;
    }
  }
  return DataBatch(std::move(y));
}

}  // namespace corrpca
