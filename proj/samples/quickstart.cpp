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


// Draws one batch from a small correlated-noise model, estimates the subspace
// and both ranks, and prints the error next to the finite-sample bound.

#include <iostream>

#include "corrpca/corrpca.hpp"

int main() {
  using namespace corrpca;

  ModelSpec spec;
  spec.n = 100;
  spec.r = 5;
  spec.lambdas = {12.0};
  spec.noise_base = 1.1;
  spec.noise_slope = 0.1;
  spec.s = 5;
  spec.q = 0.001;
  const ModelInstance model = instantiate_model(spec, /*seed=*/42, spec.n, spec.r);

  TrialSetup setup;
  setup.model = &model;
  const Index alpha = 2000;
  const TrialResult res = run_trial(setup, alpha, TrialKey{42, 0, 0, 0});

  ExperimentConfig cfg;
  cfg.model = spec;
  const BoundReport bound = theorem1_bound(bound_inputs(cfg, model, alpha, res.realized_b, spec.q));

  std::cout << "alpha      " << alpha << '\n'
            << "SE         " << res.se << '\n'
            << "bound      " << format_bound(bound.se_bound) << '\n'
            << "r (thresh) " << res.r_hat_threshold << '\n'
            << "r (gap)    " << res.r_hat_gap << '\n';
}
