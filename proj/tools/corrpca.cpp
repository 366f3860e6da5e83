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


// corrpca: experiment runner and bound calculator.
//
//   corrpca <subcommand> --config FILE [--seed N] [--out FILE] [--workers N]
//                        [--c X] [--trials N] [--alpha A ...]
//
// Exit status: 0 success, 1 configuration or usage error, 2 when a bound or
// corollary the run depends on is infeasible.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "corrpca/corrpca.hpp"

namespace {

using corrpca::Errc;
using corrpca::Error;
using corrpca::ExperimentConfig;

constexpr const char* kSeedEnv = "CORRPCA_SEED";

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> workers;
  std::optional<double> c;
  std::optional<int> trials;
  std::vector<corrpca::Index> alpha;
};

ExperimentConfig resolve(const Options& opt) {
  corrpca::ParsedConfig parsed = corrpca::parse_config(opt.config);
  ExperimentConfig cfg = parsed.cfg;
  if (opt.seed) {
    cfg.master_seed = *opt.seed;
  } else if (!parsed.seed) {
    cfg.master_seed = 0;
    if (const char* env = std::getenv(kSeedEnv); env && *env) {
      try {
        std::size_t pos = 0;
        cfg.master_seed = std::stoull(env, &pos);
        if (env[pos] != '\0') throw std::invalid_argument(env);
      } catch (const std::exception&) {
        throw Error(Errc::config_error, std::string("bad ") + kSeedEnv + " value '" + env + "'");
      }
    }
  }
  if (opt.workers) cfg.workers = *opt.workers;
  if (opt.c) cfg.c = *opt.c;
  if (opt.trials) cfg.n_trials = *opt.trials;
  if (!opt.alpha.empty()) cfg.alpha_grid = opt.alpha;
  cfg.validate();
  return cfg;
}

void log_config(const std::string& sub, const ExperimentConfig& cfg) {
  std::istringstream in(corrpca::describe(cfg));
  std::cerr << "# corrpca " << sub << " resolved config\n";
  for (std::string line; std::getline(in, line);) std::cerr << "# " << line << '\n';
}

int run_bound(const ExperimentConfig& cfg, std::ostream& out) {
  const corrpca::ModelInstance m = corrpca::model_for(cfg, cfg.model.n, cfg.model.r, 0);
  const corrpca::Index alpha = cfg.alpha_grid.front();
  const double b = corrpca::realized_b(m, alpha);
  const corrpca::BoundInputs in = corrpca::bound_inputs(cfg, m, alpha, b, m.sddn.q);
  const corrpca::BoundReport rep = corrpca::theorem1_bound(in);
  using corrpca::format_real;
  const std::vector<std::pair<std::string, std::string>> fields = {
      {"alpha", std::to_string(alpha)},
      {"n", std::to_string(in.n)},
      {"r", std::to_string(in.r)},
      {"r_v", std::to_string(in.r_v)},
      {"b", format_real(b)},
      {"q", format_real(in.q)},
      {"c", format_real(in.c)},
      {"lambda_minus", format_real(m.spectra.lambda_minus)},
      {"f", format_real(m.spectra.f)},
      {"lambda_v_plus", format_real(m.spectra.lambda_v_plus)},
      {"g", format_real(m.spectra.g)},
      {"eps_bnd", format_real(rep.eps_bnd)},
      {"eps_den", format_real(rep.eps_den)},
      {"numerator", format_real(rep.numerator)},
      {"denominator", format_real(rep.denominator)},
      {"condition_slack", format_real(rep.condition_slack)},
      {"feasible", rep.feasible ? "1" : "0"},
      {"sample_condition", rep.sample_condition ? "1" : "0"},
      {"se_bound", corrpca::format_bound(rep.se_bound)},
  };
  for (const auto& [k, v] : fields) out << k << '=' << v << '\n';
  for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << fields[i].first;
  out << '\n';
  for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << fields[i].second;
  out << '\n';
  return rep.feasible ? 0 : 2;
}

int dispatch(const std::string& sub, const ExperimentConfig& cfg, std::ostream& out) {
  if (sub == "bound") return run_bound(cfg, out);
  if (sub == "bound-tightness") {
    corrpca::write_bound_tightness_csv(out, corrpca::bound_tightness(cfg));
  } else if (sub == "phase-transition") {
    corrpca::write_phase_transition_csv(out, corrpca::phase_transition(cfg));
  } else if (sub == "concentration") {
    corrpca::write_concentration_csv(out, corrpca::concentration_check(cfg));
  } else if (sub == "rank-estimation") {
    corrpca::write_rank_csv(out, corrpca::rank_estimation(cfg));
  } else if (sub == "adversarial") {
    const auto rows = corrpca::parallel_trials(cfg.n_trials, cfg.workers, [&](int t) {
      return corrpca::adversarial_sigma(cfg.model.n, cfg.model.r, cfg.alpha_grid.front(), cfg.model.lambdas,
                                        cfg.master_seed, t, cfg.adversarial_factor);
    });
    corrpca::write_adversarial_csv(out, rows);
  } else if (sub == "refine") {
    corrpca::write_refinement_csv(out, corrpca::refinement_loop(cfg, cfg.stages, cfg.q0));
  } else if (sub == "missing") {
    corrpca::write_bound_tightness_csv(out, corrpca::missing_data_experiment(cfg));
  }
  return 0;
}

std::size_t grid_size(const std::string& sub, const ExperimentConfig& cfg) {
  if (sub == "bound" || sub == "adversarial") return 1;
  if (sub == "refine") return static_cast<std::size_t>(cfg.stages);
  const std::size_t axis = std::max<std::size_t>({1, cfg.r_grid.size(), cfg.n_grid.size()});
  return sub == "phase-transition" ? axis * cfg.alpha_grid.size() : cfg.alpha_grid.size();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PCA under correlated and data-dependent noise: bounds and Monte Carlo experiments", "corrpca"};
  app.require_subcommand(1);
  Options opt;
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"bound", "evaluate the finite-sample SE bound at one alpha"},
      {"bound-tightness", "mean/max SE against the bound over an alpha grid"},
      {"phase-transition", "success probability over (r or n) x alpha"},
      {"concentration", "median deviation of the five averaged outer products"},
      {"rank-estimation", "accuracy of the threshold and eigen-gap rank estimators"},
      {"adversarial", "PCA when noise power exceeds lambda- off the signal subspace"},
      {"refine", "staged PCA with projection-residual corruption"},
      {"missing", "PCA with missing entries against the corollary bound"},
  };
  for (const auto& [name, help] : subs) {
    CLI::App* s = app.add_subcommand(name, help);
    s->add_option("--config", opt.config, "experiment config file")->required()->check(CLI::ExistingFile);
    s->add_option("--seed", opt.seed, "master seed (overrides config and " + std::string(kSeedEnv) + ")");
    s->add_option("--out", opt.out, "CSV output path (default: stdout)");
    s->add_option("--workers", opt.workers, "worker threads; output does not depend on it")
        ->check(CLI::PositiveNumber);
    s->add_option("--c", opt.c, "bound constant c")->check(CLI::PositiveNumber);
    s->add_option("--trials", opt.trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
    s->add_option("--alpha", opt.alpha, "alpha value(s) replacing the config grid")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "corrpca: " << e.what() << "\n\n" << app.help();
    return 1;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  try {
    const ExperimentConfig cfg = resolve(opt);
    log_config(sub, cfg);

    std::unique_ptr<std::ofstream> file;
    if (!opt.out.empty()) {
      file = std::make_unique<std::ofstream>(opt.out, std::ios::binary);
      if (!*file) throw Error(Errc::config_error, "cannot write " + opt.out);
    }
    std::ostream& out = file ? static_cast<std::ostream&>(*file) : std::cout;

    const auto start = std::chrono::steady_clock::now();
    const int status = dispatch(sub, cfg, out);
    out.flush();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cerr << "corrpca " << sub << ": grid=" << grid_size(sub, cfg) << " trials=" << cfg.n_trials
              << " seed=" << cfg.master_seed << " wall=" << wall << "s"
              << (status == 2 ? " (bound infeasible)" : "") << '\n';
    return status;
  } catch (const Error& e) {
    std::cerr << "corrpca: " << corrpca::to_string(e.code()) << ": " << e.what() << '\n';
    switch (e.code()) {
      case Errc::infeasible:
      case Errc::corollary_inapplicable:
        return 2;
      default:
        return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "corrpca: " << e.what() << '\n';
    return 1;
  }
}
