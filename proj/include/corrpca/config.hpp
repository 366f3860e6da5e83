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

// Strict INI experiment configuration.
//
//   [signal]      n, r, distribution, lambda, eta
//   [noise]       r_v, basis, distribution, amplitude_base, amplitude_slope
//   [sddn]        s, b0, rho, q
//   [experiment]  alpha_grid, r_grid, n_grid, trials, seed, c, epsilon, regime,
//                 eps_bnd_form, max_rank, workers, stages, q0, big_c,
//                 adversarial_factor, redraw_model
//
// Grids are comma lists or logspace(lo, hi, count). Unknown sections or keys
// and missing required keys raise ConfigError; values that parse but break a
// model invariant raise ValidationError.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "corrpca/errors.hpp"
#include "corrpca/experiments.hpp"

namespace corrpca {

struct ParsedConfig {
  ExperimentConfig cfg;
  std::optional<std::uint64_t> seed;  // as given in the file
};

namespace detail {

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema = {
      {"signal", {"n", "r", "distribution", "lambda", "eta"}},
      {"noise", {"r_v", "basis", "distribution", "amplitude_base", "amplitude_slope"}},
      {"sddn", {"s", "b0", "rho", "q"}},
      {"experiment",
       {"alpha_grid", "r_grid", "n_grid", "trials", "seed", "c", "epsilon", "regime", "eps_bnd_form", "max_rank",
        "workers", "stages", "q0", "big_c", "adversarial_factor", "redraw_model"}},
  };
  return schema;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

class Section {
 public:
  Section(std::string name, const boost::property_tree::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

  std::string raw(const std::string& key) const {
    if (!has(key)) throw Error(Errc::config_error, "missing key " + name_ + "." + key);
    return trim(tree_->get<std::string>(key));
  }

  long long integer(const std::string& key) const { return parse_int(key, raw(key)); }

  double real(const std::string& key) const { return parse_real(key, raw(key)); }

  long long parse_int(const std::string& key, const std::string& text) const {
    long long v = 0;
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, v);
    if (text.empty() || res.ec != std::errc() || res.ptr != end) bad(key, text);
    return v;
  }

  double parse_real(const std::string& key, const std::string& text) const {
    if (text.empty()) bad(key, text);
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || !std::isfinite(v)) bad(key, text);
    return v;
  }

  std::vector<Index> index_list(const std::string& key) const {
    const std::string text = raw(key);
    std::vector<Index> out;
    if (text.rfind("logspace(", 0) == 0 && text.back() == ')') {
      const auto parts = split_list(text.substr(9, text.size() - 10));
      if (parts.size() != 3) bad(key, text);
      const double lo = parse_real(key, parts[0]);
      const double hi = parse_real(key, parts[1]);
      const long long count = parse_int(key, parts[2]);
      if (!(lo >= 1.0) || !(hi >= lo) || count < 1) bad(key, text);
      for (long long i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        const auto v = static_cast<Index>(std::llround(std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)))));
        if (out.empty() || out.back() != v) out.push_back(v);
      }
      return out;
    }
    for (const auto& p : split_list(text)) out.push_back(static_cast<Index>(parse_int(key, p)));
    return out;
  }

  std::vector<double> real_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& p : split_list(raw(key))) out.push_back(parse_real(key, p));
    return out;
  }

  Distribution distribution(const std::string& key) const {
    const std::string v = raw(key);
    if (v == "uniform") return Distribution::bounded_uniform;
    if (v == "gaussian") return Distribution::gaussian;
    bad(key, v);
  }

  [[noreturn]] void bad(const std::string& key, const std::string& text) const {
    throw Error(Errc::config_error, "bad value for " + name_ + "." + key + ": '" + text + "'");
  }

 private:
  std::string name_;
  const boost::property_tree::ptree* tree_;
};

}  // namespace detail

inline ParsedConfig parse_config_string(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree root;
  try {
    std::istringstream in(text);
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw Error(Errc::config_error, std::string("malformed config: ") + e.message());
  }
  if (root.empty()) throw Error(Errc::config_error, "empty config");

  const auto& schema = detail::config_schema();
  for (const auto& [name, sub] : root) {
    const auto it = schema.find(name);
    if (it == schema.end()) {
      throw Error(Errc::config_error, sub.empty() ? "unknown key " + name : "unknown section " + name);
    }
    for (const auto& kv : sub) {
      if (!it->second.count(kv.first)) throw Error(Errc::config_error, "unknown key " + name + "." + kv.first);
    }
  }
  auto section = [&](const std::string& name, bool required) {
    const auto it = root.find(name);
    if (it == root.not_found()) {
      if (required) throw Error(Errc::config_error, "missing section " + name);
      return detail::Section(name, nullptr);
    }
    return detail::Section(name, &it->second);
  };

  ParsedConfig out;
  ExperimentConfig& cfg = out.cfg;
  ModelSpec& m = cfg.model;

  const auto sig = section("signal", true);
  m.n = sig.integer("n");
  m.r = sig.integer("r");
  m.signal_distribution = sig.distribution("distribution");
  m.lambdas = sig.real_list("lambda");
  m.eta = sig.has("eta") ? sig.real("eta") : (m.signal_distribution == Distribution::bounded_uniform ? 3.0 : 1.0);

  const auto noise = section("noise", false);
  m.rv_rule = RvRule::fixed;
  m.r_v = 0;
  if (noise.has("r_v")) {
    const std::string rv = noise.raw("r_v");
    if (rv == "r") {
      m.rv_rule = RvRule::equal_r;
    } else if (rv == "n") {
      m.rv_rule = RvRule::equal_n;
    } else {
      m.r_v = noise.integer("r_v");
    }
  }
  if (noise.has("basis")) {
    const std::string b = noise.raw("basis");
    if (b == "random") {
      m.noise_basis = NoiseBasis::random;
    } else if (b == "identity") {
      m.noise_basis = NoiseBasis::identity;
    } else {
      noise.bad("basis", b);
    }
  }
  if (noise.has("distribution")) m.noise_distribution = noise.distribution("distribution");
  if (noise.has("amplitude_base")) m.noise_base = noise.real("amplitude_base");
  if (noise.has("amplitude_slope")) m.noise_slope = noise.real("amplitude_slope");
  if (m.noise_base > 0.0 && m.rv_rule == RvRule::fixed && m.r_v == 0) {
    throw Error(Errc::config_error, "missing key noise.r_v");
  }

  const auto sddn = section("sddn", false);
  if (sddn.has("s")) m.s = sddn.integer("s");
  if (sddn.has("b0")) m.b0 = sddn.real("b0");
  if (sddn.has("rho")) m.rho = static_cast<int>(sddn.integer("rho"));
  if (sddn.has("q")) m.q = sddn.real("q");

  const auto ex = section("experiment", true);
  cfg.alpha_grid = ex.index_list("alpha_grid");
  if (ex.has("r_grid")) cfg.r_grid = ex.index_list("r_grid");
  if (ex.has("n_grid")) cfg.n_grid = ex.index_list("n_grid");
  cfg.n_trials = static_cast<int>(ex.integer("trials"));
  if (ex.has("seed")) {
    const std::string s = ex.raw("seed");
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) ex.bad("seed", s);
    out.seed = v;
    cfg.master_seed = v;
  }
  if (ex.has("c")) cfg.c = ex.real("c");
  if (ex.has("epsilon")) {
    const std::string e = ex.raw("epsilon");
    if (e == "factor_1_5") {
      cfg.epsilon_rule = {EpsilonRule::Kind::factor_1_5, 0.0};
    } else {
      cfg.epsilon_rule = {EpsilonRule::Kind::fixed, ex.real("epsilon")};
    }
  }
  if (ex.has("regime")) {
    const std::string r = ex.raw("regime");
    if (r == "bounded") {
      cfg.regime = Regime::bounded;
    } else if (r == "subgaussian") {
      cfg.regime = Regime::subgaussian;
    } else {
      ex.bad("regime", r);
    }
  }
  if (ex.has("eps_bnd_form")) {
    const std::string f = ex.raw("eps_bnd_form");
    if (f == "theorem") {
      cfg.eps_form = EpsBndForm::theorem;
    } else if (f == "proof") {
      cfg.eps_form = EpsBndForm::proof_level;
    } else {
      ex.bad("eps_bnd_form", f);
    }
  }
  if (ex.has("max_rank")) cfg.max_rank = ex.integer("max_rank");
  if (ex.has("workers")) cfg.workers = static_cast<int>(ex.integer("workers"));
  if (ex.has("stages")) cfg.stages = static_cast<int>(ex.integer("stages"));
  if (ex.has("q0")) cfg.q0 = ex.real("q0");
  if (ex.has("big_c")) cfg.big_c = ex.real("big_c");
  if (ex.has("adversarial_factor")) cfg.adversarial_factor = ex.real("adversarial_factor");
  if (ex.has("redraw_model")) {
    const std::string v = ex.raw("redraw_model");
    if (v == "true") {
      cfg.redraw_model = true;
    } else if (v == "false") {
      cfg.redraw_model = false;
    } else {
      ex.bad("redraw_model", v);
    }
  }

  cfg.validate();
  return out;
}

inline ParsedConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config_error, "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str());
}

namespace detail {

inline std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ", ";
    if constexpr (std::is_floating_point_v<T>) {
      os << shortest(v[i]);
    } else {
      os << v[i];
    }
  }
  return os.str();
}

inline const char* name(Distribution d) { return d == Distribution::gaussian ? "gaussian" : "uniform"; }

}  // namespace detail

/// Fully resolved configuration in the same INI dialect; parses back to an equal config.
inline std::string describe(const ExperimentConfig& cfg) {
  const ModelSpec& m = cfg.model;
  std::ostringstream os;
  os << "[signal]\n"
     << "n = " << m.n << "\nr = " << m.r << "\ndistribution = " << detail::name(m.signal_distribution)
     << "\nlambda = " << detail::join(m.lambdas) << "\neta = " << detail::shortest(m.eta) << "\n\n";
  os << "[noise]\nr_v = ";
  switch (m.rv_rule) {
    case RvRule::equal_r: os << "r"; break;
    case RvRule::equal_n: os << "n"; break;
    case RvRule::fixed: os << m.r_v; break;
  }
  os << "\nbasis = " << (m.noise_basis == NoiseBasis::random ? "random" : "identity")
     << "\ndistribution = " << detail::name(m.noise_distribution)
     << "\namplitude_base = " << detail::shortest(m.noise_base) << "\namplitude_slope = " << detail::shortest(m.noise_slope)
     << "\n\n";
  os << "[sddn]\ns = " << m.s << "\nb0 = " << detail::shortest(m.b0) << "\nrho = " << m.rho
     << "\nq = " << detail::shortest(m.q) << "\n\n";
  os << "[experiment]\nalpha_grid = " << detail::join(cfg.alpha_grid) << '\n';
  if (!cfg.r_grid.empty()) os << "r_grid = " << detail::join(cfg.r_grid) << '\n';
  if (!cfg.n_grid.empty()) os << "n_grid = " << detail::join(cfg.n_grid) << '\n';
  os << "trials = " << cfg.n_trials << "\nseed = " << cfg.master_seed << "\nc = " << detail::shortest(cfg.c)
     << "\nepsilon = "
     << (cfg.epsilon_rule.kind == EpsilonRule::Kind::fixed ? detail::shortest(cfg.epsilon_rule.value) : "factor_1_5")
     << "\nregime = " << (cfg.regime == Regime::bounded ? "bounded" : "subgaussian")
     << "\neps_bnd_form = " << (cfg.eps_form == EpsBndForm::theorem ? "theorem" : "proof")
     << "\nmax_rank = " << cfg.max_rank << "\nworkers = " << cfg.workers << "\nstages = " << cfg.stages
     << "\nq0 = " << detail::shortest(cfg.q0) << "\nbig_c = " << detail::shortest(cfg.big_c)
     << "\nadversarial_factor = " << detail::shortest(cfg.adversarial_factor)
     << "\nredraw_model = " << (cfg.redraw_model ? "true" : "false") << '\n';
  return os.str();
}

}  // namespace corrpca
