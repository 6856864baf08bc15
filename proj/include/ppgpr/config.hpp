// Copyright 2026 The ppgpr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Experiment configuration: an INI file with the sections
//   [network] [consensus] [gp] [hyperopt] [data] [privacy] [run]
// Unknown sections or keys are rejected so typos fail loudly. Numbers accept
// plain decimals, "2^k" powers and "a/b" fractions where a rational is
// meant; "auto" selects the derived value (smallest weight scale, smallest
// safe modulus). Agent ids are 1-based in files, 0-based in code.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppgpr/consensus.hpp"
#include "ppgpr/data.hpp"
#include "ppgpr/protocol.hpp"
#include "ppgpr/topology.hpp"

namespace ppgpr {

struct NetworkConfig {
  std::optional<std::string> graph_file;
  std::string generator = "ring_chords";  // complete | cycle | path | ring_chords
  std::size_t agents = 10;
  std::size_t neighbors = 4;
};

struct ConsensusConfig {
  double state_scale = std::ldexp(1.0, -20);
  std::optional<Rational> weight_scale;  // empty: largest valid scale
  std::optional<std::int64_t> modulus;   // empty: smallest safe modulus
  std::size_t iterations = 50;
  bool strict = true;
  std::optional<double> input_bound;
  /// Explicit initial states, one per agent; otherwise uniform draws.
  std::optional<States> initial;
  double initial_min = 0.0;
  double initial_max = 1.0;
  std::size_t dimension = 1;
};

struct GpConfig {
  double noise_variance = 0.01;
  double length_scale = 1.0;
  double signal_std = 1.0;
  /// Range of the uniform Θ_i(0) draws for gpr-train.
  double init_min = 5.0;
  double init_max = 15.0;
};

struct DataConfig {
  std::string source = "sine";  // sine | csv
  std::optional<std::string> path;
  std::vector<std::string> targets;
  SineSpec sine;
  std::size_t test_points = 50;
  double test_fraction = 0.2;
  std::optional<bool> normalize;  // default: on for csv, off for sine

  bool normalized() const { return normalize.value_or(source == "csv"); }
};

struct PrivacyConfig {
  std::int64_t modulus = 17;
  std::vector<AgentId> coalition{0};
  std::size_t samples = 100000;
  double epsilon = 0.01;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string output = "out";
  bool transcript = false;
};

struct ExperimentConfig {
  NetworkConfig network;
  ConsensusConfig consensus;
  GpConfig gp;
  HyperoptSettings hyperopt;
  DataConfig data;
  PrivacyConfig privacy;
  RunConfig run;
};

// ---------------------------------------------------------------------------
// Value grammar.

namespace detail {

inline std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

inline std::int64_t parse_int(const std::string& raw, const std::string& key) {
  const std::string s = trimmed(raw);
  std::int64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw std::invalid_argument(key + ": expected an integer, got '" + raw + "'");
  }
  return v;
}

inline std::size_t parse_count(const std::string& raw, const std::string& key) {
  const std::int64_t v = parse_int(raw, key);
  if (v < 0) throw std::invalid_argument(key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

inline double parse_real(const std::string& raw, const std::string& key) {
  const std::string s = trimmed(raw);
  if (const auto caret = s.find('^'); caret != std::string::npos) {
    const double base = parse_real(s.substr(0, caret), key);
    const double exp = parse_real(s.substr(caret + 1), key);
    return std::pow(base, exp);
  }
  if (const auto slash = s.find('/'); slash != std::string::npos) {
    return parse_real(s.substr(0, slash), key) / parse_real(s.substr(slash + 1), key);
  }
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) {
    throw std::invalid_argument(key + ": expected a number, got '" + raw + "'");
  }
  return v;
}

inline double parse_positive(const std::string& raw, const std::string& key) {
  const double v = parse_real(raw, key);
  if (!(v > 0.0)) throw std::invalid_argument(key + " must be positive");
  return v;
}

inline Rational parse_rational(const std::string& raw, const std::string& key) {
  const std::string s = trimmed(raw);
  Rational r;
  if (const auto slash = s.find('/'); slash != std::string::npos) {
    const std::int64_t den = parse_int(s.substr(slash + 1), key);
    if (den == 0) throw std::invalid_argument(key + ": zero denominator");
    r = Rational(parse_int(s.substr(0, slash), key), den);
  } else {
    r = Rational(parse_int(s, key));
  }
  if (r <= 0) throw std::invalid_argument(key + " must be positive");
  return r;
}

/// "2^40", "1099511627776".
inline std::int64_t parse_modulus(const std::string& raw, const std::string& key) {
  const std::string s = trimmed(raw);
  std::int64_t q = 0;
  if (const auto caret = s.find('^'); caret != std::string::npos) {
    const std::int64_t base = parse_int(s.substr(0, caret), key);
    const std::int64_t exp = parse_int(s.substr(caret + 1), key);
    if (base != 2 || exp < 2 || exp > 62) {
      throw std::invalid_argument(key + ": powers must be 2^k with 2 <= k <= 62");
    }
    q = std::int64_t{1} << exp;
  } else {
    q = parse_int(s, key);
  }
  (void)Modulus(q);  // range check
  return q;
}

inline bool parse_bool(const std::string& raw, const std::string& key) {
  const std::string s = trimmed(raw);
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  throw std::invalid_argument(key + ": expected true or false, got '" + raw + "'");
}

inline std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, sep);) {
    item = trimmed(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// "0; 3; 6" or "1,2; 3,4": agents separated by ';', components by ','.
inline States parse_states(const std::string& raw, const std::string& key) {
  States out;
  for (const std::string& agent : split_on(raw, ';')) {
    State s;
    for (const std::string& c : split_on(agent, ',')) s.push_back(parse_real(c, key));
    if (!out.empty() && s.size() != out.front().size()) {
      throw std::invalid_argument(key + ": agents have different state dimensions");
    }
    out.push_back(std::move(s));
  }
  if (out.empty() || out.front().empty()) throw std::invalid_argument(key + " is empty");
  return out;
}

class SectionReader {
 public:
  SectionReader(const boost::property_tree::ptree& tree, std::string section)
      : section_(std::move(section)) {
    if (auto child = tree.get_child_optional(section_)) node_ = &*child;
  }

  /// Rejects keys that were never asked for.
  void finish() const {
    if (node_ == nullptr) return;
    for (const auto& [key, value] : *node_) {
      if (!used_.count(key)) {
        throw std::invalid_argument("unknown key [" + section_ + "] " + key);
      }
    }
  }

  std::optional<std::string> get(const std::string& key) {
    used_.insert(key);
    if (node_ == nullptr) return std::nullopt;
    auto v = node_->get_optional<std::string>(boost::property_tree::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return trimmed(*v);
  }

  std::string name(const std::string& key) const { return "[" + section_ + "] " + key; }

 private:
  std::string section_;
  const boost::property_tree::ptree* node_ = nullptr;
  std::set<std::string> used_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Loading.

/// Parses an INI document; relative file names resolve against `base_dir`.
inline ExperimentConfig parse_config(std::istream& in,
                                     const std::filesystem::path& base_dir = {}) {
  namespace pt = boost::property_tree;
  using namespace detail;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  static const std::set<std::string> kSections{"network", "consensus", "gp", "hyperopt",
                                               "data", "privacy", "run"};
  for (const auto& [name, child] : tree) {
    if (!kSections.count(name)) {
      throw std::invalid_argument("unknown config section [" + name + "]");
    }
  }
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return (path.is_absolute() || base_dir.empty() ? path : base_dir / path).string();
  };

  ExperimentConfig cfg;
  {
    SectionReader r(tree, "network");
    if (auto v = r.get("graph")) cfg.network.graph_file = resolve(*v);
    if (auto v = r.get("generator")) cfg.network.generator = *v;
    if (auto v = r.get("agents")) cfg.network.agents = parse_count(*v, r.name("agents"));
    if (auto v = r.get("neighbors")) {
      cfg.network.neighbors = parse_count(*v, r.name("neighbors"));
    }
    static const std::set<std::string> kGenerators{"complete", "cycle", "path",
                                                   "ring_chords"};
    if (!kGenerators.count(cfg.network.generator)) {
      throw std::invalid_argument("[network] generator must be complete, cycle, path "
                                  "or ring_chords, got '" + cfg.network.generator + "'");
    }
    r.finish();
  }
  {
    SectionReader r(tree, "consensus");
    auto& c = cfg.consensus;
    if (auto v = r.get("state_scale")) c.state_scale = parse_positive(*v, r.name("state_scale"));
    if (auto v = r.get("weight_scale"); v && *v != "auto") {
      c.weight_scale = parse_rational(*v, r.name("weight_scale"));
    }
    if (auto v = r.get("modulus"); v && *v != "auto") {
      c.modulus = parse_modulus(*v, r.name("modulus"));
    }
    if (auto v = r.get("iterations")) c.iterations = parse_count(*v, r.name("iterations"));
    if (auto v = r.get("strict")) c.strict = parse_bool(*v, r.name("strict"));
    if (auto v = r.get("input_bound")) {
      c.input_bound = parse_real(*v, r.name("input_bound"));
      if (*c.input_bound < 0) throw std::invalid_argument("[consensus] input_bound < 0");
    }
    if (auto v = r.get("initial")) c.initial = parse_states(*v, r.name("initial"));
    if (auto v = r.get("initial_min")) c.initial_min = parse_real(*v, r.name("initial_min"));
    if (auto v = r.get("initial_max")) c.initial_max = parse_real(*v, r.name("initial_max"));
    if (auto v = r.get("dimension")) c.dimension = parse_count(*v, r.name("dimension"));
    if (c.iterations < 1) throw std::invalid_argument("[consensus] iterations must be >= 1");
    if (c.dimension < 1) throw std::invalid_argument("[consensus] dimension must be >= 1");
    if (c.initial_max < c.initial_min) {
      throw std::invalid_argument("[consensus] initial_max < initial_min");
    }
    r.finish();
  }
  {
    SectionReader r(tree, "gp");
    auto& g = cfg.gp;
    if (auto v = r.get("noise_variance")) {
      g.noise_variance = parse_positive(*v, r.name("noise_variance"));
    }
    if (auto v = r.get("length_scale")) g.length_scale = parse_positive(*v, r.name("length_scale"));
    if (auto v = r.get("signal_std")) g.signal_std = parse_positive(*v, r.name("signal_std"));
    if (auto v = r.get("init_min")) g.init_min = parse_positive(*v, r.name("init_min"));
    if (auto v = r.get("init_max")) g.init_max = parse_positive(*v, r.name("init_max"));
    if (g.init_max < g.init_min) throw std::invalid_argument("[gp] init_max < init_min");
    r.finish();
  }
  {
    SectionReader r(tree, "hyperopt");
    auto& h = cfg.hyperopt;
    if (auto v = r.get("iterations")) h.iterations = parse_count(*v, r.name("iterations"));
    if (auto v = r.get("step")) h.step = parse_positive(*v, r.name("step"));
    if (auto v = r.get("decay")) h.decay = parse_positive(*v, r.name("decay"));
    if (auto v = r.get("mode")) {
      if (*v == "natural") {
        h.mode = HyperStep::natural;
      } else if (*v == "log") {
        h.mode = HyperStep::log;
      } else {
        throw std::invalid_argument("[hyperopt] mode must be natural or log");
      }
    }
    r.finish();
  }
  {
    SectionReader r(tree, "data");
    auto& d = cfg.data;
    if (auto v = r.get("source")) d.source = *v;
    if (d.source != "sine" && d.source != "csv") {
      throw std::invalid_argument("[data] source must be sine or csv");
    }
    if (auto v = r.get("path")) d.path = resolve(*v);
    if (auto v = r.get("targets")) d.targets = split_on(*v, ',');
    if (auto v = r.get("samples")) d.sine.samples = parse_count(*v, r.name("samples"));
    if (auto v = r.get("noise_std")) d.sine.noise_std = parse_real(*v, r.name("noise_std"));
    if (auto v = r.get("x_min")) d.sine.x_min = parse_real(*v, r.name("x_min"));
    if (auto v = r.get("x_max")) d.sine.x_max = parse_real(*v, r.name("x_max"));
    if (auto v = r.get("frequency")) d.sine.frequency = parse_real(*v, r.name("frequency"));
    if (auto v = r.get("test_points")) d.test_points = parse_count(*v, r.name("test_points"));
    if (auto v = r.get("test_fraction")) {
      d.test_fraction = parse_real(*v, r.name("test_fraction"));
    }
    if (auto v = r.get("normalize"); v && *v != "auto") {
      d.normalize = parse_bool(*v, r.name("normalize"));
    }
    if (d.source == "csv") {
      if (!d.path) throw std::invalid_argument("[data] source = csv needs a path");
      if (!std::filesystem::exists(*d.path)) {
        throw std::invalid_argument("[data] path does not exist: " + *d.path);
      }
    }
    r.finish();
  }
  {
    SectionReader r(tree, "privacy");
    auto& p = cfg.privacy;
    if (auto v = r.get("modulus")) p.modulus = parse_modulus(*v, r.name("modulus"));
    if (auto v = r.get("coalition")) {
      p.coalition.clear();
      for (const std::string& id : split_on(*v, ',')) {
        const std::int64_t a = parse_int(id, r.name("coalition"));
        if (a < 1) throw std::invalid_argument("[privacy] coalition ids are 1-based");
        p.coalition.push_back(static_cast<AgentId>(a - 1));
      }
    }
    if (auto v = r.get("samples")) p.samples = parse_count(*v, r.name("samples"));
    if (auto v = r.get("epsilon")) p.epsilon = parse_positive(*v, r.name("epsilon"));
    r.finish();
  }
  {
    SectionReader r(tree, "run");
    if (auto v = r.get("seed")) {
      cfg.run.seed = static_cast<std::uint64_t>(parse_int(*v, r.name("seed")));
    }
    if (auto v = r.get("output")) cfg.run.output = *v;
    if (auto v = r.get("transcript")) cfg.run.transcript = parse_bool(*v, r.name("transcript"));
    r.finish();
  }
  if (cfg.network.graph_file && !std::filesystem::exists(*cfg.network.graph_file)) {
    throw std::invalid_argument("[network] graph file does not exist: " +
                                *cfg.network.graph_file);
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  return parse_config(in, std::filesystem::path(path).parent_path());
}

}  // namespace ppgpr
