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

// Drivers behind the command-line subcommands. Each reads an
// ExperimentConfig, runs one pipeline, writes comma-separated record files
// with a one-line header into the output directory and returns a summary.
// Everything is a function of (config, seed); wall-clock times go to the log
// stream only, never into files.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppgpr/config.hpp"
#include "ppgpr/consensus.hpp"
#include "ppgpr/data.hpp"
#include "ppgpr/errors.hpp"
#include "ppgpr/gpr.hpp"
#include "ppgpr/netsim.hpp"
#include "ppgpr/privacy.hpp"
#include "ppgpr/protocol.hpp"
#include "ppgpr/topology.hpp"

namespace ppgpr {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitProtocol = 2,
  kExitAuditFailed = 3,
};

// ---------------------------------------------------------------------------
// Shared set-up.

/// Builds the graph and rejects it before any message is sent unless it is
/// connected and every edge has a common neighbour.
inline Topology build_topology(const NetworkConfig& n) {
  Topology g = [&] {
    if (n.graph_file) return load_graph(*n.graph_file);
    if (n.generator == "complete") return Topology::complete(n.agents);
    if (n.generator == "cycle") return Topology::cycle(n.agents);
    if (n.generator == "path") return Topology::path(n.agents);
    return Topology::ring_with_chords(n.agents, n.neighbors);
  }();
  if (!g.connected()) throw std::invalid_argument("graph is not connected");
  if (auto bad = validate_common_neighbor(g); !bad.empty()) {
    throw std::invalid_argument("edge " + edge_label(bad[0].first, bad[0].second) +
                                " has no common neighbour; secure aggregation needs one");
  }
  return g;
}

/// Explicit states from the config, or uniform draws in
/// [initial_min, initial_max]^dimension.
inline States initial_states(const ConsensusConfig& c, std::size_t agents,
                             std::uint64_t seed) {
  if (c.initial) {
    if (c.initial->size() != agents) {
      throw std::invalid_argument("[consensus] initial lists " +
                                  std::to_string(c.initial->size()) + " states for " +
                                  std::to_string(agents) + " agents");
    }
    return *c.initial;
  }
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(c.initial_min, c.initial_max);
  States z(agents, State(c.dimension));
  for (State& s : z) {
    for (double& v : s) v = u(gen);
  }
  return z;
}

/// Fills in "auto" scales and the modulus. The modulus bound uses the
/// public input bound when one is configured, otherwise the true states.
inline ConsensusParams resolve_params(const ConsensusConfig& c, const WeightTable& w,
                                      const States& initial) {
  const Rational lw = c.weight_scale.value_or(w.largest_weight_scale());
  std::int64_t q = 0;
  if (c.modulus) {
    q = *c.modulus;
  } else {
    const ModulusInputs in = c.input_bound ? ModulusInputs::deployment(*c.input_bound)
                                           : ModulusInputs::ground_truth(initial);
    q = min_modulus(w, c.state_scale, lw, in);
  }
  return {c.state_scale, lw, Modulus(q), c.iterations, c.strict, c.input_bound};
}

inline std::filesystem::path prepare_output(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

inline std::ofstream open_record_file(const std::filesystem::path& p,
                                      const std::string& header) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << std::setprecision(17) << header << '\n';
  return out;
}

inline std::string rational_text(Rational r) {
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// consensus

struct ConsensusSummary {
  std::size_t agents = 0;
  ConsensusParams params{1.0, Rational(1), Modulus(3)};
  double final_error = 0.0;
  double error_bound = 0.0;
};

inline ConsensusSummary run_consensus_experiment(const ExperimentConfig& cfg,
                                                 std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const Topology g = build_topology(cfg.network);
  const WeightTable w = metropolis_weights(g);
  const States z0 = initial_states(cfg.consensus, g.size(), cfg.run.seed);
  const ConsensusParams params = resolve_params(cfg.consensus, w, z0);
  Network net(g, cfg.run.seed);
  const Protocol1Result r = run_protocol1(net, w, params, z0, true);

  const State avg = average(z0);
  const auto dir = prepare_output(cfg.run.output);
  auto trace = open_record_file(dir / "consensus_trace.csv", "round,agent,error");
  auto states = open_record_file(dir / "consensus_states.csv",
                                 "round,agent,component,value");
  for (std::size_t t = 0; t < r.trajectory.size(); ++t) {
    for (AgentId i = 0; i < g.size(); ++i) {
      State diff = r.trajectory[t][i];
      for (std::size_t k = 0; k < diff.size(); ++k) diff[k] -= avg[k];
      trace << t << ',' << i + 1 << ',' << max_norm(diff) << '\n';
      for (std::size_t k = 0; k < diff.size(); ++k) {
        states << t << ',' << i + 1 << ',' << k + 1 << ',' << r.trajectory[t][i][k] << '\n';
      }
    }
  }
  if (cfg.run.transcript) {
    std::ofstream out(dir / "transcript.csv");
    write_transcript(out, r.transcript);
  }

  ConsensusSummary s;
  s.agents = g.size();
  s.params = params;
  s.final_error = max_disagreement(r.states, avg);
  s.error_bound =
      disagreement_bound(w, params.state_scale, ModulusInputs::ground_truth(z0).spread_max);
  auto summary = open_record_file(
      dir / "consensus_summary.csv",
      "agents,iterations,state_scale,weight_scale,modulus,final_error,error_bound,"
      "messages_per_round");
  summary << s.agents << ',' << params.iterations << ',' << params.state_scale << ','
          << rational_text(params.weight_scale) << ',' << params.modulus.value() << ','
          << s.final_error << ',' << s.error_bound << ','
          << r.transcript.counts(r.transcript.messages().front().round).shares << '\n';
  log << "consensus: " << s.agents << " agents, T = " << params.iterations
      << ", q = " << params.modulus.value() << " (2^" << std::setprecision(4)
      << std::log2(static_cast<double>(params.modulus.value())) << ")\n"
      << "final error " << std::setprecision(6) << s.final_error << " (bound "
      << s.error_bound << "), " << std::setprecision(3) << seconds_since(start)
      << " s\n";
  return s;
}

// ---------------------------------------------------------------------------
// Data for the GP subcommands.

struct PreparedData {
  Table train;
  Eigen::MatrixXd test_X;
  std::vector<std::string> targets;
};

/// Training table and test inputs. Synthetic data trains on every sample
/// and predicts on an even grid; CSV data is split at random (the test
/// share rounded up) and, when enabled, normalised with training statistics.
inline PreparedData prepare_data(const DataConfig& d, std::uint64_t seed) {
  PreparedData out;
  if (d.source == "sine") {
    out.train = synthesize_sine(d.sine, seed);
    if (d.test_points == 0) throw std::invalid_argument("[data] test_points must be >= 1");
    out.test_X = grid_points(d.test_points, d.sine.x_min, d.sine.x_max);
  } else {
    const Table all = load_csv(*d.path, d.targets);
    const Split split = train_test_split(all.rows(), d.test_fraction, seed);
    out.train = all.select(split.train);
    out.test_X = all.select(split.test).X;
  }
  if (d.normalized()) {
    const Normalizer nx = Normalizer::fit(out.train.X);
    const Normalizer ny = Normalizer::fit(out.train.Y);
    out.test_X = nx.apply(out.test_X);
    out.train.X = nx.apply(out.train.X);
    out.train.Y = ny.apply(out.train.Y);
  }
  out.targets = out.train.targets;
  return out;
}

// ---------------------------------------------------------------------------
// gpr-train

struct TrainSummary {
  std::vector<HyperoptTrace> traces;  // one per output
};

inline TrainSummary run_train_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const Topology g = build_topology(cfg.network);
  const WeightTable w = metropolis_weights(g);
  const PreparedData data = prepare_data(cfg.data, cfg.run.seed);
  const auto parts = partition_evenly(data.train.rows(), g.size(), cfg.run.seed);

  std::mt19937_64 gen(cfg.run.seed + 1);
  std::uniform_real_distribution<double> u(cfg.gp.init_min, cfg.gp.init_max);
  std::vector<Hyperparams> theta0(g.size());
  for (Hyperparams& t : theta0) {
    t.length_scale = u(gen);
    t.signal_std = u(gen);
  }
  // The modulus must cover every round, not only Θ(0), so "auto" uses a
  // public bound: the configured one or twice the initial range.
  ConsensusConfig cc = cfg.consensus;
  if (!cc.input_bound) cc.input_bound = 2.0 * cfg.gp.init_max;
  States as_states;
  for (const Hyperparams& t : theta0) as_states.push_back({t.length_scale, t.signal_std});
  const ConsensusParams params = resolve_params(cc, w, as_states);

  const auto dir = prepare_output(cfg.run.output);
  auto trace = open_record_file(dir / "hyperopt_trace.csv",
                                "iteration,output,agent,length_scale,signal_std");
  auto summary = open_record_file(dir / "hyperopt_summary.csv",
                                  "iteration,output,spread,total_lml_at_mean");
  TrainSummary s;
  Network net(g, cfg.run.seed);
  for (std::size_t d = 0; d < data.targets.size(); ++d) {
    const auto datasets = agent_datasets(data.train, parts, d, cfg.gp.noise_variance);
    s.traces.push_back(optimize_hyperparams(datasets, theta0, cfg.hyperopt, net, w, params));
    const HyperoptTrace& h = s.traces.back();
    for (std::size_t t = 0; t < h.theta.size(); ++t) {
      for (AgentId i = 0; i < g.size(); ++i) {
        trace << t << ',' << d + 1 << ',' << i + 1 << ',' << h.theta[t][i].length_scale
              << ',' << h.theta[t][i].signal_std << '\n';
      }
      summary << t << ',' << d + 1 << ',' << h.spread[t] << ',' << h.total_lml_at_mean[t]
              << '\n';
    }
    log << "gpr-train [" << data.targets[d] << "]: spread " << std::setprecision(6)
        << h.spread.front() << " -> " << h.spread.back() << ", sum log-likelihood "
        << h.total_lml_at_mean.front() << " -> " << h.total_lml_at_mean.back() << '\n';
  }
  log << "q = " << params.modulus.value() << ", " << std::setprecision(3)
      << seconds_since(start) << " s\n";
  return s;
}

// ---------------------------------------------------------------------------
// gpr-predict

struct PredictSummary {
  RmseMetrics rmse;
  std::int64_t modulus = 0;
};

inline PredictSummary run_predict_experiment(const ExperimentConfig& cfg,
                                             std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const Topology g = build_topology(cfg.network);
  const WeightTable w = metropolis_weights(g);
  const PreparedData data = prepare_data(cfg.data, cfg.run.seed);
  const auto parts = partition_evenly(data.train.rows(), g.size(), cfg.run.seed);

  const Hyperparams theta{cfg.gp.length_scale, cfg.gp.signal_std};
  ModelGrid models(g.size());
  for (std::size_t d = 0; d < data.targets.size(); ++d) {
    const auto datasets = agent_datasets(data.train, parts, d, cfg.gp.noise_variance);
    for (AgentId i = 0; i < g.size(); ++i) models[i].push_back(fit(datasets[i], theta));
  }
  States z0(g.size());
  for (AgentId i = 0; i < g.size(); ++i) {
    z0[i] = protocol2_initial_state(models[i], data.test_X, g.size());
  }
  const ConsensusParams params = resolve_params(cfg.consensus, w, z0);
  Network net(g, cfg.run.seed);
  const Protocol2Result r = run_protocol2(net, w, params, models, data.test_X);
  const ReferenceGrid ref = poe_reference(models, data.test_X);

  PredictSummary s{rmse_metrics(r.estimates, ref), params.modulus.value()};
  const auto dir = prepare_output(cfg.run.output);
  auto pred = open_record_file(dir / "predictions.csv",
                               "agent,point,output,mean,variance,reference_mean,"
                               "reference_variance");
  for (AgentId i = 0; i < g.size(); ++i) {
    for (std::size_t x = 0; x < ref.size(); ++x) {
      for (std::size_t d = 0; d < ref[x].size(); ++d) {
        const LocalEstimate& e = r.estimates[i][x][d];
        pred << i + 1 << ',' << x + 1 << ',' << d + 1 << ',' << e.mean << ',' << e.variance
             << ',' << ref[x][d].mean << ',' << ref[x][d].variance << '\n';
      }
    }
  }
  auto rmse = open_record_file(dir / "rmse.csv",
                               "agents,iterations,state_scale,modulus,rmse_mean,"
                               "rmse_variance");
  rmse << g.size() << ',' << params.iterations << ',' << params.state_scale << ','
       << s.modulus << ',' << s.rmse.mean << ',' << s.rmse.variance << '\n';
  log << "gpr-predict: " << ref.size() << " test points, T = " << params.iterations
      << ", q = 2^" << std::setprecision(4) << std::log2(static_cast<double>(s.modulus))
      << "\nRMSE mean " << std::setprecision(6) << s.rmse.mean << ", RMSE variance "
      << s.rmse.variance << ", " << std::setprecision(3) << seconds_since(start) << " s\n";
  return s;
}

// ---------------------------------------------------------------------------
// privacy-audit

inline AuditResult run_audit_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const Topology g = build_topology(cfg.network);
  AuditConfig a{g, cfg.privacy.coalition,
                initial_states(cfg.consensus, g.size(), cfg.run.seed)};
  a.state_scale = cfg.consensus.state_scale;
  a.weight_scale =
      cfg.consensus.weight_scale.value_or(metropolis_weights(a.graph).largest_weight_scale());
  a.modulus = Modulus(cfg.privacy.modulus);
  a.samples = cfg.privacy.samples;
  a.seed = cfg.run.seed;
  a.epsilon = cfg.privacy.epsilon;
  const AuditResult r = run_audit(a);

  const auto dir = prepare_output(cfg.run.output);
  auto out = open_record_file(dir / "audit.csv", "comparison,coordinate,tv,p_value");
  for (const auto& [name, rep] : {std::pair{"calibration", &r.calibration},
                                  std::pair{"real_vs_simulated", &r.real_vs_sim}}) {
    for (const CoordinateStat& c : rep->coordinates) {
      out << name << ',' << '"' << c.label << '"' << ',' << c.tv << ',' << c.p_value << '\n';
    }
  }
  auto line = [&](const char* name, const AuditReport& rep) {
    log << name << ": " << (rep.pass() ? "PASS" : "FAIL") << "  max TV "
        << std::setprecision(4) << rep.max_tv() << " (epsilon " << rep.epsilon
        << "), min p " << rep.min_p_value() << ", relation violations "
        << rep.first_violations << '/' << rep.second_violations << '\n';
  };
  log << "coalition of " << a.coalition.size() << ", collusion bound h = "
      << r.collusion_bound << ", " << r.real_vs_sim.coordinates.size()
      << " coordinates (" << r.probes << " leakage probes), " << a.samples
      << " views per population\n";
  if (r.exceeds_bound) log << "warning: coalition is larger than h\n";
  line("calibration", r.calibration);
  line("real vs simulated", r.real_vs_sim);
  log << std::setprecision(3) << seconds_since(start) << " s\n";
  return r;
}

}  // namespace ppgpr
