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

// Privacy-preserving distributed GPR on top of secure consensus: prediction
// (product of experts through one batched consensus run) and
// consensus-based hyperparameter optimisation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ppgpr/consensus.hpp"
#include "ppgpr/errors.hpp"
#include "ppgpr/gpr.hpp"
#include "ppgpr/netsim.hpp"

namespace ppgpr {

/// z^ini = M [V⁻¹ f̂ ; V⁻¹] for one test point and output.
struct PredictionInit {
  double weighted_mean = 0.0;
  double precision = 0.0;

  friend bool operator==(const PredictionInit&, const PredictionInit&) = default;
};

inline PredictionInit protocol2_init(const Posterior& p, std::size_t agents) {
  if (!(p.variance > 0.0) || !std::isfinite(p.variance) ||
      !std::isfinite(p.mean)) {
    throw std::invalid_argument("degenerate local posterior");
  }
  const double m = static_cast<double>(agents);
  return {m * p.mean / p.variance, m / p.variance};
}

inline PredictionInit protocol2_init(const LocalModel& model,
                                     const Eigen::Ref<const Eigen::VectorXd>& x,
                                     std::size_t agents) {
  return protocol2_init(model.posterior(x), agents);
}

struct LocalEstimate {
  double mean = 0.0;      // f̂_i^(T)
  double variance = 0.0;  // V_i^(T)
};

/// V = 1 / z_2, f̂ = V z_1. Fails instead of clamping when z_2 ≤ 0.
inline LocalEstimate protocol2_finalize(double z1, double z2) {
  if (!(z2 > 0.0)) {
    throw ConvergenceError(
        "consensus on the precision has not converged (z_2 = " +
        std::to_string(z2) + " <= 0); increase T or decrease L_z");
  }
  const double v = 1.0 / z2;
  return {v * z1, v};
}

/// [z_1(x_1,d_1), z_2(x_1,d_1), z_1(x_1,d_2), ...]: test point major,
/// output dimension minor.
inline State batch_initials(std::span<const PredictionInit> inits) {
  State out;
  out.reserve(2 * inits.size());
  for (const PredictionInit& p : inits) {
    out.push_back(p.weighted_mean);
    out.push_back(p.precision);
  }
  return out;
}

inline std::vector<PredictionInit> unbatch(std::span<const double> z) {
  if (z.size() % 2 != 0) {
    throw std::invalid_argument("batched state must have even length");
  }
  std::vector<PredictionInit> out(z.size() / 2);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {z[2 * k], z[2 * k + 1]};
  return out;
}

/// models[agent][output], all agents with the same number of outputs.
using ModelGrid = std::vector<std::vector<LocalModel>>;

/// estimates[agent][test point][output].
using EstimateGrid = std::vector<std::vector<std::vector<LocalEstimate>>>;

/// reference[test point][output].
using ReferenceGrid = std::vector<std::vector<PoEResult>>;

namespace detail {

inline std::size_t output_count(const ModelGrid& models) {
  if (models.empty() || models.front().empty()) {
    throw std::invalid_argument("need at least one agent and one output");
  }
  for (const auto& row : models) {
    if (row.size() != models.front().size()) {
      throw std::invalid_argument("agents disagree on the number of outputs");
    }
  }
  return models.front().size();
}

}  // namespace detail

/// Centralised product-of-experts over all agents' posteriors.
inline ReferenceGrid poe_reference(const ModelGrid& models,
                                   const Eigen::MatrixXd& test_points) {
  const std::size_t outputs = detail::output_count(models);
  ReferenceGrid ref(static_cast<std::size_t>(test_points.rows()),
                    std::vector<PoEResult>(outputs));
  std::vector<Posterior> experts(models.size());
  for (Eigen::Index x = 0; x < test_points.rows(); ++x) {
    for (std::size_t d = 0; d < outputs; ++d) {
      for (std::size_t i = 0; i < models.size(); ++i) {
        experts[i] = models[i][d].posterior(test_points.row(x).transpose());
      }
      ref[static_cast<std::size_t>(x)][d] = poe_aggregate(experts);
    }
  }
  return ref;
}

/// Agent i's batched initial state over all test points and outputs.
inline State protocol2_initial_state(const std::vector<LocalModel>& agent_models,
                                     const Eigen::MatrixXd& test_points,
                                     std::size_t agents) {
  std::vector<PredictionInit> inits;
  inits.reserve(static_cast<std::size_t>(test_points.rows()) *
                agent_models.size());
  for (Eigen::Index x = 0; x < test_points.rows(); ++x) {
    for (const LocalModel& m : agent_models) {
      inits.push_back(protocol2_init(m, test_points.row(x).transpose(), agents));
    }
  }
  return batch_initials(inits);
}

struct Protocol2Result {
  EstimateGrid estimates;
  Transcript transcript;
};

/// One batched secure consensus run followed by local finalisation.
inline Protocol2Result run_protocol2(Network& net, const WeightTable& w,
                                     const ConsensusParams& params,
                                     const ModelGrid& models,
                                     const Eigen::MatrixXd& test_points) {
  const std::size_t outputs = detail::output_count(models);
  const std::size_t agents = net.size();
  if (models.size() != agents) {
    throw std::invalid_argument("one model row per agent required");
  }
  if (test_points.rows() < 1) {
    throw std::invalid_argument("no test points");
  }
  States initial(agents);
  for (AgentId i = 0; i < agents; ++i) {
    initial[i] = protocol2_initial_state(models[i], test_points, agents);
  }
  Protocol1Result consensus = run_protocol1(net, w, params, initial);

  Protocol2Result out;
  out.transcript = std::move(consensus.transcript);
  out.estimates.resize(agents);
  for (AgentId i = 0; i < agents; ++i) {
    const auto z = unbatch(consensus.states[i]);
    auto& grid = out.estimates[i];
    grid.assign(static_cast<std::size_t>(test_points.rows()),
                std::vector<LocalEstimate>(outputs));
    for (std::size_t x = 0; x < grid.size(); ++x) {
      for (std::size_t d = 0; d < outputs; ++d) {
        const PredictionInit& zi = z[x * outputs + d];
        try {
          grid[x][d] = protocol2_finalize(zi.weighted_mean, zi.precision);
        } catch (const ConvergenceError& e) {
          throw ConvergenceError("agent " + std::to_string(i + 1) +
                                 ", test point " + std::to_string(x + 1) +
                                 ": " + e.what());
        }
      }
    }
  }
  return out;
}

struct RmseMetrics {
  double mean = 0.0;      // RMSE_f̂(T)
  double variance = 0.0;  // RMSE_V(T)
};

/// (1/M) Σ_i sqrt(|X|⁻¹ Σ_x ‖f̂(x) - f̂_i(x)‖²), and likewise for V.
inline RmseMetrics rmse_metrics(const EstimateGrid& estimates,
                                const ReferenceGrid& reference) {
  if (reference.empty()) throw std::invalid_argument("empty test set");
  if (estimates.empty()) throw std::invalid_argument("no agents");
  RmseMetrics r;
  for (const auto& agent : estimates) {
    if (agent.size() != reference.size()) {
      throw std::invalid_argument("estimate and reference test sets differ");
    }
    double sf = 0.0, sv = 0.0;
    for (std::size_t x = 0; x < reference.size(); ++x) {
      if (agent[x].size() != reference[x].size()) {
        throw std::invalid_argument("output dimensions differ");
      }
      for (std::size_t d = 0; d < reference[x].size(); ++d) {
        const double df = reference[x][d].mean - agent[x][d].mean;
        const double dv = reference[x][d].variance - agent[x][d].variance;
        sf += df * df;
        sv += dv * dv;
      }
    }
    const double n = static_cast<double>(reference.size());
    r.mean += std::sqrt(sf / n);
    r.variance += std::sqrt(sv / n);
  }
  r.mean /= static_cast<double>(estimates.size());
  r.variance /= static_cast<double>(estimates.size());
  return r;
}

// ---------------------------------------------------------------------------
// Hyperparameter consensus.

enum class HyperStep {
  /// Θ + η∇Θ log p, halving a coordinate that would turn non-positive.
  natural,
  /// log Θ + η Θ⊙∇Θ log p; consensus then averages log Θ.
  log,
};

struct HyperoptSettings {
  std::size_t iterations = 30;
  double step = 0.1;    // η
  double decay = 0.99;  // η ← decay·η after each iteration
  HyperStep mode = HyperStep::natural;
};

/// Θ_i(t+½) from a fresh fit at Θ_i(t).
inline Hyperparams gradient_half_step(const Dataset& data,
                                      const Hyperparams& theta, double eta,
                                      HyperStep mode, AgentId agent = 0) {
  const Eigen::Vector2d g = fit(data, theta).lml_gradient();
  if (!g.allFinite()) {
    throw ProtocolError("agent " + std::to_string(agent + 1) +
                        ": non-finite likelihood gradient at theta = (" +
                        std::to_string(theta.length_scale) + ", " +
                        std::to_string(theta.signal_std) + ")");
  }
  if (mode == HyperStep::log) {
    return {theta.length_scale * std::exp(eta * theta.length_scale * g[0]),
            theta.signal_std * std::exp(eta * theta.signal_std * g[1])};
  }
  auto step = [&](double v, double grad) {
    const double next = v + eta * grad;
    return next > 0.0 ? next : 0.5 * v;
  };
  return {step(theta.length_scale, g[0]), step(theta.signal_std, g[1])};
}

/// One iteration: local gradient step, then secure consensus with T = 1.
inline std::vector<Hyperparams> hyperparam_round(
    std::span<const Dataset> data, std::span<const Hyperparams> theta,
    double eta, HyperStep mode, Network& net, const WeightTable& w,
    ConsensusParams params) {
  if (data.size() != net.size() || theta.size() != net.size()) {
    throw std::invalid_argument("one dataset and one estimate per agent");
  }
  States half(net.size());
  for (AgentId i = 0; i < net.size(); ++i) {
    const Hyperparams h = gradient_half_step(data[i], theta[i], eta, mode, i);
    half[i] = mode == HyperStep::log
                  ? State{std::log(h.length_scale), std::log(h.signal_std)}
                  : State{h.length_scale, h.signal_std};
  }
  params.iterations = 1;
  const Protocol1Result r = run_protocol1(net, w, params, half);
  std::vector<Hyperparams> next(net.size());
  for (AgentId i = 0; i < net.size(); ++i) {
    const State& z = r.states[i];
    next[i] = mode == HyperStep::log ? Hyperparams{std::exp(z[0]), std::exp(z[1])}
                                     : Hyperparams{z[0], z[1]};
    if (!(next[i].length_scale > 0.0) || !(next[i].signal_std > 0.0)) {
      throw ProtocolError("agent " + std::to_string(i + 1) +
                          ": consensus produced a non-positive "
                          "hyperparameter; decrease L_z");
    }
  }
  return next;
}

/// max_{i,j} ‖Θ_i - Θ_j‖∞.
inline double hyper_spread(std::span<const Hyperparams> theta) {
  double s = 0.0;
  for (const Hyperparams& a : theta) {
    for (const Hyperparams& b : theta) {
      s = std::max({s, std::abs(a.length_scale - b.length_scale),
                    std::abs(a.signal_std - b.signal_std)});
    }
  }
  return s;
}

inline Hyperparams hyper_mean(std::span<const Hyperparams> theta) {
  Hyperparams m{0.0, 0.0};
  for (const Hyperparams& t : theta) {
    m.length_scale += t.length_scale;
    m.signal_std += t.signal_std;
  }
  m.length_scale /= static_cast<double>(theta.size());
  m.signal_std /= static_cast<double>(theta.size());
  return m;
}

/// Σ_i log p(D_i | Θ).
inline double total_lml(std::span<const Dataset> data, const Hyperparams& theta) {
  double s = 0.0;
  for (const Dataset& d : data) s += fit(d, theta).log_marginal_likelihood();
  return s;
}

struct HyperoptTrace {
  /// theta[t][i] for t = 0..iterations.
  std::vector<std::vector<Hyperparams>> theta;
  std::vector<double> spread;
  /// Σ_i log p(D_i | Θ̄(t)) with Θ̄ the agents' mean estimate.
  std::vector<double> total_lml_at_mean;
};

inline HyperoptTrace optimize_hyperparams(std::span<const Dataset> data,
                                          std::vector<Hyperparams> theta0,
                                          const HyperoptSettings& settings,
                                          Network& net, const WeightTable& w,
                                          const ConsensusParams& params) {
  HyperoptTrace trace;
  auto record = [&](std::vector<Hyperparams> th) {
    trace.spread.push_back(hyper_spread(th));
    trace.total_lml_at_mean.push_back(total_lml(data, hyper_mean(th)));
    trace.theta.push_back(std::move(th));
  };
  for (const Hyperparams& t : theta0) t.validate();
  record(theta0);
  double eta = settings.step;
  for (std::size_t t = 0; t < settings.iterations; ++t) {
    record(hyperparam_round(data, trace.theta.back(), eta, settings.mode, net,
                            w, params));
    eta *= settings.decay;
  }
  return trace;
}

}  // namespace ppgpr
