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

// Quantized Metropolis consensus and its masked (secure) variant.
//
// Both the plain quantized update and the secure update reduce one step to
// the integer S_i = Σ_j w̄_ij (Q(z_j) - Q(z_i)) (the secure one only sees it
// mod q) and then apply z_i += L_z·L_w·S_i through `scaled_increment`. When q
// is large enough that S_i never wraps, the two trajectories are therefore
// identical bit for bit, not merely close.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ppgpr/errors.hpp"
#include "ppgpr/netsim.hpp"
#include "ppgpr/ring.hpp"
#include "ppgpr/topology.hpp"

namespace ppgpr {

using State = std::vector<double>;
using States = std::vector<State>;

struct ConsensusParams {
  double state_scale;     // L_z
  Rational weight_scale;  // L_w
  Modulus modulus;
  std::size_t iterations = 1;
  /// Refuse q below the wrap-around bound.
  bool strict = true;
  /// Public a-priori bound B on ‖z_i^ini‖∞. When set the modulus check uses
  /// it instead of the true initial values.
  std::optional<double> input_bound;
};

/// Q(z) = round(z / L_z), ties away from zero.
inline std::vector<std::int64_t> quantize(std::span<const double> z,
                                          double state_scale) {
  if (!(state_scale > 0.0) || !std::isfinite(state_scale)) {
    throw std::invalid_argument("state scale L_z must be positive and finite");
  }
  // Leaves room for weight products inside the 128-bit accumulator.
  constexpr double kLimit = 0x1p62;
  std::vector<std::int64_t> out(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (!std::isfinite(z[k])) {
      throw std::invalid_argument("cannot quantize a non-finite state");
    }
    const double r = std::round(z[k] / state_scale);
    if (std::abs(r) >= kLimit) {
      throw std::invalid_argument("state too large for scale L_z");
    }
    out[k] = static_cast<std::int64_t>(r);
  }
  return out;
}

/// L_w·L_z·s with L_w·s formed exactly before the single conversion.
inline double scaled_increment(Int128 s, Rational weight_scale,
                               double state_scale) {
  const Int128 num = detail::checked_mul(s, weight_scale.numerator());
  return static_cast<double>(num) /
         static_cast<double>(weight_scale.denominator()) * state_scale;
}

namespace detail {

inline void check_states(const States& z, std::size_t agents) {
  if (z.size() != agents) {
    throw std::invalid_argument("expected " + std::to_string(agents) +
                                " agent states, got " +
                                std::to_string(z.size()));
  }
  for (const State& s : z) {
    if (s.size() != z.front().size()) {
      throw std::invalid_argument("agent states differ in dimension");
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Reference dynamics.

/// Exact real-valued Metropolis step z(t+1) = W z(t).
inline States plain_update(const States& z, const WeightTable& w) {
  detail::check_states(z, w.size());
  States next(z.size());
  for (AgentId i = 0; i < z.size(); ++i) {
    const double self = boost::rational_cast<double>(w.self_weight(i));
    next[i].resize(z[i].size());
    for (std::size_t k = 0; k < z[i].size(); ++k) {
      double v = self * z[i][k];
      for (const auto& [j, wij] : w.row(i)) {
        v += boost::rational_cast<double>(wij) * z[j][k];
      }
      next[i][k] = v;
    }
  }
  return next;
}

/// Quantized step z_i += L_z Σ_j w_ij (Q(z_j) - Q(z_i)), no masking.
inline States plain_quantized_update(const States& z, const ScaledWeights& w,
                                     double state_scale) {
  detail::check_states(z, w.size());
  std::vector<std::vector<std::int64_t>> q(z.size());
  for (AgentId i = 0; i < z.size(); ++i) q[i] = quantize(z[i], state_scale);
  States next = z;
  for (AgentId i = 0; i < z.size(); ++i) {
    for (std::size_t k = 0; k < z[i].size(); ++k) {
      Int128 s = 0;
      for (const auto& [j, wbar] : w.row(i)) {
        s = detail::checked_add(
            s, detail::checked_mul(wbar, Int128{q[j][k]} - q[i][k]));
      }
      next[i][k] += scaled_increment(s, w.scale(), state_scale);
    }
  }
  return next;
}

inline State average(const States& z) {
  if (z.empty()) return {};
  State avg(z.front().size(), 0.0);
  for (const State& s : z) {
    for (std::size_t k = 0; k < avg.size(); ++k) avg[k] += s[k];
  }
  for (double& v : avg) v /= static_cast<double>(z.size());
  return avg;
}

inline double max_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// max_i ‖z_i - z^avg‖∞.
inline double max_disagreement(const States& z, std::span<const double> avg) {
  double m = 0.0;
  for (const State& s : z) {
    for (std::size_t k = 0; k < s.size(); ++k) {
      m = std::max(m, std::abs(s[k] - avg[k]));
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Modulus bound.

/// z̃max = max_i ‖z_i^ini - z^avg‖∞ and ‖z^avg‖∞.
struct ModulusInputs {
  double spread_max = 0.0;
  double average_norm = 0.0;

  static ModulusInputs ground_truth(const States& initial) {
    const State avg = average(initial);
    return {max_disagreement(initial, avg), max_norm(avg)};
  }

  /// From a public bound B ≥ ‖z_i^ini‖∞: z̃max ≤ 2B and ‖z^avg‖∞ ≤ B.
  static ModulusInputs deployment(double bound) {
    if (!(bound >= 0.0) || !std::isfinite(bound)) {
      throw std::invalid_argument("input bound must be finite and >= 0");
    }
    return {2.0 * bound, bound};
  }
};

/// Safety margin on the numerically computed λ: 1% of the gap 1 - λ.
inline double padded_radius(double lambda) {
  return lambda + 0.01 * (1.0 - lambda);
}

/// Right-hand side of the wrap-around bound
///   (M / 2L_w)(1 + M‖W-I‖/(1-λ) + 2(√M z̃max + ‖z^avg‖)/L_z).
inline double modulus_bound(const WeightTable& w, double state_scale,
                            Rational weight_scale, const ModulusInputs& in) {
  const double lambda = w.consensus_radius();
  if (!(lambda < 1.0)) {
    throw std::logic_error("consensus radius >= 1 on a connected graph");
  }
  if (!(state_scale > 0.0) || weight_scale <= 0) {
    throw std::invalid_argument("scale factors must be positive");
  }
  const double m = static_cast<double>(w.size());
  const double lam = padded_radius(lambda);
  const double lw = boost::rational_cast<double>(weight_scale);
  return m / (2.0 * lw) *
         (1.0 + m * w.deviation_norm() / (1.0 - lam) +
          2.0 * (std::sqrt(m) * in.spread_max + in.average_norm) / state_scale);
}

/// Smallest integer q strictly above `modulus_bound`.
inline std::int64_t min_modulus(const WeightTable& w, double state_scale,
                                Rational weight_scale,
                                const ModulusInputs& in) {
  const double rhs = modulus_bound(w, state_scale, weight_scale, in);
  if (!(rhs < static_cast<double>(Modulus::kMax))) {
    throw std::invalid_argument(
        "required modulus exceeds 2^62; increase L_z or L_w");
  }
  return static_cast<std::int64_t>(std::floor(rhs)) + 1;
}

/// ‖z(t) - 1⊗z^avg‖∞ ≤ √M z̃max + L_z M ‖W-I‖∞ / (2(1-λ)).
inline double disagreement_bound(const WeightTable& w, double state_scale,
                                 double spread_max) {
  const double m = static_cast<double>(w.size());
  return std::sqrt(m) * spread_max +
         state_scale * m * w.deviation_norm() /
             (2.0 * (1.0 - w.consensus_radius()));
}

// ---------------------------------------------------------------------------
// Masks.

/// Holders of the zero-sharing that `generator` produces for `aggregator`:
/// N_i⁺ when the generator is the aggregator, N_i⁺ ∩ N_j⁺ otherwise.
inline std::vector<AgentId> share_recipients(const Topology& g,
                                             AgentId aggregator,
                                             AgentId generator) {
  if (generator == aggregator) return g.closed_neighbors(aggregator);
  return g.common_closed(aggregator, generator);
}

/// Refuses aggregators with an incident edge lacking a common neighbour;
/// there the neighbour's mask would be recoverable by the aggregator.
inline void require_common_neighbors(const Topology& g, AgentId aggregator) {
  for (AgentId j : g.neighbors(aggregator)) {
    if (g.common_closed(aggregator, j).size() < 3) {
      throw std::invalid_argument("edge " + edge_label(aggregator, j) +
                                  " has no common neighbour; masks would "
                                  "leak");
    }
  }
}

struct MaskSet {
  AgentId aggregator = 0;
  RingVector self;  // φ_ii
  std::vector<std::pair<AgentId, RingVector>> neighbor;  // φ_ij, j ascending

  const RingVector& for_neighbor(AgentId j) const {
    for (const auto& [k, v] : neighbor) {
      if (k == j) return v;
    }
    throw std::invalid_argument("no mask for agent " + std::to_string(j + 1));
  }

  RingVector total() const {
    RingAccumulator acc(self.modulus(), self.size());
    acc.add(self);
    for (const auto& [j, v] : neighbor) acc.add(v);
    return acc.reduced();
  }
};

/// Runs the whole zero-sharing exchange for one aggregator in one go,
/// drawing each generator's shares from `rng_of(generator)`. The networked
/// protocol performs the same steps through `Network`.
template <class RngOf>
MaskSet generate_masks(const Topology& g, AgentId aggregator, Modulus q,
                       std::size_t p, RngOf&& rng_of) {
  require_common_neighbors(g, aggregator);
  const std::vector<AgentId> closed = g.closed_neighbors(aggregator);
  std::vector<RingAccumulator> held(closed.size(), RingAccumulator(q, p));
  auto slot = [&](AgentId a) {
    return static_cast<std::size_t>(
        std::lower_bound(closed.begin(), closed.end(), a) - closed.begin());
  };
  const RingVector zero(q, p);
  for (AgentId gen : closed) {
    const auto recipients = share_recipients(g, aggregator, gen);
    ShareBundle bundle = share(zero, recipients.size(), rng_of(gen));
    for (std::size_t k = 0; k < recipients.size(); ++k) {
      held[slot(recipients[k])].add(bundle.shares[k]);
    }
  }
  MaskSet masks{aggregator, held[slot(aggregator)].reduced(), {}};
  for (AgentId j : g.neighbors(aggregator)) {
    masks.neighbor.emplace_back(j, held[slot(j)].reduced());
  }
  return masks;
}

/// A mask that can be spent once.
class OneTimeMask {
 public:
  explicit OneTimeMask(RingVector mask) : mask_(std::move(mask)) {}

  bool spent() const { return spent_; }

  const RingVector& consume() {
    if (spent_) throw ProtocolError("masking term reused within a round");
    spent_ = true;
    return mask_;
  }

 private:
  RingVector mask_;
  bool spent_ = false;
};

struct AgentState {
  AgentId id = 0;
  std::size_t round = 0;
  State z;
};

struct MaskedMessage {
  RingVector zeta;
  AgentId sender = 0;
  AgentId aggregator = 0;
  std::size_t round = 0;
};

/// ζ_ij = w̄_ij Q(z_j) + φ_ij mod q.
inline MaskedMessage masked_contribution(const AgentState& sender,
                                         AgentId aggregator,
                                         std::int64_t scaled_weight,
                                         OneTimeMask& mask,
                                         double state_scale) {
  const auto qz = quantize(sender.z, state_scale);
  const RingVector& phi = mask.consume();
  if (phi.size() != qz.size()) {
    throw std::invalid_argument("mask and state dimensions differ");
  }
  RingAccumulator acc(phi.modulus(), phi.size());
  acc.add(phi).add_integers(qz, scaled_weight);
  return {acc.reduced(), sender.id, aggregator, sender.round};
}

/// The integer (φ_ii + Σ_j (ζ_ij - w̄_ij Q(z_i))) mod q.
inline RingVector masked_sum(
    const AgentState& agent, std::span<const MaskedMessage> messages,
    const RingVector& self_mask,
    std::span<const std::pair<AgentId, std::int64_t>> weights,
    double state_scale) {
  const auto qz = quantize(agent.z, state_scale);
  RingAccumulator acc(self_mask.modulus(), self_mask.size());
  acc.add(self_mask);
  std::vector<bool> used(messages.size(), false);
  for (const auto& [j, wbar] : weights) {
    std::size_t found = messages.size();
    for (std::size_t m = 0; m < messages.size(); ++m) {
      const MaskedMessage& msg = messages[m];
      if (msg.sender != j) continue;
      if (found != messages.size()) {
        throw ProtocolError("duplicate masked contribution from agent " +
                            std::to_string(j + 1));
      }
      found = m;
    }
    if (found == messages.size()) {
      throw ProtocolError("missing masked contribution from agent " +
                          std::to_string(j + 1) + " to agent " +
                          std::to_string(agent.id + 1));
    }
    const MaskedMessage& msg = messages[found];
    if (msg.aggregator != agent.id || msg.round != agent.round) {
      throw ProtocolError("masked contribution from agent " +
                          std::to_string(j + 1) +
                          " belongs to another aggregator or round");
    }
    used[found] = true;
    acc.add(msg.zeta).add_integers(qz, -wbar);
  }
  if (std::find(used.begin(), used.end(), false) != used.end()) {
    throw ProtocolError("masked contribution from a non-neighbour");
  }
  return acc.reduced();
}

/// z_i(t+1) = z_i + L_w L_z ((φ_ii + Σ_j (ζ_ij - w̄_ij Q(z_i))) mod q).
inline AgentState secure_update(
    const AgentState& agent, std::span<const MaskedMessage> messages,
    const RingVector& self_mask,
    std::span<const std::pair<AgentId, std::int64_t>> weights,
    const ConsensusParams& params) {
  const RingVector s =
      masked_sum(agent, messages, self_mask, weights, params.state_scale);
  AgentState next{agent.id, agent.round + 1, agent.z};
  for (std::size_t k = 0; k < next.z.size(); ++k) {
    next.z[k] += scaled_increment(s[k], params.weight_scale, params.state_scale);
  }
  return next;
}

// ---------------------------------------------------------------------------
// Protocol 1 over the simulated network.

struct Protocol1Result {
  States states;
  /// z(0), ..., z(T) when requested, otherwise empty.
  std::vector<States> trajectory;
  Transcript transcript;
};

/// Throws ModulusTooSmall in strict mode, invalid_argument for graphs that
/// violate the common-neighbour assumption or weights that do not scale.
inline void check_protocol1(const Topology& g, const WeightTable& w,
                            const ConsensusParams& params,
                            const States& initial) {
  detail::check_states(initial, g.size());
  if (params.iterations > 0 && g.size() > 1) {
    if (auto bad = validate_common_neighbor(g); !bad.empty()) {
      throw std::invalid_argument(
          "edge " + edge_label(bad[0].first, bad[0].second) +
          " has no common neighbour");
    }
  }
  if (!(params.state_scale > 0.0) || !std::isfinite(params.state_scale)) {
    throw std::invalid_argument("state scale L_z must be positive and finite");
  }
  (void)ScaledWeights(w, params.weight_scale);  // integrality check
  if (params.strict) {
    const ModulusInputs in =
        params.input_bound ? ModulusInputs::deployment(*params.input_bound)
                           : ModulusInputs::ground_truth(initial);
    if (params.input_bound) {
      for (const State& s : initial) {
        if (max_norm(s) > *params.input_bound) {
          throw std::invalid_argument("initial state exceeds input bound");
        }
      }
    }
    const std::int64_t need =
        min_modulus(w, params.state_scale, params.weight_scale, in);
    if (params.modulus.value() < need) {
      throw ModulusTooSmall(params.modulus.value(), need);
    }
  }
}

/// Secure distributed average consensus. Every iteration is one network
/// round with three phases: zero-sharing, masked contributions, update.
inline Protocol1Result run_protocol1(Network& net, const WeightTable& w,
                                     const ConsensusParams& params,
                                     const States& initial,
                                     bool record_trajectory = false) {
  const Topology& g = net.topology();
  check_protocol1(g, w, params, initial);
  const ScaledWeights wbar(w, params.weight_scale);
  const Modulus q = params.modulus;
  const std::size_t p = initial.empty() ? 0 : initial.front().size();

  std::vector<AgentState> agents(g.size());
  for (AgentId i = 0; i < g.size(); ++i) agents[i] = {i, 0, initial[i]};

  // Zero-sharings: agent a acts as generator for every aggregator in N_a⁺.
  const AgentPhase share_phase = [&](AgentId a, std::size_t, Network& n) {
    const RingVector zero(q, p);
    for (AgentId i : g.closed_neighbors(a)) {
      const auto recipients = share_recipients(g, i, a);
      ShareBundle b = share(zero, recipients.size(), n.rng(a));
      for (std::size_t k = 0; k < recipients.size(); ++k) {
        n.send(recipients[k], MessageKind::share, i, std::move(b.shares[k]));
      }
    }
  };

  auto mask_from_inbox = [&](AgentId holder, AgentId aggregator,
                             const Network& n) {
    const auto expected = share_recipients(g, aggregator, holder);
    RingAccumulator acc(q, p);
    std::size_t count = 0;
    for (const Message& m : n.inbox(holder)) {
      if (m.kind == MessageKind::share && m.aggregator == aggregator) {
        acc.add(m.payload);
        ++count;
      }
    }
    if (count != expected.size()) {
      throw ProtocolError("agent " + std::to_string(holder + 1) + " holds " +
                          std::to_string(count) + " of " +
                          std::to_string(expected.size()) +
                          " shares for aggregator " +
                          std::to_string(aggregator + 1));
    }
    return acc.reduced();
  };

  const AgentPhase contribute_phase = [&](AgentId j, std::size_t,
                                          Network& n) {
    for (const auto& [i, weight] : wbar.row(j)) {
      OneTimeMask mask(mask_from_inbox(j, i, n));
      // w̄ is symmetric, so w̄_ij = w̄_ji.
      MaskedMessage msg = masked_contribution(agents[j], i, weight, mask,
                                              params.state_scale);
      n.send(i, MessageKind::masked_contribution, i, std::move(msg.zeta));
    }
  };

  const AgentPhase update_phase = [&](AgentId i, std::size_t, Network& n) {
    const RingVector self_mask = mask_from_inbox(i, i, n);
    std::vector<MaskedMessage> inbox;
    for (const Message& m : n.inbox(i)) {
      if (m.kind == MessageKind::masked_contribution) {
        inbox.push_back({m.payload, m.sender, m.aggregator, agents[i].round});
      }
    }
    agents[i] = secure_update(agents[i], inbox, self_mask, wbar.row(i), params);
  };

  const std::vector<AgentPhase> phases{share_phase, contribute_phase,
                                       update_phase};
  Protocol1Result result;
  auto snapshot = [&] {
    States z(agents.size());
    for (AgentId i = 0; i < agents.size(); ++i) z[i] = agents[i].z;
    return z;
  };
  net.take_transcript();  // the result carries this run's rounds only
  if (record_trajectory) result.trajectory.push_back(snapshot());
  for (std::size_t t = 0; t < params.iterations; ++t) {
    net.run_rounds(1, phases);
    if (record_trajectory) result.trajectory.push_back(snapshot());
  }
  result.states = snapshot();
  result.transcript = net.take_transcript();
  return result;
}

}  // namespace ppgpr
