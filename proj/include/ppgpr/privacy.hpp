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

// Executable simulation-based privacy audit for one round of secure
// consensus.
//
// A coalition's view is what its members receive in a T = 1 run:
//   (A) s^i_{j→i}, j ∈ N_i⁺       shares received as aggregator (own one too)
//   (B) ζ_ij, j ∈ N_i             masked contributions
//   (C) s^j_{l→i}, j ∈ N_i, l ∈ N_i⁺ ∩ N_j⁺
//                                 shares received while neighbour j aggregates
// plus the shares each member generated and sent away (its coins), which a
// semi-honest agent also keeps. The simulator rebuilds such a view from the
// members' inputs and outputs only. The audit compares many real and simulated views coordinate by
// coordinate and checks the linear relations every view must satisfy.

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ppgpr/consensus.hpp"
#include "ppgpr/netsim.hpp"
#include "ppgpr/random.hpp"
#include "ppgpr/ring.hpp"
#include "ppgpr/topology.hpp"

namespace ppgpr {

struct Coalition {
  std::vector<AgentId> members;  // sorted, distinct

  Coalition() = default;
  Coalition(std::vector<AgentId> m, std::size_t agents) : members(std::move(m)) {
    std::sort(members.begin(), members.end());
    if (std::adjacent_find(members.begin(), members.end()) != members.end()) {
      throw std::invalid_argument("coalition lists an agent twice");
    }
    for (AgentId a : members) {
      if (a >= agents) {
        throw std::invalid_argument("coalition member " + std::to_string(a + 1) +
                                    " is not an agent");
      }
    }
  }

  bool contains(AgentId a) const {
    return std::binary_search(members.begin(), members.end(), a);
  }
  std::size_t size() const { return members.size(); }
};

/// One member's private input/output pair.
struct MemberIO {
  AgentId agent = 0;
  State input;   // z_i^ini
  State output;  // z_i(1)
};

struct MemberView {
  MemberIO io;
  std::vector<std::pair<AgentId, RingVector>> aggregator_shares;  // (A) by generator
  std::vector<std::pair<AgentId, RingVector>> masked;             // (B) by sender
  /// (C) keyed by (aggregator, generator).
  std::vector<std::tuple<AgentId, AgentId, RingVector>> neighbor_shares;
  /// Own shares sent to others, keyed by (aggregator, receiver).
  std::vector<std::tuple<AgentId, AgentId, RingVector>> coins;
};

namespace detail {

inline bool key_less(const std::tuple<AgentId, AgentId, RingVector>& a,
                     const std::tuple<AgentId, AgentId, RingVector>& b) {
  return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
}

inline std::size_t coin_count(const Topology& g, AgentId i) {
  std::size_t n = 0;
  for (AgentId a : g.closed_neighbors(i)) n += share_recipients(g, a, i).size() - 1;
  return n;
}

}  // namespace detail

struct CoalitionView {
  std::vector<MemberView> members;  // ascending agent id
};

/// Public parameters of the audited round.
struct RoundParams {
  double state_scale;
  Rational weight_scale;
  Modulus modulus;
};

// ---------------------------------------------------------------------------
// Real views.

/// Pulls the members' messages of round `round` out of a transcript.
inline CoalitionView extract_view(const Transcript& t, const Topology& g,
                                  const Coalition& c,
                                  std::span<const MemberIO> io,
                                  std::optional<std::size_t> round = {}) {
  if (io.size() != c.size()) {
    throw std::invalid_argument("one input/output pair per coalition member");
  }
  const auto msgs = t.messages();
  const std::size_t r = round.value_or(msgs.empty() ? 0 : msgs.front().round);
  CoalitionView view;
  for (std::size_t k = 0; k < c.size(); ++k) {
    const AgentId i = c.members[k];
    if (i >= g.size()) throw std::invalid_argument("coalition member not in graph");
    if (io[k].agent != i) throw std::invalid_argument("input/output order mismatch");
    MemberView mv{io[k], {}, {}, {}, {}};
    for (const Message& m : msgs) {
      if (m.round != r) continue;
      if (m.sender == i && m.receiver != i && m.kind == MessageKind::share) {
        mv.coins.emplace_back(m.aggregator, m.receiver, m.payload);
      }
      if (m.receiver != i) continue;
      if (m.kind == MessageKind::masked_contribution) {
        mv.masked.emplace_back(m.sender, m.payload);
      } else if (m.aggregator == i) {
        mv.aggregator_shares.emplace_back(m.sender, m.payload);
      } else {
        mv.neighbor_shares.emplace_back(m.aggregator, m.sender, m.payload);
      }
    }
    std::size_t expected_c = 0;
    for (AgentId j : g.neighbors(i)) expected_c += g.common_closed(i, j).size();
    if (mv.aggregator_shares.size() != g.degree(i) + 1 ||
        mv.masked.size() != g.degree(i) || mv.neighbor_shares.size() != expected_c ||
        mv.coins.size() != detail::coin_count(g, i)) {
      throw std::invalid_argument("transcript does not hold a complete round for agent " +
                                  std::to_string(i + 1));
    }
    std::sort(mv.aggregator_shares.begin(), mv.aggregator_shares.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::sort(mv.masked.begin(), mv.masked.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::sort(mv.neighbor_shares.begin(), mv.neighbor_shares.end(), detail::key_less);
    std::sort(mv.coins.begin(), mv.coins.end(), detail::key_less);
    view.members.push_back(std::move(mv));
  }
  return view;
}

// ---------------------------------------------------------------------------
// Simulator.

/// The residue r with y = z + L_w L_z r, found by rounding the exact
/// quotient and confirmed by replaying the forward map bit for bit.
inline std::vector<std::int64_t> recover_masked_sum(const State& input,
                                                    const State& output,
                                                    const RoundParams& p) {
  if (input.size() != output.size()) {
    throw std::invalid_argument("input and output dimensions differ");
  }
  std::vector<std::int64_t> r(input.size());
  const double unit = boost::rational_cast<double>(p.weight_scale) * p.state_scale;
  for (std::size_t k = 0; k < input.size(); ++k) {
    const double guess = std::round((output[k] - input[k]) / unit);
    bool found = false;
    for (double cand : {guess, guess - 1, guess + 1}) {
      if (std::abs(cand) > 0x1p62) continue;
      const auto c = static_cast<std::int64_t>(cand);
      if (!p.modulus.contains(c)) continue;
      if (input[k] + scaled_increment(c, p.weight_scale, p.state_scale) == output[k]) {
        r[k] = c;
        found = true;
        break;
      }
    }
    if (!found) {
      throw std::invalid_argument(
          "output of agent is not reachable from its input in one round");
    }
  }
  return r;
}

/// Sim_C((x_i, y_i)_{i∈C}). Uses only the members' inputs/outputs and public
/// parameters.
///
/// The members' own zero-sharings are drawn first, as real coins would be.
/// Shares from outsiders are uniform (step 2). ζ̂_ij is uniform (step 1)
/// unless j is also a member, in which case it is tied to j's shares so that
/// ζ_ij - φ_ij = w̄_ij Q(z_j) holds as in a real run. φ̂_ii is solved from the
/// update identity (step 3) and split over the shares that outsiders send to
/// i (step 4); members' shares to i are already fixed by their coins.
template <class Urbg>
CoalitionView simulate_view(const Topology& g, const Coalition& c,
                            std::span<const MemberIO> io, const RoundParams& p,
                            Urbg& rng) {
  if (io.size() != c.size()) {
    throw std::invalid_argument("one input/output pair per coalition member");
  }
  const ScaledWeights wbar(metropolis_weights(g), p.weight_scale);
  const Modulus q = p.modulus;
  const std::size_t dim = io.empty() ? 0 : io.front().input.size();
  CoalitionView view;
  view.members.resize(c.size());
  auto index_of = [&](AgentId a) {
    return static_cast<std::size_t>(
        std::lower_bound(c.members.begin(), c.members.end(), a) - c.members.begin());
  };

  // Coins: (aggregator, generator, receiver) -> share, for member generators.
  std::map<std::tuple<AgentId, AgentId, AgentId>, RingVector> coin;
  const RingVector zero(q, dim);
  for (std::size_t k = 0; k < c.size(); ++k) {
    const AgentId l = c.members[k];
    if (io[k].agent != l) throw std::invalid_argument("input/output order mismatch");
    if (io[k].input.size() != dim) throw std::invalid_argument("state dimensions differ");
    view.members[k].io = io[k];
    for (AgentId a : g.closed_neighbors(l)) {
      const auto recipients = share_recipients(g, a, l);
      ShareBundle b = share(zero, recipients.size(), rng);
      for (std::size_t s = 0; s < recipients.size(); ++s) {
        if (recipients[s] != l) {
          view.members[k].coins.emplace_back(a, recipients[s], b.shares[s]);
        }
        coin.emplace(std::tuple{a, l, recipients[s]}, std::move(b.shares[s]));
      }
    }
  }

  // Step 2.
  for (std::size_t k = 0; k < c.size(); ++k) {
    const AgentId i = c.members[k];
    for (AgentId j : g.neighbors(i)) {
      for (AgentId l : g.common_closed(i, j)) {
        view.members[k].neighbor_shares.emplace_back(
            j, l, c.contains(l) ? coin.at({j, l, i}) : sample_uniform(q, dim, rng));
      }
    }
  }

  for (std::size_t k = 0; k < c.size(); ++k) {
    const AgentId i = c.members[k];
    MemberView& mv = view.members[k];
    // Step 1.
    for (const auto& [j, w] : wbar.row(i)) {
      if (!c.contains(j)) {
        mv.masked.emplace_back(j, sample_uniform(q, dim, rng));
        continue;
      }
      RingAccumulator acc(q, dim);
      acc.add_integers(quantize(view.members[index_of(j)].io.input, p.state_scale), w);
      for (const auto& [agg, gen, s] : view.members[index_of(j)].neighbor_shares) {
        if (agg == i) acc.add(s);
      }
      mv.masked.emplace_back(j, acc.reduced());
    }
    // Step 3: φ̂_ii = r_i - Σ_j (ζ̂_ij - w̄_ij Q(z_i)) mod q.
    const auto r = recover_masked_sum(mv.io.input, mv.io.output, p);
    const auto qz = quantize(mv.io.input, p.state_scale);
    RingAccumulator phi(q, dim);
    phi.add_integers(r);
    for (std::size_t m = 0; m < mv.masked.size(); ++m) {
      phi.add(mv.masked[m].second, -1).add_integers(qz, wbar.row(i)[m].second);
    }
    // Step 4.
    std::vector<AgentId> free;
    for (AgentId l : g.closed_neighbors(i)) {
      if (c.contains(l)) {
        phi.add(coin.at({i, l, i}), -1);
      } else {
        free.push_back(l);
      }
    }
    std::vector<RingVector> split;
    if (!free.empty()) split = share(phi.reduced(), free.size(), rng).shares;
    std::size_t next = 0;
    for (AgentId l : g.closed_neighbors(i)) {
      mv.aggregator_shares.emplace_back(
          l, c.contains(l) ? coin.at({i, l, i}) : std::move(split[next++]));
    }
  }
  return view;
}

// ---------------------------------------------------------------------------
// Coordinates, relations and leakage probes.

/// Fixed flattening of a coalition view into residues, shared by real and
/// simulated views.
///
/// Besides the raw coordinates it appends one derived coordinate per
/// neighbour mask the coalition can reconstruct. A share s^i_{l→j} with j
/// outside the coalition is known when l is a member (its own coin), or
/// derivable when j is the only outsider holding a share of that
/// zero-sharing. If every share of φ_ij (i ∈ C, j ∉ C) is known or derivable,
/// ζ_ij - φ_ij = w̄_ij Q(z_j) is exposed. Within the collusion bound every
/// outsider-generated sharing has two outside holders, so no probe exists.
class ViewLayout {
 public:
  ViewLayout(const Topology& g, const Coalition& c, std::size_t dim,
             const RoundParams& p)
      : g_(g), c_(c), dim_(dim), params_(p),
        wbar_(metropolis_weights(g), p.weight_scale) {
    auto name = [](AgentId agg, AgentId gen, AgentId to) {
      return "s^" + std::to_string(agg + 1) + "_{" + std::to_string(gen + 1) + "->" +
             std::to_string(to + 1) + "}";
    };
    for (AgentId i : c_.members) {
      for (AgentId j : g_.closed_neighbors(i)) add_labels(name(i, j, i));
      for (AgentId j : g_.neighbors(i)) {
        add_labels("zeta_{" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "}");
      }
      for (AgentId j : g_.neighbors(i)) {
        for (AgentId l : g_.common_closed(i, j)) add_labels(name(j, l, i));
      }
      for (AgentId a : g_.closed_neighbors(i)) {
        for (AgentId r : share_recipients(g_, a, i)) {
          if (r != i) add_labels("coin " + name(a, i, r));
        }
      }
    }
    raw_ = labels_.size();
    for (AgentId i : c_.members) {
      for (AgentId j : g_.neighbors(i)) {
        if (c_.contains(j)) continue;
        bool derivable = true;
        for (AgentId l : g_.common_closed(i, j)) {
          derivable = derivable && (c_.contains(l) || sole_outsider(i, l) == j);
        }
        if (derivable) {
          probes_.push_back({i, j});
          add_labels("probe zeta_{" + std::to_string(i + 1) + "," +
                     std::to_string(j + 1) + "} - phi_{" + std::to_string(i + 1) +
                     "," + std::to_string(j + 1) + "}");
        }
      }
    }
  }

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t raw_coordinates() const { return raw_; }
  std::size_t probe_count() const { return probes_.size(); }
  Modulus modulus() const { return params_.modulus; }

  /// Residues in label order; probes last.
  std::vector<std::int64_t> flatten(const CoalitionView& v) const {
    std::vector<std::int64_t> out;
    out.reserve(labels_.size());
    auto put = [&](const RingVector& r) {
      if (r.size() != dim_) throw std::invalid_argument("view dimension mismatch");
      out.insert(out.end(), r.entries().begin(), r.entries().end());
    };
    for (const MemberView& m : v.members) {
      for (const auto& [j, s] : m.aggregator_shares) put(s);
      for (const auto& [j, z] : m.masked) put(z);
      for (const auto& [j, l, s] : m.neighbor_shares) put(s);
      for (const auto& [a, r, s] : m.coins) put(s);
    }
    if (out.size() != raw_) throw std::invalid_argument("view shape mismatch");
    for (const auto& [i, j] : probes_) {
      RingAccumulator acc(params_.modulus, dim_);
      acc.add(masked_of(v, i, j));
      for (AgentId l : g_.common_closed(i, j)) acc.add(outsider_share(v, i, l, j), -1);
      put(acc.reduced());
    }
    return out;
  }

  /// Update identity for every member, ζ_ij - Σ_l s^i_{l→j} = w̄_ij Q(z_j)
  /// for every pair of adjacent members, and zero sum of every sharing a
  /// member generated.
  bool relations_hold(const CoalitionView& v) const {
    const Modulus q = params_.modulus;
    for (const MemberView& m : v.members) {
      const AgentId i = m.io.agent;
      const auto qz = quantize(m.io.input, params_.state_scale);
      RingAccumulator acc(q, dim_);
      for (const auto& [j, s] : m.aggregator_shares) acc.add(s);
      for (const auto& [j, z] : m.masked) {
        acc.add(z).add_integers(qz, -wbar_.weight(i, j));
      }
      const RingVector s = acc.reduced();
      for (std::size_t k = 0; k < dim_; ++k) {
        const double y = m.io.input[k] +
                         scaled_increment(s[k], params_.weight_scale, params_.state_scale);
        if (y != m.io.output[k]) return false;
      }
      for (const auto& [j, z] : m.masked) {
        if (!c_.contains(j)) continue;
        const MemberView& other = member(v, j);
        RingAccumulator rel(q, dim_);
        rel.add(z).add_integers(quantize(other.io.input, params_.state_scale),
                                -wbar_.weight(i, j));
        for (const auto& [agg, gen, sh] : other.neighbor_shares) {
          if (agg == i) rel.add(sh, -1);
        }
        if (!rel.reduced().is_zero()) return false;
      }
      for (AgentId a : g_.closed_neighbors(i)) {
        RingAccumulator sum(q, dim_);
        sum.add(held_share(v, a, i, i));
        for (const auto& [agg, r, sh] : m.coins) {
          if (agg == a) sum.add(sh);
        }
        if (!sum.reduced().is_zero()) return false;
      }
    }
    return true;
  }

 private:
  void add_labels(const std::string& base) {
    for (std::size_t k = 0; k < dim_; ++k) {
      labels_.push_back(dim_ == 1 ? base : base + "[" + std::to_string(k + 1) + "]");
    }
  }

  /// The only holder outside the coalition of the zero-sharing that `gen`
  /// produces for aggregator `agg`, if there is exactly one.
  std::optional<AgentId> sole_outsider(AgentId agg, AgentId gen) const {
    std::optional<AgentId> out;
    for (AgentId r : share_recipients(g_, agg, gen)) {
      if (c_.contains(r)) continue;
      if (out) return std::nullopt;
      out = r;
    }
    return out;
  }

  const MemberView& member(const CoalitionView& v, AgentId a) const {
    for (const MemberView& m : v.members) {
      if (m.io.agent == a) return m;
    }
    throw std::invalid_argument("agent " + std::to_string(a + 1) + " not in view");
  }

  const RingVector& masked_of(const CoalitionView& v, AgentId i, AgentId j) const {
    for (const auto& [s, z] : member(v, i).masked) {
      if (s == j) return z;
    }
    throw std::invalid_argument("masked contribution missing from view");
  }

  /// Member r's received copy of s^agg_{gen→r}.
  const RingVector& held_share(const CoalitionView& v, AgentId agg, AgentId gen,
                               AgentId r) const {
    const MemberView& m = member(v, r);
    if (r == agg) {
      for (const auto& [j, s] : m.aggregator_shares) {
        if (j == gen) return s;
      }
    } else {
      for (const auto& [a, l, s] : m.neighbor_shares) {
        if (a == agg && l == gen) return s;
      }
    }
    throw std::invalid_argument("share missing from view");
  }

  /// s^agg_{gen→j} for an outsider j: the generator's coin when gen is a
  /// member, otherwise minus the sum of the coalition's shares of that
  /// sharing.
  RingVector outsider_share(const CoalitionView& v, AgentId agg, AgentId gen,
                            AgentId j) const {
    if (c_.contains(gen)) {
      for (const auto& [a, r, s] : member(v, gen).coins) {
        if (a == agg && r == j) return s;
      }
      throw std::invalid_argument("coin missing from view");
    }
    RingAccumulator acc(params_.modulus, dim_);
    for (AgentId r : share_recipients(g_, agg, gen)) {
      if (c_.contains(r)) acc.add(held_share(v, agg, gen, r), -1);
    }
    return acc.reduced();
  }

  Topology g_;
  Coalition c_;
  std::size_t dim_;
  RoundParams params_;
  ScaledWeights wbar_;
  std::vector<std::string> labels_;
  std::size_t raw_ = 0;
  std::vector<std::pair<AgentId, AgentId>> probes_;
};

// ---------------------------------------------------------------------------
// Statistics.

/// Per-coordinate histograms over Z_q plus a count of views that broke a
/// required relation. Only marginals are kept, so memory is O(coords · q).
class ViewSamples {
 public:
  static constexpr std::int64_t kMaxModulus = 4096;

  ViewSamples(std::vector<std::string> labels, Modulus q)
      : labels_(std::move(labels)), q_(q) {
    if (q.value() > kMaxModulus) {
      throw std::invalid_argument("empirical audit needs a small modulus (q <= 4096)");
    }
    counts_.assign(labels_.size(),
                   std::vector<std::uint32_t>(static_cast<std::size_t>(q.value()), 0));
  }

  void add(std::span<const std::int64_t> coords, bool relations_hold) {
    if (coords.size() != labels_.size()) {
      throw std::invalid_argument("sample has the wrong number of coordinates");
    }
    for (std::size_t k = 0; k < coords.size(); ++k) {
      ++counts_[k][static_cast<std::size_t>(coords[k] - q_.lower())];
    }
    ++samples_;
    if (!relations_hold) ++violations_;
  }

  /// Pools another sample set over the same coordinates.
  void merge(const ViewSamples& other) {
    if (other.labels_ != labels_ || other.q_ != q_) {
      throw std::invalid_argument("cannot merge different sample layouts");
    }
    for (std::size_t k = 0; k < counts_.size(); ++k) {
      for (std::size_t b = 0; b < counts_[k].size(); ++b) counts_[k][b] += other.counts_[k][b];
    }
    samples_ += other.samples_;
    violations_ += other.violations_;
  }

  const std::vector<std::string>& labels() const { return labels_; }
  Modulus modulus() const { return q_; }
  std::size_t size() const { return samples_; }
  std::size_t violations() const { return violations_; }
  std::span<const std::uint32_t> histogram(std::size_t coord) const {
    return counts_.at(coord);
  }

 private:
  std::vector<std::string> labels_;
  Modulus q_;
  std::vector<std::vector<std::uint32_t>> counts_;
  std::size_t samples_ = 0;
  std::size_t violations_ = 0;
};

struct CoordinateStat {
  std::string label;
  double tv = 0.0;       // total variation between the two marginals
  double p_value = 1.0;  // chi-square test of homogeneity
};

struct AuditReport {
  std::vector<CoordinateStat> coordinates;
  std::size_t first_samples = 0;
  std::size_t second_samples = 0;
  std::size_t first_violations = 0;
  std::size_t second_violations = 0;
  double epsilon = 0.01;

  double max_tv() const {
    double m = 0.0;
    for (const auto& c : coordinates) m = std::max(m, c.tv);
    return m;
  }

  double min_p_value() const {
    double m = 1.0;
    for (const auto& c : coordinates) m = std::min(m, c.p_value);
    return m;
  }

  bool pass() const {
    return max_tv() < epsilon && first_violations == 0 && second_violations == 0;
  }
};

inline constexpr std::size_t kMinAuditSamples = 10000;

/// Marginal TV distances and homogeneity p-values between two sample sets
/// over the same coordinates. Refuses sets smaller than 10^4.
inline AuditReport indistinguishability_test(const ViewSamples& first,
                                             const ViewSamples& second,
                                             double epsilon = 0.01) {
  if (first.size() < kMinAuditSamples || second.size() < kMinAuditSamples) {
    throw std::invalid_argument(
        "at least 10^4 views per population are needed; the empirical TV "
        "distance of smaller sets is dominated by sampling noise");
  }
  if (first.labels() != second.labels() || first.modulus() != second.modulus()) {
    throw std::invalid_argument("sample sets describe different views");
  }
  AuditReport r;
  r.first_samples = first.size();
  r.second_samples = second.size();
  r.first_violations = first.violations();
  r.second_violations = second.violations();
  r.epsilon = epsilon;
  const double n1 = static_cast<double>(first.size());
  const double n2 = static_cast<double>(second.size());
  for (std::size_t k = 0; k < first.labels().size(); ++k) {
    const auto a = first.histogram(k);
    const auto b = second.histogram(k);
    double tv = 0.0, stat = 0.0;
    std::size_t bins = 0;
    for (std::size_t v = 0; v < a.size(); ++v) {
      tv += std::abs(a[v] / n1 - b[v] / n2);
      const double col = static_cast<double>(a[v]) + b[v];
      if (col == 0) continue;
      ++bins;
      const double e1 = col * n1 / (n1 + n2);
      const double e2 = col * n2 / (n1 + n2);
      stat += (a[v] - e1) * (a[v] - e1) / e1 + (b[v] - e2) * (b[v] - e2) / e2;
    }
    double p = 1.0;
    if (bins > 1) {
      boost::math::chi_squared dist(static_cast<double>(bins - 1));
      p = boost::math::cdf(boost::math::complement(dist, stat));
    }
    r.coordinates.push_back({first.labels()[k], 0.5 * tv, p});
  }
  return r;
}

// ---------------------------------------------------------------------------
// End-to-end audit.

struct AuditConfig {
  Topology graph;
  std::vector<AgentId> coalition;
  States inputs;  // z^ini for every agent
  double state_scale = 1.0;
  Rational weight_scale{1};
  Modulus modulus{17};
  std::size_t samples = 100000;  // per population
  std::uint64_t seed = 1;
  double epsilon = 0.01;
};

struct AuditResult {
  std::size_t collusion_bound = 0;
  bool exceeds_bound = false;
  std::size_t probes = 0;
  AuditReport calibration;   // real vs independent real
  AuditReport real_vs_sim;

  bool pass() const { return calibration.pass() && real_vs_sim.pass(); }
};

/// Samples real views from independent one-round executions.
inline ViewSamples sample_real_views(const AuditConfig& cfg, const ViewLayout& layout,
                                     const Coalition& c, std::uint64_t seed,
                                     std::vector<MemberIO>* io_out = nullptr) {
  const WeightTable w = metropolis_weights(cfg.graph);
  ConsensusParams p{cfg.state_scale, cfg.weight_scale, cfg.modulus, 1, false};
  Network net(cfg.graph, seed);
  ViewSamples out(layout.labels(), cfg.modulus);
  std::vector<MemberIO> io;
  for (std::size_t n = 0; n < cfg.samples; ++n) {
    const Protocol1Result r = run_protocol1(net, w, p, cfg.inputs);
    if (io.empty()) {
      for (AgentId a : c.members) io.push_back({a, cfg.inputs[a], r.states[a]});
    }
    const CoalitionView v = extract_view(r.transcript, cfg.graph, c, io);
    out.add(layout.flatten(v), layout.relations_hold(v));
  }
  if (io_out) *io_out = io;
  return out;
}

inline AuditResult run_audit(const AuditConfig& cfg) {
  const Coalition c(cfg.coalition, cfg.graph.size());
  if (c.size() == 0) throw std::invalid_argument("empty coalition");
  detail::check_states(cfg.inputs, cfg.graph.size());
  const std::size_t dim = cfg.inputs.front().size();
  const RoundParams rp{cfg.state_scale, cfg.weight_scale, cfg.modulus};
  const ViewLayout layout(cfg.graph, c, dim, rp);

  AuditResult result;
  result.collusion_bound = collusion_bound(cfg.graph);
  result.exceeds_bound = c.size() > result.collusion_bound;
  result.probes = layout.probe_count();

  std::vector<MemberIO> io;
  const ViewSamples real = sample_real_views(cfg, layout, c, cfg.seed, &io);
  const ViewSamples control = sample_real_views(cfg, layout, c, cfg.seed + 1);

  ShareRng rng = ShareRng::from_seed(cfg.seed, 0x5157);  // simulator stream
  ViewSamples sim(layout.labels(), cfg.modulus);
  for (std::size_t n = 0; n < cfg.samples; ++n) {
    const CoalitionView v = simulate_view(cfg.graph, c, io, rp, rng);
    sim.add(layout.flatten(v), layout.relations_hold(v));
  }
  result.calibration = indistinguishability_test(real, control, cfg.epsilon);
  result.real_vs_sim = indistinguishability_test(real, sim, cfg.epsilon);
  return result;
}

}  // namespace ppgpr
