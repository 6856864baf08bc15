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

// Undirected communication graph, Metropolis weights and the graph-derived
// constants (W, λ, ‖W - I‖∞, h, per-round message counts).
//
// Agents are 0-based internally. The edge-list file format and every
// user-facing message are 1-based.

#include <Eigen/Dense>
#include <boost/rational.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ppgpr {

using AgentId = std::size_t;
using Rational = boost::rational<std::int64_t>;

/// Unordered agent pair stored with first < second.
struct Edge {
  AgentId first;
  AgentId second;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline std::string edge_label(AgentId i, AgentId j) {
  return "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
}

inline std::vector<AgentId> sorted_intersection(std::span<const AgentId> a,
                                                std::span<const AgentId> b) {
  std::vector<AgentId> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
  return out;
}

class Topology {
 public:
  Topology(std::size_t agents, std::vector<Edge> edges)
      : agents_(agents), neighbors_(agents) {
    if (agents == 0) {
      throw std::invalid_argument("topology needs at least one agent");
    }
    std::set<Edge> seen;
    for (Edge e : edges) {
      if (e.first == e.second) {
        throw std::invalid_argument("self-loop at agent " +
                                    std::to_string(e.first + 1));
      }
      if (e.first >= agents || e.second >= agents) {
        throw std::invalid_argument("edge " + edge_label(e.first, e.second) +
                                    " references an agent outside 1.." +
                                    std::to_string(agents));
      }
      if (e.first > e.second) std::swap(e.first, e.second);
      if (!seen.insert(e).second) {
        throw std::invalid_argument("duplicate edge " +
                                    edge_label(e.first, e.second));
      }
      neighbors_[e.first].push_back(e.second);
      neighbors_[e.second].push_back(e.first);
    }
    edges_.assign(seen.begin(), seen.end());
    for (auto& n : neighbors_) std::sort(n.begin(), n.end());
  }

  static Topology complete(std::size_t m) {
    std::vector<Edge> edges;
    for (AgentId i = 0; i < m; ++i) {
      for (AgentId j = i + 1; j < m; ++j) edges.push_back({i, j});
    }
    return Topology(m, std::move(edges));
  }

  static Topology cycle(std::size_t m) {
    if (m < 3) throw std::invalid_argument("cycle needs at least 3 agents");
    std::vector<Edge> edges;
    for (AgentId i = 0; i < m; ++i) edges.push_back({i, (i + 1) % m});
    return Topology(m, std::move(edges));
  }

  static Topology path(std::size_t m) {
    std::vector<Edge> edges;
    for (AgentId i = 0; i + 1 < m; ++i) edges.push_back({i, i + 1});
    return Topology(m, std::move(edges));
  }

  /// Agents on a cycle, each linked to the k/2 nearest agents on either side.
  static Topology ring_with_chords(std::size_t m, std::size_t k) {
    if (k % 2 != 0 || k < 2 || k >= m) {
      throw std::invalid_argument(
          "ring_with_chords needs an even neighbour count 2 <= k < M");
    }
    std::set<Edge> edges;
    for (AgentId i = 0; i < m; ++i) {
      for (std::size_t d = 1; d <= k / 2; ++d) {
        AgentId j = (i + d) % m;
        edges.insert({std::min(i, j), std::max(i, j)});
      }
    }
    return Topology(m, {edges.begin(), edges.end()});
  }

  std::size_t size() const { return agents_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const AgentId> neighbors(AgentId i) const { return neighbors_.at(i); }
  std::size_t degree(AgentId i) const { return neighbors_.at(i).size(); }

  std::size_t max_degree() const {
    std::size_t d = 0;
    for (const auto& n : neighbors_) d = std::max(d, n.size());
    return d;
  }

  bool adjacent(AgentId i, AgentId j) const {
    const auto& n = neighbors_.at(i);
    return std::binary_search(n.begin(), n.end(), j);
  }

  /// N_i⁺ = N_i ∪ {i}, sorted.
  std::vector<AgentId> closed_neighbors(AgentId i) const {
    std::vector<AgentId> out(neighbors_.at(i));
    out.insert(std::upper_bound(out.begin(), out.end(), i), i);
    return out;
  }

  /// N_i⁺ ∩ N_j⁺, sorted.
  std::vector<AgentId> common_closed(AgentId i, AgentId j) const {
    auto a = closed_neighbors(i);
    auto b = closed_neighbors(j);
    return sorted_intersection(a, b);
  }

  bool connected() const {
    std::vector<bool> seen(agents_, false);
    std::vector<AgentId> stack{0};
    seen[0] = true;
    std::size_t reached = 1;
    while (!stack.empty()) {
      AgentId u = stack.back();
      stack.pop_back();
      for (AgentId v : neighbors_[u]) {
        if (!seen[v]) {
          seen[v] = true;
          ++reached;
          stack.push_back(v);
        }
      }
    }
    return reached == agents_;
  }

  Topology with_edge(AgentId i, AgentId j) const {
    std::vector<Edge> e(edges_);
    e.push_back({std::min(i, j), std::max(i, j)});
    return Topology(agents_, std::move(e));
  }

 private:
  std::size_t agents_;
  std::vector<Edge> edges_;
  std::vector<std::vector<AgentId>> neighbors_;
};

// ---------------------------------------------------------------------------
// Graph file: first token M, then 1-based "i j" pairs, whitespace separated.

inline Topology read_graph(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t agents = 0;
  bool have_count = false;
  std::vector<Edge> edges;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::vector<long long> values;
    long long v;
    while (fields >> v) values.push_back(v);
    if (!fields.eof()) {
      throw std::invalid_argument("graph line " + std::to_string(line_no) +
                                  ": expected integers");
    }
    if (values.empty()) continue;
    if (!have_count) {
      if (values.size() != 1 || values[0] < 1) {
        throw std::invalid_argument("graph line " + std::to_string(line_no) +
                                    ": expected the agent count M");
      }
      agents = static_cast<std::size_t>(values[0]);
      have_count = true;
      continue;
    }
    if (values.size() != 2 || values[0] < 1 || values[1] < 1) {
      throw std::invalid_argument("graph line " + std::to_string(line_no) +
                                  ": expected a 1-based edge \"i j\"");
    }
    edges.push_back({static_cast<AgentId>(values[0] - 1),
                     static_cast<AgentId>(values[1] - 1)});
  }
  if (!have_count) throw std::invalid_argument("graph file is empty");
  return Topology(agents, std::move(edges));
}

inline Topology load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open graph file " + path);
  return read_graph(in);
}

inline void write_graph(std::ostream& out, const Topology& g) {
  out << g.size() << '\n';
  for (const Edge& e : g.edges()) {
    out << e.first + 1 << ' ' << e.second + 1 << '\n';
  }
}

// ---------------------------------------------------------------------------
// Metropolis weights.

namespace detail {

/// ρ(W - 11ᵀ/M) by power iteration on the mean-free subspace.
inline double consensus_radius_power(const Eigen::MatrixXd& w,
                                     int max_iterations = 20000,
                                     double tolerance = 1e-13) {
  const Eigen::Index m = w.rows();
  if (m == 1) return 0.0;
  Eigen::VectorXd v(m);
  std::uint64_t state = 0x9e3779b97f4a7c15ULL;
  for (Eigen::Index k = 0; k < m; ++k) {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    v[k] = static_cast<double>(state >> 11) * 0x1.0p-53 - 0.5;
  }
  v.array() -= v.mean();
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    // W is symmetric; iterate with W² so negative eigenvalues do not
    // oscillate the estimate.
    Eigen::VectorXd next = w * (w * v);
    next.array() -= next.mean();
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    const double value = std::sqrt(norm);
    next /= norm;
    if (std::abs(value - estimate) < tolerance) return value;
    estimate = value;
    v = next;
  }
  return estimate;
}

inline double consensus_radius_dense(const Eigen::MatrixXd& w) {
  const Eigen::Index m = w.rows();
  Eigen::MatrixXd centred =
      w - Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      centred, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigen-decomposition of W failed");
  }
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace detail

class WeightTable {
 public:
  static constexpr std::size_t kDenseLimit = 2000;

  explicit WeightTable(const Topology& g)
      : agents_(g.size()),
        weights_(g.size()),
        self_(g.size(), Rational(1)),
        matrix_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.size()),
                                      static_cast<Eigen::Index>(g.size()))) {
    for (AgentId i = 0; i < agents_; ++i) {
      for (AgentId j : g.neighbors(i)) {
        const auto d = static_cast<std::int64_t>(
            std::max(g.degree(i), g.degree(j)));
        Rational w(1, 2 * (1 + d));
        weights_[i].emplace_back(j, w);
        self_[i] -= w;
        matrix_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            boost::rational_cast<double>(w);
      }
      matrix_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) =
          boost::rational_cast<double>(self_[i]);
    }
    radius_ = agents_ <= kDenseLimit ? detail::consensus_radius_dense(matrix_)
                                     : detail::consensus_radius_power(matrix_);
    Eigen::MatrixXd dev =
        matrix_ - Eigen::MatrixXd::Identity(matrix_.rows(), matrix_.cols());
    deviation_norm_ = agents_ == 0 ? 0.0 : dev.cwiseAbs().rowwise().sum().maxCoeff();
  }

  std::size_t size() const { return agents_; }

  Rational weight(AgentId i, AgentId j) const {
    for (const auto& [k, w] : weights_.at(i)) {
      if (k == j) return w;
    }
    throw std::invalid_argument("no edge " + edge_label(i, j));
  }

  /// (neighbour, w_ij) pairs for agent i, neighbours ascending.
  std::span<const std::pair<AgentId, Rational>> row(AgentId i) const {
    return weights_.at(i);
  }

  Rational self_weight(AgentId i) const { return self_.at(i); }

  const Eigen::MatrixXd& matrix() const { return matrix_; }

  /// λ = ρ(W - 11ᵀ/M).
  double consensus_radius() const { return radius_; }

  /// ‖W - I‖∞.
  double deviation_norm() const { return deviation_norm_; }

  /// Largest L_w making every w_ij / L_w integral: 1 / lcm(denominators).
  Rational largest_weight_scale() const {
    std::int64_t l = 1;
    for (const auto& r : weights_) {
      for (const auto& [j, w] : r) l = std::lcm(l, w.denominator());
    }
    return Rational(1, l);
  }

 private:
  std::size_t agents_;
  std::vector<std::vector<std::pair<AgentId, Rational>>> weights_;
  std::vector<Rational> self_;
  Eigen::MatrixXd matrix_;
  double radius_ = 0.0;
  double deviation_norm_ = 0.0;
};

/// w_ij = 1 / (2(1 + max{|N_i|, |N_j|})).
inline WeightTable metropolis_weights(const Topology& g) {
  if (!g.connected()) {
    throw std::invalid_argument("Metropolis weights need a connected graph");
  }
  return WeightTable(g);
}

/// Integer weights w̄_ij = w_ij / L_w.
class ScaledWeights {
 public:
  ScaledWeights(const WeightTable& table, Rational scale)
      : scale_(scale), rows_(table.size()) {
    if (scale <= 0) {
      throw std::invalid_argument("weight scale L_w must be positive");
    }
    for (AgentId i = 0; i < table.size(); ++i) {
      for (const auto& [j, w] : table.row(i)) {
        Rational ratio = w / scale;
        if (ratio.denominator() != 1) {
          std::ostringstream msg;
          msg << "weight scale " << scale << " does not divide w"
              << edge_label(i, j) << " = " << w << " (ratio " << ratio << ")";
          throw std::invalid_argument(msg.str());
        }
        rows_[i].emplace_back(j, ratio.numerator());
      }
    }
  }

  Rational scale() const { return scale_; }
  std::size_t size() const { return rows_.size(); }

  std::span<const std::pair<AgentId, std::int64_t>> row(AgentId i) const {
    return rows_.at(i);
  }

  std::int64_t weight(AgentId i, AgentId j) const {
    for (const auto& [k, w] : rows_.at(i)) {
      if (k == j) return w;
    }
    throw std::invalid_argument("no edge " + edge_label(i, j));
  }

 private:
  Rational scale_;
  std::vector<std::vector<std::pair<AgentId, std::int64_t>>> rows_;
};

inline ScaledWeights scaled_weights(const WeightTable& table, Rational scale) {
  return ScaledWeights(table, scale);
}

// ---------------------------------------------------------------------------
// Assumption checks and derived constants.

/// Two-hop neighbourhood each agent needs to evaluate its Metropolis weights.
struct TwoHopReport {
  std::vector<std::vector<AgentId>> two_hop;  // sorted, includes the agent
};

inline TwoHopReport validate_two_hop(const Topology& g) {
  TwoHopReport report;
  report.two_hop.resize(g.size());
  for (AgentId i = 0; i < g.size(); ++i) {
    std::set<AgentId> reach{i};
    for (AgentId j : g.neighbors(i)) {
      reach.insert(j);
      for (AgentId k : g.neighbors(j)) reach.insert(k);
    }
    report.two_hop[i].assign(reach.begin(), reach.end());
  }
  return report;
}

/// Edges whose endpoints share no common neighbour.
inline std::vector<Edge> validate_common_neighbor(const Topology& g) {
  std::vector<Edge> violations;
  for (const Edge& e : g.edges()) {
    if (sorted_intersection(g.neighbors(e.first), g.neighbors(e.second)).empty()) {
      violations.push_back(e);
    }
  }
  return violations;
}

/// h = min over edges of |N_i⁺ ∩ N_j⁺| - 2.
inline std::size_t collusion_bound(const Topology& g) {
  if (auto bad = validate_common_neighbor(g); !bad.empty()) {
    throw std::invalid_argument("edge " + edge_label(bad[0].first, bad[0].second) +
                                " has no common neighbour; collusion bound undefined");
  }
  if (g.edges().empty()) {
    throw std::invalid_argument("collusion bound needs at least one edge");
  }
  std::size_t h = g.size();
  for (const Edge& e : g.edges()) {
    h = std::min(h, g.common_closed(e.first, e.second).size() - 2);
  }
  return h;
}

struct MessageCount {
  std::size_t exact = 0;
  std::size_t bound = 0;
};

/// Share messages per consensus iteration, self-shares excluded:
/// exact = Σ_i |N_i| + Σ_i Σ_{j∈N_i} |N_i⁺ ∩ N_j|, bound = 2|E| + 2Δ|E|.
inline MessageCount message_count_per_iteration(const Topology& g) {
  MessageCount c;
  for (AgentId i = 0; i < g.size(); ++i) {
    c.exact += g.degree(i);
    auto closed = g.closed_neighbors(i);
    for (AgentId j : g.neighbors(i)) {
      c.exact += sorted_intersection(closed, g.neighbors(j)).size();
    }
  }
  c.bound = 2 * g.edges().size() + 2 * g.max_degree() * g.edges().size();
  return c;
}

}  // namespace ppgpr
