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

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <random>
#include <sstream>

#include "ppgpr/topology.hpp"
#include "test_support.hpp"

namespace ppgpr {
namespace {

// Five agents; edges chosen so that N_2⁺ ∩ N_4⁺ = {1, 2, 3, 4} (1-based).
Topology five_agent_graph() {
  return Topology(5, {{0, 1}, {0, 3}, {1, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 4}});
}

TEST(TopologyTest, RejectsMalformedGraphs) {
  EXPECT_THROW(Topology(0, {}), std::invalid_argument);
  EXPECT_THROW(Topology(3, {{0, 0}}), std::invalid_argument);
  EXPECT_THROW(Topology(3, {{0, 3}}), std::invalid_argument);
  EXPECT_THROW(Topology(3, {{0, 1}, {1, 0}}), std::invalid_argument);
}

TEST(TopologyTest, NeighbourSets) {
  const Topology g = five_agent_graph();
  EXPECT_EQ(g.degree(1), 3u);
  EXPECT_EQ(g.max_degree(), 4u);
  EXPECT_EQ(g.closed_neighbors(1), (std::vector<AgentId>{0, 1, 2, 3}));
  EXPECT_EQ(g.common_closed(1, 3), (std::vector<AgentId>{0, 1, 2, 3}));
  EXPECT_TRUE(g.adjacent(4, 2));
  EXPECT_FALSE(g.adjacent(0, 4));
}

TEST(TopologyTest, RingWithChords) {
  const Topology g = Topology::ring_with_chords(20, 4);
  EXPECT_EQ(g.edges().size(), 40u);
  for (AgentId i = 0; i < 20; ++i) EXPECT_EQ(g.degree(i), 4u);
  EXPECT_TRUE(validate_common_neighbor(g).empty());
  EXPECT_THROW(Topology::ring_with_chords(5, 3), std::invalid_argument);
  EXPECT_THROW(Topology::ring_with_chords(4, 4), std::invalid_argument);
}

TEST(GraphFileTest, RoundTripAndErrors) {
  std::istringstream in("# five agents\n5\n1 2\n1 4\n2 3\n2 4\n3 4\n3 5\n4 5\n");
  const Topology g = read_graph(in);
  EXPECT_EQ(g.edges(), five_agent_graph().edges());
  std::ostringstream out;
  write_graph(out, g);
  std::istringstream back(out.str());
  EXPECT_EQ(read_graph(back).edges(), g.edges());

  std::istringstream dup("3\n1 2\n2 1\n");
  EXPECT_THROW(read_graph(dup), std::invalid_argument);
  std::istringstream junk("3\n1 x\n");
  try {
    read_graph(junk);
    FAIL() << "malformed edge accepted";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(MetropolisTest, CompleteAndTriangle) {
  const WeightTable k5 = metropolis_weights(Topology::complete(5));
  for (AgentId i = 0; i < 5; ++i) {
    for (const auto& [j, w] : k5.row(i)) EXPECT_EQ(w, Rational(1, 10));
  }
  const WeightTable tri = metropolis_weights(Topology::complete(3));
  EXPECT_EQ(tri.weight(0, 1), Rational(1, 6));
  EXPECT_EQ(tri.self_weight(2), Rational(2, 3));
}

TEST(MetropolisTest, CompleteGraphRadiusIsOneHalf) {
  for (std::size_t m : {3, 4, 5, 8, 13}) {
    EXPECT_NEAR(metropolis_weights(Topology::complete(m)).consensus_radius(),
                0.5, 1e-12);
  }
}

TEST(MetropolisTest, DisconnectedRejected) {
  EXPECT_THROW(metropolis_weights(Topology(4, {{0, 1}, {2, 3}})),
               std::invalid_argument);
}

// Eigenvalues of W with the consensus eigenvalue 1 removed, from a general
// (non-symmetric) solver as an independent route.
double radius_oracle(const Eigen::MatrixXd& w) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(w);
  auto ev = es.eigenvalues();
  std::vector<double> mags;
  for (Eigen::Index k = 0; k < ev.size(); ++k) mags.push_back(std::abs(ev[k]));
  std::sort(mags.begin(), mags.end());
  mags.pop_back();  // eigenvalue 1 (simple on connected graphs)
  return mags.empty() ? 0.0 : std::max(mags.back(), 0.0);
}

TEST(MetropolisTest, DoublyStochasticAndContractive) {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 40; ++trial) {
    const Topology g = testing::random_triangulated_graph(3 + gen() % 25, gen);
    const WeightTable w = metropolis_weights(g);
    const Eigen::MatrixXd& m = w.matrix();
    const auto n = m.rows();
    EXPECT_LT((m.rowwise().sum() - Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((m.colwise().sum().transpose() - Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_TRUE((m - m.transpose()).isZero(0));
    EXPECT_LT(w.consensus_radius(), 1.0 - 1e-12);
    EXPECT_NEAR(w.consensus_radius(), radius_oracle(m), 1e-9);
    for (AgentId i = 0; i < g.size(); ++i) {
      for (const auto& [j, wij] : w.row(i)) {
        EXPECT_LE(wij, Rational(1, 4));
        EXPECT_EQ(wij, w.weight(j, i));
      }
    }
  }
}

TEST(MetropolisTest, WeightsFromLocalDegreesOnly) {
  std::mt19937_64 gen(4);
  const Topology g = testing::random_triangulated_graph(12, gen);
  const WeightTable w = metropolis_weights(g);
  for (AgentId i = 0; i < g.size(); ++i) {
    for (AgentId j : g.neighbors(i)) {
      // Agent i's own computation: its degree and the neighbour's degree.
      const auto d = static_cast<std::int64_t>(std::max(g.neighbors(i).size(),
                                                        g.neighbors(j).size()));
      EXPECT_EQ(w.weight(i, j), Rational(1, 2 * (1 + d)));
    }
  }
}

TEST(MetropolisTest, PowerIterationAgreesWithDense) {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 5; ++trial) {
    const WeightTable w =
        metropolis_weights(testing::random_triangulated_graph(60, gen, 0.05));
    EXPECT_NEAR(detail::consensus_radius_power(w.matrix()),
                w.consensus_radius(), 1e-6);
  }
  const WeightTable ring = metropolis_weights(Topology::ring_with_chords(40, 4));
  EXPECT_NEAR(detail::consensus_radius_power(ring.matrix()),
              ring.consensus_radius(), 1e-6);
}

TEST(ScaledWeightsTest, Examples) {
  const WeightTable k5 = metropolis_weights(Topology::complete(5));
  EXPECT_EQ(scaled_weights(k5, Rational(1, 40)).weight(0, 1), 4);
  const WeightTable tri = metropolis_weights(Topology::complete(3));
  EXPECT_EQ(scaled_weights(tri, Rational(1, 6)).weight(2, 0), 1);
  try {
    scaled_weights(tri, Rational(1, 8));
    FAIL() << "non-integral scale accepted";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("(1,2)"), std::string::npos) << e.what();
  }
  EXPECT_THROW(scaled_weights(tri, Rational(0)), std::invalid_argument);
}

TEST(ScaledWeightsTest, LargestScaleIsExact) {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 20; ++trial) {
    const WeightTable w =
        metropolis_weights(testing::random_triangulated_graph(3 + gen() % 15, gen));
    const Rational lw = w.largest_weight_scale();
    const ScaledWeights s(w, lw);
    for (AgentId i = 0; i < w.size(); ++i) {
      for (const auto& [j, wbar] : s.row(i)) {
        EXPECT_EQ(Rational(wbar) * lw, w.weight(i, j));
      }
    }
  }
}

TEST(TwoHopTest, Examples) {
  const auto tri = validate_two_hop(Topology::complete(3));
  for (const auto& set : tri.two_hop) EXPECT_EQ(set, (std::vector<AgentId>{0, 1, 2}));
  const auto path = validate_two_hop(Topology::path(4));
  EXPECT_EQ(path.two_hop[0], (std::vector<AgentId>{0, 1, 2}));
  // Agent 4 is adjacent to everyone else, so all two-hop sets are full.
  const auto five = validate_two_hop(five_agent_graph());
  for (const auto& set : five.two_hop) EXPECT_EQ(set.size(), 5u);
}

TEST(CommonNeighbourTest, Examples) {
  EXPECT_TRUE(validate_common_neighbor(Topology::complete(4)).empty());
  EXPECT_EQ(validate_common_neighbor(Topology::cycle(5)).size(), 5u);
  EXPECT_TRUE(validate_common_neighbor(five_agent_graph()).empty());
  EXPECT_EQ(five_agent_graph().common_closed(1, 3).size(), 4u);
}

TEST(CollusionBoundTest, Examples) {
  EXPECT_EQ(collusion_bound(Topology::complete(5)), 3u);
  EXPECT_EQ(collusion_bound(Topology::complete(3)), 1u);
  // Edge (2,4) gives |{1,2,3,4}| - 2 = 2; edge (1,2) gives |{1,2,4}| - 2 = 1.
  const Topology g = five_agent_graph();
  EXPECT_EQ(g.common_closed(1, 3).size() - 2, 2u);
  EXPECT_EQ(collusion_bound(g), 1u);
  EXPECT_THROW(collusion_bound(Topology::cycle(5)), std::invalid_argument);
}

TEST(CollusionBoundTest, MonotoneUnderEdgeAddition) {
  std::mt19937_64 gen(33);
  for (int trial = 0; trial < 100; ++trial) {
    const Topology g = testing::random_triangulated_graph(4 + gen() % 10, gen, 0.1);
    const std::size_t h = collusion_bound(g);
    for (AgentId i = 0; i < g.size(); ++i) {
      for (AgentId j = i + 1; j < g.size(); ++j) {
        if (g.adjacent(i, j)) continue;
        const Topology bigger = g.with_edge(i, j);
        if (!validate_common_neighbor(bigger).empty()) continue;
        EXPECT_GE(collusion_bound(bigger), h);
      }
    }
  }
}

// Enumerates every zero-sharing explicitly and counts transmitted shares.
std::size_t brute_force_share_messages(const Topology& g) {
  std::size_t count = 0;
  for (AgentId i = 0; i < g.size(); ++i) {
    for (AgentId gen = 0; gen < g.size(); ++gen) {
      if (gen != i && !g.adjacent(i, gen)) continue;
      for (AgentId l = 0; l < g.size(); ++l) {
        const bool in_ni = l == i || g.adjacent(l, i);
        const bool in_ng = gen == i ? true : (l == gen || g.adjacent(l, gen));
        if (in_ni && in_ng && l != gen) ++count;
      }
    }
  }
  return count;
}

TEST(MessageCountTest, Examples) {
  const MessageCount tri = message_count_per_iteration(Topology::complete(3));
  EXPECT_EQ(tri.exact, 18u);
  EXPECT_EQ(tri.bound, 18u);
  const MessageCount k4 = message_count_per_iteration(Topology::complete(4));
  EXPECT_EQ(k4.exact, 48u);
  EXPECT_EQ(k4.bound, 48u);
}

TEST(MessageCountTest, MatchesEnumerationAndBound) {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 50; ++trial) {
    const Topology g = testing::random_triangulated_graph(3 + gen() % 20, gen);
    const MessageCount c = message_count_per_iteration(g);
    EXPECT_EQ(c.exact, brute_force_share_messages(g));
    EXPECT_LE(c.exact, c.bound);
  }
}

}  // namespace
}  // namespace ppgpr
