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

#include <random>

#include "ppgpr/privacy.hpp"
#include "test_support.hpp"

namespace ppgpr {
namespace {

// Four-cycle 1-2-3-4 with chord 1-3; collusion bound h = 1.
Topology chorded_square() { return Topology(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}}); }

States small_inputs(std::size_t m) {
  States z(m);
  for (std::size_t i = 0; i < m; ++i) z[i] = {static_cast<double>(i % 3) - 1.0};
  return z;
}

struct RealRun {
  CoalitionView view;
  std::vector<MemberIO> io;
};

RealRun one_real_run(const Topology& g, const Coalition& c, const States& z0,
                     const RoundParams& rp, Network& net) {
  ConsensusParams p{rp.state_scale, rp.weight_scale, rp.modulus, 1, false};
  const auto r = run_protocol1(net, metropolis_weights(g), p, z0);
  std::vector<MemberIO> io;
  for (AgentId a : c.members) io.push_back({a, z0[a], r.states[a]});
  return {extract_view(r.transcript, g, c, io), io};
}

RoundParams lcm_params(const Topology& g, std::int64_t q) {
  return {1.0, metropolis_weights(g).largest_weight_scale(), Modulus(q)};
}

TEST(CoalitionTest, RejectsOutsiders) {
  EXPECT_THROW(Coalition({7}, 3), std::invalid_argument);
  EXPECT_THROW(Coalition({1, 1}, 3), std::invalid_argument);
  EXPECT_EQ(Coalition({2, 0}, 3).members, (std::vector<AgentId>{0, 2}));
}

TEST(ExtractViewTest, TriangleShape) {
  const Topology g = Topology::complete(3);
  const Coalition c({0}, 3);
  const RoundParams rp = lcm_params(g, 17);
  Network net(g, 3);
  const RealRun run = one_real_run(g, c, small_inputs(3), rp, net);
  const MemberView& m = run.view.members.at(0);
  EXPECT_EQ(m.aggregator_shares.size(), 3u);
  EXPECT_EQ(m.masked.size(), 2u);
  EXPECT_EQ(m.neighbor_shares.size(), 6u);
  // Its own sharings for aggregators 1, 2, 3 each send two shares away.
  EXPECT_EQ(m.coins.size(), 6u);
  EXPECT_EQ(ViewLayout(g, c, 1, rp).labels().size(), 17u);
  for (const auto& [j, s] : m.masked) {
    for (std::int64_t v : s.entries()) EXPECT_TRUE(rp.modulus.contains(v));
  }
}

TEST(ExtractViewTest, RejectsIncompleteTranscript) {
  const Topology g = Topology::complete(3);
  const Coalition c({0}, 3);
  std::vector<MemberIO> io{{0, {0.0}, {0.0}}};
  EXPECT_THROW(extract_view(Transcript{}, g, c, io), std::invalid_argument);
}

TEST(RecoverTest, RoundTripAndInconsistency) {
  const RoundParams rp{0.25, Rational(1, 6), Modulus(101)};
  for (std::int64_t r = -50; r <= 50; ++r) {
    const State z{3.7};
    const State y{z[0] + scaled_increment(r, rp.weight_scale, rp.state_scale)};
    EXPECT_EQ(recover_masked_sum(z, y, rp)[0], r);
  }
  EXPECT_THROW(recover_masked_sum({0.0}, {0.01}, rp), std::invalid_argument);
  // Reachable only through a residue outside Z_101.
  EXPECT_THROW(recover_masked_sum({0.0}, {scaled_increment(60, rp.weight_scale, 0.25)}, rp),
               std::invalid_argument);
}

// Property: every real and every simulated view satisfies the update
// identity and the pairwise mask relation, for random graphs and coalitions.
TEST(ViewRelationsTest, RealAndSimulatedViewsSatisfyConstraints) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 15; ++trial) {
    const Topology g = testing::random_triangulated_graph(4 + trial % 5, gen);
    const RoundParams rp = lcm_params(g, 1009);
    std::vector<AgentId> all(g.size());
    std::iota(all.begin(), all.end(), AgentId{0});
    std::shuffle(all.begin(), all.end(), gen);
    all.resize(1 + trial % 3);
    const Coalition c(all, g.size());
    const ViewLayout layout(g, c, 2, rp);
    States z0(g.size());
    std::uniform_int_distribution<int> d(-3, 3);
    for (auto& s : z0) s = {double(d(gen)), double(d(gen))};
    Network net(g, 100 + trial);
    const RealRun run = one_real_run(g, c, z0, rp, net);
    EXPECT_TRUE(layout.relations_hold(run.view));
    ShareRng rng = ShareRng::from_seed(trial, 9);
    const CoalitionView sim = simulate_view(g, c, run.io, rp, rng);
    EXPECT_TRUE(layout.relations_hold(sim));
    EXPECT_EQ(layout.flatten(sim).size(), layout.flatten(run.view).size());
  }
}

TEST(ViewRelationsTest, TamperedViewIsCaught) {
  const Topology g = chorded_square();
  const Coalition c({1, 2}, 4);
  const RoundParams rp = lcm_params(g, 17);
  Network net(g, 4);
  RealRun run = one_real_run(g, c, small_inputs(4), rp, net);
  const ViewLayout layout(g, c, 1, rp);
  ASSERT_TRUE(layout.relations_hold(run.view));
  auto& zeta = run.view.members[0].masked[0].second;
  zeta = ring_add(zeta, reduce_mod(std::vector<std::int64_t>{1}, rp.modulus));
  EXPECT_FALSE(layout.relations_hold(run.view));
}

// Sequential composition: each round of a longer run is a one-round view
// for the inputs and outputs of that round.
TEST(ViewRelationsTest, EveryRoundOfLongerRun) {
  const Topology g = chorded_square();
  const Coalition c({0}, 4);
  const RoundParams rp = lcm_params(g, 1 << 20);
  ConsensusParams p{rp.state_scale, rp.weight_scale, rp.modulus, 3, false};
  Network net(g, 6);
  const auto r = run_protocol1(net, metropolis_weights(g), p, small_inputs(4), true);
  ASSERT_EQ(r.trajectory.size(), 4u);
  const ViewLayout layout(g, c, 1, rp);
  for (std::size_t t = 0; t < 3; ++t) {
    std::vector<MemberIO> io{{0, r.trajectory[t][0], r.trajectory[t + 1][0]}};
    const CoalitionView v = extract_view(r.transcript, g, c, io, r.transcript.messages()[0].round + t);
    EXPECT_TRUE(layout.relations_hold(v)) << "round " << t;
  }
}

// Independent oracle for probe coordinates: brute-force the holders of each
// zero-sharing and count the neighbour masks whose every share was either
// generated by a member or has that neighbour as its only outside holder.
std::size_t brute_force_probes(const Topology& g, const Coalition& c) {
  std::size_t n = 0;
  for (AgentId i : c.members) {
    for (AgentId j : g.neighbors(i)) {
      if (c.contains(j)) continue;
      bool all = true;
      for (AgentId l = 0; l < g.size(); ++l) {
        const bool contributes = (l == i || g.adjacent(l, i)) && (l == j || g.adjacent(l, j));
        if (!contributes || c.contains(l)) continue;
        std::vector<AgentId> outside;
        for (AgentId r = 0; r < g.size(); ++r) {
          const bool near_agg = r == i || g.adjacent(r, i);
          const bool near_gen = r == l || g.adjacent(r, l);
          if (near_agg && near_gen && !c.contains(r)) outside.push_back(r);
        }
        all = all && outside == std::vector<AgentId>{j};
      }
      n += all;
    }
  }
  return n;
}

TEST(ProbeTest, MatchesBruteForceAndVanishesWithinBound) {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 40; ++trial) {
    const Topology g = testing::random_triangulated_graph(4 + trial % 6, gen, 0.5);
    const std::size_t h = collusion_bound(g);
    std::vector<AgentId> all(g.size());
    std::iota(all.begin(), all.end(), AgentId{0});
    std::shuffle(all.begin(), all.end(), gen);
    all.resize(1 + trial % std::min<std::size_t>(4, g.size() - 1));
    const Coalition c(all, g.size());
    const ViewLayout layout(g, c, 1, lcm_params(g, 17));
    EXPECT_EQ(layout.probe_count(), brute_force_probes(g, c));
    if (c.size() <= h) EXPECT_EQ(layout.probe_count(), 0u);
  }
  EXPECT_EQ(ViewLayout(chorded_square(), Coalition({0, 2}, 4), 1,
                       lcm_params(chorded_square(), 17))
                .probe_count(),
            4u);
}

TEST(IndistinguishabilityTest, HandComputedStatistics) {
  const Modulus q(3);
  ViewSamples a({"x"}, q), b({"x"}, q);
  const std::int64_t av[] = {-1, 0, 1}, bv[] = {-1, -1, 0};
  // a: 6000/3000/3000, b: 4000/6000/2000.
  for (int n = 0; n < 12000; ++n) {
    std::int64_t x = n < 6000 ? av[0] : n < 9000 ? av[1] : av[2];
    std::int64_t y = n < 4000 ? bv[0] : n < 10000 ? bv[2] : 1;
    a.add(std::span(&x, 1), true);
    b.add(std::span(&y, 1), true);
  }
  const AuditReport r = indistinguishability_test(a, b, 0.5);
  // TV = ½(|.5-.3333|+|.25-.5|+|.25-.1667|) = 0.25.
  EXPECT_NEAR(r.coordinates[0].tv, 0.25, 1e-12);
  // Pooled column totals 10000/9000/5000, expected 5000/4500/2500 per row.
  const double stat = 2 * (1e6 / 5000 + 1.5e3 * 1.5e3 / 4500 + 500.0 * 500 / 2500);
  boost::math::chi_squared dist(2);
  EXPECT_NEAR(r.coordinates[0].p_value, boost::math::cdf(boost::math::complement(dist, stat)),
              1e-15);
  EXPECT_TRUE(r.pass());
  EXPECT_FALSE(indistinguishability_test(a, b, 0.2).pass());
}

TEST(IndistinguishabilityTest, RefusesSmallSamples) {
  ViewSamples a({"x"}, Modulus(5)), b({"x"}, Modulus(5));
  std::int64_t x = 0;
  for (int n = 0; n < 9999; ++n) {
    a.add(std::span(&x, 1), true);
    b.add(std::span(&x, 1), true);
  }
  EXPECT_THROW(indistinguishability_test(a, b), std::invalid_argument);
  a.add(std::span(&x, 1), false);
  b.add(std::span(&x, 1), true);
  const AuditReport r = indistinguishability_test(a, b);
  EXPECT_EQ(r.first_violations, 1u);
  EXPECT_FALSE(r.pass());
}

TEST(AuditTest, WithinBoundIsIndistinguishable) {
  AuditConfig cfg{chorded_square(), {0}, small_inputs(4)};
  cfg.weight_scale = metropolis_weights(cfg.graph).largest_weight_scale();
  cfg.samples = 20000;
  cfg.epsilon = 0.03;  // noise floor at 2·10^4 samples is about 0.016
  const AuditResult r = run_audit(cfg);
  EXPECT_FALSE(r.exceeds_bound);
  EXPECT_EQ(r.probes, 0u);
  EXPECT_TRUE(r.calibration.pass()) << r.calibration.max_tv();
  EXPECT_TRUE(r.real_vs_sim.pass()) << r.real_vs_sim.max_tv();
}

// Members 1 and 3 hold every share of agent 2's sharing for aggregator 1
// except agent 2's own, so agent 2's mask toward 1 is known. Both outputs
// only reveal z_2 + z_4; the view reveals Q(z_2) alone.
TEST(AuditTest, BeyondBoundLeaksNeighbourInput) {
  AuditConfig cfg{chorded_square(), {0, 2}, {{2.0}, {-3.0}, {1.0}, {4.0}}};
  cfg.weight_scale = metropolis_weights(cfg.graph).largest_weight_scale();
  cfg.samples = 10000;
  const AuditResult r = run_audit(cfg);
  EXPECT_TRUE(r.exceeds_bound);
  EXPECT_TRUE(r.calibration.pass() || r.calibration.max_tv() < 0.05);
  EXPECT_FALSE(r.real_vs_sim.pass());
  ASSERT_EQ(r.probes, 4u);
  const auto& coords = r.real_vs_sim.coordinates;
  for (std::size_t k = coords.size() - 4; k < coords.size(); ++k) {
    EXPECT_EQ(coords[k].label.rfind("probe ", 0), 0u);
    EXPECT_GT(coords[k].tv, 0.9) << coords[k].label;
  }
  for (std::size_t k = 0; k + 4 < coords.size(); ++k) {
    EXPECT_LT(coords[k].tv, 0.05) << coords[k].label;
  }
  EXPECT_EQ(r.real_vs_sim.first_violations + r.real_vs_sim.second_violations, 0u);
}

}  // namespace
}  // namespace ppgpr
