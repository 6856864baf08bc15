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

#include <cmath>
#include <random>

#include "ppgpr/data.hpp"
#include "ppgpr/protocol.hpp"
#include "test_support.hpp"

namespace ppgpr {
namespace {

constexpr std::int64_t k2p40 = std::int64_t{1} << 40;

struct Bench {
  Topology g;
  WeightTable w;
  ModelGrid models;
  Eigen::MatrixXd test_points;
  std::vector<Dataset> data;
};

Bench sine_bench(std::size_t agents, std::size_t samples, std::size_t tests,
                 std::uint64_t seed) {
  const Topology g = Topology::ring_with_chords(agents, 4);
  const Table t = synthesize_sine({samples, 0.1}, seed);
  auto data = agent_datasets(t, partition_evenly(samples, agents, seed), 0, 0.01);
  ModelGrid models;
  for (const Dataset& d : data) models.push_back({fit(d, {1.0, 1.0})});
  return {g, metropolis_weights(g), std::move(models), grid_points(tests, -5, 5),
          std::move(data)};
}

TEST(Protocol2InitTest, Examples) {
  const PredictionInit p = protocol2_init(Posterior{2.0, 0.5}, 4);
  EXPECT_EQ(p, (PredictionInit{16.0, 8.0}));
  EXPECT_EQ(protocol2_init(Posterior{0.0, 0.5}, 4).weighted_mean, 0.0);
  EXPECT_THROW(protocol2_init(Posterior{1.0, 0.0}, 4), std::invalid_argument);
  EXPECT_THROW(protocol2_init(Posterior{NAN, 1.0}, 4), std::invalid_argument);
}

TEST(Protocol2InitTest, AverageEqualsPrecisionSums) {
  const std::vector<Posterior> e{{1.0, 0.5}, {-2.0, 0.25}, {0.5, 2.0}};
  double a = 0, b = 0, sa = 0, sb = 0;
  for (const auto& p : e) {
    const auto z = protocol2_init(p, e.size());
    a += z.weighted_mean / 3;
    b += z.precision / 3;
    sa += p.mean / p.variance;
    sb += 1 / p.variance;
  }
  EXPECT_NEAR(a, sa, 1e-14);
  EXPECT_NEAR(b, sb, 1e-14);
}

TEST(Protocol2FinalizeTest, Examples) {
  const LocalEstimate e = protocol2_finalize(8, 4);
  EXPECT_EQ(e.variance, 0.25);
  EXPECT_EQ(e.mean, 2.0);
  EXPECT_THROW(protocol2_finalize(1, 0), ConvergenceError);
  EXPECT_THROW(protocol2_finalize(1, -1e-9), ConvergenceError);
}

TEST(Protocol2FinalizeTest, ExactAverageReproducesPoe) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.05, 2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Posterior> e(2 + trial % 6);
    for (auto& p : e) p = {u(gen) - 1, u(gen)};
    double z1 = 0, z2 = 0;
    for (const auto& p : e) {
      const auto z = protocol2_init(p, e.size());
      z1 += z.weighted_mean;
      z2 += z.precision;
    }
    z1 /= static_cast<double>(e.size());
    z2 /= static_cast<double>(e.size());
    const LocalEstimate est = protocol2_finalize(z1, z2);
    const PoEResult ref = poe_aggregate(e);
    EXPECT_NEAR(est.mean, ref.mean, 1e-12 * (1 + std::abs(ref.mean)));
    EXPECT_NEAR(est.variance, ref.variance, 1e-12 * ref.variance);
  }
}

TEST(BatchTest, RoundTrip) {
  const std::vector<PredictionInit> v{{1, 2}, {3, 4}, {5, 6}};
  const State b = batch_initials(v);
  EXPECT_EQ(b.size(), 6u);
  EXPECT_EQ(b, (State{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(unbatch(b), v);
  EXPECT_THROW(unbatch(State{1, 2, 3}), std::invalid_argument);
}

TEST(BatchTest, BatchedRunEqualsPerPointRuns) {
  Bench b = sine_bench(6, 60, 4, 3);
  ConsensusParams p{1e-4, Rational(1, 10), Modulus(k2p40), 15};
  States batched(6);
  for (AgentId i = 0; i < 6; ++i) {
    batched[i] = protocol2_initial_state(b.models[i], b.test_points, 6);
  }
  Network net(b.g, 1);
  const auto whole = run_protocol1(net, b.w, p, batched);
  for (std::size_t x = 0; x < 4; ++x) {
    States single(6);
    for (AgentId i = 0; i < 6; ++i) {
      single[i] = {batched[i][2 * x], batched[i][2 * x + 1]};
    }
    Network other(b.g, 1);
    const auto part = run_protocol1(other, b.w, p, single);
    for (AgentId i = 0; i < 6; ++i) {
      EXPECT_EQ(part.states[i][0], whole.states[i][2 * x]);
      EXPECT_EQ(part.states[i][1], whole.states[i][2 * x + 1]);
    }
  }
}

TEST(Protocol2Test, IdenticalModelsGiveScaledPosterior) {
  const Topology g = Topology::ring_with_chords(5, 4);
  const WeightTable w = metropolis_weights(g);
  const Table t = synthesize_sine({20, 0.1}, 1);
  const Dataset d{t.X, t.Y.col(0), 0.01};
  const ModelGrid models(5, {fit(d, {1.2, 0.8})});
  const Eigen::MatrixXd x = grid_points(7, -4, 4);
  Network net(g, 5);
  ConsensusParams p{1e-6, Rational(1, 10), Modulus(k2p40), 1};
  const auto r = run_protocol2(net, w, p, models, x);
  for (AgentId i = 0; i < 5; ++i) {
    for (Eigen::Index k = 0; k < x.rows(); ++k) {
      const Posterior local = models[0][0].posterior(x.row(k).transpose());
      const LocalEstimate& e = r.estimates[i][static_cast<std::size_t>(k)][0];
      EXPECT_NEAR(e.mean, local.mean, 1e-13 * (1 + std::abs(local.mean)));
      EXPECT_NEAR(e.variance, local.variance / 5, 1e-13 * local.variance);
    }
  }
}

TEST(Protocol2Test, TranscriptCarriesOnlyRingVectors) {
  Bench b = sine_bench(6, 60, 3, 4);
  Network net(b.g, 2);
  ConsensusParams p{1e-4, Rational(1, 10), Modulus(k2p40), 3};
  const auto r = run_protocol2(net, b.w, p, b.models, b.test_points);
  for (const Message& m : r.transcript.messages()) {
    EXPECT_TRUE(m.kind == MessageKind::share ||
                m.kind == MessageKind::masked_contribution);
    EXPECT_EQ(m.payload.modulus(), Modulus(k2p40));
    EXPECT_EQ(m.payload.size(), 6u);
  }
  EXPECT_EQ(r.transcript.rounds(), 3u);
}

TEST(Protocol2Test, ConvergesToCentralisedPoe) {
  Bench b = sine_bench(10, 200, 20, 5);
  const auto ref = poe_reference(b.models, b.test_points);
  auto rmse_at = [&](double lz, std::size_t t) {
    Network net(b.g, 3);
    ConsensusParams p{lz, Rational(1, 10), Modulus(std::int64_t{1} << 55), t};
    return rmse_metrics(run_protocol2(net, b.w, p, b.models, b.test_points).estimates, ref);
  };
  const RmseMetrics fine = rmse_at(1e-6, 100);
  EXPECT_LT(fine.mean, 1e-3);
  EXPECT_LT(fine.variance, 1e-4);
  EXPECT_GT(rmse_at(1e-6, 5).mean, fine.mean);
}

TEST(Protocol2Test, EarlyStopFailsLoudly) {
  // A single round on a long ring leaves some agents with a negative
  // precision estimate when one agent dominates the batch.
  const Topology g = Topology::ring_with_chords(12, 4);
  const WeightTable w = metropolis_weights(g);
  States init(12, State{0.0, -1.0});
  init[0] = {0.0, 12.0 * 13.0};
  Network net(g, 1);
  ConsensusParams p{1e-6, Rational(1, 10), Modulus(k2p40), 1};
  const auto r = run_protocol1(net, w, p, init);
  bool negative = false;
  for (const State& s : r.states) negative |= s[1] <= 0;
  ASSERT_TRUE(negative);
  for (const State& s : r.states) {
    if (s[1] <= 0) EXPECT_THROW(protocol2_finalize(s[0], s[1]), ConvergenceError);
  }
}

TEST(RmseTest, Examples) {
  const ReferenceGrid ref{{{1.0, 0.5}}, {{2.0, 0.25}}};
  EstimateGrid same(3, {{{1.0, 0.5}}, {{2.0, 0.25}}});
  const RmseMetrics zero = rmse_metrics(same, ref);
  EXPECT_EQ(zero.mean, 0.0);
  EXPECT_EQ(zero.variance, 0.0);
  EstimateGrid shifted(3, {{{1.3, 0.5}}, {{2.3, 0.25}}});
  EXPECT_NEAR(rmse_metrics(shifted, ref).mean, 0.3, 1e-15);
  EXPECT_THROW(rmse_metrics(same, {}), std::invalid_argument);
}

TEST(RmseTest, MatchesBruteForce) {
  std::mt19937_64 gen(6);
  std::normal_distribution<double> nd;
  const std::size_t agents = 4, points = 5, outputs = 2;
  ReferenceGrid ref(points, std::vector<PoEResult>(outputs));
  EstimateGrid est(agents, std::vector<std::vector<LocalEstimate>>(
                               points, std::vector<LocalEstimate>(outputs)));
  for (auto& row : ref) for (auto& r : row) r = {nd(gen), 1 + nd(gen) * nd(gen)};
  for (auto& a : est) for (auto& row : a) for (auto& e : row) e = {nd(gen), nd(gen)};
  double f = 0, v = 0;
  for (std::size_t i = 0; i < agents; ++i) {
    double sf = 0, sv = 0;
    for (std::size_t x = 0; x < points; ++x) {
      double nf = 0, nv = 0;
      for (std::size_t d = 0; d < outputs; ++d) {
        nf += std::pow(ref[x][d].mean - est[i][x][d].mean, 2);
        nv += std::pow(ref[x][d].variance - est[i][x][d].variance, 2);
      }
      sf += nf;
      sv += nv;
    }
    f += std::sqrt(sf / points) / agents;
    v += std::sqrt(sv / points) / agents;
  }
  const RmseMetrics r = rmse_metrics(est, ref);
  EXPECT_NEAR(r.mean, f, 1e-14);
  EXPECT_NEAR(r.variance, v, 1e-14);
}

TEST(HyperoptTest, FixedPointWithoutStep) {
  Bench b = sine_bench(6, 60, 1, 7);
  const std::vector<Hyperparams> theta(6, Hyperparams{1.3, 0.7});
  Network net(b.g, 1);
  ConsensusParams p{std::ldexp(1.0, -20), Rational(1, 10), Modulus(k2p40), 1};
  const auto next = hyperparam_round(b.data, theta, 0.0, HyperStep::natural,
                                     net, b.w, p);
  for (const auto& t : next) EXPECT_EQ(t, theta[0]);
}

TEST(HyperoptTest, SingleAgentIsPlainGradientAscent) {
  const Table t = synthesize_sine({15, 0.1}, 3);
  const std::vector<Dataset> data{{t.X, t.Y.col(0), 0.01}};
  const Topology g(1, {});
  Network net(g, 1);
  ConsensusParams p{std::ldexp(1.0, -20), Rational(1), Modulus(k2p40), 1};
  HyperoptSettings s{10, 0.05, 0.99, HyperStep::natural};
  const auto trace = optimize_hyperparams(data, {{2.0, 1.5}}, s,
                                          net, metropolis_weights(g), p);
  Hyperparams theta{2.0, 1.5};
  double eta = 0.05;
  for (std::size_t k = 1; k <= 10; ++k) {
    const Eigen::Vector2d g2 = fit(data[0], theta).lml_gradient();
    theta = {theta.length_scale + eta * g2[0], theta.signal_std + eta * g2[1]};
    eta *= 0.99;
    EXPECT_EQ(trace.theta[k][0], theta) << "iteration " << k;
  }
  EXPECT_GT(trace.total_lml_at_mean.back(), trace.total_lml_at_mean.front());
}

TEST(HyperoptTest, SpreadShrinksAndLikelihoodRises) {
  Bench b = sine_bench(5, 100, 1, 8);
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.5, 3.0);
  std::vector<Hyperparams> theta0(5);
  for (auto& t : theta0) t = {u(gen), u(gen)};
  Network net(b.g, 1);
  ConsensusParams p{std::ldexp(1.0, -20), Rational(1, 10), Modulus(k2p40), 1};
  HyperoptSettings s{30, 0.01, 0.99, HyperStep::natural};
  const auto trace = optimize_hyperparams(b.data, theta0, s, net, b.w, p);
  EXPECT_LT(trace.spread.back(), trace.spread.front());
  EXPECT_GT(trace.total_lml_at_mean.back(), trace.total_lml_at_mean.front());
}

TEST(HyperoptTest, NonFiniteGradientAborts) {
  Dataset d{Eigen::MatrixXd::Zero(2, 1), Eigen::VectorXd::Constant(2, 1e300), 0.01};
  d.X(1, 0) = 1.0;
  try {
    gradient_half_step(d, {1.0, 1.0}, 0.1, HyperStep::natural, 3);
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("agent 4"), std::string::npos) << e.what();
  }
}

TEST(HyperoptTest, NaturalStepKeepsPositivity) {
  // A huge step that would cross zero halves the coordinate instead.
  Dataset d{Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1), 0.01};
  const Hyperparams h = gradient_half_step(d, {1.0, 1.0}, 1e3, HyperStep::natural);
  EXPECT_EQ(h.signal_std, 0.5);
  EXPECT_EQ(h.length_scale, 1.0);
  const Hyperparams l = gradient_half_step(d, {1.0, 1.0}, 10.0, HyperStep::log);
  EXPECT_GT(l.signal_std, 0.0);
}

}  // namespace
}  // namespace ppgpr
