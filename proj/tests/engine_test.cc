// Copyright 2026 The doadp Authors
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

#include "doadp/engine.h"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "doadp/error.h"

namespace doadp {
namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

LogisticProblem small_logistic(std::size_t n, std::size_t q = 8,
                               std::size_t d = 6) {
  SyntheticLogisticSpec spec;
  spec.n = n;
  spec.q = q;
  spec.d = d;
  return LogisticProblem(synthetic_logistic_data(spec));
}

TEST(Activation, Extremes) {
  Stream s = make_stream({1, 0, 0, StreamPurpose::kActivation});
  for (int i = 0; i < 1000; ++i) ASSERT_TRUE(activation_draw(1.0, s));
  for (int i = 0; i < 1000; ++i) ASSERT_FALSE(activation_draw(0.0, s));
  EXPECT_THROW(activation_draw(1.5, s), InvalidArgument);
}

TEST(Activation, EmpiricalRate) {
  Stream s = make_stream({7, 0, 0, StreamPurpose::kActivation});
  std::size_t hits = 0;
  const std::size_t draws = 1'000'000;
  for (std::size_t i = 0; i < draws; ++i) hits += activation_draw(0.5, s);
  EXPECT_NEAR(static_cast<double>(hits) / draws, 0.5, 0.002);
}

TEST(Activation, KeyedDrawsAreReproducible) {
  for (std::uint64_t t = 0; t < 50; ++t) {
    const StreamKey key{3, 2, t, StreamPurpose::kActivation};
    ASSERT_EQ(activation_draw(0.7, key), activation_draw(0.7, key));
  }
}

TEST(AgentStep, ZeroGradientAtConsensusIsFixedPoint) {
  AgentState s = make_agent(0, {1}, vec({1, 2}));
  s.replica(0) = vec({1, 2});
  s.replica(1) = vec({1, 2});
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  const std::vector<NeighborWeight> nb{{1, 0.5}};
  const StepOutput out = agent_step(s, &zero, &zero, true, nb, {0.1, 0.3, 0.5, 2});
  EXPECT_EQ(out.x, s.x);
  EXPECT_EQ(out.m, zero);
  ASSERT_TRUE(out.message.has_value());
  EXPECT_EQ(out.message->densify(), zero);
}

TEST(AgentStep, InactiveDecaysMomentum) {
  AgentState s = make_agent(0, {}, vec({4}));
  s.m = vec({2});
  const StepOutput out = agent_step(s, nullptr, nullptr, false, {}, {0.1, 0.3, 0.5, 1});
  EXPECT_EQ(out.m, vec({1}));
  EXPECT_EQ(out.x, vec({4}));
  EXPECT_FALSE(out.message.has_value());
}

TEST(AgentStep, ActiveUpdateByHand) {
  // x = [1, 0, -1], m = [1, 1, 1], g = [0.5, -0.5, 0], noise = [0.1, 0, 0]
  // beta = 0.5: m+ = [1.1, 0, 0.5]; alpha = 0.2: x+ = [0.78, 0, -1.1]
  // replicas: own = [0, 0, 0], neighbor = [1, 1, 1], w = 0.25, gamma = 0.4:
  // x+ += 0.1 * [1, 1, 1] -> [0.88, 0.1, -1.0]; top-2 of x+ - own.
  AgentState s = make_agent(0, {3}, vec({1, 0, -1}));
  s.m = vec({1, 1, 1});
  s.replica(3) = vec({1, 1, 1});
  const Eigen::VectorXd g = vec({0.5, -0.5, 0}), th = vec({0.1, 0, 0});
  const std::vector<NeighborWeight> nb{{3, 0.25}};
  const StepOutput out = agent_step(s, &g, &th, true, nb, {0.2, 0.4, 0.5, 2});
  EXPECT_TRUE(out.m.isApprox(vec({1.1, 0, 0.5}), 1e-15));
  EXPECT_TRUE(out.x.isApprox(vec({0.88, 0.1, -1.0}), 1e-15));
  ASSERT_TRUE(out.message.has_value());
  EXPECT_EQ(out.message->indices, (std::vector<std::uint32_t>{0, 2}));
}

TEST(AgentStep, RequiresGradientExactlyWhenActive) {
  AgentState s = make_agent(0, {}, vec({0}));
  const Eigen::VectorXd g = vec({1});
  EXPECT_THROW(agent_step(s, nullptr, nullptr, true, {}, {}), InvalidArgument);
  EXPECT_THROW(agent_step(s, &g, &g, false, {}, {}), InvalidArgument);
  const Eigen::VectorXd wrong = vec({1, 2});
  EXPECT_THROW(agent_step(s, &wrong, &wrong, true, {}, {0.1, 0.1, 0.5, 1}),
               InvalidArgument);
}

TEST(ReplicaApply, AddsSparseUpdateAndIgnoresSilence) {
  AgentState s = make_agent(1, {0, 2}, vec({0, 0, 0}));
  const SparseUpdate u{3, {0, 2}, {1.5, -2}};
  replica_apply(s, 2, &u);
  replica_apply(s, 2, &u);
  EXPECT_EQ(s.replica(2), vec({3, 0, -4}));
  replica_apply(s, 0, nullptr);
  EXPECT_EQ(s.replica(0), vec({0, 0, 0}));
  EXPECT_THROW(replica_apply(s, 5, &u), InvalidArgument);
  const SparseUpdate bad{4, {0}, {1}};
  EXPECT_THROW(replica_apply(s, 0, &bad), InvalidArgument);
  EXPECT_EQ(s.replica_ids, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(RecommendedGamma, ReferenceValue) {
  // rho = 1, phi = 0, p = 1, k = d = 1: 1 / (17 - 8).
  EXPECT_NEAR(recommended_gamma(1.0, 0.0, 1.0, 1, 1), 1.0 / 9.0, 1e-15);
  // rho = 1, phi = 1, p = 1, k = d = 1: 1 / (16 + 1 + 4 + 2 - 8).
  EXPECT_NEAR(recommended_gamma(1.0, 1.0, 1.0, 1, 1), 1.0 / 15.0, 1e-15);
}

TEST(RecommendedGamma, MonotoneInCommunication) {
  double last = 0.0;
  for (std::size_t k = 1; k <= 30; ++k) {
    const double g = recommended_gamma(0.3, 0.8, 0.9, k, 30);
    ASSERT_GT(g, last);
    ASSERT_LT(g, 1.0);
    last = g;
  }
  EXPECT_LT(recommended_gamma(0.3, 0.8, 0.6, 10, 30),
            recommended_gamma(0.3, 0.8, 0.9, 10, 30));
}

TEST(RecommendedGamma, RejectsOutOfDomain) {
  EXPECT_THROW(recommended_gamma(0.0, 0.5, 1.0, 1, 2), InvalidArgument);
  EXPECT_THROW(recommended_gamma(0.5, 2.5, 1.0, 1, 2), InvalidArgument);
  EXPECT_THROW(recommended_gamma(0.5, 0.5, 1.0, 3, 2), InvalidArgument);
}

TEST(RunConfig, Validation) {
  RunConfig c;
  c.k = 3;
  EXPECT_NO_THROW(c.validate(5));
  auto bad = [&](auto mutate) {
    RunConfig b = c;
    mutate(b);
    EXPECT_THROW(b.validate(5), InvalidArgument);
  };
  bad([](RunConfig& b) { b.alpha = 0; });
  bad([](RunConfig& b) { b.gamma = -1; });
  bad([](RunConfig& b) { b.beta = 1; });
  bad([](RunConfig& b) { b.p = 0.4; });
  bad([](RunConfig& b) { b.k = 6; });
  bad([](RunConfig& b) { b.T = 0; });
  bad([](RunConfig& b) { b.sigma = std::numeric_limits<double>::infinity(); });
  bad([](RunConfig& b) { b.G = 0; });
  bad([](RunConfig& b) { b.stride = 0; });
  bad([](RunConfig& b) { b.x0 = Eigen::VectorXd::Zero(4); });
}

// Replicas of agent j agree across every holder and equal j's own copy.
TEST(Simulator, ReplicasStayConsistent) {
  const LogisticProblem prob = small_logistic(5);
  const Topology topo = ring_chords(5, 1);
  const WeightMatrix w = laplacian_weights(topo);
  RunConfig c;
  c.alpha = 0.05;
  c.gamma = 0.2;
  c.p = 0.7;
  c.k = 2;
  c.T = 100;
  c.sigma = 0.3;
  c.seed = 4;
  Simulator sim(prob, topo, w, c);
  for (int t = 0; t < 100; ++t) {
    sim.step();
    for (const AgentState& holder : sim.agents()) {
      for (std::size_t j : holder.replica_ids) {
        ASSERT_EQ(holder.replica(j), sim.agents()[j].replica(j)) << "t=" << t;
      }
    }
  }
}

// With alpha -> 0 only gossip moves the iterates; symmetric weights keep the
// network average fixed.
TEST(Simulator, GossipPreservesAverage) {
  const std::size_t n = 6, d = 4;
  const Topology topo = ring_chords(n, 2);
  const WeightMatrix w = laplacian_weights(topo);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  std::vector<AgentState> agents;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = normal(rng);
    agents.push_back(make_agent(i, topo.neighbors(i), x));
  }
  auto mean = [&] {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(d);
    for (const auto& a : agents) s += a.x;
    return Eigen::VectorXd(s / static_cast<double>(n));
  };
  const Eigen::VectorXd start = mean();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
  const StepParams params{0.0, 0.3, 0.5, 2};
  for (int t = 0; t < 200; ++t) {
    std::vector<StepOutput> outs;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<NeighborWeight> nb;
      for (std::size_t j : topo.neighbors(i)) nb.push_back({j, w(i, j)});
      outs.push_back(agent_step(agents[i], &zero, &zero, true, nb, params));
    }
    for (std::size_t i = 0; i < n; ++i) {
      agents[i].x = outs[i].x;
      agents[i].m = outs[i].m;
    }
    for (std::size_t i = 0; i < n; ++i) {
      replica_apply(agents[i], i, &*outs[i].message);
      for (std::size_t j : topo.neighbors(i)) {
        replica_apply(agents[j], i, &*outs[i].message);
      }
    }
    ASSERT_LE((mean() - start).norm(), 1e-12);
  }
  // Compressed gossip still drives the agents together.
  double spread = 0.0;
  for (const auto& a : agents) spread += (a.x - start).squaredNorm();
  EXPECT_LT(spread, 1e-6);
}

TEST(Simulator, DeterministicAndSeedSensitive) {
  const LogisticProblem prob = small_logistic(4);
  const Topology topo = ring_chords(4, 1);
  const WeightMatrix w = laplacian_weights(topo);
  RunConfig c;
  c.p = 0.8;
  c.k = 3;
  c.T = 60;
  c.sigma = 0.5;
  c.seed = 9;
  const std::string a = metrics_csv(run(prob, topo, w, c));
  EXPECT_EQ(a, metrics_csv(run(prob, topo, w, c)));
  c.seed = 10;
  EXPECT_NE(a, metrics_csv(run(prob, topo, w, c)));
}

TEST(Simulator, BytesAndRows) {
  const LogisticProblem prob = small_logistic(4);
  const Topology topo = ring_chords(4, 1);
  const WeightMatrix w = laplacian_weights(topo);
  RunConfig c;
  c.p = 0.6;
  c.k = 2;
  c.T = 25;
  c.stride = 10;
  Simulator sim(prob, topo, w, c);
  std::uint64_t bytes = 0, messages = 0;
  while (sim.iteration() < c.T) {
    const IterationTrace& tr = sim.step();
    std::size_t active = 0;
    for (auto flag : tr.active) active += flag;
    ASSERT_EQ(tr.messages.size(), active);
    ASSERT_EQ(tr.bytes, active * message_bytes(2));
    for (const Message& m : tr.messages) ASSERT_EQ(m.update.size(), 2u);
    bytes += tr.bytes;
    messages += active;
  }
  const RunMetrics m = sim.run();
  EXPECT_EQ(m.total_bytes, bytes);
  EXPECT_EQ(m.total_messages, messages);
  ASSERT_EQ(m.rows.size(), 4u);  // 0, 10, 20, 25
  EXPECT_EQ(m.rows[0].iter, 0u);
  EXPECT_EQ(m.rows[1].iter, 10u);
  EXPECT_EQ(m.rows[3].iter, 25u);
  EXPECT_EQ(m.rows[3].bytes_cum, bytes);
  EXPECT_EQ(m.rows[0].bytes_cum, 0u);
  EXPECT_GE(m.clipped_fraction, 0.0);
  EXPECT_LE(m.clipped_fraction, 1.0);
}

TEST(Simulator, CsvFormat) {
  const LogisticProblem prob = small_logistic(2);
  const Topology topo(2, {{0, 1}});
  const WeightMatrix w = laplacian_weights(topo);
  RunConfig c;
  c.k = 6;
  c.T = 3;
  const std::string csv = metrics_csv(run(prob, topo, w, c));
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "iter,suboptimality,grad_norm_sq,consensus_error,bytes_cum,active_count");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5);
  }
  EXPECT_EQ(rows, 4);
  EXPECT_NE(csv.find("\n3,"), std::string::npos);
  // Full participation, k = d: 2 agents x 3 iterations x (12 * 6 + 16) bytes.
  EXPECT_NE(csv.find(",528,2\n"), std::string::npos);
}

TEST(Simulator, DetectsDivergence) {
  std::vector<Eigen::MatrixXd> a{Eigen::MatrixXd::Identity(2, 2) * 100.0};
  std::vector<Eigen::VectorXd> centers{vec({1, 1})};
  const QuadraticProblem prob(a, centers);
  const Topology topo(1, {});
  const WeightMatrix w = laplacian_weights(topo);
  RunConfig c;
  // Clipping keeps gradients finite, so the step itself must overflow.
  c.alpha = 1e300;
  c.gamma = 0.1;
  c.k = 2;
  c.T = 1000;
  c.G = 1e10;
  try {
    run(prob, topo, w, c);
    FAIL() << "expected divergence";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("agent 0"), std::string::npos);
  }
}

TEST(Simulator, RejectsMismatchedSizes) {
  const LogisticProblem prob = small_logistic(3);
  const Topology topo = ring_chords(4, 1);
  const WeightMatrix w = laplacian_weights(topo);
  RunConfig c;
  EXPECT_THROW(Simulator(prob, topo, w, c), InvalidArgument);
}

TEST(Simulator, BudgetOverloadChecksParameters) {
  const LogisticProblem prob = small_logistic(4, 8, 6);
  const Topology topo = ring_chords(4, 1);
  const WeightMatrix w = laplacian_weights(topo);
  RunConfig c;
  c.k = 3;
  c.T = 50;
  PrivacyParams pp;
  pp.epsilon = 1.0;
  pp.T = 50;
  pp.p = 1.0;
  pp.q = 8;
  pp.k = 3;
  pp.d = 6;
  pp.G = 1.0;
  PrivacyBudget b = calibrate(pp);
  EXPECT_NO_THROW(run(prob, topo, w, c, b));
  b.sigma *= 0.5;
  EXPECT_THROW(run(prob, topo, w, c, b), BudgetViolation);
  pp.k = 2;
  EXPECT_THROW(run(prob, topo, w, c, calibrate(pp)), InvalidArgument);
}

}  // namespace
}  // namespace doadp
