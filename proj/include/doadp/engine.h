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

// DO-ADP agent state machine and the synchronous multi-agent simulator.
//
// One iteration, for every agent i:
//   eta ~ Bern(p)
//   active:   m+ = g + theta + beta m,  x+ = x - alpha m+ + gamma sum_j w_ij (xh_j - xh_i)
//             s  = top_k(x+ - xh_i), broadcast to neighbors
//   inactive: m+ = beta m,              x+ = x + gamma sum_j w_ij (xh_j - xh_i)
// then, after a barrier, every agent adds each received s_j (and its own s_i)
// to its replica table.

#ifndef DOADP_ENGINE_H_
#define DOADP_ENGINE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "doadp/compress.h"
#include "doadp/graph.h"
#include "doadp/privacy.h"
#include "doadp/problems.h"
#include "doadp/rng.h"

namespace doadp {

struct RunConfig {
  double alpha = 0.01;
  double gamma = 0.1;
  double beta = 0.5;
  double p = 1.0;
  std::size_t k = 1;
  std::uint64_t T = 100;
  double sigma = 0.0;
  double G = 1.0;
  std::uint64_t seed = 0;
  // Metrics are recorded at t = 0, every `stride` iterations, and at t = T.
  std::uint64_t stride = 1;
  // Shared initial iterate; zero when unset.
  std::optional<Eigen::VectorXd> x0;

  // Throws InvalidArgument naming the offending field.
  void validate(std::size_t dim) const;
};

struct AgentState {
  std::size_t id = 0;
  Eigen::VectorXd x;
  Eigen::VectorXd m;
  // Sorted agent ids {id} U neighbors(id), parallel to `replicas`.
  std::vector<std::size_t> replica_ids;
  std::vector<Eigen::VectorXd> replicas;

  // Throws InvalidArgument when `j` is not in the table.
  const Eigen::VectorXd& replica(std::size_t j) const;
  Eigen::VectorXd& replica(std::size_t j);
  bool has_replica(std::size_t j) const;
};

// Fresh state: x = x0, m = 0, replicas of self and neighbors all zero.
AgentState make_agent(std::size_t id, const std::vector<std::size_t>& neighbors,
                      const Eigen::VectorXd& x0);

struct NeighborWeight {
  std::size_t j = 0;
  double w = 0.0;
};

struct StepParams {
  double alpha = 0.0;
  double gamma = 0.0;
  double beta = 0.0;
  std::size_t k = 1;
};

struct StepOutput {
  Eigen::VectorXd x;
  Eigen::VectorXd m;
  std::optional<SparseUpdate> message;
};

// One local update. `grad` (already clipped) and `noise` must both be given
// when active and both be null when inactive. Reads neighbor replicas from
// the agent's own table; does not modify the state.
StepOutput agent_step(const AgentState& state, const Eigen::VectorXd* grad,
                      const Eigen::VectorXd* noise, bool active,
                      std::span<const NeighborWeight> neighbors,
                      const StepParams& params);

// xh_sender += densify(s). A null update leaves the table unchanged.
void replica_apply(AgentState& state, std::size_t sender,
                   const SparseUpdate* update);

bool activation_draw(double p, Stream& stream);
bool activation_draw(double p, const StreamKey& key);

// gamma = rho p k / (d (16 rho + rho^2 + 4 phi^2 + 2 rho phi^2) - 8 rho p k).
double recommended_gamma(double rho, double phi, double p, std::size_t k,
                         std::size_t d);

struct Message {
  std::size_t sender = 0;
  std::uint64_t iteration = 0;
  SparseUpdate update;
};

struct IterationTrace {
  std::uint64_t t = 0;
  std::vector<std::uint8_t> active;
  std::vector<Message> messages;
  std::uint64_t bytes = 0;
};

struct MetricsRow {
  std::uint64_t iter = 0;
  double suboptimality = 0.0;     // f(xbar) - f*
  double grad_norm_sq = 0.0;      // ||grad f(xbar)||^2
  double consensus_error = 0.0;   // sum_i ||xbar - x_i||^2
  std::uint64_t bytes_cum = 0;
  std::size_t active_count = 0;   // agents active in the iteration ending here
  double momentum_sq_mean = 0.0;  // (1/n) sum_i ||m_i||^2
};

struct RunMetrics {
  std::vector<MetricsRow> rows;
  // (1/T) sum_{t<T} ||grad f(xbar_t)||^2, over every iteration regardless of
  // the recording stride.
  double grad_norm_sq_avg = 0.0;
  // Largest per-agent stochastic-gradient variance seen at recorded
  // iterations, evaluated at each agent's own iterate on raw gradients.
  double varsigma_sq_max = 0.0;
  double clipped_fraction = 0.0;
  std::uint64_t total_bytes = 0;
  std::uint64_t total_messages = 0;
  double f_star = 0.0;
  Eigen::VectorXd final_average;
};

// Sequential executor of the synchronous rounds.
class Simulator {
 public:
  // `f_star` defaults to 0, making suboptimality the raw objective value.
  Simulator(const Problem& problem, const Topology& topology,
            const WeightMatrix& weights, RunConfig config, double f_star = 0.0);

  // Advances one iteration. Throws NumericalError naming the iteration when
  // an iterate turns non-finite.
  const IterationTrace& step();
  // Runs the remaining iterations and returns the collected metrics.
  RunMetrics run();

  std::uint64_t iteration() const { return t_; }
  const std::vector<AgentState>& agents() const { return agents_; }
  const RunConfig& config() const { return config_; }
  Eigen::VectorXd average() const;

 private:
  void record(std::size_t active_count);
  std::vector<NeighborWeight> neighbor_weights(std::size_t i) const;

  const Problem& problem_;
  const Topology& topology_;
  const WeightMatrix& weights_;
  RunConfig config_;
  std::vector<std::vector<NeighborWeight>> neighbor_weights_;
  std::vector<AgentState> agents_;
  IterationTrace trace_;
  RunMetrics metrics_;
  std::uint64_t t_ = 0;
  double grad_norm_sq_sum_ = 0.0;
  std::uint64_t clipped_ = 0;
  std::uint64_t gradient_coords_ = 0;
  bool started_ = false;
};

RunMetrics run(const Problem& problem, const Topology& topology,
               const WeightMatrix& weights, const RunConfig& config,
               double f_star = 0.0);
// Uses budget.sigma after checking that the budget describes this run
// (same p, k, d, T, q, G) and certifies.
RunMetrics run(const Problem& problem, const Topology& topology,
               const WeightMatrix& weights, RunConfig config,
               const PrivacyBudget& budget, double f_star = 0.0);

// "iter,suboptimality,grad_norm_sq,consensus_error,bytes_cum,active_count"
// followed by one row per recorded iteration; reals printed with %.17g.
std::string metrics_csv(const RunMetrics& metrics);

}  // namespace doadp

#endif  // DOADP_ENGINE_H_
