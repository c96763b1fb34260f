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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "doadp/error.h"

namespace doadp {
namespace {

bool finite_positive(double v) { return v > 0.0 && std::isfinite(v); }

void check_dim(const Eigen::VectorXd& v, Eigen::Index d, const char* what) {
  if (v.size() != d) {
    throw InvalidArgument(std::string(what) + " has dimension " +
                          std::to_string(v.size()) + ", expected " +
                          std::to_string(d));
  }
}

std::size_t replica_slot(const std::vector<std::size_t>& ids, std::size_t j) {
  const auto it = std::lower_bound(ids.begin(), ids.end(), j);
  if (it == ids.end() || *it != j) {
    throw InvalidArgument("agent " + std::to_string(j) +
                          " is not in the replica table");
  }
  return static_cast<std::size_t>(it - ids.begin());
}

}  // namespace

void RunConfig::validate(std::size_t dim) const {
  if (!finite_positive(alpha)) throw InvalidArgument("alpha must be positive");
  if (!finite_positive(gamma)) throw InvalidArgument("gamma must be positive");
  if (!(beta > 0.0 && beta < 1.0)) {
    throw InvalidArgument("beta must lie in (0, 1)");
  }
  if (!(p >= 0.5 && p <= 1.0)) throw InvalidArgument("p must lie in [1/2, 1]");
  if (k < 1 || k > dim) {
    throw InvalidArgument("k must lie in [1, " + std::to_string(dim) + "]");
  }
  if (T < 1) throw InvalidArgument("T must be >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("sigma must be finite and >= 0");
  }
  if (!finite_positive(G)) throw InvalidArgument("G must be positive and finite");
  if (stride < 1) throw InvalidArgument("stride must be >= 1");
  if (x0) {
    check_dim(*x0, static_cast<Eigen::Index>(dim), "x0");
    if (!x0->allFinite()) throw InvalidArgument("x0 must be finite");
  }
}

const Eigen::VectorXd& AgentState::replica(std::size_t j) const {
  return replicas[replica_slot(replica_ids, j)];
}

Eigen::VectorXd& AgentState::replica(std::size_t j) {
  return replicas[replica_slot(replica_ids, j)];
}

bool AgentState::has_replica(std::size_t j) const {
  return std::binary_search(replica_ids.begin(), replica_ids.end(), j);
}

AgentState make_agent(std::size_t id, const std::vector<std::size_t>& neighbors,
                      const Eigen::VectorXd& x0) {
  AgentState s;
  s.id = id;
  s.x = x0;
  s.m = Eigen::VectorXd::Zero(x0.size());
  s.replica_ids = neighbors;
  s.replica_ids.push_back(id);
  std::sort(s.replica_ids.begin(), s.replica_ids.end());
  s.replica_ids.erase(std::unique(s.replica_ids.begin(), s.replica_ids.end()),
                      s.replica_ids.end());
  s.replicas.assign(s.replica_ids.size(), Eigen::VectorXd::Zero(x0.size()));
  return s;
}

StepOutput agent_step(const AgentState& state, const Eigen::VectorXd* grad,
                      const Eigen::VectorXd* noise, bool active,
                      std::span<const NeighborWeight> neighbors,
                      const StepParams& params) {
  const Eigen::Index d = state.x.size();
  check_dim(state.m, d, "momentum");
  if (active != (grad != nullptr) || active != (noise != nullptr)) {
    throw InvalidArgument(
        "gradient and noise must be supplied exactly when the agent is active");
  }
  StepOutput out;
  if (active) {
    check_dim(*grad, d, "gradient");
    check_dim(*noise, d, "noise");
    out.m = (*grad + *noise) + params.beta * state.m;
    out.x = state.x - params.alpha * out.m;
  } else {
    out.m = params.beta * state.m;
    out.x = state.x;
  }
  if (!neighbors.empty()) {
    const Eigen::VectorXd& own = state.replica(state.id);
    Eigen::VectorXd pull = Eigen::VectorXd::Zero(d);
    for (const NeighborWeight& nb : neighbors) {
      const Eigen::VectorXd& other = state.replica(nb.j);
      check_dim(other, d, "replica");
      pull += nb.w * (other - own);
    }
    out.x += params.gamma * pull;
  }
  // A non-finite iterate is reported by the caller, which knows the iteration.
  if (active && out.x.allFinite()) {
    out.message = top_k(out.x - state.replica(state.id), params.k);
  }
  return out;
}

void replica_apply(AgentState& state, std::size_t sender,
                   const SparseUpdate* update) {
  Eigen::VectorXd& target = state.replica(sender);
  if (update == nullptr) return;
  if (update->dim != static_cast<std::size_t>(target.size())) {
    throw InvalidArgument("update dimension does not match the replica");
  }
  update->add_to(target);
}

bool activation_draw(double p, Stream& stream) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("p must lie in [0, 1]");
  std::bernoulli_distribution bern(p);
  return bern(stream);
}

bool activation_draw(double p, const StreamKey& key) {
  Stream stream = make_stream(key);
  return activation_draw(p, stream);
}

double recommended_gamma(double rho, double phi, double p, std::size_t k,
                         std::size_t d) {
  if (!(rho > 0.0 && rho <= 1.0)) throw InvalidArgument("rho must lie in (0, 1]");
  if (!(phi >= 0.0 && phi <= 2.0)) throw InvalidArgument("phi must lie in [0, 2]");
  if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("p must lie in (0, 1]");
  if (k < 1 || k > d) throw InvalidArgument("need 1 <= k <= d");
  const double kd = static_cast<double>(k);
  const double dd = static_cast<double>(d);
  const double phi2 = phi * phi;
  const double denom =
      dd * (16.0 * rho + rho * rho + 4.0 * phi2 + 2.0 * rho * phi2) -
      8.0 * rho * p * kd;
  if (!(denom > 0.0)) {
    throw InvalidArgument("recommended gamma has a nonpositive denominator");
  }
  return rho * p * kd / denom;
}

Simulator::Simulator(const Problem& problem, const Topology& topology,
                     const WeightMatrix& weights, RunConfig config,
                     double f_star)
    : problem_(problem),
      topology_(topology),
      weights_(weights),
      config_(std::move(config)) {
  const std::size_t n = problem_.num_agents();
  const std::size_t d = problem_.dim();
  config_.validate(d);
  if (topology_.size() != n || weights_.size() != n) {
    throw InvalidArgument("problem has " + std::to_string(n) +
                          " agents but the topology has " +
                          std::to_string(topology_.size()) +
                          " and the weight matrix " +
                          std::to_string(weights_.size()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && weights_(i, j) != 0.0 && !topology_.has_edge(i, j)) {
        throw InvalidArgument("weight (" + std::to_string(i) + ", " +
                              std::to_string(j) + ") is nonzero off the graph");
      }
    }
  }
  const Eigen::VectorXd x0 = config_.x0.value_or(
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d)));
  for (std::size_t i = 0; i < n; ++i) {
    agents_.push_back(make_agent(i, topology_.neighbors(i), x0));
    neighbor_weights_.push_back(neighbor_weights(i));
  }
  metrics_.f_star = f_star;
  record(0);
}

std::vector<NeighborWeight> Simulator::neighbor_weights(std::size_t i) const {
  std::vector<NeighborWeight> out;
  for (std::size_t j : topology_.neighbors(i)) {
    out.push_back({j, weights_(i, j)});
  }
  return out;
}

Eigen::VectorXd Simulator::average() const {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(agents_[0].x.size());
  for (const AgentState& a : agents_) sum += a.x;
  return sum / static_cast<double>(agents_.size());
}

void Simulator::record(std::size_t active_count) {
  const Eigen::VectorXd xbar = average();
  MetricsRow row;
  row.iter = t_;
  row.suboptimality = problem_.loss(xbar) - metrics_.f_star;
  row.grad_norm_sq = problem_.gradient(xbar).squaredNorm();
  double momentum = 0.0;
  for (const AgentState& a : agents_) {
    row.consensus_error += (xbar - a.x).squaredNorm();
    momentum += a.m.squaredNorm();
    metrics_.varsigma_sq_max = std::max(
        metrics_.varsigma_sq_max, problem_.gradient_variance(a.id, a.x));
  }
  row.momentum_sq_mean = momentum / static_cast<double>(agents_.size());
  row.bytes_cum = metrics_.total_bytes;
  row.active_count = active_count;
  metrics_.rows.push_back(row);
}

const IterationTrace& Simulator::step() {
  const std::size_t n = agents_.size();
  const std::size_t d = problem_.dim();
  const std::size_t q = problem_.local_size();
  const StepParams params{config_.alpha, config_.gamma, config_.beta,
                          config_.k};

  trace_.t = t_;
  trace_.active.assign(n, 0);
  trace_.messages.clear();
  trace_.bytes = 0;

  grad_norm_sq_sum_ += problem_.gradient(average()).squaredNorm();

  // Phase 1: every agent reads the iteration-t snapshot.
  std::vector<StepOutput> outputs;
  outputs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const AgentState& agent = agents_[i];
    const bool active = activation_draw(
        config_.p, StreamKey{config_.seed, i, t_, StreamPurpose::kActivation});
    if (!active) {
      outputs.push_back(agent_step(agent, nullptr, nullptr, false,
                                   neighbor_weights_[i], params));
      continue;
    }
    trace_.active[i] = 1;
    Stream sampler =
        make_stream({config_.seed, i, t_, StreamPurpose::kSample});
    std::uniform_int_distribution<std::size_t> pick(0, q - 1);
    const std::size_t zeta = pick(sampler);
    const Eigen::VectorXd raw = problem_.sample_gradient(i, agent.x, zeta);
    clipped_ += count_clipped(raw, config_.G);
    gradient_coords_ += d;
    const Eigen::VectorXd grad = clip_per_coordinate(raw, config_.G);
    const Eigen::VectorXd noise = sample_gaussian_noise(
        d, config_.sigma,
        StreamKey{config_.seed, i, t_, StreamPurpose::kNoise});
    outputs.push_back(
        agent_step(agent, &grad, &noise, true, neighbor_weights_[i], params));
  }

  // Barrier, then phase 2: commit iterates and deliver messages.
  std::size_t active_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    StepOutput& out = outputs[i];
    if (!out.x.allFinite() || !out.m.allFinite()) {
      throw NumericalError("non-finite iterate at iteration " +
                           std::to_string(t_) + " (agent " +
                           std::to_string(i) + ")");
    }
    agents_[i].x = std::move(out.x);
    agents_[i].m = std::move(out.m);
    if (out.message) {
      ++active_count;
      trace_.bytes += message_bytes(out.message->size());
      trace_.messages.push_back({i, t_, std::move(*out.message)});
    }
  }
  for (const Message& msg : trace_.messages) {
    replica_apply(agents_[msg.sender], msg.sender, &msg.update);
    for (std::size_t j : topology_.neighbors(msg.sender)) {
      replica_apply(agents_[j], msg.sender, &msg.update);
    }
  }

  metrics_.total_bytes += trace_.bytes;
  metrics_.total_messages += trace_.messages.size();
  ++t_;
  if (t_ % config_.stride == 0 || t_ == config_.T) record(active_count);
  return trace_;
}

RunMetrics Simulator::run() {
  while (t_ < config_.T) step();
  RunMetrics out = metrics_;
  out.grad_norm_sq_avg = grad_norm_sq_sum_ / static_cast<double>(t_);
  out.clipped_fraction =
      gradient_coords_ == 0
          ? 0.0
          : static_cast<double>(clipped_) / static_cast<double>(gradient_coords_);
  out.final_average = average();
  return out;
}

RunMetrics run(const Problem& problem, const Topology& topology,
               const WeightMatrix& weights, const RunConfig& config,
               double f_star) {
  Simulator sim(problem, topology, weights, config, f_star);
  return sim.run();
}

RunMetrics run(const Problem& problem, const Topology& topology,
               const WeightMatrix& weights, RunConfig config,
               const PrivacyBudget& budget, double f_star) {
  const PrivacyParams& pp = budget.params;
  if (pp.p != config.p || pp.k != config.k || pp.T != config.T ||
      pp.G != config.G || pp.d != problem.dim() ||
      pp.q != problem.local_size()) {
    throw InvalidArgument(
        "privacy budget parameters (p, k, T, G, d, q) do not match the run");
  }
  verify_budget(budget);
  config.sigma = budget.sigma;
  return run(problem, topology, weights, config, f_star);
}

std::string metrics_csv(const RunMetrics& metrics) {
  std::ostringstream out;
  out << "iter,suboptimality,grad_norm_sq,consensus_error,bytes_cum,"
         "active_count\n";
  char buf[160];
  for (const MetricsRow& r : metrics.rows) {
    std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%.17g,%llu,%zu\n",
                  static_cast<unsigned long long>(r.iter), r.suboptimality,
                  r.grad_norm_sq, r.consensus_error,
                  static_cast<unsigned long long>(r.bytes_cum),
                  r.active_count);
    out << buf;
  }
  return out.str();
}

}  // namespace doadp
