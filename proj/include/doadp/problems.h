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

// Finite-sum objectives f(x) = (1/n) sum_i f_i(x) with per-agent stochastic
// gradient oracles, datasets, and a full-batch reference solver for f*.

#ifndef DOADP_PROBLEMS_H_
#define DOADP_PROBLEMS_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace doadp {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Labeled samples, one per row. Agent i owns rows [i * per_agent,
// (i + 1) * per_agent).
struct Dataset {
  RowMatrix features;
  Eigen::VectorXd labels;  // each +1 or -1
  std::size_t num_agents = 1;
  std::size_t per_agent = 0;

  std::size_t size() const { return static_cast<std::size_t>(labels.size()); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  std::size_t first_row(std::size_t agent) const { return agent * per_agent; }
  // Throws InvalidArgument unless the partition is a disjoint equal cover.
  void validate() const;
};

// Shuffles rows with the given seed and deals floor(N / n) samples to each of
// n agents. Leftover rows are dropped.
Dataset partition_dataset(const Dataset& data, std::size_t n,
                          std::uint64_t seed);

struct SyntheticLogisticSpec {
  std::size_t n = 20;
  std::size_t q = 50;
  std::size_t d = 30;
  // Logit noise is N(0, 1/margin^2); an infinite margin gives
  // labels = sign(a^T w) exactly.
  double margin = 5.0;
  double label_noise = 0.0;  // probability of flipping each label
  std::uint64_t seed = 1;
};

// Features a ~ N(0, I/d) and a planted w ~ N(0, I), so a^T w has unit
// variance. Dealt evenly: agent i gets q consecutive rows.
Dataset synthetic_logistic_data(const SyntheticLogisticSpec& spec);

// svmlight / libsvm text: "label idx:val ...", 1-based strictly increasing
// indices, '#' starts a comment. Labels must parse to +/-1 (0 is read as -1).
// Dimension is max(min_dim, largest index seen). The result is unpartitioned
// (num_agents = 1).
Dataset load_svmlight(const std::string& path, std::size_t min_dim = 0);
Dataset parse_svmlight(std::istream& in, std::size_t min_dim = 0);
void write_svmlight(const Dataset& data, std::ostream& out);
void write_svmlight(const Dataset& data, const std::string& path);

// Per-sample regularized logistic loss
//   log(1 + exp(-b a^T x)) + ||x||^2 / (2q)
// and its gradient -b a sigmoid(-b a^T x) + x / q. Averaging q samples gives
// the local objective f_i exactly.
double logistic_loss(const Eigen::VectorXd& x,
                     const Eigen::Ref<const Eigen::VectorXd>& a, double b,
                     std::size_t q);
Eigen::VectorXd logistic_grad(const Eigen::VectorXd& x,
                              const Eigen::Ref<const Eigen::VectorXd>& a,
                              double b, std::size_t q);

class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t num_agents() const = 0;
  // q: samples per agent. Stochastic gradients draw one index from [0, q).
  virtual std::size_t local_size() const = 0;
  // Upper bound on the smoothness constant of every f_i.
  virtual double smoothness() const = 0;

  virtual double sample_loss(std::size_t agent, const Eigen::VectorXd& x,
                             std::size_t sample) const = 0;
  virtual Eigen::VectorXd sample_gradient(std::size_t agent,
                                          const Eigen::VectorXd& x,
                                          std::size_t sample) const = 0;
  virtual double local_loss(std::size_t agent,
                            const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd local_gradient(std::size_t agent,
                                         const Eigen::VectorXd& x) const = 0;

  double loss(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  // (1/q) sum_s ||grad l_i(x, s) - grad f_i(x)||^2, by enumeration.
  double gradient_variance(std::size_t agent, const Eigen::VectorXd& x) const;
};

class LogisticProblem : public Problem {
 public:
  explicit LogisticProblem(Dataset data);

  std::size_t dim() const override { return data_.dim(); }
  std::size_t num_agents() const override { return data_.num_agents; }
  std::size_t local_size() const override { return data_.per_agent; }
  double smoothness() const override { return smoothness_; }

  double sample_loss(std::size_t agent, const Eigen::VectorXd& x,
                     std::size_t sample) const override;
  Eigen::VectorXd sample_gradient(std::size_t agent, const Eigen::VectorXd& x,
                                  std::size_t sample) const override;
  double local_loss(std::size_t agent, const Eigen::VectorXd& x) const override;
  Eigen::VectorXd local_gradient(std::size_t agent,
                                 const Eigen::VectorXd& x) const override;

  const Dataset& data() const { return data_; }

 private:
  Dataset data_;
  double smoothness_ = 0.0;
};

// f_i(x) = 1/2 (x - c_i)^T A_i (x - c_i). Gradients are exact (q = 1).
class QuadraticProblem : public Problem {
 public:
  QuadraticProblem(std::vector<Eigen::MatrixXd> curvatures,
                   std::vector<Eigen::VectorXd> centers);

  std::size_t dim() const override { return static_cast<std::size_t>(centers_[0].size()); }
  std::size_t num_agents() const override { return centers_.size(); }
  std::size_t local_size() const override { return 1; }
  double smoothness() const override { return smoothness_; }

  double sample_loss(std::size_t agent, const Eigen::VectorXd& x,
                     std::size_t sample) const override;
  Eigen::VectorXd sample_gradient(std::size_t agent, const Eigen::VectorXd& x,
                                  std::size_t sample) const override;
  double local_loss(std::size_t agent, const Eigen::VectorXd& x) const override;
  Eigen::VectorXd local_gradient(std::size_t agent,
                                 const Eigen::VectorXd& x) const override;

  // x* = (sum A_i)^{-1} sum A_i c_i.
  Eigen::VectorXd minimizer() const;
  const Eigen::MatrixXd& curvature(std::size_t i) const { return curvatures_[i]; }
  const Eigen::VectorXd& center(std::size_t i) const { return centers_[i]; }

 private:
  std::vector<Eigen::MatrixXd> curvatures_;
  std::vector<Eigen::VectorXd> centers_;
  double smoothness_ = 0.0;
};

struct QuadraticSpec {
  std::size_t n = 10;
  std::size_t d = 20;
  // Eigenvalues of the shared curvature are spread log-uniformly over
  // [1, condition].
  double condition = 10.0;
  // Per-agent relative perturbation of the curvature. 0 gives every agent the
  // same A, so only the centers differ.
  double heterogeneity = 0.0;
  std::uint64_t seed = 1;
};

QuadraticProblem quadratic_problem(const QuadraticSpec& spec);

struct ReferenceSolution {
  Eigen::VectorXd x;
  double f = 0.0;
  double grad_norm = 0.0;
  std::size_t iterations = 0;
};

// Full-batch gradient descent with backtracking from x = 0 until
// ||grad f|| <= tolerance. Throws NumericalError past max_iterations.
ReferenceSolution solve_reference(const Problem& problem,
                                  double tolerance = 1e-9,
                                  std::size_t max_iterations = 2'000'000);

}  // namespace doadp

#endif  // DOADP_PROBLEMS_H_
