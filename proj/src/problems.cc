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

#include "doadp/problems.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string_view>

#include <Eigen/Eigenvalues>

#include "doadp/error.h"
#include "doadp/rng.h"

namespace doadp {
namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_label(double b) {
  if (b != 1.0 && b != -1.0) {
    throw InvalidArgument("label must be +1 or -1");
  }
}

double max_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().maxCoeff();
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n\v\f";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_index(std::string_view s, std::size_t& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

void Dataset::validate() const {
  if (static_cast<std::size_t>(features.rows()) != size()) {
    throw InvalidArgument("feature rows and label count differ");
  }
  if (num_agents < 1 || per_agent < 1) {
    throw InvalidArgument("dataset needs at least one agent and one sample each");
  }
  if (num_agents * per_agent != size()) {
    throw InvalidArgument("partition does not cover the dataset: " +
                          std::to_string(num_agents) + " x " +
                          std::to_string(per_agent) + " != " +
                          std::to_string(size()));
  }
  for (Eigen::Index r = 0; r < labels.size(); ++r) check_label(labels[r]);
  if (!features.allFinite()) throw InvalidArgument("non-finite feature value");
}

Dataset partition_dataset(const Dataset& data, std::size_t n,
                          std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("agent count must be >= 1");
  const std::size_t per = data.size() / n;
  if (per < 1) {
    throw InvalidArgument("dataset of " + std::to_string(data.size()) +
                          " samples cannot feed " + std::to_string(n) +
                          " agents");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Stream stream = make_stream({seed, 0, 0, StreamPurpose::kPartition});
  std::shuffle(order.begin(), order.end(), stream);

  Dataset out;
  out.num_agents = n;
  out.per_agent = per;
  out.features.resize(static_cast<Eigen::Index>(n * per), data.features.cols());
  out.labels.resize(static_cast<Eigen::Index>(n * per));
  for (std::size_t r = 0; r < n * per; ++r) {
    const auto src = static_cast<Eigen::Index>(order[r]);
    out.features.row(static_cast<Eigen::Index>(r)) = data.features.row(src);
    out.labels[static_cast<Eigen::Index>(r)] = data.labels[src];
  }
  return out;
}

Dataset synthetic_logistic_data(const SyntheticLogisticSpec& spec) {
  if (spec.n < 1 || spec.q < 1 || spec.d < 1) {
    throw InvalidArgument("synthetic data needs n, q, d >= 1");
  }
  if (!(spec.margin > 0.0)) throw InvalidArgument("margin must be positive");
  if (!(spec.label_noise >= 0.0 && spec.label_noise <= 1.0)) {
    throw InvalidArgument("label_noise must lie in [0, 1]");
  }
  const std::size_t rows = spec.n * spec.q;
  const auto d = static_cast<Eigen::Index>(spec.d);
  Stream stream = make_stream({spec.seed, 0, 0, StreamPurpose::kDataset});
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::VectorXd w(d);
  for (Eigen::Index j = 0; j < d; ++j) w[j] = normal(stream);

  Dataset out;
  out.num_agents = spec.n;
  out.per_agent = spec.q;
  out.features.resize(static_cast<Eigen::Index>(rows), d);
  out.labels.resize(static_cast<Eigen::Index>(rows));
  const double feature_scale = 1.0 / std::sqrt(static_cast<double>(spec.d));
  const bool noisy_logit = std::isfinite(spec.margin);
  // Logit noise and flips use their own streams, so features and planted
  // scores do not depend on the noise settings.
  Stream logit_stream = make_stream({spec.seed, 1, 0, StreamPurpose::kDataset});
  Stream flip_stream = make_stream({spec.seed, 2, 0, StreamPurpose::kDataset});
  std::normal_distribution<double> logit_noise(0.0, 1.0);
  std::bernoulli_distribution flip(spec.label_noise);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    for (Eigen::Index j = 0; j < d; ++j) {
      out.features(row, j) = feature_scale * normal(stream);
    }
    double z = out.features.row(row).dot(w);
    if (noisy_logit) z += logit_noise(logit_stream) / spec.margin;
    double label = z >= 0.0 ? 1.0 : -1.0;
    if (flip(flip_stream)) label = -label;
    out.labels[row] = label;
  }
  return out;
}

Dataset parse_svmlight(std::istream& in, std::size_t min_dim) {
  struct Row {
    double label;
    std::vector<std::pair<std::size_t, double>> entries;
  };
  std::vector<Row> rows;
  std::size_t dim = min_dim;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = trim(view);
    if (view.empty()) continue;

    std::istringstream tokens{std::string(view)};
    std::string token;
    tokens >> token;
    double label = 0.0;
    if (!parse_double(token, label)) {
      throw ParseError("bad label '" + token + "'", lineno);
    }
    if (label == 0.0) label = -1.0;
    if (label != 1.0 && label != -1.0) {
      throw ParseError("label must be +1, -1 or 0, got '" + token + "'",
                       lineno);
    }
    Row row{label, {}};
    std::size_t last = 0;
    while (tokens >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos) {
        throw ParseError("expected idx:val, got '" + token + "'", lineno);
      }
      std::size_t idx = 0;
      double value = 0.0;
      const std::string_view tv(token);
      if (!parse_index(tv.substr(0, colon), idx) || idx == 0) {
        throw ParseError("bad feature index in '" + token + "'", lineno);
      }
      if (!parse_double(tv.substr(colon + 1), value) || !std::isfinite(value)) {
        throw ParseError("bad feature value in '" + token + "'", lineno);
      }
      if (idx <= last) {
        throw ParseError("feature indices must be strictly increasing", lineno);
      }
      last = idx;
      row.entries.emplace_back(idx - 1, value);
    }
    dim = std::max(dim, last);
    rows.push_back(std::move(row));
  }
  if (in.bad()) throw Error("read error while parsing svmlight data");
  if (rows.empty()) throw ParseError("no samples in svmlight input", 0);
  if (dim == 0) throw ParseError("svmlight input has no features", 0);

  Dataset out;
  out.num_agents = 1;
  out.per_agent = rows.size();
  out.features = RowMatrix::Zero(static_cast<Eigen::Index>(rows.size()),
                                 static_cast<Eigen::Index>(dim));
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    out.labels[row] = rows[r].label;
    for (const auto& [idx, value] : rows[r].entries) {
      out.features(row, static_cast<Eigen::Index>(idx)) = value;
    }
  }
  return out;
}

Dataset load_svmlight(const std::string& path, std::size_t min_dim) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return parse_svmlight(in, min_dim);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

void write_svmlight(const Dataset& data, std::ostream& out) {
  char buf[64];
  for (Eigen::Index r = 0; r < data.labels.size(); ++r) {
    out << (data.labels[r] > 0.0 ? "+1" : "-1");
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
      const double v = data.features(r, j);
      if (v == 0.0) continue;
      std::snprintf(buf, sizeof(buf), " %lld:%.17g",
                    static_cast<long long>(j + 1), v);
      out << buf;
    }
    out << '\n';
  }
}

void write_svmlight(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_svmlight(data, out);
  if (!out) throw Error("write failed: " + path);
}

double logistic_loss(const Eigen::VectorXd& x,
                     const Eigen::Ref<const Eigen::VectorXd>& a, double b,
                     std::size_t q) {
  check_label(b);
  const double qd = static_cast<double>(q);
  return softplus(-b * a.dot(x)) + x.squaredNorm() / (2.0 * qd);
}

Eigen::VectorXd logistic_grad(const Eigen::VectorXd& x,
                              const Eigen::Ref<const Eigen::VectorXd>& a,
                              double b, std::size_t q) {
  check_label(b);
  const double qd = static_cast<double>(q);
  const double s = sigmoid(-b * a.dot(x));
  return (-b * s) * a + x / qd;
}

double Problem::loss(const Eigen::VectorXd& x) const {
  double total = 0.0;
  for (std::size_t i = 0; i < num_agents(); ++i) total += local_loss(i, x);
  return total / static_cast<double>(num_agents());
}

Eigen::VectorXd Problem::gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd total = Eigen::VectorXd::Zero(x.size());
  for (std::size_t i = 0; i < num_agents(); ++i) total += local_gradient(i, x);
  return total / static_cast<double>(num_agents());
}

double Problem::gradient_variance(std::size_t agent,
                                  const Eigen::VectorXd& x) const {
  const Eigen::VectorXd mean = local_gradient(agent, x);
  double total = 0.0;
  for (std::size_t s = 0; s < local_size(); ++s) {
    total += (sample_gradient(agent, x, s) - mean).squaredNorm();
  }
  return total / static_cast<double>(local_size());
}

LogisticProblem::LogisticProblem(Dataset data) : data_(std::move(data)) {
  data_.validate();
  const auto q = static_cast<Eigen::Index>(data_.per_agent);
  const double qd = static_cast<double>(data_.per_agent);
  // Hessian of f_i is bounded by A_i^T A_i / (4q) + I / q.
  for (std::size_t i = 0; i < data_.num_agents; ++i) {
    const auto block = data_.features.middleRows(
        static_cast<Eigen::Index>(data_.first_row(i)), q);
    const Eigen::MatrixXd gram = block.transpose() * block;
    smoothness_ =
        std::max(smoothness_, max_eigenvalue(gram) / (4.0 * qd) + 1.0 / qd);
  }
}

double LogisticProblem::sample_loss(std::size_t agent, const Eigen::VectorXd& x,
                                    std::size_t sample) const {
  const auto row = static_cast<Eigen::Index>(data_.first_row(agent) + sample);
  return logistic_loss(x, data_.features.row(row).transpose(),
                       data_.labels[row], data_.per_agent);
}

Eigen::VectorXd LogisticProblem::sample_gradient(std::size_t agent,
                                                 const Eigen::VectorXd& x,
                                                 std::size_t sample) const {
  const auto row = static_cast<Eigen::Index>(data_.first_row(agent) + sample);
  return logistic_grad(x, data_.features.row(row).transpose(),
                       data_.labels[row], data_.per_agent);
}

double LogisticProblem::local_loss(std::size_t agent,
                                   const Eigen::VectorXd& x) const {
  double total = 0.0;
  for (std::size_t s = 0; s < data_.per_agent; ++s) {
    total += sample_loss(agent, x, s);
  }
  return total / static_cast<double>(data_.per_agent);
}

Eigen::VectorXd LogisticProblem::local_gradient(std::size_t agent,
                                                const Eigen::VectorXd& x) const {
  Eigen::VectorXd total = Eigen::VectorXd::Zero(x.size());
  for (std::size_t s = 0; s < data_.per_agent; ++s) {
    total += sample_gradient(agent, x, s);
  }
  return total / static_cast<double>(data_.per_agent);
}

QuadraticProblem::QuadraticProblem(std::vector<Eigen::MatrixXd> curvatures,
                                   std::vector<Eigen::VectorXd> centers)
    : curvatures_(std::move(curvatures)), centers_(std::move(centers)) {
  if (centers_.empty() || curvatures_.size() != centers_.size()) {
    throw InvalidArgument("need one curvature per center and at least one agent");
  }
  const Eigen::Index d = centers_[0].size();
  if (d < 1) throw InvalidArgument("dimension must be >= 1");
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    const Eigen::MatrixXd& a = curvatures_[i];
    if (centers_[i].size() != d || a.rows() != d || a.cols() != d) {
      throw InvalidArgument("agent " + std::to_string(i) +
                            ": dimension mismatch");
    }
    if (!a.allFinite() || !centers_[i].allFinite()) {
      throw InvalidArgument("agent " + std::to_string(i) + ": non-finite data");
    }
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + a.cwiseAbs().maxCoeff())) {
      throw InvalidArgument("agent " + std::to_string(i) +
                            ": curvature is not symmetric");
    }
    if (!(min_eigenvalue(a) > 0.0)) {
      throw InvalidArgument("agent " + std::to_string(i) +
                            ": curvature is not positive definite");
    }
    smoothness_ = std::max(smoothness_, max_eigenvalue(a));
  }
}

double QuadraticProblem::sample_loss(std::size_t agent,
                                     const Eigen::VectorXd& x,
                                     std::size_t /*sample*/) const {
  return local_loss(agent, x);
}

Eigen::VectorXd QuadraticProblem::sample_gradient(std::size_t agent,
                                                  const Eigen::VectorXd& x,
                                                  std::size_t /*sample*/) const {
  return local_gradient(agent, x);
}

double QuadraticProblem::local_loss(std::size_t agent,
                                    const Eigen::VectorXd& x) const {
  const Eigen::VectorXd r = x - centers_[agent];
  return 0.5 * r.dot(curvatures_[agent] * r);
}

Eigen::VectorXd QuadraticProblem::local_gradient(std::size_t agent,
                                                 const Eigen::VectorXd& x) const {
  return curvatures_[agent] * (x - centers_[agent]);
}

Eigen::VectorXd QuadraticProblem::minimizer() const {
  const Eigen::Index d = centers_[0].size();
  Eigen::MatrixXd sum_a = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd sum_ac = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    sum_a += curvatures_[i];
    sum_ac += curvatures_[i] * centers_[i];
  }
  return sum_a.llt().solve(sum_ac);
}

QuadraticProblem quadratic_problem(const QuadraticSpec& spec) {
  if (spec.n < 1 || spec.d < 1) throw InvalidArgument("need n, d >= 1");
  if (!(spec.condition >= 1.0) || !std::isfinite(spec.condition)) {
    throw InvalidArgument("condition must be a finite number >= 1");
  }
  if (!(spec.heterogeneity >= 0.0) || !std::isfinite(spec.heterogeneity)) {
    throw InvalidArgument("heterogeneity must be finite and >= 0");
  }
  const auto d = static_cast<Eigen::Index>(spec.d);
  Stream stream = make_stream({spec.seed, 0, 0, StreamPurpose::kProblem});
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian_matrix = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(stream);
    }
    return m;
  };

  const Eigen::MatrixXd basis =
      Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian_matrix(d, d)).householderQ();
  Eigen::VectorXd spectrum(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double frac = d == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(d - 1);
    spectrum[j] = std::pow(spec.condition, frac);
  }
  Eigen::MatrixXd shared = basis * spectrum.asDiagonal() * basis.transpose();
  shared = 0.5 * (shared + shared.transpose());

  std::vector<Eigen::MatrixXd> curvatures;
  std::vector<Eigen::VectorXd> centers;
  for (std::size_t i = 0; i < spec.n; ++i) {
    Eigen::MatrixXd a = shared;
    if (spec.heterogeneity > 0.0) {
      const Eigen::MatrixXd m = gaussian_matrix(d, d);
      a += (spec.heterogeneity / static_cast<double>(spec.d)) * (m * m.transpose());
      a = 0.5 * (a + a.transpose());
    }
    curvatures.push_back(std::move(a));
    Eigen::VectorXd c(d);
    for (Eigen::Index j = 0; j < d; ++j) c[j] = normal(stream);
    centers.push_back(std::move(c));
  }
  return QuadraticProblem(std::move(curvatures), std::move(centers));
}

ReferenceSolution solve_reference(const Problem& problem, double tolerance,
                                  std::size_t max_iterations) {
  if (!(tolerance > 0.0)) throw InvalidArgument("tolerance must be positive");
  const double L = problem.smoothness();
  if (!(L > 0.0) || !std::isfinite(L)) {
    throw InvalidArgument("problem smoothness must be positive and finite");
  }
  const double floor_step = 1.0 / L;
  ReferenceSolution out;
  out.x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem.dim()));
  double f = problem.loss(out.x);
  Eigen::VectorXd g = problem.gradient(out.x);
  double step = floor_step;
  for (std::size_t it = 0;; ++it) {
    const double gnorm = g.norm();
    if (!std::isfinite(gnorm) || !std::isfinite(f)) {
      throw NumericalError("reference solver diverged at iteration " +
                           std::to_string(it));
    }
    if (gnorm <= tolerance) {
      out.f = f;
      out.grad_norm = gnorm;
      out.iterations = it;
      return out;
    }
    if (it >= max_iterations) {
      throw NumericalError("reference solver hit the iteration cap (" +
                           std::to_string(max_iterations) +
                           "), gradient norm " + std::to_string(gnorm));
    }
    // Armijo backtracking from twice the last accepted step. 1/L always
    // satisfies the condition in exact arithmetic, so it is the floor.
    step *= 2.0;
    Eigen::VectorXd trial;
    double f_trial = 0.0;
    while (true) {
      trial = out.x - step * g;
      f_trial = problem.loss(trial);
      if (f_trial <= f - 0.5 * step * gnorm * gnorm || step <= floor_step) break;
      step = std::max(0.5 * step, floor_step);
    }
    out.x = std::move(trial);
    f = f_trial;
    g = problem.gradient(out.x);
  }
}

}  // namespace doadp
