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

#include "doadp/graph.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "doadp/error.h"

namespace doadp {

Topology::Topology(std::size_t n, std::vector<Edge> edges) : n_(n) {
  if (n == 0) throw InvalidArgument("topology needs at least one agent");
  for (auto& [i, j] : edges) {
    if (i >= n || j >= n) {
      throw InvalidArgument("edge (" + std::to_string(i) + ", " +
                            std::to_string(j) + ") references an agent outside [0, " +
                            std::to_string(n) + ")");
    }
    if (i == j) {
      throw InvalidArgument("self-loop on agent " + std::to_string(i));
    }
    if (i > j) std::swap(i, j);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  adjacency_.assign(n, {});
  for (const auto& [i, j] : edges_) {
    adjacency_[i].push_back(j);
    adjacency_[j].push_back(i);
  }
  for (auto& row : adjacency_) std::sort(row.begin(), row.end());
}

std::size_t Topology::max_degree() const {
  std::size_t best = 0;
  for (const auto& row : adjacency_) best = std::max(best, row.size());
  return best;
}

bool Topology::connected() const {
  std::vector<bool> seen(n_, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t reached = 1;
  while (!stack.empty()) {
    std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v : adjacency_[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        stack.push_back(v);
      }
    }
  }
  return reached == n_;
}

bool Topology::has_edge(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_) return false;
  const auto& row = adjacency_[i];
  return std::binary_search(row.begin(), row.end(), j);
}

Topology ring_chords(std::size_t n, std::size_t chord_span) {
  if (chord_span < 1) throw InvalidArgument("chord_span must be >= 1");
  if (n <= 2 * chord_span) {
    throw InvalidArgument("ring_chords needs n > 2 * chord_span (n=" +
                          std::to_string(n) + ", chord_span=" +
                          std::to_string(chord_span) + ")");
  }
  std::vector<Edge> edges;
  edges.reserve(n * chord_span);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 1; j <= chord_span; ++j) {
      edges.emplace_back(i, (i + j) % n);
    }
  }
  return Topology(n, std::move(edges));
}

SpectralQuantities spectral_quantities(const Eigen::MatrixXd& w) {
  if (w.rows() != w.cols() || w.rows() == 0) {
    throw InvalidArgument("weight matrix must be square and non-empty");
  }
  if ((w - w.transpose()).cwiseAbs().maxCoeff() > WeightMatrix::kTolerance) {
    throw InvalidArgument("weight matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      w, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigensolver failed");
  }
  const Eigen::VectorXd& lambda = solver.eigenvalues();
  std::vector<double> magnitudes(lambda.size());
  SpectralQuantities out;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    magnitudes[i] = std::abs(lambda[i]);
    out.phi = std::max(out.phi, std::abs(1.0 - lambda[i]));
  }
  std::sort(magnitudes.begin(), magnitudes.end(), std::greater<>());
  out.rho = magnitudes.size() < 2 ? 1.0 : 1.0 - magnitudes[1];
  return out;
}

WeightMatrix WeightMatrix::from_matrix(Eigen::MatrixXd w) {
  if (w.rows() != w.cols() || w.rows() == 0) {
    throw InvalidArgument("weight matrix must be square and non-empty");
  }
  if (w.minCoeff() < 0.0 || w.maxCoeff() > 1.0) {
    throw InvalidArgument("weight matrix entries must lie in [0, 1]");
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(w.rows());
  if (((w * ones) - ones).cwiseAbs().maxCoeff() > kTolerance ||
      ((w.transpose() * ones) - ones).cwiseAbs().maxCoeff() > kTolerance) {
    throw InvalidArgument("weight matrix is not doubly stochastic");
  }
  SpectralQuantities s = spectral_quantities(w);
  if (!(s.rho > 0.0)) {
    throw InvalidArgument("weight matrix has zero spectral gap");
  }
  return WeightMatrix(std::move(w), s);
}

WeightMatrix laplacian_weights(const Topology& topology,
                               std::optional<double> iota) {
  const std::size_t n = topology.size();
  const double dmax = static_cast<double>(topology.max_degree());
  const double scale = iota.value_or(dmax + 1.0);
  if (!(scale > dmax) || !std::isfinite(scale)) {
    throw InvalidArgument("iota must be finite and exceed the maximum degree " +
                          std::to_string(topology.max_degree()));
  }
  if (!topology.connected()) {
    throw InvalidArgument("topology is disconnected; spectral gap would be 0");
  }
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [i, j] : topology.edges()) {
    w(i, j) = 1.0 / scale;
    w(j, i) = 1.0 / scale;
  }
  for (std::size_t i = 0; i < n; ++i) {
    w(i, i) = 1.0 - static_cast<double>(topology.degree(i)) / scale;
  }
  SpectralQuantities s = spectral_quantities(w);
  return WeightMatrix(std::move(w), s);
}

std::string to_edge_list(const Topology& topology) {
  std::ostringstream out;
  out << "# n=" << topology.size() << '\n';
  for (const auto& [i, j] : topology.edges()) out << i << ' ' << j << '\n';
  return out.str();
}

Topology parse_edge_list(std::istream& in) {
  std::optional<std::size_t> declared_n;
  std::vector<Edge> edges;
  std::size_t max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      std::size_t count = 0;
      if (std::sscanf(line.c_str() + first, "# n=%zu", &count) == 1) {
        declared_n = count;
      }
      continue;
    }
    std::istringstream fields(line);
    long long i = -1, j = -1;
    std::string extra;
    if (!(fields >> i >> j) || (fields >> extra) || i < 0 || j < 0) {
      throw ParseError("expected two non-negative agent indices", line_no);
    }
    edges.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    max_index = std::max({max_index, edges.back().first, edges.back().second});
  }
  std::size_t n = declared_n.value_or(edges.empty() ? 0 : max_index + 1);
  if (n == 0) throw ParseError("edge list declares no agents", 0);
  return Topology(n, std::move(edges));
}

Topology read_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open edge list '" + path + "'");
  return parse_edge_list(in);
}

void write_edge_list(const Topology& topology, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write edge list '" + path + "'");
  out << to_edge_list(topology);
}

std::string topology_hash(const Topology& topology) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : to_edge_list(topology)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace doadp
