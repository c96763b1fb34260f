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

// Communication topologies and gossip mixing matrices.
//
// A WeightMatrix is always symmetric and doubly stochastic, with the spectral
// gap rho = 1 - |lambda_2(W)| and phi = ||I - W||_2 cached at construction.
// Both objects are immutable once built and may be shared read-only across
// threads.

#ifndef DOADP_GRAPH_H_
#define DOADP_GRAPH_H_

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace doadp {

using Edge = std::pair<std::size_t, std::size_t>;

// Undirected simple graph on agents [0, n). Edges are stored canonically as
// (i, j) with i < j, sorted, without duplicates.
class Topology {
 public:
  // Validates and canonicalizes. Throws InvalidArgument on self-loops or
  // out-of-range endpoints. Duplicate and reversed pairs are merged.
  Topology(std::size_t n, std::vector<Edge> edges);

  std::size_t size() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const {
    return adjacency_.at(i);
  }
  std::size_t degree(std::size_t i) const { return adjacency_.at(i).size(); }
  std::size_t max_degree() const;
  bool connected() const;
  bool has_edge(std::size_t i, std::size_t j) const;

 private:
  std::size_t n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

// Ring with chords: node i is linked to (i +/- j) mod n for j = 1..chord_span.
// Requires n > 2 * chord_span and chord_span >= 1.
Topology ring_chords(std::size_t n, std::size_t chord_span);

struct SpectralQuantities {
  double rho = 0.0;  // 1 - second-largest eigenvalue magnitude
  double phi = 0.0;  // max |1 - lambda_i|
};

// Dense symmetric eigendecomposition. Throws InvalidArgument when `w` is not
// square or not symmetric within 1e-12. A 1x1 matrix has no second
// eigenvalue; rho is reported as 1 in that case.
SpectralQuantities spectral_quantities(const Eigen::MatrixXd& w);

class WeightMatrix {
 public:
  static constexpr double kTolerance = 1e-12;

  // Validates an arbitrary user-supplied matrix: square, symmetric, rows and
  // columns summing to one, entries in [0, 1], and rho > 0.
  static WeightMatrix from_matrix(Eigen::MatrixXd w);

  const Eigen::MatrixXd& matrix() const { return w_; }
  double operator()(std::size_t i, std::size_t j) const { return w_(i, j); }
  std::size_t size() const { return static_cast<std::size_t>(w_.rows()); }
  double rho() const { return spectral_.rho; }
  double phi() const { return spectral_.phi; }

 private:
  WeightMatrix(Eigen::MatrixXd w, SpectralQuantities s)
      : w_(std::move(w)), spectral_(s) {}
  friend WeightMatrix laplacian_weights(const Topology&, std::optional<double>);

  Eigen::MatrixXd w_;
  SpectralQuantities spectral_;
};

// W = I - L / iota with L the graph Laplacian. `iota` defaults to
// max_degree + 1 and must exceed max_degree. Disconnected graphs are
// rejected.
WeightMatrix laplacian_weights(const Topology& topology,
                               std::optional<double> iota = std::nullopt);

// Edge-list text: optional "# n=<count>" header, then one "i j" pair per
// line, zero-indexed. Other lines starting with '#' are comments.
std::string to_edge_list(const Topology& topology);
Topology parse_edge_list(std::istream& in);
Topology read_edge_list(const std::string& path);
void write_edge_list(const Topology& topology, const std::string& path);

// FNV-1a 64 over the canonical edge-list text, as 16 hex digits.
std::string topology_hash(const Topology& topology);

}  // namespace doadp

#endif  // DOADP_GRAPH_H_
