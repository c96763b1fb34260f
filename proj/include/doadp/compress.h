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

#ifndef DOADP_COMPRESS_H_
#define DOADP_COMPRESS_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace doadp {

// Sparse message: the retained coordinates of a d-vector. Indices are strictly
// increasing.
struct SparseUpdate {
  std::size_t dim = 0;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t size() const { return indices.size(); }
  Eigen::VectorXd densify() const;
  // target[indices] += values
  void add_to(Eigen::VectorXd& target) const;
};

// Wire cost of one message: 4-byte index + 8-byte value per entry, plus a
// 16-byte header carrying (sender, iteration, k).
inline constexpr std::uint64_t kIndexBytes = 4;
inline constexpr std::uint64_t kValueBytes = 8;
inline constexpr std::uint64_t kHeaderBytes = 16;
constexpr std::uint64_t message_bytes(std::size_t k) {
  return (kIndexBytes + kValueBytes) * k + kHeaderBytes;
}

// Keeps the k largest-magnitude coordinates; ties go to the lower index.
// Exactly k entries are returned, even when some retained values are zero.
// Throws InvalidArgument for k == 0, k > d, or non-finite input.
SparseUpdate top_k(const Eigen::VectorXd& x, std::size_t k);

struct ContractionGap {
  double gap = 0.0;    // ||top_k(x) - x||^2
  double bound = 0.0;  // (1 - k/d) ||x||^2
};
ContractionGap contraction_gap(const Eigen::VectorXd& x, std::size_t k);

// Clamps every coordinate into [-G/sqrt(d), G/sqrt(d)], so the result has
// l2-norm at most G. Throws InvalidArgument for G <= 0 or non-finite input.
Eigen::VectorXd clip_per_coordinate(const Eigen::VectorXd& g, double G);

// Number of coordinates clip_per_coordinate would change.
std::size_t count_clipped(const Eigen::VectorXd& g, double G);

}  // namespace doadp

#endif  // DOADP_COMPRESS_H_
