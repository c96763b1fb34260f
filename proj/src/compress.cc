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

#include "doadp/compress.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "doadp/error.h"

namespace doadp {

Eigen::VectorXd SparseUpdate::densify() const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim);
  add_to(out);
  return out;
}

void SparseUpdate::add_to(Eigen::VectorXd& target) const {
  for (std::size_t e = 0; e < indices.size(); ++e) {
    target[indices[e]] += values[e];
  }
}

SparseUpdate top_k(const Eigen::VectorXd& x, std::size_t k) {
  const std::size_t d = static_cast<std::size_t>(x.size());
  if (k == 0 || k > d) {
    throw InvalidArgument("top_k needs 1 <= k <= d (k=" + std::to_string(k) +
                          ", d=" + std::to_string(d) + ")");
  }
  if (!x.allFinite()) throw InvalidArgument("top_k input is not finite");

  std::vector<std::uint32_t> order(d);
  std::iota(order.begin(), order.end(), 0u);
  if (k < d) {
    // Strict total order: larger magnitude first, then lower index.
    auto before = [&x](std::uint32_t a, std::uint32_t b) {
      const double ma = std::abs(x[a]);
      const double mb = std::abs(x[b]);
      return ma > mb || (ma == mb && a < b);
    };
    std::nth_element(order.begin(), order.begin() + (k - 1), order.end(),
                     before);
    order.resize(k);
    std::sort(order.begin(), order.end());
  }

  SparseUpdate out;
  out.dim = d;
  out.indices = std::move(order);
  out.values.reserve(k);
  for (std::uint32_t i : out.indices) out.values.push_back(x[i]);
  return out;
}

ContractionGap contraction_gap(const Eigen::VectorXd& x, std::size_t k) {
  const SparseUpdate s = top_k(x, k);
  const double d = static_cast<double>(x.size());
  ContractionGap out;
  out.gap = (s.densify() - x).squaredNorm();
  out.bound = (1.0 - static_cast<double>(k) / d) * x.squaredNorm();
  return out;
}

Eigen::VectorXd clip_per_coordinate(const Eigen::VectorXd& g, double G) {
  if (!(G > 0.0)) throw InvalidArgument("clipping scale G must be positive");
  if (!g.allFinite()) throw InvalidArgument("cannot clip a non-finite gradient");
  const double limit = G / std::sqrt(static_cast<double>(g.size()));
  return g.cwiseMax(-limit).cwiseMin(limit);
}

std::size_t count_clipped(const Eigen::VectorXd& g, double G) {
  const double limit = G / std::sqrt(static_cast<double>(g.size()));
  return static_cast<std::size_t>((g.array().abs() > limit).count());
}

}  // namespace doadp
