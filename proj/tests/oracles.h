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

// Test-side reference implementations. None of these call into the library
// code path they check; they use plain loops and std containers.

#ifndef DOADP_TESTS_ORACLES_H_
#define DOADP_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;

// Cyclic Jacobi rotations for a symmetric matrix. Returns the eigenvalues
// sorted ascending.
inline Vec jacobi_eigenvalues(Mat a, int sweeps = 100) {
  const std::size_t n = a.size();
  for (int s = 0; s < sweeps; ++s) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - sn * akq;
          a[k][q] = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - sn * aqk;
          a[q][k] = sn * apk + c * aqk;
        }
      }
    }
  }
  Vec ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  std::sort(ev.begin(), ev.end());
  return ev;
}

// rho = 1 - second-largest |lambda|, phi = max |1 - lambda|.
inline std::pair<double, double> rho_phi(const Vec& eigenvalues) {
  Vec mags;
  double phi = 0.0;
  for (double l : eigenvalues) {
    mags.push_back(std::abs(l));
    phi = std::max(phi, std::abs(1.0 - l));
  }
  std::sort(mags.rbegin(), mags.rend());
  const double rho = mags.size() < 2 ? 1.0 : 1.0 - mags[1];
  return {rho, phi};
}

// Indices of the k largest |x|, ties to the lower index, via a full stable
// sort. Returned ascending.
inline std::vector<std::size_t> topk_indices(const Vec& x, std::size_t k) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(x[a]) > std::abs(x[b]);
  });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline double clamp_coord(double g, double G, std::size_t d) {
  const double t = G / std::sqrt(static_cast<double>(d));
  if (g > t) return t;
  if (g < -t) return -t;
  return g;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Per-sample regularized logistic gradient, naive formulation.
inline Vec logistic_grad(const Vec& x, const Vec& a, double b, std::size_t q) {
  double dot = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) dot += a[j] * x[j];
  const double s = sigmoid(-b * dot);
  Vec g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    g[j] = -b * a[j] * s + x[j] / static_cast<double>(q);
  }
  return g;
}

// Circulant eigenvalues of the ring-with-chords Laplacian mixing matrix.
inline Vec ring_chords_eigenvalues(std::size_t n, std::size_t span,
                                   double iota) {
  const double pi = std::acos(-1.0);
  Vec ev;
  for (std::size_t m = 0; m < n; ++m) {
    double cos_sum = 0.0;
    for (std::size_t j = 1; j <= span; ++j) {
      cos_sum += std::cos(2.0 * pi * static_cast<double>(j * m) /
                          static_cast<double>(n));
    }
    ev.push_back(1.0 - (2.0 * static_cast<double>(span) - 2.0 * cos_sum) / iota);
  }
  std::sort(ev.begin(), ev.end());
  return ev;
}

}  // namespace oracle

#endif  // DOADP_TESTS_ORACLES_H_
