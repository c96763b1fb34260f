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

// Closed-form convergence bounds for DO-ADP: momentum energy, consensus
// error, the averaged stationarity bound and its tuned step-size rates.

#ifndef DOADP_BOUNDS_H_
#define DOADP_BOUNDS_H_

#include <cstddef>
#include <cstdint>

namespace doadp {

// p (G^2 + sigma^2 d) / (1 - beta)^2
double momentum_bound(double p, double G, double sigma, std::size_t d,
                      double beta);

// c = rho^2 p k / (82 d)
double consensus_constant(double rho, double p, std::size_t k, std::size_t d);

// 8 p alpha^2 (G^2 + sigma^2 d) n / (c^2 (1 - beta)^2)
double consensus_bound(double alpha, double p, double G, double sigma,
                       std::size_t d, std::size_t n, double beta, double rho,
                       std::size_t k);

struct BoundInputs {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double p = 1.0;
  std::size_t k = 1;
  std::size_t d = 1;
  std::size_t n = 1;
  std::uint64_t T = 1;
  double sigma = 0.0;
  double G = 0.0;
  double varsigma = 0.0;
  double L = 1.0;
  double rho = 1.0;
  double phi = 0.0;
  double f0_gap = 0.0;  // f(x0) - f*

  // Throws InvalidArgument for values outside the bounds' domain.
  void validate() const;
};

struct Theorem2Bound {
  double optimization = 0.0;  // 2 (1 - beta) f0_gap / (alpha p T)
  double noise = 0.0;         // alpha L (beta + 2 + 4 beta^2 p) (G^2 + vs^2 + sigma^2 d) / (n (1 - beta)^3)
  double consensus = 0.0;     // 8 alpha^2 p (G^2 + sigma^2 d) L^2 / ((1 - beta)^2 c^2)
  double total = 0.0;
  // False when gamma differs from recommended_gamma by more than 1e-12
  // relative; the bound then carries no guarantee.
  bool gamma_recommended = false;
};

// Bound on (1/T) sum_t E||grad f(xbar_t)||^2. Throws InvalidArgument unless
// alpha < (1 - beta)^2 / (2 L).
Theorem2Bound theorem2_bound(const BoundInputs& in);

// Coefficients of the step-size tuning inequality:
// Phi(alpha) = r0 / (alpha (T + 1)) + b alpha + h alpha^2, alpha <= 1 / dcoef.
struct TuningCoefficients {
  double r0 = 0.0;
  double b = 0.0;
  double h = 0.0;
  double dcoef = 0.0;
};
TuningCoefficients tuning_coefficients(const BoundInputs& in);

// 2 sqrt(b r0 / (T+1)) + 2 h^(1/3) (r0 / (T+1))^(2/3) + dcoef r0 / (T+1)
double step_tuning_bound(double r0, double b, double h, double dcoef,
                         std::uint64_t T);
// min{(r0 / (b (T+1)))^(1/2), (r0 / (h (T+1)))^(1/3), 1 / dcoef}; terms with
// a zero coefficient drop out of the minimum.
double tuned_alpha(double r0, double b, double h, double dcoef,
                   std::uint64_t T);

enum class RateChoice { kTuned, kSqrtNT };

// kTuned: step_tuning_bound on tuning_coefficients(in). kSqrtNT: the explicit
// three-term rate for alpha = sqrt(n / T); requires T >= 4 n L^2 / (1-beta)^4.
// `in.alpha` is ignored in both modes.
double corollary1_rate(const BoundInputs& in, RateChoice choice);

}  // namespace doadp

#endif  // DOADP_BOUNDS_H_
