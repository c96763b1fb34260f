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

#include "doadp/bounds.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "doadp/engine.h"
#include "doadp/error.h"

namespace doadp {
namespace {

void check_beta(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw InvalidArgument("beta must lie in (0, 1)");
}

double energy(double G, double sigma, std::size_t d) {
  return G * G + sigma * sigma * static_cast<double>(d);
}

}  // namespace

double momentum_bound(double p, double G, double sigma, std::size_t d,
                      double beta) {
  check_beta(beta);
  const double one_minus = 1.0 - beta;
  return p * energy(G, sigma, d) / (one_minus * one_minus);
}

double consensus_constant(double rho, double p, std::size_t k, std::size_t d) {
  if (!(rho > 0.0)) throw InvalidArgument("rho must be positive");
  if (k < 1 || d < 1) throw InvalidArgument("need k, d >= 1");
  return rho * rho * p * static_cast<double>(k) / (82.0 * static_cast<double>(d));
}

double consensus_bound(double alpha, double p, double G, double sigma,
                       std::size_t d, std::size_t n, double beta, double rho,
                       std::size_t k) {
  check_beta(beta);
  const double c = consensus_constant(rho, p, k, d);
  const double one_minus = 1.0 - beta;
  return 8.0 * p * alpha * alpha * energy(G, sigma, d) *
         static_cast<double>(n) / (c * c * one_minus * one_minus);
}

void BoundInputs::validate() const {
  check_beta(beta);
  if (!(alpha >= 0.0)) throw InvalidArgument("alpha must be >= 0");
  if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("p must lie in (0, 1]");
  if (k < 1 || k > d) throw InvalidArgument("need 1 <= k <= d");
  if (n < 1) throw InvalidArgument("n must be >= 1");
  if (T < 1) throw InvalidArgument("T must be >= 1");
  if (!(sigma >= 0.0 && G >= 0.0 && varsigma >= 0.0)) {
    throw InvalidArgument("sigma, G and varsigma must be >= 0");
  }
  if (!(L > 0.0)) throw InvalidArgument("L must be positive");
  if (!(rho > 0.0 && rho <= 1.0)) throw InvalidArgument("rho must lie in (0, 1]");
  if (!(f0_gap >= 0.0)) throw InvalidArgument("f0_gap must be >= 0");
}

Theorem2Bound theorem2_bound(const BoundInputs& in) {
  in.validate();
  const double one_minus = 1.0 - in.beta;
  const double alpha_max = one_minus * one_minus / (2.0 * in.L);
  if (!(in.alpha > 0.0 && in.alpha < alpha_max)) {
    throw InvalidArgument("alpha must lie in (0, (1-beta)^2/(2L)) = (0, " +
                          std::to_string(alpha_max) + ")");
  }
  const double c = consensus_constant(in.rho, in.p, in.k, in.d);
  const double e = energy(in.G, in.sigma, in.d);
  const double vs2 = in.varsigma * in.varsigma;
  Theorem2Bound out;
  out.optimization = 2.0 * one_minus * in.f0_gap /
                     (in.alpha * in.p * static_cast<double>(in.T));
  out.noise = in.alpha * in.L * (in.beta + 2.0 + 4.0 * in.beta * in.beta * in.p) *
              (e + vs2) /
              (static_cast<double>(in.n) * one_minus * one_minus * one_minus);
  out.consensus = 8.0 * in.alpha * in.alpha * in.p * e * in.L * in.L /
                  (one_minus * one_minus * c * c);
  out.total = out.optimization + out.noise + out.consensus;
  try {
    const double rec = recommended_gamma(in.rho, in.phi, in.p, in.k, in.d);
    out.gamma_recommended = std::abs(in.gamma - rec) <= 1e-12 * rec;
  } catch (const InvalidArgument&) {
    out.gamma_recommended = false;
  }
  return out;
}

TuningCoefficients tuning_coefficients(const BoundInputs& in) {
  in.validate();
  const double one_minus = 1.0 - in.beta;
  const double c = consensus_constant(in.rho, in.p, in.k, in.d);
  const double e = energy(in.G, in.sigma, in.d);
  TuningCoefficients out;
  out.r0 = 2.0 * one_minus * in.f0_gap / in.p;
  out.b = in.L * (in.beta + 2.0 + 4.0 * in.beta * in.beta * in.p) *
          (e + in.varsigma * in.varsigma) /
          (static_cast<double>(in.n) * one_minus * one_minus * one_minus);
  out.h = 8.0 * in.p * e * in.L * in.L / (one_minus * one_minus * c * c);
  out.dcoef = 2.0 * in.L / (one_minus * one_minus);
  return out;
}

double step_tuning_bound(double r0, double b, double h, double dcoef,
                         std::uint64_t T) {
  if (!(r0 >= 0.0 && b >= 0.0 && h >= 0.0 && dcoef >= 0.0)) {
    throw InvalidArgument("tuning coefficients must be >= 0");
  }
  const double ratio = r0 / (static_cast<double>(T) + 1.0);
  return 2.0 * std::sqrt(b * ratio) +
         2.0 * std::cbrt(h) * std::pow(ratio, 2.0 / 3.0) + dcoef * ratio;
}

double tuned_alpha(double r0, double b, double h, double dcoef,
                   std::uint64_t T) {
  if (!(r0 >= 0.0 && b >= 0.0 && h >= 0.0 && dcoef >= 0.0)) {
    throw InvalidArgument("tuning coefficients must be >= 0");
  }
  const double t1 = static_cast<double>(T) + 1.0;
  double alpha = std::numeric_limits<double>::infinity();
  if (b > 0.0) alpha = std::min(alpha, std::sqrt(r0 / (b * t1)));
  if (h > 0.0) alpha = std::min(alpha, std::cbrt(r0 / (h * t1)));
  if (dcoef > 0.0) alpha = std::min(alpha, 1.0 / dcoef);
  return alpha;
}

double corollary1_rate(const BoundInputs& in, RateChoice choice) {
  in.validate();
  if (choice == RateChoice::kTuned) {
    const TuningCoefficients tc = tuning_coefficients(in);
    return step_tuning_bound(tc.r0, tc.b, tc.h, tc.dcoef, in.T);
  }
  const double one_minus = 1.0 - in.beta;
  const double om2 = one_minus * one_minus;
  const double n = static_cast<double>(in.n);
  const double T = static_cast<double>(in.T);
  const double t_min = 4.0 * n * in.L * in.L / (om2 * om2);
  if (T < t_min) {
    throw InvalidArgument("sqrt(n/T) step needs T >= 4 n L^2 / (1-beta)^4 = " +
                          std::to_string(t_min));
  }
  const double c = consensus_constant(in.rho, in.p, in.k, in.d);
  const double e = energy(in.G, in.sigma, in.d);
  const double root = std::sqrt(n * T);
  return 2.0 * in.f0_gap * one_minus / (in.p * root) +
         in.L * (in.beta + 2.0 + 4.0 * in.beta * in.beta * in.p) *
             (e + in.varsigma * in.varsigma) / (om2 * one_minus * root) +
         8.0 * n * in.p * e * in.L * in.L / (om2 * c * c * T);
}

}  // namespace doadp
