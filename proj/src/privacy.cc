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

#include "doadp/privacy.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

namespace doadp {
namespace {

constexpr double kMaxComposableEps = 0.9;
constexpr double kPerStepEpsSqLimit = 0.2;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool within(double value, double limit) {
  return value <= limit * (1.0 + kAccountingRelTol);
}

void check_unit_interval(double v, const char* name) {
  if (!(v > 0.0 && v <= 1.0)) {
    throw InvalidArgument(std::string(name) + " must lie in (0, 1], got " +
                          num(v));
  }
}

}  // namespace

void PrivacyParams::validate() const {
  check_unit_interval(epsilon, "epsilon");
  check_unit_interval(delta0, "delta0");
  if (!(p >= 0.5 && p <= 1.0)) {
    throw InvalidArgument("p must lie in [1/2, 1], got " + num(p));
  }
  if (q < 1) throw InvalidArgument("q must be >= 1");
  if (d < 1 || k < 1 || k > d) {
    throw InvalidArgument("k must lie in [1, d] (k=" + std::to_string(k) +
                          ", d=" + std::to_string(d) + ")");
  }
  if (!(G > 0.0) || !std::isfinite(G)) {
    throw InvalidArgument("G must be positive and finite");
  }
  if (T < 1) throw InvalidArgument("T must be >= 1");
  const double qe = static_cast<double>(q) * epsilon;
  if (static_cast<double>(T) * 4.0 * p * p < qe * qe) {
    throw InvalidArgument("T=" + std::to_string(T) +
                          " is below q^2 eps^2 / (4 p^2); minimal admissible T is " +
                          std::to_string(min_iterations(epsilon, p, q)));
  }
}

std::uint64_t min_iterations(double epsilon, double p, std::uint64_t q) {
  const double qe = static_cast<double>(q) * epsilon;
  double t = std::ceil(qe * qe / (4.0 * p * p));
  auto out = static_cast<std::uint64_t>(t < 1.0 ? 1.0 : t);
  // ceil of a rounded quotient may land one below the true bound.
  while (static_cast<double>(out) * 4.0 * p * p < qe * qe) ++out;
  return out;
}

double gaussian_sensitivity(std::uint64_t k, std::uint64_t d, double G) {
  if (d < 1 || k < 1 || k > d) throw InvalidArgument("need 1 <= k <= d");
  if (!(G > 0.0)) throw InvalidArgument("G must be positive");
  return 2.0 * G * std::sqrt(static_cast<double>(k) / static_cast<double>(d));
}

double calibrate_sigma(const PrivacyParams& params) {
  params.validate();
  const double k = static_cast<double>(params.k);
  const double d = static_cast<double>(params.d);
  const double T = static_cast<double>(params.T);
  const double q = static_cast<double>(params.q);
  const double log_term = std::log(1.25 / params.delta0);
  const double variance = 160.0 * k * params.p * params.p * T * log_term *
                          params.G * params.G /
                          (q * q * d * params.epsilon * params.epsilon);
  return std::sqrt(variance);
}

PrivacyBudget calibrate(const PrivacyParams& params) {
  return PrivacyBudget{params, calibrate_sigma(params)};
}

double per_step_epsilon(double sigma, std::uint64_t k, std::uint64_t d,
                        double delta0, double G) {
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");
  check_unit_interval(delta0, "delta0");
  if (d < 1 || k < 1 || k > d) throw InvalidArgument("need 1 <= k <= d");
  return 2.0 * std::sqrt(2.0 * static_cast<double>(k) * std::log(1.25 / delta0)) *
         G / (sigma * std::sqrt(static_cast<double>(d)));
}

double amplify_by_subsampling(double epsilon, double p, double q,
                              AmplificationMode mode) {
  if (!(epsilon >= 0.0)) throw InvalidArgument("epsilon must be >= 0");
  if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("p must lie in (0, 1]");
  if (!(q >= 1.0)) throw InvalidArgument("q must be >= 1");
  switch (mode) {
    case AmplificationMode::kExact:
      return std::log1p(p * std::expm1(epsilon) / q);
    case AmplificationMode::kLinearized:
      if (!within(epsilon * epsilon, kPerStepEpsSqLimit)) {
        throw InvalidArgument("linearized amplification needs eps^2 <= 1/5, got eps=" +
                              num(epsilon));
      }
      return 2.0 * p * epsilon / q;
  }
  throw InvalidArgument("unknown amplification mode");
}

double amplify_delta(double delta, double p, double q) {
  return p * delta / q;
}

namespace {

Composition compose_from_sums(double sum_sq, double log_keep,
                              double delta_prime) {
  if (!(delta_prime > 0.0 && delta_prime <= 1.0)) {
    throw InvalidArgument("delta' must lie in (0, 1], got " + num(delta_prime));
  }
  Composition out;
  out.epsilon =
      std::sqrt(2.0 * sum_sq *
                std::log(std::numbers::e + std::sqrt(sum_sq) / delta_prime)) +
      sum_sq;
  out.delta = -std::expm1(std::log1p(-delta_prime) + log_keep);
  return out;
}

void check_composable(double eps, double delta) {
  if (!(eps >= 0.0 && eps <= kMaxComposableEps)) {
    throw InvalidArgument("advanced composition needs every eps in [0, 0.9], got " +
                          num(eps));
  }
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw InvalidArgument("per-step delta must lie in [0, 1], got " + num(delta));
  }
}

}  // namespace

Composition compose_advanced(std::span<const double> epsilons,
                             std::span<const double> deltas,
                             double delta_prime) {
  if (epsilons.size() != deltas.size()) {
    throw InvalidArgument("epsilon and delta lists differ in length");
  }
  double sum_sq = 0.0;
  double log_keep = 0.0;
  for (std::size_t t = 0; t < epsilons.size(); ++t) {
    check_composable(epsilons[t], deltas[t]);
    sum_sq += epsilons[t] * epsilons[t];
    log_keep += std::log1p(-deltas[t]);
  }
  return compose_from_sums(sum_sq, log_keep, delta_prime);
}

Composition compose_advanced(double epsilon, double delta, std::uint64_t steps,
                             double delta_prime) {
  check_composable(epsilon, delta);
  const double T = static_cast<double>(steps);
  return compose_from_sums(T * epsilon * epsilon, T * std::log1p(-delta),
                           delta_prime);
}

const char* stage_name(AccountingStage stage) {
  switch (stage) {
    case AccountingStage::kGaussianMechanism:
      return "gaussian_mechanism";
    case AccountingStage::kSubsampling:
      return "subsampling";
    case AccountingStage::kComposition:
      return "composition";
    case AccountingStage::kPostProcessing:
      return "post_processing";
  }
  return "unknown";
}

AccountingLedger replay_accounting(const PrivacyBudget& budget) {
  const PrivacyParams& pp = budget.params;
  pp.validate();
  AccountingLedger ledger;
  ledger.target_eps = pp.epsilon;

  auto fail = [&ledger](AccountingStage stage, std::string why) {
    ledger.failed_stage = stage;
    ledger.failure = std::move(why);
    return ledger;
  };

  ledger.per_step_eps =
      per_step_epsilon(budget.sigma, pp.k, pp.d, pp.delta0, pp.G);
  ledger.per_step_delta = pp.delta0;
  const double eps_sq = ledger.per_step_eps * ledger.per_step_eps;
  if (!within(eps_sq, kPerStepEpsSqLimit)) {
    return fail(AccountingStage::kGaussianMechanism,
                "eps_t^2 = " + num(eps_sq) + " exceeds 1/5");
  }

  const double q = static_cast<double>(pp.q);
  ledger.amplified_eps = amplify_by_subsampling(
      ledger.per_step_eps, pp.p, q, AmplificationMode::kLinearized);
  ledger.amplified_delta = amplify_delta(pp.delta0, pp.p, q);
  if (ledger.amplified_eps > kMaxComposableEps) {
    return fail(AccountingStage::kSubsampling,
                "eps'_t = " + num(ledger.amplified_eps) + " exceeds 0.9");
  }

  const double T = static_cast<double>(pp.T);
  ledger.sum_sq_amplified = T * ledger.amplified_eps * ledger.amplified_eps;
  ledger.delta_prime = std::sqrt(ledger.sum_sq_amplified);
  if (!within(ledger.sum_sq_amplified, 1.0)) {
    return fail(AccountingStage::kComposition,
                "sum of eps'_t^2 = " + num(ledger.sum_sq_amplified) +
                    " exceeds 1");
  }
  // Keep delta' inside (0, 1] when the sum sits on the boundary.
  ledger.delta_prime = std::min(ledger.delta_prime, 1.0);
  const Composition composed =
      compose_advanced(ledger.amplified_eps, ledger.amplified_delta, pp.T,
                       ledger.delta_prime);
  ledger.composed_eps = composed.epsilon;
  ledger.composed_delta = composed.delta;
  if (!within(ledger.composed_eps, pp.epsilon)) {
    return fail(AccountingStage::kComposition,
                "composed eps = " + num(ledger.composed_eps) +
                    " exceeds target " + num(pp.epsilon));
  }
  // Transmitted messages are functions of the perturbed gradients; the
  // post-processing stage leaves (eps~, delta~) unchanged.
  return ledger;
}

AccountingLedger verify_budget(const PrivacyBudget& budget) {
  AccountingLedger ledger = replay_accounting(budget);
  if (!ledger.certified()) throw BudgetViolation(std::move(ledger));
  return ledger;
}

std::string format_ledger(const AccountingLedger& ledger) {
  std::ostringstream out;
  out << "# stage epsilon delta\n";
  out << stage_name(AccountingStage::kGaussianMechanism) << ' '
      << num(ledger.per_step_eps) << ' ' << num(ledger.per_step_delta) << '\n';
  out << stage_name(AccountingStage::kSubsampling) << ' '
      << num(ledger.amplified_eps) << ' ' << num(ledger.amplified_delta)
      << '\n';
  out << stage_name(AccountingStage::kComposition) << ' '
      << num(ledger.composed_eps) << ' ' << num(ledger.composed_delta) << '\n';
  out << stage_name(AccountingStage::kPostProcessing) << ' '
      << num(ledger.composed_eps) << ' ' << num(ledger.composed_delta) << '\n';
  if (!ledger.certified()) {
    out << "# FAILED at " << stage_name(*ledger.failed_stage) << ": "
        << ledger.failure << '\n';
  }
  return out.str();
}

double noise_variance_ratio(std::uint64_t k, std::uint64_t d, double p) {
  return static_cast<double>(k) * p * p / static_cast<double>(d);
}

Eigen::VectorXd sample_gaussian_noise(std::size_t d, double sigma,
                                      Stream& stream) {
  if (!(sigma >= 0.0)) throw InvalidArgument("sigma must be >= 0");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
  if (sigma == 0.0) return out;
  std::normal_distribution<double> normal(0.0, sigma);
  for (std::size_t i = 0; i < d; ++i) out[i] = normal(stream);
  return out;
}

Eigen::VectorXd sample_gaussian_noise(std::size_t d, double sigma,
                                      const StreamKey& key) {
  Stream stream = make_stream(key);
  return sample_gaussian_noise(d, sigma, stream);
}

}  // namespace doadp
