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

// Gaussian-noise calibration and (epsilon, delta) accounting for DO-ADP.
//
// The accountant runs the chain
//
//   Gaussian mechanism on the Top-k selected gradient   -> (eps_t, delta0)
//   amplification by activation + data subsampling     -> (eps'_t, p delta0 / q)
//   advanced composition over T steps                   -> (eps~, delta~)
//   post-processing (sparsify, transmit)                 -> unchanged
//
// with the composition slack fixed to delta' = sqrt(sum_t eps'_t^2). All
// logarithms are natural.

#ifndef DOADP_PRIVACY_H_
#define DOADP_PRIVACY_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "doadp/error.h"
#include "doadp/rng.h"

namespace doadp {

// Relative slack on the accountant's inequality checks. Calibrated noise sits
// exactly on several boundaries, where the last bit of rounding decides.
inline constexpr double kAccountingRelTol = 1e-12;

struct PrivacyParams {
  double epsilon = 1.0;     // target, in (0, 1]
  double delta0 = 1e-5;     // per-step Gaussian delta, in (0, 1]
  std::uint64_t T = 1;      // iterations
  double p = 1.0;           // activation probability, in [1/2, 1]
  std::uint64_t q = 1;      // local dataset size
  std::uint64_t k = 1;      // Top-k coordinates
  std::uint64_t d = 1;      // dimension
  double G = 1.0;           // gradient scale

  // Throws InvalidArgument naming the offending field. Includes the side
  // condition T >= q^2 eps^2 / (4 p^2).
  void validate() const;
};

struct PrivacyBudget {
  PrivacyParams params;
  double sigma = 0.0;
};

// Smallest T satisfying T >= q^2 eps^2 / (4 p^2).
std::uint64_t min_iterations(double epsilon, double p, std::uint64_t q);

// l2-sensitivity of the k selected coordinates of a clipped gradient:
// 2 G sqrt(k / d).
double gaussian_sensitivity(std::uint64_t k, std::uint64_t d, double G);

// Minimal sigma with
//   sigma^2 = 160 k p^2 T log(1.25/delta0) G^2 / (q^2 d eps^2).
double calibrate_sigma(const PrivacyParams& params);
PrivacyBudget calibrate(const PrivacyParams& params);

// eps_t = 2 sqrt(2 k log(1.25/delta0)) G / (sigma sqrt(d)).
double per_step_epsilon(double sigma, std::uint64_t k, std::uint64_t d,
                        double delta0, double G);

enum class AmplificationMode {
  kExact,       // log(1 + p (e^eps - 1) / q)
  kLinearized,  // 2 p eps / q, valid while eps^2 <= 1/5
};

double amplify_by_subsampling(double epsilon, double p, double q,
                              AmplificationMode mode);
// Companion delta map: delta -> p delta / q.
double amplify_delta(double delta, double p, double q);

struct Composition {
  double epsilon = 0.0;
  double delta = 0.0;
};

// Advanced composition:
//   eps~ = sqrt(2 S log(e + sqrt(S) / delta')) + S,  S = sum eps_t^2
//   delta~ = 1 - (1 - delta') prod (1 - delta_t)
// Every eps_t must lie in [0, 0.9].
Composition compose_advanced(std::span<const double> epsilons,
                             std::span<const double> deltas,
                             double delta_prime);
// Same formula for `steps` identical mechanisms.
Composition compose_advanced(double epsilon, double delta, std::uint64_t steps,
                             double delta_prime);

enum class AccountingStage {
  kGaussianMechanism,
  kSubsampling,
  kComposition,
  kPostProcessing,
};
const char* stage_name(AccountingStage stage);

struct AccountingLedger {
  double per_step_eps = 0.0;
  double per_step_delta = 0.0;
  double amplified_eps = 0.0;
  double amplified_delta = 0.0;
  double sum_sq_amplified = 0.0;  // sum_t eps'_t^2
  double delta_prime = 0.0;
  double composed_eps = 0.0;
  double composed_delta = 0.0;
  double target_eps = 0.0;
  // Unset when every link holds and composed_eps <= target_eps.
  std::optional<AccountingStage> failed_stage;
  std::string failure;

  bool certified() const { return !failed_stage.has_value(); }
};

// Replays the accounting chain. Parameter errors (including the T side
// condition) throw; a sigma too small to certify the target is reported in
// `failed_stage` and the ledger is filled as far as the chain got.
AccountingLedger replay_accounting(const PrivacyBudget& budget);

class BudgetViolation : public Error {
 public:
  BudgetViolation(AccountingLedger ledger)
      : Error(std::string("privacy accounting fails at ") +
              stage_name(*ledger.failed_stage) + ": " + ledger.failure),
        ledger_(std::move(ledger)) {}
  const AccountingLedger& ledger() const { return ledger_; }
  AccountingStage stage() const { return *ledger_.failed_stage; }

 private:
  AccountingLedger ledger_;
};

// replay_accounting, throwing BudgetViolation unless certified.
AccountingLedger verify_budget(const PrivacyBudget& budget);

// One line per stage: "<stage> <epsilon> <delta>", preceded by a header.
std::string format_ledger(const AccountingLedger& ledger);

// Noise variance relative to the full-communication baseline (k = d, p = 1).
double noise_variance_ratio(std::uint64_t k, std::uint64_t d, double p);

// i.i.d. N(0, sigma^2) coordinates. sigma == 0 returns zeros without drawing.
Eigen::VectorXd sample_gaussian_noise(std::size_t d, double sigma,
                                      Stream& stream);
Eigen::VectorXd sample_gaussian_noise(std::size_t d, double sigma,
                                      const StreamKey& key);

}  // namespace doadp

#endif  // DOADP_PRIVACY_H_
