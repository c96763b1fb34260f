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
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "doadp/compress.h"
#include "doadp/problems.h"
#include "oracles.h"

namespace doadp {
namespace {

PrivacyParams reference_params() {
  PrivacyParams p;
  p.epsilon = 1.0;
  p.delta0 = 1e-5;
  p.T = 10000;
  p.p = 1.0;
  p.q = 100;
  p.k = 30;
  p.d = 30;
  p.G = 1.0;
  return p;
}

PrivacyParams random_admissible(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PrivacyParams p;
  p.epsilon = 0.01 + 0.99 * u(rng);
  p.delta0 = std::pow(10.0, -8.0 + 7.0 * u(rng));
  p.p = 0.5 + 0.5 * u(rng);
  p.q = 1 + static_cast<std::uint64_t>(500 * u(rng));
  p.d = 1 + static_cast<std::uint64_t>(200 * u(rng));
  p.k = 1 + static_cast<std::uint64_t>(static_cast<double>(p.d) * u(rng)) % p.d;
  p.G = 0.1 + 10.0 * u(rng);
  p.T = min_iterations(p.epsilon, p.p, p.q) +
        static_cast<std::uint64_t>(5000 * u(rng));
  return p;
}

TEST(Sensitivity, ClosedForm) {
  EXPECT_DOUBLE_EQ(gaussian_sensitivity(30, 30, 1.5), 3.0);
  EXPECT_DOUBLE_EQ(gaussian_sensitivity(5, 20, 1.0), 1.0);
  EXPECT_THROW(gaussian_sensitivity(0, 4, 1.0), InvalidArgument);
  EXPECT_THROW(gaussian_sensitivity(5, 4, 1.0), InvalidArgument);
  EXPECT_THROW(gaussian_sensitivity(2, 4, 0.0), InvalidArgument);
}

// Replace-one neighbors on a tiny logistic dataset: every sample swap, every
// coordinate subset, clipped per-sample gradients.
TEST(Sensitivity, ExhaustiveNeighborOracle) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal(0.0, 3.0);
  const std::size_t d = 3, q = 2;
  const double G = 0.7;
  long cases = 0, violations = 0;
  for (int trial = 0; trial < 40; ++trial) {
    Eigen::VectorXd x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = normal(rng);
    std::vector<Eigen::VectorXd> samples;
    for (int s = 0; s < 4; ++s) {
      Eigen::VectorXd a(d);
      for (std::size_t j = 0; j < d; ++j) a[j] = normal(rng);
      const double b = s % 2 ? 1.0 : -1.0;
      samples.push_back(clip_per_coordinate(logistic_grad(x, a, b, q), G));
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
      for (std::size_t j = 0; j < samples.size(); ++j) {
        for (unsigned mask = 1; mask < (1u << d); ++mask) {
          double sq = 0.0;
          std::size_t k = 0;
          for (std::size_t c = 0; c < d; ++c) {
            if (mask & (1u << c)) {
              const double diff = samples[i][c] - samples[j][c];
              sq += diff * diff;
              ++k;
            }
          }
          ++cases;
          if (std::sqrt(sq) > gaussian_sensitivity(k, d, G) * (1 + 1e-15)) {
            ++violations;
          }
        }
      }
    }
  }
  EXPECT_GE(cases, 4000);
  EXPECT_EQ(violations, 0);
}

TEST(Calibrate, ReferenceValue) {
  const double sigma = calibrate_sigma(reference_params());
  // 160 ln(125000), evaluated independently.
  EXPECT_NEAR(sigma * sigma, 1877.77104260551, 1e-9);
  EXPECT_NEAR(sigma, 43.33325561973748, 1e-10);
}

TEST(Calibrate, ScalingLaws) {
  PrivacyParams p = reference_params();
  const double base = calibrate_sigma(p);
  p.k = 15;
  EXPECT_NEAR(std::pow(calibrate_sigma(p) / base, 2), 0.5, 1e-14);
  p = reference_params();
  p.T = 40000;  // keep the side condition valid at p = 1/2
  const double full = calibrate_sigma(p);
  p.p = 0.5;
  EXPECT_NEAR(std::pow(full / calibrate_sigma(p), 2), 4.0, 1e-13);
  p = reference_params();
  p.epsilon = 0.1;
  const double tenth = calibrate_sigma(p);
  p.epsilon = 0.01;
  EXPECT_NEAR(calibrate_sigma(p) / tenth, 10.0, 1e-13);
}

TEST(Calibrate, SideConditionNamesMinimalT) {
  PrivacyParams p = reference_params();
  p.q = 1000;  // needs T >= 250000
  try {
    calibrate_sigma(p);
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("250000"), std::string::npos)
        << e.what();
  }
  EXPECT_EQ(min_iterations(1.0, 1.0, 1000), 250000u);
  EXPECT_EQ(min_iterations(1.0, 0.8, 50), 977u);
}

TEST(Calibrate, RejectsOutOfRegime) {
  PrivacyParams p = reference_params();
  p.p = 0.4;
  EXPECT_THROW(calibrate_sigma(p), InvalidArgument);
  p = reference_params();
  p.epsilon = 1.5;
  EXPECT_THROW(calibrate_sigma(p), InvalidArgument);
  p = reference_params();
  p.delta0 = 0.0;
  EXPECT_THROW(calibrate_sigma(p), InvalidArgument);
}

TEST(PerStep, RoundTripIdentity) {
  const PrivacyParams p = reference_params();
  const double sigma = calibrate_sigma(p);
  const double eps_t = per_step_epsilon(sigma, p.k, p.d, p.delta0, p.G);
  EXPECT_NEAR(eps_t * eps_t, 0.05, 1e-14);
}

TEST(PerStep, LimitsAndInversion) {
  EXPECT_LT(per_step_epsilon(1e12, 3, 9, 1e-5, 1.0), 1e-11);
  const double unit = std::sqrt(2.0 * 4.0 * std::log(1.25 / 1e-3)) * 2.0 * 1.5 / 4.0;
  EXPECT_NEAR(per_step_epsilon(unit, 4, 16, 1e-3, 1.5), 1.0, 1e-15);
  EXPECT_THROW(per_step_epsilon(0.0, 1, 1, 1e-5, 1.0), InvalidArgument);
}

TEST(Amplification, ExactAndLinearized) {
  EXPECT_NEAR(amplify_by_subsampling(0.1, 0.5, 10, AmplificationMode::kExact),
              0.005244768031214582, 1e-15);
  EXPECT_DOUBLE_EQ(
      amplify_by_subsampling(0.1, 0.5, 10, AmplificationMode::kLinearized), 0.01);
  EXPECT_EQ(amplify_by_subsampling(0.0, 0.7, 3, AmplificationMode::kExact), 0.0);
  EXPECT_EQ(amplify_by_subsampling(0.0, 0.7, 3, AmplificationMode::kLinearized), 0.0);
  EXPECT_DOUBLE_EQ(amplify_delta(1e-5, 0.5, 10), 5e-7);
  EXPECT_THROW(amplify_by_subsampling(0.5, 1.0, 2, AmplificationMode::kLinearized),
               InvalidArgument);
}

TEST(Amplification, ExactNeverExceedsLinearized) {
  const double eps_max = std::sqrt(0.2);
  for (double eps = 0.0; eps <= eps_max; eps += eps_max / 200) {
    for (double p : {0.5, 0.75, 1.0}) {
      for (double q : {1.0, 2.0, 50.0}) {
        EXPECT_LE(amplify_by_subsampling(eps, p, q, AmplificationMode::kExact),
                  amplify_by_subsampling(eps, p, q, AmplificationMode::kLinearized));
      }
    }
  }
}

TEST(Composition, SingleStep) {
  const std::vector<double> e{0.1}, dl{1e-6};
  const Composition c = compose_advanced(e, dl, 1e-6);
  EXPECT_NEAR(c.epsilon, 0.4898531576934566, 1e-14);
  // 1 - (1 - 1e-6)^2
  EXPECT_NEAR(c.delta, 1.999999e-06, 1e-18);
}

TEST(Composition, ZeroEpsilons) {
  const std::vector<double> e(5, 0.0), dl(5, 1e-3);
  const Composition c = compose_advanced(e, dl, 0.01);
  EXPECT_EQ(c.epsilon, 0.0);
  EXPECT_NEAR(c.delta, 1.0 - 0.99 * std::pow(1.0 - 1e-3, 5), 1e-15);
}

TEST(Composition, ListMatchesHomogeneous) {
  const std::vector<double> e(300, 0.02), dl(300, 1e-7);
  const Composition a = compose_advanced(e, dl, 0.3);
  const Composition b = compose_advanced(0.02, 1e-7, 300, 0.3);
  EXPECT_NEAR(a.epsilon, b.epsilon, 1e-13);
  EXPECT_NEAR(a.delta, b.delta, 1e-15);
}

TEST(Composition, FixedSlackChoiceStaysBelowTarget) {
  // sum eps'^2 = eps^2 / 5 with delta' = sqrt(sum) gives at most
  // sqrt(3/5) eps + eps / 5.
  for (double eps : {0.05, 0.3, 0.7, 1.0}) {
    const double s = eps * eps / 5.0;
    const std::vector<double> e(100, std::sqrt(s / 100.0)), dl(100, 0.0);
    const Composition c = compose_advanced(e, dl, std::sqrt(s));
    EXPECT_LE(c.epsilon, std::sqrt(0.6) * eps + eps / 5.0);
    EXPECT_LE(c.epsilon, eps);
  }
}

TEST(Composition, RejectsOutsideWindow) {
  const std::vector<double> e{0.95}, dl{0.0};
  EXPECT_THROW(compose_advanced(e, dl, 0.1), InvalidArgument);
  const std::vector<double> ok{0.1};
  EXPECT_THROW(compose_advanced(ok, dl, 0.0), InvalidArgument);
  const std::vector<double> two{0.1, 0.1};
  EXPECT_THROW(compose_advanced(two, dl, 0.1), InvalidArgument);
}

TEST(VerifyBudget, RandomRoundTrips) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const PrivacyParams p = random_admissible(rng);
    const PrivacyBudget b = calibrate(p);
    AccountingLedger l;
    ASSERT_NO_THROW(l = verify_budget(b)) << trial;
    ASSERT_LE(l.composed_eps, p.epsilon);
    ASSERT_LE(l.amplified_eps, 0.9);
    ASSERT_LE(l.sum_sq_amplified, 1.0 * (1 + 1e-12));
    const double qe = static_cast<double>(p.q) * p.epsilon;
    const double identity =
        qe * qe / (20.0 * p.p * p.p * static_cast<double>(p.T));
    ASSERT_NEAR(l.per_step_eps * l.per_step_eps / identity, 1.0, 1e-10);
    ASSERT_DOUBLE_EQ(l.amplified_delta, p.p * p.delta0 / static_cast<double>(p.q));
  }
}

TEST(VerifyBudget, HalvedSigmaFailsAtComposition) {
  PrivacyBudget b = calibrate(reference_params());
  b.sigma *= 0.5;
  const AccountingLedger l = replay_accounting(b);
  ASSERT_FALSE(l.certified());
  EXPECT_EQ(*l.failed_stage, AccountingStage::kComposition);
  try {
    verify_budget(b);
    FAIL() << "expected BudgetViolation";
  } catch (const BudgetViolation& e) {
    EXPECT_EQ(e.stage(), AccountingStage::kComposition);
  }
}

TEST(VerifyBudget, TinySigmaFailsAtGaussianStage) {
  PrivacyBudget b = calibrate(reference_params());
  b.sigma *= 0.01;
  EXPECT_EQ(*replay_accounting(b).failed_stage,
            AccountingStage::kGaussianMechanism);
}

TEST(VerifyBudget, SideConditionRejected) {
  PrivacyBudget b{reference_params(), 100.0};
  b.params.T = 10;
  EXPECT_THROW(verify_budget(b), InvalidArgument);
}

TEST(VerifyBudget, MonotoneInParameters) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const PrivacyParams base = random_admissible(rng);
    const double s = calibrate_sigma(base);
    auto with = [&](auto edit) {
      PrivacyParams p = base;
      edit(p);
      return calibrate_sigma(p);
    };
    EXPECT_GE(with([](PrivacyParams& p) { p.T += 100; }), s);
    EXPECT_GE(with([](PrivacyParams& p) { p.G *= 1.3; }), s);
    EXPECT_LE(with([](PrivacyParams& p) { p.d += 5; }), s);
    EXPECT_GE(with([](PrivacyParams& p) { p.delta0 *= 0.5; }), s);
    if (base.k < base.d) {
      EXPECT_GE(with([](PrivacyParams& p) { p.k += 1; }), s);
    }
    if (base.p < 1.0) {
      EXPECT_GE(with([](PrivacyParams& p) { p.p = std::min(1.0, p.p + 0.01); }), s);
    }
    EXPECT_GE(with([](PrivacyParams& p) { p.epsilon *= 0.99; }), s);
    // More data per agent lowers the noise; T is raised to keep the side
    // condition valid for the larger q.
    PrivacyParams more_q = base;
    more_q.q += 1;
    more_q.T = std::max(more_q.T, min_iterations(more_q.epsilon, more_q.p, more_q.q));
    PrivacyParams same_t = base;
    same_t.T = more_q.T;
    EXPECT_LE(calibrate_sigma(more_q), calibrate_sigma(same_t));
  }
}

TEST(Ledger, FormatHasOneLinePerStage) {
  const AccountingLedger l = verify_budget(calibrate(reference_params()));
  const std::string text = format_ledger(l);
  EXPECT_NE(text.find("gaussian_mechanism "), std::string::npos);
  EXPECT_NE(text.find("subsampling "), std::string::npos);
  EXPECT_NE(text.find("composition "), std::string::npos);
  EXPECT_NE(text.find("post_processing "), std::string::npos);
  EXPECT_EQ(text.find("FAILED"), std::string::npos);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
}

TEST(Ledger, ExposesCompositionDelta) {
  const PrivacyParams p = reference_params();
  const AccountingLedger l = verify_budget(calibrate(p));
  const double dp = l.delta_prime;
  const double expected =
      1.0 - (1.0 - dp) * std::pow(1.0 - p.delta0 / 100.0, 10000.0);
  EXPECT_NEAR(l.composed_delta, expected, 1e-12);
  EXPECT_NEAR(dp, std::sqrt(0.2), 1e-12);
}

TEST(Noise, ZeroSigmaIsZero) {
  EXPECT_EQ(sample_gaussian_noise(7, 0.0, StreamKey{1, 2, 3}),
            Eigen::VectorXd::Zero(7));
}

TEST(Noise, MomentsMatch) {
  Stream s = make_stream({42, 0, 0, StreamPurpose::kNoise});
  const int N = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < N; ++i) {
    const double v = sample_gaussian_noise(1, 2.0, s)[0];
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / N;
  const double var = sum_sq / N - mean * mean;
  EXPECT_LT(std::abs(mean), 4.0 * 2.0 / std::sqrt(static_cast<double>(N)));
  EXPECT_NEAR(var, 4.0, 0.02 * 4.0);
}

TEST(Noise, KeyedStreamsAreDeterministicAndDistinct) {
  const StreamKey a{7, 3, 11, StreamPurpose::kNoise};
  EXPECT_EQ(sample_gaussian_noise(5, 1.0, a), sample_gaussian_noise(5, 1.0, a));
  StreamKey b = a;
  b.iteration = 12;
  EXPECT_NE(sample_gaussian_noise(5, 1.0, a), sample_gaussian_noise(5, 1.0, b));
  b = a;
  b.purpose = StreamPurpose::kSample;
  EXPECT_NE(sample_gaussian_noise(5, 1.0, a), sample_gaussian_noise(5, 1.0, b));
}

TEST(Noise, VarianceRatio) {
  EXPECT_NEAR(noise_variance_ratio(9, 30, 0.8), 0.192, 1e-15);
  EXPECT_EQ(noise_variance_ratio(30, 30, 1.0), 1.0);
}

}  // namespace
}  // namespace doadp
