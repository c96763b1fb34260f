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

// JSON-configured sweeps over (p, k/d, epsilon) x seeds: per-run CSV and
// manifest files plus one aggregate CSV.
//
// Spec layout:
//   {
//     "problem":  {"type": "synthetic_logistic", "n", "q", "d", "margin",
//                  "label_noise", "seed"}
//               | {"type": "svmlight", "path", "n", "seed"}
//               | {"type": "quadratic", "n", "d", "condition",
//                  "heterogeneity", "seed"},
//     "topology": {"type": "ring_chords", "chord_span", "iota"?}
//               | {"type": "edge_list", "path", "iota"?},
//     "run":      {"alpha", "gamma": number | "recommended", "beta", "T",
//                  "G", "stride"?, "x0"?},
//     "privacy":  {"sigma"} | {"delta0"},
//     "sweep":    {"p": [...], "k_over_d": [...], "epsilon": [...]},
//     "seeds":    [...],
//     "output":   "dir"
//   }
// Relative data paths resolve against the spec file's directory. With an
// explicit sigma the epsilon axis must be absent and reported values are NaN.

#ifndef DOADP_EXPERIMENT_H_
#define DOADP_EXPERIMENT_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "doadp/engine.h"
#include "doadp/error.h"
#include "doadp/graph.h"
#include "doadp/privacy.h"
#include "doadp/problems.h"

namespace doadp {

// A spec field is missing or invalid. `path()` is the dotted field path.
class ValidationError : public InvalidArgument {
 public:
  ValidationError(const std::string& path, const std::string& what)
      : InvalidArgument(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct ProblemSpec {
  std::string type = "synthetic_logistic";
  SyntheticLogisticSpec logistic;
  QuadraticSpec quadratic;
  std::string path;  // svmlight only, resolved
  std::size_t n = 1;  // svmlight only
  std::uint64_t seed = 1;  // svmlight partition seed
};

struct TopologySpec {
  std::string type = "ring_chords";
  std::size_t chord_span = 1;
  std::string path;  // edge_list only, resolved
  std::optional<double> iota;
};

struct RunSpec {
  double alpha = 0.01;
  std::optional<double> gamma;  // unset: recommended
  double beta = 0.5;
  std::uint64_t T = 100;
  double G = 1.0;
  std::uint64_t stride = 1;
  std::optional<std::vector<double>> x0;
};

struct PrivacySpec {
  std::optional<double> sigma;
  std::optional<double> delta0;
  bool calibrated() const { return delta0.has_value(); }
};

struct SweepSpec {
  std::vector<double> p;
  std::vector<double> k_over_d;
  std::vector<double> epsilon;
};

struct ExperimentSpec {
  ProblemSpec problem;
  TopologySpec topology;
  RunSpec run;
  PrivacySpec privacy;
  SweepSpec sweep;
  std::vector<std::uint64_t> seeds;
  std::string output = "out";

  // Structural parse; throws ValidationError with field paths.
  static ExperimentSpec from_json(const nlohmann::json& j,
                                  const std::string& base_dir = ".");
  static ExperimentSpec load(const std::string& path);
  nlohmann::json to_json() const;
};

// Everything shared by the runs of one spec.
struct Workspace {
  std::unique_ptr<Problem> problem;
  std::unique_ptr<Topology> topology;
  std::unique_ptr<WeightMatrix> weights;
  double f_star = 0.0;
  double f0 = 0.0;  // f(x0)
};

std::unique_ptr<Problem> build_problem(const ProblemSpec& spec);
Topology build_topology(const TopologySpec& spec, std::size_t n);
// Builds the problem and graph and solves for f*.
Workspace build_workspace(const ExperimentSpec& spec);

struct SweepPoint {
  double p = 1.0;
  double k_over_d = 1.0;
  double epsilon = 0.0;  // NaN with an explicit sigma
};

// k = round(k_over_d * d), clamped to [1, d].
std::size_t resolve_k(double k_over_d, std::size_t d);
// Sorted by p, then k/d, then epsilon.
std::vector<SweepPoint> sweep_points(const ExperimentSpec& spec);

struct PointSetup {
  SweepPoint point;
  std::size_t k = 1;
  double util_rate = 1.0;  // p k / d
  double gamma = 0.0;
  double sigma = 0.0;
  std::optional<AccountingLedger> ledger;
};

// Resolves k, gamma and sigma (calibrating and verifying when requested).
PointSetup setup_point(const ExperimentSpec& spec, const Workspace& ws,
                       const SweepPoint& point);

// Full semantic validation: structural checks, problem and graph
// construction, and privacy admissibility of every calibrated point.
void validate_spec(const ExperimentSpec& spec);

struct RunOutcome {
  std::string run_id;
  PointSetup setup;
  std::uint64_t seed = 0;
  RunMetrics metrics;
  std::string csv;
  nlohmann::json manifest;
};

// One sweep point x seed.
RunOutcome execute_run(const ExperimentSpec& spec, const Workspace& ws,
                       const PointSetup& setup, std::uint64_t seed);

struct ExperimentResult {
  std::vector<RunOutcome> runs;  // sweep order, seeds innermost
  std::string aggregate_csv;
};

class RunFailure : public Error {
 public:
  using Error::Error;
};

// Runs all jobs on `workers` threads, writes runs/<id>.csv, runs/<id>.json
// and aggregate.csv under `out_dir`. Throws RunFailure listing every failed
// run after the others finish.
ExperimentResult run_experiment(const ExperimentSpec& spec,
                                const std::string& out_dir,
                                std::size_t workers = 1);

std::string aggregate_csv(const ExperimentSpec& spec, const Workspace& ws,
                          const std::vector<RunOutcome>& runs);

// Calibrated sigma, the accounting ledger and the variance ratio k p^2 / d
// for every sweep point. Requires privacy.delta0.
std::string budget_report(const ExperimentSpec& spec);

struct ReplayResult {
  bool matches = false;
  std::string csv;
  std::string expected_hash;
  std::string actual_hash;
};

// Re-executes a run from its manifest alone.
ReplayResult replay_manifest(const nlohmann::json& manifest);

// FNV-1a 64 of a byte string, as 16 hex digits.
std::string content_hash(const std::string& bytes);

}  // namespace doadp

#endif  // DOADP_EXPERIMENT_H_
