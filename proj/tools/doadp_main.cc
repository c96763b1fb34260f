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

// doadp: experiment runner.
//
//   doadp run <spec.json> [--out DIR] [--stride N] [--workers N]
//   doadp budget <spec.json>
//   doadp validate <spec.json>
//   doadp replay <manifest.json> [--csv FILE]
//
// Exit status: 0 success, 1 invalid input, 2 runtime failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "doadp/experiment.h"

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

// Maps library exceptions onto exit codes.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const doadp::InvalidArgument& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return kInvalid;
  } catch (const doadp::ParseError& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return kInvalid;
  } catch (const doadp::BudgetViolation& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}

doadp::ExperimentSpec load_checked(const std::string& path) {
  doadp::ExperimentSpec spec = doadp::ExperimentSpec::load(path);
  doadp::validate_spec(spec);
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DO-ADP simulator: decentralized momentum SGD with random "
               "activation, Top-k messages and Gaussian privacy noise"};
  app.require_subcommand(1);

  std::string spec_path;
  std::string out_dir;
  std::uint64_t stride = 0;
  std::size_t workers = 1;
  auto* run = app.add_subcommand("run", "Execute every sweep point and seed");
  run->add_option("spec", spec_path, "Experiment spec (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory (overrides spec.output)");
  run->add_option("--stride", stride, "Metrics stride (overrides run.stride)")
      ->check(CLI::PositiveNumber);
  run->add_option("--workers", workers, "Worker threads; 0 = all cores");

  auto* budget = app.add_subcommand("budget", "Print calibrated noise and the privacy ledger");
  budget->add_option("spec", spec_path, "Experiment spec (JSON)")->required();

  auto* validate = app.add_subcommand("validate", "Check a spec without running it");
  validate->add_option("spec", spec_path, "Experiment spec (JSON)")->required();

  std::string manifest_path;
  std::string csv_out;
  auto* replay = app.add_subcommand("replay", "Re-run one run from its manifest and compare outputs");
  replay->add_option("manifest", manifest_path, "Run manifest (JSON)")->required();
  replay->add_option("--csv", csv_out, "Write the regenerated CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  if (*run) {
    doadp::ExperimentSpec spec;
    const int status = guarded([&] {
      spec = load_checked(spec_path);
      if (stride > 0) spec.run.stride = stride;
      return kOk;
    });
    if (status != kOk) return status;
    const std::string dir = out_dir.empty() ? spec.output : out_dir;
    return guarded([&]() -> int {
      try {
        const doadp::ExperimentResult result =
            doadp::run_experiment(spec, dir, workers);
        std::cout << "wrote " << result.runs.size() << " runs and "
                  << dir << "/aggregate.csv\n";
        return kOk;
      } catch (const doadp::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
      }
    });
  }
  if (*budget) {
    return guarded([&] {
      std::cout << doadp::budget_report(load_checked(spec_path));
      return kOk;
    });
  }
  if (*validate) {
    return guarded([&] {
      load_checked(spec_path);
      std::cout << "ok\n";
      return kOk;
    });
  }
  if (*replay) {
    return guarded([&] {
      std::ifstream in(manifest_path);
      if (!in) throw doadp::Error("cannot open " + manifest_path);
      nlohmann::json manifest;
      try {
        manifest = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw doadp::ValidationError(manifest_path, e.what());
      }
      const doadp::ReplayResult r = doadp::replay_manifest(manifest);
      if (!csv_out.empty()) {
        std::ofstream out(csv_out, std::ios::binary);
        out << r.csv;
        if (!out) throw doadp::Error("cannot write " + csv_out);
      }
      std::cout << (r.matches ? "match " : "MISMATCH ") << r.actual_hash
                << " (recorded " << r.expected_hash << ")\n";
      return r.matches ? kOk : kRuntime;
    });
  }
  return kInvalid;
}
