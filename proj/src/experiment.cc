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

#include "doadp/experiment.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "doadp/bounds.h"

namespace doadp {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(); }

// --- structural readers -----------------------------------------------------

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) {
    throw ValidationError(path.empty() ? "<root>" : path, "expected an object");
  }
}

void reject_unknown(const json& j, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ValidationError(join(path, key), "unknown field");
  }
}

const json& field(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw ValidationError(join(path, key), "missing");
  return j.at(key);
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ValidationError(path, "expected a number");
  const double out = v.get<double>();
  if (!std::isfinite(out)) throw ValidationError(path, "must be finite");
  return out;
}

std::uint64_t as_count(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  throw ValidationError(path, "expected a non-negative integer");
}

std::string as_text(const json& v, const std::string& path) {
  if (!v.is_string()) throw ValidationError(path, "expected a string");
  return v.get<std::string>();
}

double number_field(const json& j, const std::string& path, const char* key) {
  return as_number(field(j, path, key), join(path, key));
}

double number_or(const json& j, const std::string& path, const char* key,
                 double fallback) {
  return j.contains(key) ? as_number(j.at(key), join(path, key)) : fallback;
}

std::uint64_t count_field(const json& j, const std::string& path,
                          const char* key) {
  return as_count(field(j, path, key), join(path, key));
}

std::uint64_t count_or(const json& j, const std::string& path, const char* key,
                       std::uint64_t fallback) {
  return j.contains(key) ? as_count(j.at(key), join(path, key)) : fallback;
}

std::vector<double> number_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError(path, "expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(as_number(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ValidationError(path, what);
}

std::string resolve_path(const std::string& p, const std::string& base) {
  fs::path path(p);
  if (path.is_relative()) path = fs::path(base) / path;
  return fs::absolute(path).lexically_normal().string();
}

void check_axis(const std::vector<double>& axis, const std::string& path,
                double lo, double hi, bool lo_open) {
  require(!axis.empty(), path, "must not be empty");
  std::set<double> seen;
  for (std::size_t i = 0; i < axis.size(); ++i) {
    const std::string at = path + "[" + std::to_string(i) + "]";
    const double v = axis[i];
    const bool low_ok = lo_open ? v > lo : v >= lo;
    require(low_ok && v <= hi, at,
            "must lie in " + std::string(lo_open ? "(" : "[") + short_num(lo) +
                ", " + short_num(hi) + "]");
    require(seen.insert(v).second, at, "duplicate value");
  }
}

ProblemSpec parse_problem(const json& j, const std::string& base) {
  const std::string path = "problem";
  expect_object(j, path);
  ProblemSpec out;
  out.type = as_text(field(j, path, "type"), join(path, "type"));
  if (out.type == "synthetic_logistic") {
    reject_unknown(j, path,
                   {"type", "n", "q", "d", "margin", "label_noise", "seed"});
    auto& s = out.logistic;
    s.n = count_field(j, path, "n");
    s.q = count_field(j, path, "q");
    s.d = count_field(j, path, "d");
    s.margin = j.contains("margin") && j.at("margin").is_string() &&
                       j.at("margin") == "inf"
                   ? std::numeric_limits<double>::infinity()
                   : number_or(j, path, "margin", s.margin);
    s.label_noise = number_or(j, path, "label_noise", s.label_noise);
    s.seed = count_or(j, path, "seed", s.seed);
    require(s.n >= 1, join(path, "n"), "must be >= 1");
    require(s.q >= 1, join(path, "q"), "must be >= 1");
    require(s.d >= 1, join(path, "d"), "must be >= 1");
    require(s.margin > 0.0, join(path, "margin"), "must be positive");
    require(s.label_noise >= 0.0 && s.label_noise <= 1.0,
            join(path, "label_noise"), "must lie in [0, 1]");
  } else if (out.type == "svmlight") {
    reject_unknown(j, path, {"type", "path", "n", "seed"});
    out.path = resolve_path(as_text(field(j, path, "path"), join(path, "path")),
                            base);
    out.n = count_field(j, path, "n");
    out.seed = count_or(j, path, "seed", out.seed);
    require(out.n >= 1, join(path, "n"), "must be >= 1");
  } else if (out.type == "quadratic") {
    reject_unknown(j, path,
                   {"type", "n", "d", "condition", "heterogeneity", "seed"});
    auto& s = out.quadratic;
    s.n = count_field(j, path, "n");
    s.d = count_field(j, path, "d");
    s.condition = number_or(j, path, "condition", s.condition);
    s.heterogeneity = number_or(j, path, "heterogeneity", s.heterogeneity);
    s.seed = count_or(j, path, "seed", s.seed);
    require(s.n >= 1, join(path, "n"), "must be >= 1");
    require(s.d >= 1, join(path, "d"), "must be >= 1");
    require(s.condition >= 1.0, join(path, "condition"), "must be >= 1");
    require(s.heterogeneity >= 0.0, join(path, "heterogeneity"),
            "must be >= 0");
  } else {
    throw ValidationError(join(path, "type"),
                          "unknown problem type '" + out.type + "'");
  }
  return out;
}

TopologySpec parse_topology(const json& j, const std::string& base) {
  const std::string path = "topology";
  expect_object(j, path);
  TopologySpec out;
  out.type = as_text(field(j, path, "type"), join(path, "type"));
  if (out.type == "ring_chords") {
    reject_unknown(j, path, {"type", "chord_span", "iota"});
    out.chord_span = count_field(j, path, "chord_span");
    require(out.chord_span >= 1, join(path, "chord_span"), "must be >= 1");
  } else if (out.type == "edge_list") {
    reject_unknown(j, path, {"type", "path", "iota"});
    out.path = resolve_path(as_text(field(j, path, "path"), join(path, "path")),
                            base);
  } else {
    throw ValidationError(join(path, "type"),
                          "unknown topology type '" + out.type + "'");
  }
  if (j.contains("iota")) out.iota = number_field(j, path, "iota");
  return out;
}

RunSpec parse_run(const json& j) {
  const std::string path = "run";
  expect_object(j, path);
  reject_unknown(j, path, {"alpha", "gamma", "beta", "T", "G", "stride", "x0"});
  RunSpec out;
  out.alpha = number_field(j, path, "alpha");
  const json& gamma = field(j, path, "gamma");
  if (gamma.is_string()) {
    require(gamma == "recommended", join(path, "gamma"),
            "expected a number or \"recommended\"");
  } else {
    out.gamma = as_number(gamma, join(path, "gamma"));
    require(*out.gamma > 0.0, join(path, "gamma"), "must be positive");
  }
  out.beta = number_field(j, path, "beta");
  out.T = count_field(j, path, "T");
  out.G = number_field(j, path, "G");
  out.stride = count_or(j, path, "stride", out.stride);
  if (j.contains("x0")) out.x0 = number_list(j.at("x0"), join(path, "x0"));
  require(out.alpha > 0.0, join(path, "alpha"), "must be positive");
  require(out.beta > 0.0 && out.beta < 1.0, join(path, "beta"),
          "must lie in (0, 1)");
  require(out.T >= 1, join(path, "T"), "must be >= 1");
  require(out.G > 0.0, join(path, "G"), "must be positive");
  require(out.stride >= 1, join(path, "stride"), "must be >= 1");
  return out;
}

PrivacySpec parse_privacy(const json& j) {
  const std::string path = "privacy";
  expect_object(j, path);
  reject_unknown(j, path, {"sigma", "delta0"});
  PrivacySpec out;
  if (j.contains("sigma")) out.sigma = number_field(j, path, "sigma");
  if (j.contains("delta0")) out.delta0 = number_field(j, path, "delta0");
  require(out.sigma.has_value() != out.delta0.has_value(), path,
          "exactly one of sigma and delta0 is required");
  if (out.sigma) require(*out.sigma >= 0.0, join(path, "sigma"), "must be >= 0");
  if (out.delta0) {
    require(*out.delta0 > 0.0 && *out.delta0 <= 1.0, join(path, "delta0"),
            "must lie in (0, 1]");
  }
  return out;
}

SweepSpec parse_sweep(const json& j, bool calibrated) {
  const std::string path = "sweep";
  expect_object(j, path);
  reject_unknown(j, path, {"p", "k_over_d", "epsilon"});
  SweepSpec out;
  out.p = number_list(field(j, path, "p"), join(path, "p"));
  out.k_over_d = number_list(field(j, path, "k_over_d"), join(path, "k_over_d"));
  check_axis(out.p, join(path, "p"), 0.5, 1.0, false);
  check_axis(out.k_over_d, join(path, "k_over_d"), 0.0, 1.0, true);
  if (calibrated) {
    out.epsilon = number_list(field(j, path, "epsilon"), join(path, "epsilon"));
    check_axis(out.epsilon, join(path, "epsilon"), 0.0, 1.0, true);
  } else if (j.contains("epsilon")) {
    throw ValidationError(join(path, "epsilon"),
                          "not allowed with an explicit privacy.sigma");
  }
  return out;
}

json problem_json(const ProblemSpec& s) {
  json j;
  j["type"] = s.type;
  if (s.type == "synthetic_logistic") {
    j["n"] = s.logistic.n;
    j["q"] = s.logistic.q;
    j["d"] = s.logistic.d;
    if (std::isinf(s.logistic.margin)) {
      j["margin"] = "inf";
    } else {
      j["margin"] = s.logistic.margin;
    }
    j["label_noise"] = s.logistic.label_noise;
    j["seed"] = s.logistic.seed;
  } else if (s.type == "svmlight") {
    j["path"] = s.path;
    j["n"] = s.n;
    j["seed"] = s.seed;
  } else {
    j["n"] = s.quadratic.n;
    j["d"] = s.quadratic.d;
    j["condition"] = s.quadratic.condition;
    j["heterogeneity"] = s.quadratic.heterogeneity;
    j["seed"] = s.quadratic.seed;
  }
  return j;
}

json topology_json(const TopologySpec& s) {
  json j;
  j["type"] = s.type;
  if (s.type == "ring_chords") {
    j["chord_span"] = s.chord_span;
  } else {
    j["path"] = s.path;
  }
  if (s.iota) j["iota"] = *s.iota;
  return j;
}

json run_json(const RunSpec& s) {
  json j;
  j["alpha"] = s.alpha;
  if (s.gamma) {
    j["gamma"] = *s.gamma;
  } else {
    j["gamma"] = "recommended";
  }
  j["beta"] = s.beta;
  j["T"] = s.T;
  j["G"] = s.G;
  j["stride"] = s.stride;
  if (s.x0) j["x0"] = *s.x0;
  return j;
}

json ledger_json(const AccountingLedger& l) {
  json j;
  j["per_step_eps"] = l.per_step_eps;
  j["per_step_delta"] = l.per_step_delta;
  j["amplified_eps"] = l.amplified_eps;
  j["amplified_delta"] = l.amplified_delta;
  j["sum_sq_amplified"] = l.sum_sq_amplified;
  j["delta_prime"] = l.delta_prime;
  j["composed_eps"] = l.composed_eps;
  j["composed_delta"] = l.composed_delta;
  j["target_eps"] = l.target_eps;
  j["certified"] = l.certified();
  return j;
}

std::string run_id(const SweepPoint& pt, std::uint64_t seed) {
  std::string id = "p" + short_num(pt.p) + "_kd" + short_num(pt.k_over_d);
  if (!std::isnan(pt.epsilon)) id += "_eps" + short_num(pt.epsilon);
  return id + "_seed" + std::to_string(seed);
}

Eigen::VectorXd initial_point(const RunSpec& run, std::size_t d) {
  if (!run.x0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  if (run.x0->size() != d) {
    throw ValidationError("run.x0", "has length " + std::to_string(run.x0->size()) +
                                        ", expected " + std::to_string(d));
  }
  return Eigen::Map<const Eigen::VectorXd>(run.x0->data(),
                                           static_cast<Eigen::Index>(d));
}

BoundInputs bound_inputs(const ExperimentSpec& spec, const Workspace& ws,
                         const PointSetup& setup, double varsigma_sq) {
  BoundInputs in;
  in.alpha = spec.run.alpha;
  in.beta = spec.run.beta;
  in.gamma = setup.gamma;
  in.p = setup.point.p;
  in.k = setup.k;
  in.d = ws.problem->dim();
  in.n = ws.problem->num_agents();
  in.T = spec.run.T;
  in.sigma = setup.sigma;
  in.G = spec.run.G;
  in.varsigma = std::sqrt(varsigma_sq);
  in.L = ws.problem->smoothness();
  in.rho = ws.weights->rho();
  in.phi = ws.weights->phi();
  in.f0_gap = std::max(0.0, ws.f0 - ws.f_star);
  return in;
}

// NaN when alpha is outside the admissible range.
double theorem2_total(const BoundInputs& in) {
  try {
    return theorem2_bound(in).total;
  } catch (const InvalidArgument&) {
    return kNaN;
  }
}

double sqrt_nt_rate(const BoundInputs& in) {
  try {
    return corollary1_rate(in, RateChoice::kSqrtNT);
  } catch (const InvalidArgument&) {
    return kNaN;
  }
}

double mean_of(const std::vector<MetricsRow>& rows,
               double MetricsRow::*member) {
  double s = 0.0;
  for (const MetricsRow& r : rows) s += r.*member;
  return s / static_cast<double>(rows.size());
}

double max_of(const std::vector<MetricsRow>& rows,
              double MetricsRow::*member) {
  double m = 0.0;
  for (const MetricsRow& r : rows) m = std::max(m, r.*member);
  return m;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

ExperimentSpec ExperimentSpec::from_json(const json& j,
                                         const std::string& base_dir) {
  expect_object(j, "");
  reject_unknown(j, "", {"problem", "topology", "run", "privacy", "sweep",
                         "seeds", "output"});
  ExperimentSpec out;
  out.problem = parse_problem(field(j, "", "problem"), base_dir);
  out.topology = parse_topology(field(j, "", "topology"), base_dir);
  out.run = parse_run(field(j, "", "run"));
  out.privacy = parse_privacy(field(j, "", "privacy"));
  out.sweep = parse_sweep(field(j, "", "sweep"), out.privacy.calibrated());
  const json& seeds = field(j, "", "seeds");
  require(seeds.is_array(), "seeds", "expected an array");
  require(!seeds.empty(), "seeds", "must not be empty");
  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const std::string at = "seeds[" + std::to_string(i) + "]";
    const std::uint64_t s = as_count(seeds[i], at);
    require(seen.insert(s).second, at, "duplicate seed");
    out.seeds.push_back(s);
  }
  if (j.contains("output")) out.output = as_text(j.at("output"), "output");
  return out;
}

ExperimentSpec ExperimentSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path, "cannot open spec file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path, std::string("invalid JSON: ") + e.what());
  }
  const fs::path parent = fs::path(path).parent_path();
  return from_json(j, parent.empty() ? "." : parent.string());
}

json ExperimentSpec::to_json() const {
  json j;
  j["problem"] = problem_json(problem);
  j["topology"] = topology_json(topology);
  j["run"] = run_json(run);
  json priv = json::object();
  if (privacy.sigma) priv["sigma"] = *privacy.sigma;
  if (privacy.delta0) priv["delta0"] = *privacy.delta0;
  j["privacy"] = priv;
  json sweep_j;
  sweep_j["p"] = sweep.p;
  sweep_j["k_over_d"] = sweep.k_over_d;
  if (privacy.calibrated()) sweep_j["epsilon"] = sweep.epsilon;
  j["sweep"] = sweep_j;
  j["seeds"] = seeds;
  j["output"] = output;
  return j;
}

std::unique_ptr<Problem> build_problem(const ProblemSpec& spec) {
  if (spec.type == "synthetic_logistic") {
    return std::make_unique<LogisticProblem>(
        synthetic_logistic_data(spec.logistic));
  }
  if (spec.type == "svmlight") {
    return std::make_unique<LogisticProblem>(
        partition_dataset(load_svmlight(spec.path), spec.n, spec.seed));
  }
  if (spec.type == "quadratic") {
    return std::make_unique<QuadraticProblem>(quadratic_problem(spec.quadratic));
  }
  throw ValidationError("problem.type", "unknown problem type '" + spec.type + "'");
}

Topology build_topology(const TopologySpec& spec, std::size_t n) {
  if (spec.type == "ring_chords") {
    if (n <= 2 * spec.chord_span) {
      throw ValidationError("topology.chord_span",
                            "needs n > 2 * chord_span (n = " +
                                std::to_string(n) + ")");
    }
    return ring_chords(n, spec.chord_span);
  }
  Topology t = read_edge_list(spec.path);
  if (t.size() != n) {
    throw ValidationError("topology.path", "graph has " +
                                               std::to_string(t.size()) +
                                               " agents, problem has " +
                                               std::to_string(n));
  }
  return t;
}

namespace {

Workspace build_graph_and_problem(const ExperimentSpec& spec) {
  Workspace ws;
  ws.problem = build_problem(spec.problem);
  ws.topology = std::make_unique<Topology>(
      build_topology(spec.topology, ws.problem->num_agents()));
  try {
    ws.weights = std::make_unique<WeightMatrix>(
        laplacian_weights(*ws.topology, spec.topology.iota));
  } catch (const InvalidArgument& e) {
    throw ValidationError("topology", e.what());
  }
  ws.f0 = ws.problem->loss(initial_point(spec.run, ws.problem->dim()));
  return ws;
}

}  // namespace

Workspace build_workspace(const ExperimentSpec& spec) {
  Workspace ws = build_graph_and_problem(spec);
  ws.f_star = solve_reference(*ws.problem).f;
  return ws;
}

std::size_t resolve_k(double k_over_d, std::size_t d) {
  const double raw = std::round(k_over_d * static_cast<double>(d));
  if (raw < 1.0) return 1;
  return std::min(d, static_cast<std::size_t>(raw));
}

std::vector<SweepPoint> sweep_points(const ExperimentSpec& spec) {
  std::vector<double> p = spec.sweep.p;
  std::vector<double> kd = spec.sweep.k_over_d;
  std::vector<double> eps = spec.sweep.epsilon;
  std::sort(p.begin(), p.end());
  std::sort(kd.begin(), kd.end());
  std::sort(eps.begin(), eps.end());
  if (eps.empty()) eps.push_back(kNaN);
  std::vector<SweepPoint> out;
  for (double pv : p) {
    for (double kv : kd) {
      for (double ev : eps) out.push_back({pv, kv, ev});
    }
  }
  return out;
}

PointSetup setup_point(const ExperimentSpec& spec, const Workspace& ws,
                       const SweepPoint& point) {
  const std::size_t d = ws.problem->dim();
  PointSetup s;
  s.point = point;
  s.k = resolve_k(point.k_over_d, d);
  s.util_rate = point.p * (static_cast<double>(s.k) / static_cast<double>(d));
  s.gamma = spec.run.gamma ? *spec.run.gamma
                           : recommended_gamma(ws.weights->rho(),
                                               ws.weights->phi(), point.p, s.k,
                                               d);
  if (spec.privacy.calibrated()) {
    PrivacyParams params;
    params.epsilon = point.epsilon;
    params.delta0 = *spec.privacy.delta0;
    params.T = spec.run.T;
    params.p = point.p;
    params.q = ws.problem->local_size();
    params.k = s.k;
    params.d = d;
    params.G = spec.run.G;
    const PrivacyBudget budget = calibrate(params);
    s.sigma = budget.sigma;
    s.ledger = verify_budget(budget);
  } else {
    s.sigma = *spec.privacy.sigma;
  }
  return s;
}

void validate_spec(const ExperimentSpec& spec) {
  Workspace ws = build_graph_and_problem(spec);
  for (const SweepPoint& pt : sweep_points(spec)) {
    const std::string where = "sweep point (p=" + short_num(pt.p) +
                              ", k_over_d=" + short_num(pt.k_over_d) +
                              (std::isnan(pt.epsilon)
                                   ? std::string()
                                   : ", epsilon=" + short_num(pt.epsilon)) +
                              ")";
    try {
      const PointSetup s = setup_point(spec, ws, pt);
      RunConfig cfg;
      cfg.alpha = spec.run.alpha;
      cfg.gamma = s.gamma;
      cfg.beta = spec.run.beta;
      cfg.p = pt.p;
      cfg.k = s.k;
      cfg.T = spec.run.T;
      cfg.sigma = s.sigma;
      cfg.G = spec.run.G;
      cfg.stride = spec.run.stride;
      cfg.validate(ws.problem->dim());
    } catch (const ValidationError&) {
      throw;
    } catch (const Error& e) {
      throw ValidationError(where, e.what());
    }
  }
}

RunOutcome execute_run(const ExperimentSpec& spec, const Workspace& ws,
                       const PointSetup& setup, std::uint64_t seed) {
  const std::size_t d = ws.problem->dim();
  RunConfig cfg;
  cfg.alpha = spec.run.alpha;
  cfg.gamma = setup.gamma;
  cfg.beta = spec.run.beta;
  cfg.p = setup.point.p;
  cfg.k = setup.k;
  cfg.T = spec.run.T;
  cfg.sigma = setup.sigma;
  cfg.G = spec.run.G;
  cfg.seed = seed;
  cfg.stride = spec.run.stride;
  if (spec.run.x0) cfg.x0 = initial_point(spec.run, d);

  RunOutcome out;
  out.run_id = run_id(setup.point, seed);
  out.setup = setup;
  out.seed = seed;
  out.metrics = run(*ws.problem, *ws.topology, *ws.weights, cfg, ws.f_star);
  out.csv = metrics_csv(out.metrics);

  // A single-point, single-seed spec with every derived quantity pinned.
  ExperimentSpec pinned = spec;
  pinned.run.gamma = setup.gamma;
  pinned.privacy = PrivacySpec{setup.sigma, std::nullopt};
  pinned.sweep = SweepSpec{{setup.point.p}, {setup.point.k_over_d}, {}};
  pinned.seeds = {seed};

  const RunMetrics& m = out.metrics;
  const BoundInputs in = bound_inputs(spec, ws, setup, m.varsigma_sq_max);
  json bounds;
  bounds["momentum"] = momentum_bound(cfg.p, cfg.G, cfg.sigma, d, cfg.beta);
  bounds["consensus"] =
      consensus_bound(cfg.alpha, cfg.p, cfg.G, cfg.sigma, d,
                      ws.problem->num_agents(), cfg.beta, ws.weights->rho(),
                      cfg.k);
  bounds["consensus_constant"] =
      consensus_constant(ws.weights->rho(), cfg.p, cfg.k, d);
  bounds["theorem2"] = number_or_null(theorem2_total(in));
  bounds["gamma_recommended"] =
      !spec.run.gamma.has_value() ||
      std::abs(setup.gamma - recommended_gamma(ws.weights->rho(),
                                               ws.weights->phi(), cfg.p, cfg.k,
                                               d)) <= 1e-12 * setup.gamma;
  bounds["corollary1_tuned"] = corollary1_rate(in, RateChoice::kTuned);
  bounds["corollary1_sqrt_nT"] = number_or_null(sqrt_nt_rate(in));

  json empirical;
  empirical["momentum_sq_mean"] = mean_of(m.rows, &MetricsRow::momentum_sq_mean);
  empirical["momentum_sq_max"] = max_of(m.rows, &MetricsRow::momentum_sq_mean);
  empirical["consensus_error_mean"] =
      mean_of(m.rows, &MetricsRow::consensus_error);
  empirical["consensus_error_max"] = max_of(m.rows, &MetricsRow::consensus_error);
  empirical["grad_norm_sq_avg"] = m.grad_norm_sq_avg;
  empirical["varsigma_sq_max"] = m.varsigma_sq_max;
  empirical["clipped_fraction"] = m.clipped_fraction;
  empirical["final_suboptimality"] = m.rows.back().suboptimality;
  empirical["total_bytes"] = m.total_bytes;
  empirical["total_messages"] = m.total_messages;
  empirical["bytes_per_iteration"] =
      static_cast<double>(m.total_bytes) / static_cast<double>(cfg.T);

  json config;
  config["alpha"] = cfg.alpha;
  config["gamma"] = cfg.gamma;
  config["beta"] = cfg.beta;
  config["p"] = cfg.p;
  config["k"] = cfg.k;
  config["T"] = cfg.T;
  config["sigma"] = cfg.sigma;
  config["G"] = cfg.G;
  config["seed"] = cfg.seed;
  config["stride"] = cfg.stride;
  config["n"] = ws.problem->num_agents();
  config["d"] = d;
  config["q"] = ws.problem->local_size();
  config["util_rate"] = setup.util_rate;

  json privacy;
  if (setup.ledger) {
    privacy = ledger_json(*setup.ledger);
    privacy["mode"] = "calibrated";
  } else {
    privacy["mode"] = "explicit_sigma";
  }
  privacy["sigma"] = cfg.sigma;

  json& man = out.manifest;
  man["run_id"] = out.run_id;
  man["spec"] = pinned.to_json();
  man["spec"].erase("output");
  man["config"] = config;
  man["topology_hash"] = topology_hash(*ws.topology);
  man["rho"] = ws.weights->rho();
  man["phi"] = ws.weights->phi();
  man["smoothness"] = ws.problem->smoothness();
  man["f_star"] = ws.f_star;
  man["f0"] = ws.f0;
  man["privacy"] = privacy;
  man["bounds"] = bounds;
  man["empirical"] = empirical;
  man["csv_hash"] = content_hash(out.csv);
  return out;
}

std::string aggregate_csv(const ExperimentSpec& spec, const Workspace& ws,
                          const std::vector<RunOutcome>& runs) {
  std::ostringstream out;
  out << "p,k_over_d,epsilon,sigma,util_rate,subopt_mean,subopt_std,"
         "grad_norm_mean,bytes_mean,eps_tilde,delta_tilde,m_sq_mean,"
         "momentum_bound,consensus_mean,consensus_bound,theorem2_bound\n";
  const std::size_t per_point = spec.seeds.size();
  const std::size_t d = ws.problem->dim();
  for (std::size_t start = 0; start + per_point <= runs.size();
       start += per_point) {
    const PointSetup& s = runs[start].setup;
    const double count = static_cast<double>(per_point);
    double sub_sum = 0.0, grad_sum = 0.0, bytes_sum = 0.0, m_sum = 0.0,
           cons_sum = 0.0, vs_max = 0.0;
    for (std::size_t r = start; r < start + per_point; ++r) {
      const RunMetrics& m = runs[r].metrics;
      sub_sum += m.rows.back().suboptimality;
      grad_sum += m.grad_norm_sq_avg;
      bytes_sum += static_cast<double>(m.total_bytes);
      m_sum += mean_of(m.rows, &MetricsRow::momentum_sq_mean);
      cons_sum += mean_of(m.rows, &MetricsRow::consensus_error);
      vs_max = std::max(vs_max, m.varsigma_sq_max);
    }
    const double sub_mean = sub_sum / count;
    double var = 0.0;
    for (std::size_t r = start; r < start + per_point; ++r) {
      const double e = runs[r].metrics.rows.back().suboptimality - sub_mean;
      var += e * e;
    }
    const double sub_std = per_point > 1 ? std::sqrt(var / (count - 1.0)) : 0.0;
    const double eps_tilde = s.ledger ? s.ledger->composed_eps : kNaN;
    const double delta_tilde = s.ledger ? s.ledger->composed_delta : kNaN;
    const BoundInputs in = bound_inputs(spec, ws, s, vs_max);
    const std::vector<double> row = {
        s.point.p, s.point.k_over_d, s.point.epsilon, s.sigma, s.util_rate,
        sub_mean, sub_std, grad_sum / count, bytes_sum / count, eps_tilde,
        delta_tilde, m_sum / count,
        momentum_bound(s.point.p, spec.run.G, s.sigma, d, spec.run.beta),
        cons_sum / count,
        consensus_bound(spec.run.alpha, s.point.p, spec.run.G, s.sigma, d,
                        ws.problem->num_agents(), spec.run.beta,
                        ws.weights->rho(), s.k),
        theorem2_total(in)};
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << (c ? "," : "") << fmt(row[c]);
    }
    out << '\n';
  }
  return out.str();
}

ExperimentResult run_experiment(const ExperimentSpec& spec,
                                const std::string& out_dir,
                                std::size_t workers) {
  const Workspace ws = build_workspace(spec);
  const std::vector<SweepPoint> points = sweep_points(spec);
  struct Job {
    std::size_t point;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::uint64_t seed : spec.seeds) jobs.push_back({i, seed});
  }

  std::vector<std::optional<RunOutcome>> results(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        const PointSetup setup = setup_point(spec, ws, points[jobs[i].point]);
        results[i] = execute_run(spec, ws, setup, jobs[i].seed);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();

  const fs::path root(out_dir);
  fs::create_directories(root / "runs");
  ExperimentResult result;
  std::string failures;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!results[i]) {
      failures += "  " + run_id(points[jobs[i].point], jobs[i].seed) + ": " +
                  errors[i] + "\n";
      continue;
    }
    RunOutcome& r = *results[i];
    write_file(root / "runs" / (r.run_id + ".csv"), r.csv);
    write_file(root / "runs" / (r.run_id + ".json"), r.manifest.dump(2) + "\n");
    result.runs.push_back(std::move(r));
  }
  if (!failures.empty()) {
    throw RunFailure("runs failed (" + std::to_string(jobs.size() -
                                                       result.runs.size()) +
                     " of " + std::to_string(jobs.size()) + "):\n" + failures);
  }
  result.aggregate_csv = aggregate_csv(spec, ws, result.runs);
  write_file(root / "aggregate.csv", result.aggregate_csv);
  return result;
}

std::string budget_report(const ExperimentSpec& spec) {
  if (!spec.privacy.calibrated()) {
    throw ValidationError("privacy.delta0",
                          "budget report needs a calibration target");
  }
  const std::unique_ptr<Problem> problem = build_problem(spec.problem);
  const std::size_t d = problem->dim();
  std::ostringstream out;
  out << "# delta0 " << fmt(*spec.privacy.delta0) << "\n# T " << spec.run.T
      << "\n# q " << problem->local_size() << "\n# d " << d << "\n# G "
      << fmt(spec.run.G) << "\n";
  for (const SweepPoint& pt : sweep_points(spec)) {
    PrivacyParams params;
    params.epsilon = pt.epsilon;
    params.delta0 = *spec.privacy.delta0;
    params.T = spec.run.T;
    params.p = pt.p;
    params.q = problem->local_size();
    params.k = resolve_k(pt.k_over_d, d);
    params.d = d;
    params.G = spec.run.G;
    const PrivacyBudget budget = calibrate(params);
    const AccountingLedger ledger = replay_accounting(budget);
    out << "\n## p=" << short_num(pt.p) << " k_over_d=" << short_num(pt.k_over_d)
        << " epsilon=" << short_num(pt.epsilon) << "\n";
    out << "k " << params.k << "\n";
    out << "sigma " << fmt(budget.sigma) << "\n";
    out << "variance_ratio " << fmt(noise_variance_ratio(params.k, d, pt.p))
        << "\n";
    out << "delta_tilde " << fmt(ledger.composed_delta) << "\n";
    out << format_ledger(ledger);
  }
  return out.str();
}

ReplayResult replay_manifest(const json& manifest) {
  if (!manifest.is_object() || !manifest.contains("spec") ||
      !manifest.contains("csv_hash")) {
    throw ValidationError("<manifest>", "expected fields spec and csv_hash");
  }
  const ExperimentSpec spec = ExperimentSpec::from_json(manifest.at("spec"));
  const Workspace ws = build_workspace(spec);
  const std::vector<SweepPoint> points = sweep_points(spec);
  if (points.size() != 1 || spec.seeds.size() != 1) {
    throw ValidationError("spec", "a run manifest holds exactly one run");
  }
  const RunOutcome out =
      execute_run(spec, ws, setup_point(spec, ws, points[0]), spec.seeds[0]);
  ReplayResult r;
  r.csv = out.csv;
  r.expected_hash = manifest.at("csv_hash").get<std::string>();
  r.actual_hash = content_hash(out.csv);
  r.matches = r.expected_hash == r.actual_hash;
  return r;
}

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace doadp
