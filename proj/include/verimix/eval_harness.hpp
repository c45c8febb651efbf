// Copyright 2026 The verimix Authors.
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

#ifndef VERIMIX_EVAL_HARNESS_HPP_
#define VERIMIX_EVAL_HARNESS_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "verimix/backend.hpp"
#include "verimix/selfverify.hpp"

namespace verimix {

struct BenchmarkInstance {
  std::string id;
  std::string image_ref;
  std::string question;
  std::vector<AnswerOption> options;
  std::string gold_answer;  // option letter, or free text without options
  std::string split = "test";

  bool operator==(const BenchmarkInstance&) const = default;
};

BenchmarkInstance benchmark_instance_from_json(const nlohmann::json& j);
nlohmann::json benchmark_instance_to_json(const BenchmarkInstance& b);

struct BenchmarkLoad {
  std::vector<BenchmarkInstance> instances;
  std::vector<std::string> rejected;  // "path:line: reason"
};

/// Malformed lines are collected in `rejected`; a duplicate id is an error,
/// as is a file without a single valid instance.
BenchmarkLoad load_benchmark(const std::string& path);

enum class Strategy { kDirect, kCot, kSv };

const char* strategy_name(Strategy s);
Strategy parse_strategy(const std::string& s);

/// Both branches' traces for one instance, or the error that stopped them.
struct InstanceTraces {
  std::optional<GenerationTrace> direct;
  std::optional<GenerationTrace> cot;
  std::string error;
};

struct InstanceAudit {
  std::string id;
  std::string gold;
  std::string predicted;
  bool correct = false;
  std::string error;  // non-empty when the backend failed
  std::optional<Branch> branch;
  std::optional<std::string> direct_answer;
  std::optional<std::string> cot_answer;
  std::optional<double> s_direct, c_direct, s_cot, c_cot;
  std::optional<double> sc_direct, sc_cot;

  bool operator==(const InstanceAudit&) const = default;
};

struct EvalReport {
  Strategy strategy = Strategy::kSv;
  double alpha = kDefaultAlpha;
  std::size_t n_instances = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;
  std::vector<InstanceAudit> audits;  // instance order
  // sv only: cot-by-agreement, cot-by-score, direct-by-score and error.
  std::map<std::string, std::size_t> branch_counts;

  bool operator==(const EvalReport&) const = default;
};

struct EvalOptions {
  InferenceConfig inference;
  std::size_t workers = 1;
  // When set, traces are read from and written to <dir>/<id>.<mode>.json.
  std::optional<std::string> cache_dir;
};

/// Generates the traces a strategy needs. Backend errors are captured per
/// instance and never abort the run.
std::vector<InstanceTraces> collect_traces(
    const Backend& backend, const std::vector<BenchmarkInstance>& instances,
    bool need_direct, bool need_cot, const EvalOptions& opts = {});

/// Scores precomputed traces; no backend calls.
EvalReport score_traces(const std::vector<BenchmarkInstance>& instances,
                        const std::vector<InstanceTraces>& traces,
                        Strategy strategy, double alpha);

EvalReport run_eval(const Backend& backend,
                    const std::vector<BenchmarkInstance>& instances,
                    Strategy strategy, double alpha = kDefaultAlpha,
                    const EvalOptions& opts = {});

/// i * step for i = 0..round((hi - lo) / step), offset by lo.
std::vector<double> make_grid(double lo, double hi, double step);
std::vector<double> default_alpha_grid();

struct SweepPoint {
  double alpha = 0.0;
  double accuracy = 0.0;
  std::size_t n_correct = 0;

  bool operator==(const SweepPoint&) const = default;
};

/// With `reuse_traces`, each branch is generated once and only the decision
/// rule reruns per alpha; without it every alpha calls the backend afresh.
std::vector<SweepPoint> alpha_sweep(const Backend& backend,
                                    const std::vector<BenchmarkInstance>& instances,
                                    const std::vector<double>& grid,
                                    const EvalOptions& opts = {},
                                    bool reuse_traces = true);

/// First alpha reaching the best accuracy.
SweepPoint sweep_argmax(const std::vector<SweepPoint>& points);

nlohmann::json report_to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);
std::string report_summary(const EvalReport& r);
std::string sweep_table(const std::vector<SweepPoint>& points);
nlohmann::json sweep_to_json(const std::vector<SweepPoint>& points);

/// Writes <path> (JSON) and <path minus .json>.txt (summary table).
void emit_report(const EvalReport& r, const std::string& path);

std::string format_fixed(double v, int decimals);

}  // namespace verimix

#endif  // VERIMIX_EVAL_HARNESS_HPP_
