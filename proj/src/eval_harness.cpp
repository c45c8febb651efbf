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

#include "verimix/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "verimix/error.hpp"
#include "verimix/log.hpp"

namespace verimix {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

BenchmarkInstance benchmark_instance_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kParse, "expected a JSON object");
  BenchmarkInstance b;
  try {
    b.id = j.at("id").get<std::string>();
    b.image_ref = j.value("image_ref", std::string());
    b.question = j.at("question").get<std::string>();
    if (j.contains("options")) b.options = options_from_json(j.at("options"));
    if (!j.contains("gold_answer")) {
      throw Error(ErrorCode::kValidation, "missing gold_answer");
    }
    b.gold_answer = trim(j.at("gold_answer").get<std::string>());
    b.split = j.value("split", std::string("test"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  if (b.id.empty()) throw Error(ErrorCode::kValidation, "empty id");
  if (b.gold_answer.empty()) throw Error(ErrorCode::kValidation, "empty gold_answer");
  if (!b.options.empty()) {
    std::string g = b.gold_answer;
    if (g.size() == 1) g[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(g[0])));
    const bool known = std::any_of(b.options.begin(), b.options.end(),
                                   [&](const AnswerOption& o) { return o.letter == g; });
    if (!known) {
      throw Error(ErrorCode::kValidation,
                  "gold_answer '" + b.gold_answer + "' is not an option letter");
    }
    b.gold_answer = g;
  }
  return b;
}

json benchmark_instance_to_json(const BenchmarkInstance& b) {
  return json{{"id", b.id},
              {"image_ref", b.image_ref},
              {"question", b.question},
              {"options", options_to_json(b.options)},
              {"gold_answer", b.gold_answer},
              {"split", b.split}};
}

BenchmarkLoad load_benchmark(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIo, "cannot open " + path);
  BenchmarkLoad out;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno) + ": ";
    BenchmarkInstance b;
    try {
      b = benchmark_instance_from_json(json::parse(line));
    } catch (const json::parse_error& e) {
      out.rejected.push_back(where + e.what());
      continue;
    } catch (const Error& e) {
      out.rejected.push_back(where + e.what());
      continue;
    }
    if (!ids.insert(b.id).second) {
      throw Error(ErrorCode::kValidation, where + "duplicate instance id " + b.id);
    }
    out.instances.push_back(std::move(b));
  }
  for (const auto& r : out.rejected) log_warning("rejected " + r);
  if (out.instances.empty()) {
    std::string summary = path + ": no valid instances";
    for (const auto& r : out.rejected) summary += "\n  " + r;
    throw Error(ErrorCode::kEmptyBenchmark, summary);
  }
  return out;
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kDirect: return "direct";
    case Strategy::kCot: return "cot";
    case Strategy::kSv: return "sv";
  }
  return "?";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "direct") return Strategy::kDirect;
  if (s == "cot") return Strategy::kCot;
  if (s == "sv") return Strategy::kSv;
  throw Error(ErrorCode::kConfig, "strategy must be direct, cot or sv, got '" + s + "'");
}

namespace {

fs::path cache_path(const std::string& dir, const std::string& id, PromptMode m) {
  static const std::regex kSafe(R"([A-Za-z0-9_][A-Za-z0-9._-]*)");
  if (!std::regex_match(id, kSafe)) {
    throw Error(ErrorCode::kValidation,
                "instance id '" + id + "' cannot be used as a cache file name");
  }
  return fs::path(dir) / (id + "." + prompt_mode_name(m) + ".json");
}

GenerationTrace generate_cached(const Backend& backend, const BenchmarkInstance& b,
                                PromptMode mode, const EvalOptions& opts) {
  std::optional<fs::path> file;
  if (opts.cache_dir) {
    file = cache_path(*opts.cache_dir, b.id, mode);
    if (fs::exists(*file)) return trace_from_json(read_json_file(file->string()), mode);
  }
  GenerationTrace t = backend.generate(
      make_request(b.image_ref, b.question, b.options, mode, opts.inference));
  t.prompt_mode = mode;
  if (file) {
    const fs::path tmp = file->string() + ".tmp";
    {
      std::ofstream os(tmp, std::ios::binary);
      os << trace_to_json(t).dump() << "\n";
      if (!os) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    }
    fs::rename(tmp, *file);
  }
  if (!t.has_representations()) {
    log_warning("instance " + b.id + " (" + prompt_mode_name(mode) +
                "): no representations, similarity defaults to 0.5");
  }
  return t;
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(workers, n));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

}  // namespace

std::vector<InstanceTraces> collect_traces(
    const Backend& backend, const std::vector<BenchmarkInstance>& instances,
    bool need_direct, bool need_cot, const EvalOptions& opts) {
  if (opts.workers < 1) throw Error(ErrorCode::kConfig, "workers must be >= 1");
  opts.inference.direct.validate();
  opts.inference.cot.validate();
  if (opts.cache_dir) {
    std::error_code ec;
    fs::create_directories(*opts.cache_dir, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create " + *opts.cache_dir);
  }
  std::vector<InstanceTraces> out(instances.size());
  parallel_for(instances.size(), opts.workers, [&](std::size_t i) {
    const BenchmarkInstance& b = instances[i];
    try {
      if (need_direct) out[i].direct = generate_cached(backend, b, PromptMode::kDirect, opts);
    } catch (const std::exception& e) {
      out[i].error = std::string("direct branch: ") + e.what();
      return;
    }
    try {
      if (need_cot) out[i].cot = generate_cached(backend, b, PromptMode::kCot, opts);
    } catch (const std::exception& e) {
      out[i].error = std::string("cot branch: ") + e.what();
    }
  });
  return out;
}

EvalReport score_traces(const std::vector<BenchmarkInstance>& instances,
                        const std::vector<InstanceTraces>& traces,
                        Strategy strategy, double alpha) {
  if (traces.size() != instances.size()) {
    throw Error(ErrorCode::kDimension, "one trace set per instance required");
  }
  if (strategy == Strategy::kSv) check_alpha(alpha);
  EvalReport r;
  r.strategy = strategy;
  r.alpha = alpha;
  r.n_instances = instances.size();
  if (strategy == Strategy::kSv) {
    for (Branch b : {Branch::kCotByAgreement, Branch::kCotByScore, Branch::kDirectByScore}) {
      r.branch_counts[branch_name(b)] = 0;
    }
    r.branch_counts["error"] = 0;
  }
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const BenchmarkInstance& b = instances[i];
    const InstanceTraces& t = traces[i];
    InstanceAudit a;
    a.id = b.id;
    a.gold = b.gold_answer;
    try {
      if (!t.error.empty()) throw Error(ErrorCode::kTransport, t.error);
      std::optional<ScoredResponse> d, c;
      if (strategy != Strategy::kCot) {
        if (!t.direct) throw Error(ErrorCode::kInternal, "direct trace missing");
        d = score_response(*t.direct, b.options);
        a.direct_answer = d->answer;
        a.s_direct = d->s;
        a.c_direct = d->c;
      }
      if (strategy != Strategy::kDirect) {
        if (!t.cot) throw Error(ErrorCode::kInternal, "cot trace missing");
        c = score_response(*t.cot, b.options);
        a.cot_answer = c->answer;
        a.s_cot = c->s;
        a.c_cot = c->c;
      }
      if (strategy == Strategy::kDirect) {
        a.predicted = d->answer;
      } else if (strategy == Strategy::kCot) {
        a.predicted = c->answer;
      } else {
        const VerifyDecision v = self_verify(*d, *c, alpha);
        a.predicted = v.final_answer;
        a.branch = v.branch;
        a.sc_direct = v.sc_direct;
        a.sc_cot = v.sc_cot;
      }
      a.correct = answers_match(a.predicted, b.gold_answer);
    } catch (const std::exception& e) {
      a.error = e.what();
      a.correct = false;
    }
    if (strategy == Strategy::kSv) {
      ++r.branch_counts[a.branch ? branch_name(*a.branch) : "error"];
    }
    if (a.correct) ++r.n_correct;
    r.audits.push_back(std::move(a));
  }
  r.accuracy = r.n_instances == 0
                   ? 0.0
                   : static_cast<double>(r.n_correct) / static_cast<double>(r.n_instances);
  return r;
}

EvalReport run_eval(const Backend& backend,
                    const std::vector<BenchmarkInstance>& instances,
                    Strategy strategy, double alpha, const EvalOptions& opts) {
  if (instances.empty()) throw Error(ErrorCode::kEmptyBenchmark, "no instances to evaluate");
  if (strategy == Strategy::kSv) check_alpha(alpha);
  const auto traces = collect_traces(backend, instances, strategy != Strategy::kCot,
                                     strategy != Strategy::kDirect, opts);
  return score_traces(instances, traces, strategy, alpha);
}

std::vector<double> make_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(lo >= 0.0) || !(hi <= 1.0) || !(lo <= hi)) {
    throw Error(ErrorCode::kConfig,
                "grid needs 0 <= lo <= hi <= 1 and step > 0");
  }
  const double span = (hi - lo) / step;
  const auto n = static_cast<std::size_t>(std::floor(span + 1e-9));
  std::vector<double> grid;
  for (std::size_t i = 0; i <= n; ++i) {
    // Rounding to 12 places turns 3 * 0.1 into the double nearest 0.3.
    grid.push_back(std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12);
  }
  return grid;
}

std::vector<double> default_alpha_grid() { return make_grid(0.0, 1.0, 0.1); }

std::vector<SweepPoint> alpha_sweep(const Backend& backend,
                                    const std::vector<BenchmarkInstance>& instances,
                                    const std::vector<double>& grid,
                                    const EvalOptions& opts, bool reuse_traces) {
  if (grid.empty()) throw Error(ErrorCode::kConfig, "alpha grid is empty");
  for (double a : grid) check_alpha(a);
  if (instances.empty()) throw Error(ErrorCode::kEmptyBenchmark, "no instances to evaluate");
  std::vector<InstanceTraces> traces;
  if (reuse_traces) traces = collect_traces(backend, instances, true, true, opts);
  std::vector<SweepPoint> out;
  for (double a : grid) {
    const EvalReport r = reuse_traces
                             ? score_traces(instances, traces, Strategy::kSv, a)
                             : run_eval(backend, instances, Strategy::kSv, a, opts);
    out.push_back({a, r.accuracy, r.n_correct});
  }
  return out;
}

SweepPoint sweep_argmax(const std::vector<SweepPoint>& points) {
  if (points.empty()) throw Error(ErrorCode::kInvalidArgument, "empty sweep");
  SweepPoint best = points.front();
  for (const auto& p : points) {
    if (p.accuracy > best.accuracy) best = p;
  }
  return best;
}

json report_to_json(const EvalReport& r) {
  json audits = json::array();
  for (const auto& a : r.audits) {
    json j{{"id", a.id}, {"gold", a.gold}, {"predicted", a.predicted}, {"correct", a.correct}};
    if (!a.error.empty()) j["error"] = a.error;
    if (a.branch) j["branch"] = branch_name(*a.branch);
    if (a.direct_answer) j["direct_answer"] = *a.direct_answer;
    if (a.cot_answer) j["cot_answer"] = *a.cot_answer;
    auto put = [&](const char* k, const std::optional<double>& v) {
      if (v) j[k] = *v;
    };
    put("s_direct", a.s_direct);
    put("c_direct", a.c_direct);
    put("s_cot", a.s_cot);
    put("c_cot", a.c_cot);
    put("sc_direct", a.sc_direct);
    put("sc_cot", a.sc_cot);
    audits.push_back(std::move(j));
  }
  json j{{"strategy", strategy_name(r.strategy)},
         {"alpha", r.alpha},
         {"n_instances", r.n_instances},
         {"n_correct", r.n_correct},
         {"accuracy", r.accuracy},
         {"audits", audits}};
  if (r.strategy == Strategy::kSv) j["branch_counts"] = r.branch_counts;
  return j;
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  try {
    r.strategy = parse_strategy(j.at("strategy").get<std::string>());
    r.alpha = j.at("alpha").get<double>();
    r.n_instances = j.at("n_instances").get<std::size_t>();
    r.n_correct = j.at("n_correct").get<std::size_t>();
    r.accuracy = j.at("accuracy").get<double>();
    if (j.contains("branch_counts")) {
      r.branch_counts = j.at("branch_counts").get<std::map<std::string, std::size_t>>();
    }
    static const std::map<std::string, Branch> kBranches{
        {"cot-by-agreement", Branch::kCotByAgreement},
        {"cot-by-score", Branch::kCotByScore},
        {"direct-by-score", Branch::kDirectByScore}};
    for (const auto& aj : j.at("audits")) {
      InstanceAudit a;
      a.id = aj.at("id").get<std::string>();
      a.gold = aj.at("gold").get<std::string>();
      a.predicted = aj.at("predicted").get<std::string>();
      a.correct = aj.at("correct").get<bool>();
      a.error = aj.value("error", std::string());
      if (aj.contains("branch")) a.branch = kBranches.at(aj.at("branch").get<std::string>());
      if (aj.contains("direct_answer")) a.direct_answer = aj.at("direct_answer").get<std::string>();
      if (aj.contains("cot_answer")) a.cot_answer = aj.at("cot_answer").get<std::string>();
      auto get = [&](const char* k, std::optional<double>& v) {
        if (aj.contains(k)) v = aj.at(k).get<double>();
      };
      get("s_direct", a.s_direct);
      get("c_direct", a.c_direct);
      get("s_cot", a.s_cot);
      get("c_cot", a.c_cot);
      get("sc_direct", a.sc_direct);
      get("sc_cot", a.sc_cot);
      r.audits.push_back(std::move(a));
    }
  } catch (const std::out_of_range& e) {
    throw Error(ErrorCode::kParse, std::string("eval report: ") + e.what());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("eval report: ") + e.what());
  }
  return r;
}

std::string report_summary(const EvalReport& r) {
  std::ostringstream os;
  os << "strategy   " << strategy_name(r.strategy) << "\n";
  if (r.strategy == Strategy::kSv) os << "alpha      " << format_fixed(r.alpha, 4) << "\n";
  os << "instances  " << r.n_instances << "\n"
     << "correct    " << r.n_correct << "\n"
     << "accuracy   " << format_fixed(r.accuracy, 4) << "\n";
  if (r.strategy == Strategy::kSv) {
    for (const auto& [name, count] : r.branch_counts) {
      os << "branch     " << name << " " << count << "\n";
    }
  }
  os << "\nid\tgold\tpredicted\tcorrect";
  if (r.strategy == Strategy::kSv) os << "\tbranch";
  os << "\n";
  for (const auto& a : r.audits) {
    os << a.id << "\t" << a.gold << "\t" << (a.error.empty() ? a.predicted : "<error>")
       << "\t" << (a.correct ? "yes" : "no");
    if (r.strategy == Strategy::kSv) os << "\t" << (a.branch ? branch_name(*a.branch) : "error");
    os << "\n";
  }
  return os.str();
}

std::string sweep_table(const std::vector<SweepPoint>& points) {
  std::ostringstream os;
  os << "alpha\taccuracy\tcorrect\n";
  for (const auto& p : points) {
    os << format_fixed(p.alpha, 1) << "\t" << format_fixed(p.accuracy, 4) << "\t"
       << p.n_correct << "\n";
  }
  return os.str();
}

json sweep_to_json(const std::vector<SweepPoint>& points) {
  json arr = json::array();
  for (const auto& p : points) {
    arr.push_back({{"alpha", p.alpha}, {"accuracy", p.accuracy}, {"n_correct", p.n_correct}});
  }
  const SweepPoint best = sweep_argmax(points);
  return json{{"points", arr}, {"argmax_alpha", best.alpha}, {"best_accuracy", best.accuracy}};
}

void emit_report(const EvalReport& r, const std::string& path) {
  fs::path json_path(path);
  if (json_path.extension() == ".txt") {
    throw Error(ErrorCode::kInvalidArgument, "report path must not end in .txt");
  }
  fs::path txt_path = json_path;
  txt_path.replace_extension(".txt");
  if (json_path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(json_path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create " + json_path.parent_path().string());
  }
  auto write = [](const fs::path& p, const std::string& content) {
    std::ofstream os(p, std::ios::binary);
    os << content;
    if (!os) throw Error(ErrorCode::kIo, "cannot write " + p.string());
  };
  write(json_path, report_to_json(r).dump(2) + "\n");
  write(txt_path, report_summary(r));
}

}  // namespace verimix
