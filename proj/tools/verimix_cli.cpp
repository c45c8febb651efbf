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

// Command-line front end. Links only against the C interface.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "verimix/verimix.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct CliFailure {
  int exit_code;
  std::string message;
};

int exit_code_for(vmx_status s) {
  switch (s) {
    case VMX_ERR_IO:
    case VMX_ERR_TRANSPORT:
    case VMX_ERR_CAPABILITY:
    case VMX_ERR_DIVERGENCE:
    case VMX_ERR_NON_FINITE:
    case VMX_ERR_INTERNAL:
      return kExitRuntime;
    default:
      return kExitValidation;
  }
}

void check(vmx_status s, const char* what) {
  if (s != VMX_OK) {
    throw CliFailure{exit_code_for(s), std::string(what) + " failed (" +
                                           vmx_status_name(s) + "): " + vmx_last_error()};
  }
}

// Owns a string handed out by the library.
struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { vmx_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

void write_file(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary);
  os << content;
  if (!os) throw CliFailure{kExitRuntime, "cannot write " + path.string()};
}

struct Options {
  std::string out = "out";
  std::uint64_t seed = 0;
  double alpha = 0.7;
  std::string backend;
  std::string model = "default";
  std::string api_key_env = "VERIMIX_API_KEY";
  double timeout_s = 60.0;
  int retries = 2;
  std::size_t workers = 1;
  std::string cache_dir;
  // Connector.
  std::size_t n_tokens = 9, d_v = 12, d_c = 20, d = 8, d_llm = 8, n_prefix = 24;
  // Decoding.
  double direct_temperature = 1.0, direct_top_p = 1.0;
  double cot_temperature = 0.4, cot_top_p = 0.9;
  int max_tokens = 1024;
  // train-align.
  std::size_t steps = 300, batch_size = 4;
  double lr = 0.5, lambda = 1.0, tau = 1.0;
  // verify.
  std::string question, image;
  std::vector<std::string> option_texts;
  // eval / sweep.
  std::string benchmark, strategy = "sv", grid = "0:1:0.1";
  bool no_reuse = false;
  // curate.
  std::string records, scorer;
  double threshold = 0.6;
  bool lenient_scores = false;
  // validate-stage.
  std::string stage_config;
};

json connector_json(const Options& o) {
  return {{"n_tokens", o.n_tokens}, {"d_v", o.d_v},     {"d_c", o.d_c},
          {"d", o.d},               {"d_llm", o.d_llm}, {"n_prefix", o.n_prefix}};
}

json train_json(const Options& o) {
  return {{"connector", connector_json(o)}, {"steps", o.steps},
          {"batch_size", o.batch_size},     {"lr", o.lr},
          {"lambda", o.lambda},             {"tau", o.tau},
          {"seed", o.seed}};
}

json inference_json(const Options& o) {
  return {{"direct",
           {{"temperature", o.direct_temperature},
            {"top_p", o.direct_top_p},
            {"max_tokens", o.max_tokens}}},
          {"cot",
           {{"temperature", o.cot_temperature},
            {"top_p", o.cot_top_p},
            {"max_tokens", o.max_tokens}}}};
}

json remote_json(const Options& o, const std::string& url) {
  return {{"url", url},
          {"model", o.model},
          {"api_key_env", o.api_key_env},
          {"timeout_s", o.timeout_s},
          {"retries", o.retries},
          {"max_inflight", static_cast<int>(o.workers)}};
}

// "mock:<path>" or "remote:<url>".
std::pair<std::string, std::string> split_spec(const std::string& spec,
                                               const char* flag) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  if (colon == std::string::npos || (kind != "mock" && kind != "remote") ||
      colon + 1 == spec.size()) {
    throw CliFailure{kExitValidation, std::string(flag) +
                                          " must be mock:<path> or remote:<url>, got '" +
                                          spec + "'"};
  }
  return {kind, spec.substr(colon + 1)};
}

struct BackendHandle {
  vmx_backend* p = nullptr;
  ~BackendHandle() { vmx_backend_destroy(p); }
};

void open_backend(const Options& o, BackendHandle& h) {
  if (o.backend.empty()) {
    throw CliFailure{kExitValidation, "--backend is required (mock:<path> or remote:<url>)"};
  }
  const auto [kind, target] = split_spec(o.backend, "--backend");
  if (kind == "mock") {
    check(vmx_backend_mock_load(target.c_str(), &h.p), "loading mock backend");
  } else {
    check(vmx_backend_remote(remote_json(o, target).dump().c_str(), &h.p),
          "configuring remote backend");
  }
}

json eval_options(const Options& o) {
  json j{{"workers", o.workers}, {"inference", inference_json(o)}};
  if (!o.cache_dir.empty()) j["cache_dir"] = o.cache_dir;
  return j;
}

int cmd_gradcheck(const Options& o) {
  OwnedString report;
  json cfg = train_json(o);
  check(vmx_gradcheck(cfg.dump().c_str(), o.seed, &report.p), "gradcheck");
  const json r = json::parse(report.str());
  write_file(fs::path(o.out) / "gradcheck.json", r.dump(2) + "\n");
  for (const auto& c : r.at("checks")) {
    std::printf("%-24s %.3e\n", c.at("name").get<std::string>().c_str(),
                c.at("max_rel_err").get<double>());
  }
  const double worst = r.at("max_rel_err").get<double>();
  std::printf("max rel err: %.3e (tolerance %.1e)\n", worst, r.at("tolerance").get<double>());
  return r.at("passed").get<bool>() ? kExitOk : kExitValidation;
}

int cmd_train(const Options& o) {
  OwnedString report;
  vmx_params* params = nullptr;
  check(vmx_train_align(train_json(o).dump().c_str(), &report.p, &params), "train-align");
  const fs::path ckpt = fs::path(o.out) / "gatemixer.ckpt";
  std::error_code ec;
  fs::create_directories(o.out, ec);
  const vmx_status s = vmx_params_save(params, ckpt.string().c_str());
  vmx_params_destroy(params);
  check(s, "saving checkpoint");
  const json r = json::parse(report.str());
  write_file(fs::path(o.out) / "training_report.json", r.dump(2) + "\n");
  const double init = r.at("initial_loss").get<double>();
  const double fin = r.at("final_loss").get<double>();
  std::printf("steps %zu  initial loss %.6f  final loss %.6f  ratio %.4f\n",
              r.at("steps").get<std::size_t>(), init, fin, init > 0 ? fin / init : 0.0);
  std::printf("gradcheck at init: %.3e\n", r.at("gradcheck_max_rel_err").get<double>());
  std::printf("checkpoint: %s\n", ckpt.string().c_str());
  return kExitOk;
}

int cmd_verify(const Options& o) {
  BackendHandle b;
  open_backend(o, b);
  json req{{"image_ref", o.image},
           {"question", o.question},
           {"options", o.option_texts},
           {"inference", inference_json(o)}};
  OwnedString audit;
  check(vmx_verify(b.p, req.dump().c_str(), o.alpha, &audit.p), "verify");
  const json a = json::parse(audit.str());
  write_file(fs::path(o.out) / "verify_audit.json", a.dump(2) + "\n");
  std::printf("answer: %s\nbranch: %s\nSC direct %.4f  SC cot %.4f\n",
              a.at("final_answer").get<std::string>().c_str(),
              a.at("branch").get<std::string>().c_str(), a.at("sc_direct").get<double>(),
              a.at("sc_cot").get<double>());
  return kExitOk;
}

int cmd_eval(const Options& o) {
  BackendHandle b;
  open_backend(o, b);
  json opts = eval_options(o);
  opts["strategy"] = o.strategy;
  opts["alpha"] = o.alpha;
  const fs::path path = fs::path(o.out) / ("eval_" + o.strategy + ".json");
  OwnedString summary;
  check(vmx_eval(b.p, o.benchmark.c_str(), opts.dump().c_str(), path.string().c_str(), nullptr,
                 &summary.p),
        "eval");
  std::fputs(summary.str().c_str(), stdout);
  std::printf("report: %s\n", path.string().c_str());
  return kExitOk;
}

json parse_grid(const std::string& g) {
  std::vector<double> parts;
  std::stringstream ss(g);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CliFailure{kExitValidation, "--grid must be lo:hi:step, got '" + g + "'"};
    }
  }
  if (parts.size() != 3) {
    throw CliFailure{kExitValidation, "--grid must be lo:hi:step, got '" + g + "'"};
  }
  return {{"lo", parts[0]}, {"hi", parts[1]}, {"step", parts[2]}};
}

int cmd_sweep(const Options& o) {
  BackendHandle b;
  open_backend(o, b);
  json opts = eval_options(o);
  opts["grid"] = parse_grid(o.grid);
  opts["reuse_traces"] = !o.no_reuse;
  OwnedString result, table;
  check(vmx_sweep(b.p, o.benchmark.c_str(), opts.dump().c_str(), &result.p, &table.p), "sweep");
  write_file(fs::path(o.out) / "sweep.json", json::parse(result.str()).dump(2) + "\n");
  write_file(fs::path(o.out) / "sweep.txt", table.str());
  std::fputs(table.str().c_str(), stdout);
  const json r = json::parse(result.str());
  std::printf("argmax alpha %.1f (accuracy %.4f)\n", r.at("argmax_alpha").get<double>(),
              r.at("best_accuracy").get<double>());
  return kExitOk;
}

int cmd_curate(const Options& o) {
  if (o.scorer.empty()) {
    throw CliFailure{kExitValidation, "--scorer is required (mock:<path> or remote:<url>)"};
  }
  const auto [kind, target] = split_spec(o.scorer, "--scorer");
  vmx_completer* llm = nullptr;
  if (kind == "mock") {
    check(vmx_completer_mock_load(target.c_str(), &llm), "loading mock scorer");
  } else {
    check(vmx_completer_remote(remote_json(o, target).dump().c_str(), &llm),
          "configuring remote scorer");
  }
  const json opts{{"threshold", o.threshold},
                  {"strict_scores", !o.lenient_scores},
                  {"max_inflight", o.workers}};
  OwnedString stats;
  const vmx_status s =
      vmx_curate(llm, o.records.c_str(), opts.dump().c_str(), o.out.c_str(), &stats.p);
  vmx_completer_destroy(llm);
  check(s, "curate");
  const json st = json::parse(stats.str());
  std::printf("input %zu  held-out rejected %zu  kept %zu  dropped %zu\n",
              st.at("n_input").get<std::size_t>(),
              st.at("n_rejected_held_out").get<std::size_t>(),
              st.at("n_kept").get<std::size_t>(), st.at("n_dropped").get<std::size_t>());
  return kExitOk;
}

int cmd_validate_stage(const Options& o) {
  std::ifstream is(o.stage_config);
  if (!is) throw CliFailure{kExitRuntime, "cannot open " + o.stage_config};
  std::stringstream ss;
  ss << is.rdbuf();
  OwnedString normalized;
  check(vmx_validate_stage_config(ss.str().c_str(), &normalized.p), "validate-stage");
  write_file(fs::path(o.out) / "stage_config.json", normalized.str() + "\n");
  std::printf("%s\n", normalized.str().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"verimix: gated connector training, self-verified inference and CoT curation"};
  app.set_config("--config", "", "TOML/INI file with option values; flags override it");
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--out", o.out, "Output directory")->capture_default_str();
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app.add_option("--alpha", o.alpha, "Self-verification weight on confidence")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app.add_option("--backend", o.backend, "mock:<script.json> or remote:<url>");
  app.add_option("--model", o.model, "Remote model name")->capture_default_str();
  app.add_option("--api-key-env", o.api_key_env, "Environment variable holding the API key")
      ->capture_default_str();
  app.add_option("--timeout", o.timeout_s, "Remote timeout in seconds")->capture_default_str();
  app.add_option("--retries", o.retries, "Remote retries")->capture_default_str();
  app.add_option("--workers", o.workers, "Concurrent instances / requests")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--cache-dir", o.cache_dir, "Trace cache directory");
  app.add_option("--n-tokens", o.n_tokens, "Visual tokens per image")->capture_default_str();
  app.add_option("--d-v", o.d_v, "ViT feature width")->capture_default_str();
  app.add_option("--d-c", o.d_c, "CNN feature width")->capture_default_str();
  app.add_option("--d", o.d, "Shared hidden width")->capture_default_str();
  app.add_option("--d-llm", o.d_llm, "Language model width")->capture_default_str();
  app.add_option("--n-prefix", o.n_prefix, "Prefix tokens")->capture_default_str();
  app.add_option("--direct-temperature", o.direct_temperature)->capture_default_str();
  app.add_option("--direct-top-p", o.direct_top_p)->capture_default_str();
  app.add_option("--cot-temperature", o.cot_temperature)->capture_default_str();
  app.add_option("--cot-top-p", o.cot_top_p)->capture_default_str();
  app.add_option("--max-tokens", o.max_tokens)->capture_default_str();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");

  auto* train = app.add_subcommand("train-align", "Train the connector on synthetic pairs");
  train->add_option("--steps", o.steps)->capture_default_str();
  train->add_option("--batch-size", o.batch_size)->capture_default_str();
  train->add_option("--lr", o.lr)->capture_default_str();
  train->add_option("--lambda", o.lambda, "Weight of the contrastive term")->capture_default_str();
  train->add_option("--tau", o.tau, "Similarity temperature")->capture_default_str();

  auto* verify = app.add_subcommand("verify", "Answer one question with self-verification");
  verify->add_option("--question", o.question)->required();
  verify->add_option("--option", o.option_texts, "Option text, lettered A, B, ... in order");
  verify->add_option("--image", o.image, "Image reference passed to the backend");

  auto* eval = app.add_subcommand("eval", "Evaluate a benchmark");
  eval->add_option("--benchmark", o.benchmark, "Benchmark JSONL")->required();
  eval->add_option("--strategy", o.strategy)
      ->check(CLI::IsMember({"direct", "cot", "sv"}))
      ->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "Sweep alpha over a grid");
  sweep->add_option("--benchmark", o.benchmark, "Benchmark JSONL")->required();
  sweep->add_option("--grid", o.grid, "lo:hi:step")->capture_default_str();
  sweep->add_flag("--no-reuse", o.no_reuse, "Regenerate traces for every alpha");

  auto* curate = app.add_subcommand("curate", "Rewrite, score and filter CoT records");
  curate->add_option("--records", o.records, "CurationRecord JSONL")->required();
  curate->add_option("--scorer", o.scorer, "mock:<rules.json> or remote:<url>");
  curate->add_option("--threshold", o.threshold)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  curate->add_flag("--lenient-scores", o.lenient_scores, "Clamp out-of-range scores");

  auto* stage = app.add_subcommand("validate-stage", "Validate a fine-tuning stage config");
  stage->add_option("--stage-config", o.stage_config, "JSON config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*gradcheck) return cmd_gradcheck(o);
    if (*train) return cmd_train(o);
    if (*verify) return cmd_verify(o);
    if (*eval) return cmd_eval(o);
    if (*sweep) return cmd_sweep(o);
    if (*curate) return cmd_curate(o);
    if (*stage) return cmd_validate_stage(o);
  } catch (const CliFailure& f) {
    std::fprintf(stderr, "verimix: %s\n", f.message.c_str());
    return f.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "verimix: %s\n", e.what());
    return kExitRuntime;
  }
  std::fputs(app.help().c_str(), stderr);
  return kExitValidation;
}
