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

#include "verimix/verimix.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "json.hpp"
#include "verimix/align_trainer.hpp"
#include "verimix/backend.hpp"
#include "verimix/curation.hpp"
#include "verimix/error.hpp"
#include "verimix/eval_harness.hpp"
#include "verimix/gatemixer.hpp"
#include "verimix/log.hpp"
#include "verimix/selfverify.hpp"

using nlohmann::json;
using verimix::Error;
using verimix::ErrorCode;

struct vmx_params {
  verimix::GateMixerParams p;
};

struct vmx_backend {
  std::unique_ptr<verimix::Backend> impl;
};

struct vmx_completer {
  std::unique_ptr<verimix::TextCompleter> impl;
};

namespace {

thread_local std::string g_last_error;

vmx_status fail(vmx_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
vmx_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return VMX_OK;
  } catch (const Error& e) {
    return fail(static_cast<vmx_status>(e.code()), e.what());
  } catch (const json::parse_error& e) {
    return fail(VMX_ERR_PARSE, e.what());
  } catch (const json::exception& e) {
    return fail(VMX_ERR_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return fail(VMX_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(VMX_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(VMX_ERR_INTERNAL, "unknown exception");
  }
}

void need(const void* p, const char* name) {
  if (p == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, std::string(name) + " is NULL");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put_string(char** out, const std::string& s) {
  if (out != nullptr) *out = dup_string(s);
}

json parse_optional(const char* text) {
  if (text == nullptr || *text == '\0') return json::object();
  return json::parse(text);
}

verimix::ConnectorConfig to_cfg(const vmx_connector_dims* d) {
  verimix::ConnectorConfig c;
  c.n_tokens = d->n_tokens;
  c.d_v = d->d_v;
  c.d_c = d->d_c;
  c.d = d->d;
  c.d_llm = d->d_llm;
  c.n_prefix = d->n_prefix;
  c.validate();
  return c;
}

json scored_to_json(const verimix::ScoredResponse& r) {
  return json{{"answer", r.answer},
              {"s", r.s},
              {"c", r.c},
              {"trace", verimix::trace_to_json(r.trace)}};
}

verimix::EvalOptions eval_options(const json& j) {
  verimix::EvalOptions o;
  if (j.contains("workers")) o.workers = j.at("workers").get<std::size_t>();
  if (j.contains("cache_dir") && !j.at("cache_dir").is_null()) {
    o.cache_dir = j.at("cache_dir").get<std::string>();
  }
  if (j.contains("inference")) {
    o.inference = verimix::InferenceConfig::from_json(j.at("inference"));
  }
  return o;
}

void check_only_keys(const json& j, std::initializer_list<const char*> keys,
                     const std::string& what) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, what + " must be an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : keys) ok = ok || item.key() == k;
    if (!ok) throw Error(ErrorCode::kConfig, what + ": unknown key '" + item.key() + "'");
  }
}

}  // namespace

extern "C" {

const char* vmx_version(void) { return "0.1.0"; }

const char* vmx_status_name(vmx_status status) {
  if (status == VMX_OK) return "ok";
  return verimix::error_code_name(static_cast<ErrorCode>(status));
}

const char* vmx_last_error(void) { return g_last_error.c_str(); }

void vmx_string_free(char* s) { std::free(s); }

void vmx_set_warning_callback(vmx_warning_fn fn, void* user) {
  if (fn == nullptr) {
    verimix::set_warning_sink({});
  } else {
    verimix::set_warning_sink(
        [fn, user](const std::string& msg) { fn(msg.c_str(), user); });
  }
}

void vmx_connector_dims_default(vmx_connector_dims* dims) {
  if (dims == nullptr) return;
  const verimix::ConnectorConfig c;
  *dims = {c.n_tokens, c.d_v, c.d_c, c.d, c.d_llm, c.n_prefix};
}

vmx_status vmx_params_init(const vmx_connector_dims* dims, uint64_t seed,
                           vmx_params** out) {
  return guarded([&] {
    need(dims, "dims");
    need(out, "out");
    *out = new vmx_params{verimix::init_params(to_cfg(dims), seed)};
  });
}

vmx_status vmx_params_load(const char* path, vmx_params** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new vmx_params{verimix::load_checkpoint(path)};
  });
}

vmx_status vmx_params_save(const vmx_params* params, const char* path) {
  return guarded([&] {
    need(params, "params");
    need(path, "path");
    verimix::save_checkpoint(params->p, path);
  });
}

vmx_status vmx_params_dims(const vmx_params* params, vmx_connector_dims* dims) {
  return guarded([&] {
    need(params, "params");
    need(dims, "dims");
    const auto& c = params->p.cfg;
    *dims = {c.n_tokens, c.d_v, c.d_c, c.d, c.d_llm, c.n_prefix};
  });
}

vmx_status vmx_params_size(const vmx_params* params, size_t* n) {
  return guarded([&] {
    need(params, "params");
    need(n, "n");
    *n = params->p.num_values();
  });
}

vmx_status vmx_params_copy(const vmx_params* params, double* out, size_t n) {
  return guarded([&] {
    need(params, "params");
    need(out, "out");
    const auto flat = params->p.flatten();
    std::memcpy(out, flat.data(), std::min(n, flat.size()) * sizeof(double));
  });
}

void vmx_params_destroy(vmx_params* params) { delete params; }

vmx_status vmx_forward(const vmx_params* params, const double* v_v,
                       const double* v_c, double* h_img0, size_t h_img0_len) {
  return guarded([&] {
    need(params, "params");
    need(v_v, "v_v");
    need(v_c, "v_c");
    need(h_img0, "h_img0");
    const auto& c = params->p.cfg;
    if (h_img0_len != c.output_rows() * c.d_llm) {
      throw Error(ErrorCode::kDimension,
                  "h_img0 needs " + std::to_string(c.output_rows() * c.d_llm) +
                      " values, got " + std::to_string(h_img0_len));
    }
    verimix::EncoderFeatures f;
    f.v_v = verimix::Tensor({c.n_tokens, c.d_v},
                            std::vector<double>(v_v, v_v + c.n_tokens * c.d_v));
    f.v_c = verimix::Tensor({c.n_tokens, c.d_c},
                            std::vector<double>(v_c, v_c + c.n_tokens * c.d_c));
    const verimix::MixOutput o = verimix::forward(f, params->p);
    std::memcpy(h_img0, o.h_img0.data.data(), h_img0_len * sizeof(double));
  });
}

vmx_status vmx_gradcheck(const char* config_json, uint64_t seed,
                         char** report_json) {
  return guarded([&] {
    need(report_json, "report_json");
    const auto cfg = verimix::TrainConfig::from_json(parse_optional(config_json));
    const auto entries = verimix::gradcheck_suite(cfg, seed);
    json checks = json::array();
    double worst = 0.0;
    for (const auto& e : entries) {
      checks.push_back({{"name", e.name}, {"max_rel_err", e.max_rel_err}});
      worst = std::max(worst, e.max_rel_err);
    }
    const json out{{"seed", seed},
                   {"eps", cfg.gradcheck_eps},
                   {"tolerance", cfg.gradcheck_tol},
                   {"checks", checks},
                   {"max_rel_err", worst},
                   {"passed", worst <= cfg.gradcheck_tol}};
    *report_json = dup_string(out.dump(2));
  });
}

vmx_status vmx_train_align(const char* config_json, char** report_json,
                           vmx_params** trained) {
  return guarded([&] {
    need(report_json, "report_json");
    const auto cfg = verimix::TrainConfig::from_json(parse_optional(config_json));
    verimix::TrainingRun run = verimix::train_stage1(cfg);
    json report = run.report.to_json();
    report["config"] = cfg.to_json();
    bool frozen_identical = true;
    const auto before = run.frozen_before.tensors();
    const auto after = run.frozen_after.tensors();
    for (std::size_t i = 0; i < before.size(); ++i) {
      frozen_identical = frozen_identical && verimix::bitwise_equal(*before[i], *after[i]);
    }
    report["frozen_unchanged"] = frozen_identical;
    std::unique_ptr<vmx_params> p;
    if (trained != nullptr) p = std::make_unique<vmx_params>(vmx_params{run.params});
    *report_json = dup_string(report.dump(2));
    if (trained != nullptr) *trained = p.release();
  });
}

vmx_status vmx_validate_stage_config(const char* config_json,
                                     char** normalized_json) {
  return guarded([&] {
    need(config_json, "config_json");
    const json out = verimix::validate_stage_config(json::parse(config_json));
    put_string(normalized_json, out.dump(2));
  });
}

vmx_status vmx_backend_mock_load(const char* script_path, vmx_backend** out) {
  return guarded([&] {
    need(script_path, "script_path");
    need(out, "out");
    auto b = std::make_unique<verimix::MockBackend>(verimix::MockScript::load(script_path));
    *out = new vmx_backend{std::move(b)};
  });
}

vmx_status vmx_backend_remote(const char* remote_json, vmx_backend** out) {
  return guarded([&] {
    need(remote_json, "remote_json");
    need(out, "out");
    auto b = std::make_unique<verimix::RemoteBackend>(
        verimix::RemoteConfig::from_json(json::parse(remote_json)));
    *out = new vmx_backend{std::move(b)};
  });
}

void vmx_backend_destroy(vmx_backend* backend) { delete backend; }

vmx_status vmx_verify(const vmx_backend* backend, const char* request_json,
                      double alpha, char** audit_json) {
  return guarded([&] {
    need(backend, "backend");
    need(request_json, "request_json");
    need(audit_json, "audit_json");
    verimix::check_alpha(alpha);
    const json req = json::parse(request_json);
    check_only_keys(req, {"image_ref", "question", "options", "inference"}, "verify request");
    const std::string image_ref = req.value("image_ref", std::string());
    const std::string question = req.at("question").get<std::string>();
    std::vector<verimix::AnswerOption> options;
    if (req.contains("options")) options = verimix::options_from_json(req.at("options"));
    verimix::InferenceConfig inference;
    if (req.contains("inference")) {
      inference = verimix::InferenceConfig::from_json(req.at("inference"));
    }
    const auto [direct, cot] =
        verimix::dual_generate(*backend->impl, image_ref, question, options, inference);
    for (const auto* t : {&direct, &cot}) {
      if (!t->has_representations()) {
        verimix::log_warning(std::string(verimix::prompt_mode_name(t->prompt_mode)) +
                             " trace has no representations, similarity defaults to 0.5");
      }
    }
    const auto d = verimix::score_response(direct, options);
    const auto c = verimix::score_response(cot, options);
    const verimix::VerifyDecision v = verimix::self_verify(d, c, alpha);
    const json out{{"question", question},
                   {"options", verimix::options_to_json(options)},
                   {"final_answer", v.final_answer},
                   {"branch", verimix::branch_name(v.branch)},
                   {"alpha", v.alpha},
                   {"sc_direct", v.sc_direct},
                   {"sc_cot", v.sc_cot},
                   {"direct", scored_to_json(v.direct)},
                   {"cot", scored_to_json(v.cot)}};
    *audit_json = dup_string(out.dump(2));
  });
}

vmx_status vmx_eval(const vmx_backend* backend, const char* benchmark_path,
                    const char* options_json, const char* report_path,
                    char** report_json, char** summary) {
  return guarded([&] {
    need(backend, "backend");
    need(benchmark_path, "benchmark_path");
    const json opts = parse_optional(options_json);
    check_only_keys(opts, {"strategy", "alpha", "workers", "cache_dir", "inference"},
                    "eval options");
    const auto strategy = verimix::parse_strategy(opts.value("strategy", std::string("sv")));
    const double alpha = opts.value("alpha", verimix::kDefaultAlpha);
    const auto bench = verimix::load_benchmark(benchmark_path);
    const verimix::EvalReport r = verimix::run_eval(*backend->impl, bench.instances,
                                                    strategy, alpha, eval_options(opts));
    if (report_path != nullptr) verimix::emit_report(r, report_path);
    put_string(report_json, verimix::report_to_json(r).dump(2));
    put_string(summary, verimix::report_summary(r));
  });
}

vmx_status vmx_sweep(const vmx_backend* backend, const char* benchmark_path,
                     const char* options_json, char** sweep_json, char** table) {
  return guarded([&] {
    need(backend, "backend");
    need(benchmark_path, "benchmark_path");
    const json opts = parse_optional(options_json);
    check_only_keys(opts, {"grid", "workers", "cache_dir", "reuse_traces", "inference"},
                    "sweep options");
    std::vector<double> grid = verimix::default_alpha_grid();
    if (opts.contains("grid")) {
      const json& g = opts.at("grid");
      if (g.is_array()) {
        grid = g.get<std::vector<double>>();
      } else {
        check_only_keys(g, {"lo", "hi", "step"}, "grid");
        grid = verimix::make_grid(g.value("lo", 0.0), g.value("hi", 1.0),
                                  g.value("step", 0.1));
      }
    }
    const auto bench = verimix::load_benchmark(benchmark_path);
    const auto points = verimix::alpha_sweep(*backend->impl, bench.instances, grid,
                                             eval_options(opts),
                                             opts.value("reuse_traces", true));
    put_string(sweep_json, verimix::sweep_to_json(points).dump(2));
    put_string(table, verimix::sweep_table(points));
  });
}

vmx_status vmx_completer_mock_load(const char* rules_path, vmx_completer** out) {
  return guarded([&] {
    need(rules_path, "rules_path");
    need(out, "out");
    auto c = std::make_unique<verimix::MockCompleter>(verimix::MockCompleter::load(rules_path));
    *out = new vmx_completer{std::move(c)};
  });
}

vmx_status vmx_completer_remote(const char* remote_json, vmx_completer** out) {
  return guarded([&] {
    need(remote_json, "remote_json");
    need(out, "out");
    auto c = std::make_unique<verimix::RemoteCompleter>(
        verimix::RemoteConfig::from_json(json::parse(remote_json)));
    *out = new vmx_completer{std::move(c)};
  });
}

void vmx_completer_destroy(vmx_completer* completer) { delete completer; }

vmx_status vmx_curate(const vmx_completer* completer, const char* records_path,
                      const char* options_json, const char* out_dir,
                      char** stats_json) {
  return guarded([&] {
    need(completer, "completer");
    need(records_path, "records_path");
    need(out_dir, "out_dir");
    const json opts = parse_optional(options_json);
    check_only_keys(opts, {"threshold", "strict_scores", "max_inflight"}, "curation options");
    verimix::CurationOptions o;
    o.threshold = opts.value("threshold", o.threshold);
    o.strict_scores = opts.value("strict_scores", o.strict_scores);
    o.max_inflight = opts.value("max_inflight", o.max_inflight);
    const auto ingest = verimix::load_curation_records(records_path);
    verimix::CurationResult result = verimix::run_curation(ingest.records, *completer->impl, o);
    result.stats.n_input += ingest.n_rejected_held_out;
    result.stats.n_rejected_held_out += ingest.n_rejected_held_out;
    verimix::write_curation_outputs(result, out_dir);
    put_string(stats_json, result.stats.to_json().dump(2));
  });
}

}  // extern "C"
