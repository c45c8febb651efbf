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

/* C interface to verimix. All handles are opaque. Every call returns a
 * vmx_status; on failure vmx_last_error() describes the problem for the
 * calling thread. Strings returned through char** are owned by the caller
 * and released with vmx_string_free(). Structured inputs and outputs are
 * JSON documents; their schemas are described in docs/formats.md. */

#ifndef VERIMIX_VERIMIX_H_
#define VERIMIX_VERIMIX_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(VMX_BUILDING_LIBRARY)
#define VMX_API __declspec(dllexport)
#else
#define VMX_API __declspec(dllimport)
#endif
#else
#define VMX_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vmx_status {
  VMX_OK = 0,
  VMX_ERR_INVALID_ARGUMENT = 1,
  VMX_ERR_DIMENSION = 2,
  VMX_ERR_DEGENERATE_VECTOR = 3,
  VMX_ERR_INVALID_LOGPROB = 4,
  VMX_ERR_INVALID_SIMILARITY = 5,
  VMX_ERR_PARSE = 6,
  VMX_ERR_IO = 7,
  VMX_ERR_TRANSPORT = 8,
  VMX_ERR_CAPABILITY = 9,
  VMX_ERR_DIVERGENCE = 10,
  VMX_ERR_PIPELINE_ORDER = 11,
  VMX_ERR_CONFIG = 12,
  VMX_ERR_EMPTY_BENCHMARK = 13,
  VMX_ERR_VALIDATION = 14,
  VMX_ERR_NON_FINITE = 15,
  VMX_ERR_INTERNAL = 99
} vmx_status;

VMX_API const char* vmx_version(void);
VMX_API const char* vmx_status_name(vmx_status status);
/* Message of the last failed call on this thread; "" if none. */
VMX_API const char* vmx_last_error(void);
VMX_API void vmx_string_free(char* s);

/* Warnings (e.g. a trace without representations) go to stderr unless a
 * callback is installed. Pass NULL to restore the default. */
typedef void (*vmx_warning_fn)(const char* message, void* user);
VMX_API void vmx_set_warning_callback(vmx_warning_fn fn, void* user);

/* ---- connector parameters ---- */

typedef struct vmx_connector_dims {
  size_t n_tokens;
  size_t d_v;
  size_t d_c;
  size_t d;
  size_t d_llm;
  size_t n_prefix;
} vmx_connector_dims;

VMX_API void vmx_connector_dims_default(vmx_connector_dims* dims);

typedef struct vmx_params vmx_params;

VMX_API vmx_status vmx_params_init(const vmx_connector_dims* dims,
                                   uint64_t seed, vmx_params** out);
VMX_API vmx_status vmx_params_load(const char* path, vmx_params** out);
VMX_API vmx_status vmx_params_save(const vmx_params* params, const char* path);
VMX_API vmx_status vmx_params_dims(const vmx_params* params,
                                   vmx_connector_dims* dims);
/* Number of doubles in the flattened parameter vector. */
VMX_API vmx_status vmx_params_size(const vmx_params* params, size_t* n);
/* Copies min(n, size) values in block order. */
VMX_API vmx_status vmx_params_copy(const vmx_params* params, double* out,
                                   size_t n);
VMX_API void vmx_params_destroy(vmx_params* params);

/* Connector forward for one image. v_v is n_tokens x d_v, v_c is
 * n_tokens x d_c, both row-major. h_img0 receives (n_prefix + n_tokens) x
 * d_llm values. */
VMX_API vmx_status vmx_forward(const vmx_params* params, const double* v_v,
                               const double* v_c, double* h_img0,
                               size_t h_img0_len);

/* ---- numeric checks and training ---- */

/* config_json: training config (connector dims, eps). Writes a JSON list of
 * {name, max_rel_err} plus the overall maximum. */
VMX_API vmx_status vmx_gradcheck(const char* config_json, uint64_t seed,
                                 char** report_json);

/* Runs the desk-scale alignment stage. trained may be NULL. */
VMX_API vmx_status vmx_train_align(const char* config_json,
                                   char** report_json, vmx_params** trained);

/* Checks a later-stage fine-tuning config and returns it normalized. */
VMX_API vmx_status vmx_validate_stage_config(const char* config_json,
                                             char** normalized_json);

/* ---- inference backends ---- */

typedef struct vmx_backend vmx_backend;

VMX_API vmx_status vmx_backend_mock_load(const char* script_path,
                                         vmx_backend** out);
/* remote_json: {"url", "model", "api_key_env", "timeout_s", "retries",
 * "retry_backoff_ms", "max_inflight"}. */
VMX_API vmx_status vmx_backend_remote(const char* remote_json,
                                      vmx_backend** out);
VMX_API void vmx_backend_destroy(vmx_backend* backend);

/* request_json: {"image_ref", "question", "options", "inference"}. Writes
 * the decision with both scored branches. */
VMX_API vmx_status vmx_verify(const vmx_backend* backend,
                              const char* request_json, double alpha,
                              char** audit_json);

/* options_json: {"strategy", "alpha", "workers", "cache_dir", "inference"}.
 * When report_path is non-NULL the JSON report and a .txt summary are
 * written there. summary may be NULL. */
VMX_API vmx_status vmx_eval(const vmx_backend* backend,
                            const char* benchmark_path,
                            const char* options_json, const char* report_path,
                            char** report_json, char** summary);

/* options_json: {"grid": [..] or {"lo", "hi", "step"}, "workers",
 * "cache_dir", "reuse_traces", "inference"}. table may be NULL. */
VMX_API vmx_status vmx_sweep(const vmx_backend* backend,
                             const char* benchmark_path,
                             const char* options_json, char** sweep_json,
                             char** table);

/* ---- curation ---- */

typedef struct vmx_completer vmx_completer;

VMX_API vmx_status vmx_completer_mock_load(const char* rules_path,
                                           vmx_completer** out);
VMX_API vmx_status vmx_completer_remote(const char* remote_json,
                                        vmx_completer** out);
VMX_API void vmx_completer_destroy(vmx_completer* completer);

/* options_json: {"threshold", "strict_scores", "max_inflight"}. Writes
 * curated.jsonl, scored_records.jsonl and curation_stats.json to out_dir. */
VMX_API vmx_status vmx_curate(const vmx_completer* completer,
                              const char* records_path,
                              const char* options_json, const char* out_dir,
                              char** stats_json);

#ifdef __cplusplus
}
#endif

#endif /* VERIMIX_VERIMIX_H_ */
