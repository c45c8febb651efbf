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

// Exercises the shared library through its C header only.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "verimix/verimix.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fixture(const std::string& name) {
  return std::string(VMX_FIXTURE_DIR) + "/" + name;
}

// Takes ownership of a library string.
std::string take(char* s) {
  REQUIRE(s != nullptr);
  std::string out(s);
  vmx_string_free(s);
  return out;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vmx_capi_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void count_warning(const char*, void* user) { ++*static_cast<int*>(user); }

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(vmx_version()) == "0.1.0");
  CHECK(std::string(vmx_status_name(VMX_OK)) == "ok");
  CHECK(std::string(vmx_status_name(VMX_ERR_CAPABILITY)).size() > 0);
}

TEST_CASE("parameter handles") {
  vmx_connector_dims dims;
  vmx_connector_dims_default(&dims);
  CHECK(dims.d == 8);
  vmx_params* p = nullptr;
  REQUIRE(vmx_params_init(&dims, 3, &p) == VMX_OK);
  size_t n = 0;
  REQUIRE(vmx_params_size(p, &n) == VMX_OK);
  const size_t expected = dims.d_v * dims.d + dims.d_c * dims.d + dims.d * 2 * dims.d + dims.d +
                          dims.n_prefix * dims.d + dims.d * dims.d_llm;
  CHECK(n == expected);

  std::vector<double> values(n);
  REQUIRE(vmx_params_copy(p, values.data(), n) == VMX_OK);

  const fs::path dir = scratch_dir("params");
  const std::string path = (dir / "p.ckpt").string();
  REQUIRE(vmx_params_save(p, path.c_str()) == VMX_OK);
  vmx_params* q = nullptr;
  REQUIRE(vmx_params_load(path.c_str(), &q) == VMX_OK);
  std::vector<double> reloaded(n);
  REQUIRE(vmx_params_copy(q, reloaded.data(), n) == VMX_OK);
  CHECK(reloaded == values);
  vmx_connector_dims back;
  REQUIRE(vmx_params_dims(q, &back) == VMX_OK);
  CHECK(back.n_prefix == dims.n_prefix);

  std::vector<double> v_v(dims.n_tokens * dims.d_v, 0.1), v_c(dims.n_tokens * dims.d_c, -0.2);
  std::vector<double> out((dims.n_prefix + dims.n_tokens) * dims.d_llm);
  REQUIRE(vmx_forward(p, v_v.data(), v_c.data(), out.data(), out.size()) == VMX_OK);
  for (double x : out) CHECK(std::isfinite(x));
  CHECK(vmx_forward(p, v_v.data(), v_c.data(), out.data(), out.size() - 1) == VMX_ERR_DIMENSION);
  CHECK(std::string(vmx_last_error()).size() > 0);

  vmx_params_destroy(p);
  vmx_params_destroy(q);
  vmx_params_destroy(nullptr);

  { std::ofstream(dir / "junk.ckpt") << "not a checkpoint"; }
  vmx_params* bad = nullptr;
  CHECK(vmx_params_load((dir / "junk.ckpt").string().c_str(), &bad) != VMX_OK);
  CHECK(bad == nullptr);
  CHECK(vmx_params_load((dir / "missing.ckpt").string().c_str(), &bad) == VMX_ERR_IO);
  fs::remove_all(dir);
}

TEST_CASE("null arguments are rejected") {
  CHECK(vmx_params_init(nullptr, 0, nullptr) == VMX_ERR_INVALID_ARGUMENT);
  CHECK(vmx_verify(nullptr, "{}", 0.7, nullptr) == VMX_ERR_INVALID_ARGUMENT);
}

TEST_CASE("gradcheck and training") {
  char* report = nullptr;
  REQUIRE(vmx_gradcheck("{}", 0, &report) == VMX_OK);
  const json g = json::parse(take(report));
  CHECK(g.at("passed") == true);
  CHECK(g.at("max_rel_err").get<double>() <= 1e-4);
  CHECK(g.at("checks").size() > 20);

  char* tr = nullptr;
  vmx_params* trained = nullptr;
  REQUIRE(vmx_train_align(R"({"steps": 50})", &tr, &trained) == VMX_OK);
  const json t = json::parse(take(tr));
  CHECK(t.at("frozen_unchanged") == true);
  CHECK(t.at("curve").size() == 50);
  CHECK(t.at("final_loss").get<double>() < t.at("initial_loss").get<double>());
  CHECK(trained != nullptr);
  vmx_params_destroy(trained);

  CHECK(vmx_train_align(R"({"stepz": 50})", &tr, nullptr) == VMX_ERR_CONFIG);
  CHECK(vmx_train_align("{not json", &tr, nullptr) == VMX_ERR_PARSE);
  CHECK(vmx_train_align(R"({"lr": 1e300, "steps": 5})", &tr, nullptr) == VMX_ERR_DIVERGENCE);
}

TEST_CASE("stage config validation") {
  char* out = nullptr;
  std::ifstream in(fixture("stage3_config.json"));
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  REQUIRE(vmx_validate_stage_config(text.c_str(), &out) == VMX_OK);
  CHECK(json::parse(take(out)).at("executable") == false);
  CHECK(vmx_validate_stage_config(R"({"stage": 3})", &out) == VMX_ERR_VALIDATION);
}

TEST_CASE("verify through a mock backend") {
  vmx_backend* b = nullptr;
  REQUIRE(vmx_backend_mock_load(fixture("easy_hard_mock.json").c_str(), &b) == VMX_OK);
  const json req{{"image_ref", "img/hard1.png"},
                 {"question", "What colour is the marked object in scene hard1?"},
                 {"options", {"red", "blue", "green", "yellow"}}};
  char* audit = nullptr;
  REQUIRE(vmx_verify(b, req.dump().c_str(), 0.7, &audit) == VMX_OK);
  const json a = json::parse(take(audit));
  CHECK(a.at("final_answer") == "B");
  CHECK(a.at("branch") == "cot-by-score");
  CHECK(std::abs(a.at("sc_cot").get<double>() - 0.87) <= 1e-12);
  CHECK(std::abs(a.at("sc_direct").get<double>() - 0.5) <= 1e-12);

  CHECK(vmx_verify(b, req.dump().c_str(), 1.5, &audit) == VMX_ERR_CONFIG);
  CHECK(vmx_verify(b, R"({"question": "q", "colour": 1})", 0.7, &audit) == VMX_ERR_CONFIG);
  vmx_backend_destroy(b);
  CHECK(vmx_backend_mock_load("/nonexistent/mock.json", &b) == VMX_ERR_IO);
}

TEST_CASE("eval and sweep") {
  vmx_backend* b = nullptr;
  REQUIRE(vmx_backend_mock_load(fixture("easy_hard_mock.json").c_str(), &b) == VMX_OK);
  const fs::path dir = scratch_dir("eval");
  const std::string report_path = (dir / "eval_sv.json").string();
  char* report = nullptr;
  char* summary = nullptr;
  REQUIRE(vmx_eval(b, fixture("easy_hard_bench.jsonl").c_str(), R"({"strategy": "sv"})",
                   report_path.c_str(), &report, &summary) == VMX_OK);
  CHECK(json::parse(take(report)).at("accuracy") == 1.0);
  CHECK(take(summary).find("accuracy   1.0000") != std::string::npos);
  CHECK(fs::exists(dir / "eval_sv.txt"));

  REQUIRE(vmx_eval(b, fixture("easy_hard_bench.jsonl").c_str(), R"({"strategy": "direct"})",
                   nullptr, &report, nullptr) == VMX_OK);
  CHECK(json::parse(take(report)).at("accuracy") == 0.5);
  CHECK(vmx_eval(b, fixture("duplicate_bench.jsonl").c_str(), "{}", nullptr, &report, nullptr) ==
        VMX_ERR_VALIDATION);
  vmx_backend_destroy(b);

  REQUIRE(vmx_backend_mock_load(fixture("sweep_mock.json").c_str(), &b) == VMX_OK);
  char* sweep = nullptr;
  char* table = nullptr;
  REQUIRE(vmx_sweep(b, fixture("sweep_bench.jsonl").c_str(), "{}", &sweep, &table) == VMX_OK);
  const json s = json::parse(take(sweep));
  CHECK(s.at("points").size() == 11);
  CHECK(s.at("argmax_alpha") == 0.7);
  CHECK(take(table).rfind("alpha\taccuracy", 0) == 0);
  REQUIRE(vmx_sweep(b, fixture("sweep_bench.jsonl").c_str(),
                    R"({"grid": {"lo": 0.6, "hi": 0.8, "step": 0.1}})", &sweep, nullptr) == VMX_OK);
  CHECK(json::parse(take(sweep)).at("points").size() == 3);
  vmx_backend_destroy(b);
  fs::remove_all(dir);
}

TEST_CASE("curation through a mock completer") {
  vmx_completer* c = nullptr;
  REQUIRE(vmx_completer_mock_load(fixture("curation_scorer.json").c_str(), &c) == VMX_OK);
  const fs::path dir = scratch_dir("curate");
  int warnings = 0;
  vmx_set_warning_callback(count_warning, &warnings);
  char* stats = nullptr;
  REQUIRE(vmx_curate(c, fixture("curation_records.jsonl").c_str(), "{}", dir.string().c_str(),
                     &stats) == VMX_OK);
  vmx_set_warning_callback(nullptr, nullptr);
  CHECK(warnings == 1);
  const json st = json::parse(take(stats));
  CHECK(st.at("n_kept") == 4);
  CHECK(st.at("n_rejected_held_out") == 1);
  CHECK(fs::exists(dir / "curated.jsonl"));
  CHECK(vmx_curate(c, fixture("curation_records.jsonl").c_str(), R"({"threshold": 2})",
                   dir.string().c_str(), &stats) == VMX_ERR_CONFIG);
  vmx_completer_destroy(c);
  fs::remove_all(dir);
}

TEST_CASE("remote backend failures map to transport status") {
  vmx_backend* b = nullptr;
  REQUIRE(vmx_backend_remote(R"({"url": "http://127.0.0.1:1/v1", "retries": 0, "timeout_s": 1})",
                             &b) == VMX_OK);
  char* audit = nullptr;
  CHECK(vmx_verify(b, R"({"question": "q"})", 0.7, &audit) == VMX_ERR_TRANSPORT);
  CHECK(std::string(vmx_last_error()).find("direct branch") != std::string::npos);
  vmx_backend_destroy(b);
  CHECK(vmx_backend_remote(R"({"url": "no-scheme"})", &b) == VMX_ERR_CONFIG);
}
