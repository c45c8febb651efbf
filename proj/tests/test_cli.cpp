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

// Drives the installed command-line tool as a subprocess.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kFix = VMX_FIXTURE_DIR;

int run(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string("\"") + VMX_CLI_PATH + "\" " + args + " >\"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vmx_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return files;
}

std::vector<std::string> all_subcommands() {
  const std::string eh = " --backend mock:" + kFix + "/easy_hard_mock.json";
  return {
      "gradcheck",
      "train-align --steps 40",
      eh + " verify --question \"What colour is the marked object in scene hard1?\" "
           "--option red --option blue --option green --option yellow --image img/hard1.png",
      eh + " --workers 3 eval --benchmark " + kFix + "/easy_hard_bench.jsonl --strategy sv",
      eh + " eval --benchmark " + kFix + "/easy_hard_bench.jsonl --strategy direct",
      " --backend mock:" + kFix + "/sweep_mock.json sweep --benchmark " + kFix + "/sweep_bench.jsonl",
      "curate --records " + kFix + "/curation_records.jsonl --scorer mock:" + kFix +
          "/curation_scorer.json",
      "validate-stage --stage-config " + kFix + "/stage3_config.json",
  };
}

}  // namespace

TEST_CASE("every subcommand succeeds and reruns byte-identically") {
  const fs::path root = scratch_dir("determinism");
  for (const char* run_name : {"a", "b"}) {
    for (const auto& cmd : all_subcommands()) {
      const fs::path out = root / run_name;
      INFO(cmd);
      CHECK(run("--seed 0 --out \"" + out.string() + "\" " + cmd, root / "log.txt") == 0);
    }
  }
  const auto a = snapshot(root / "a"), b = snapshot(root / "b");
  CHECK(a.size() >= 12);
  CHECK(a == b);
  for (const char* f : {"gradcheck.json", "training_report.json", "gatemixer.ckpt",
                        "verify_audit.json", "eval_sv.json", "eval_sv.txt", "eval_direct.json",
                        "sweep.json", "sweep.txt", "curated.jsonl", "scored_records.jsonl",
                        "curation_stats.json", "stage_config.json"}) {
    CHECK_MESSAGE(a.count(f) == 1, f);
  }
  CHECK(json::parse(a.at("sweep.json")).at("argmax_alpha") == 0.7);
  CHECK(json::parse(a.at("eval_sv.json")).at("accuracy") == 1.0);
  CHECK(json::parse(a.at("verify_audit.json")).at("final_answer") == "B");
  fs::remove_all(root);
}

TEST_CASE("a different seed changes training artifacts") {
  const fs::path root = scratch_dir("seed");
  CHECK(run("--seed 1 --out \"" + (root / "s1").string() + "\" train-align --steps 5", root / "l") == 0);
  CHECK(run("--seed 2 --out \"" + (root / "s2").string() + "\" train-align --steps 5", root / "l") == 0);
  CHECK(slurp(root / "s1" / "gatemixer.ckpt") != slurp(root / "s2" / "gatemixer.ckpt"));
  fs::remove_all(root);
}

TEST_CASE("exit codes") {
  const fs::path root = scratch_dir("codes");
  const std::string out = " --out \"" + (root / "o").string() + "\" ";
  const fs::path log = root / "log.txt";

  CHECK(run(out + "no-such-command", log) == 1);
  CHECK(run(out, log) == 1);
  CHECK(run(out + "--alpha 1.5 gradcheck", log) == 1);
  CHECK(run(out + "eval --benchmark " + kFix + "/easy_hard_bench.jsonl", log) == 1);
  CHECK(slurp(log).find("--backend") != std::string::npos);
  CHECK(run(out + "--backend mock:" + kFix + "/easy_hard_mock.json eval --benchmark " + kFix +
                "/duplicate_bench.jsonl",
            log) == 1);
  CHECK(run(out + "--backend mock:/nonexistent.json eval --benchmark " + kFix +
                "/easy_hard_bench.jsonl",
            log) == 2);
  CHECK(run(out + "validate-stage --stage-config /nonexistent.json", log) == 2);
  CHECK(run(out + "train-align --lr 1e300 --steps 5", log) == 2);
  CHECK(slurp(log).find("divergence") != std::string::npos);
  CHECK(run(out + "--backend remote:http://127.0.0.1:1/v1 --retries 0 --timeout 1 verify "
                  "--question q",
            log) == 2);
  CHECK(run(out + "--backend bogus eval --benchmark x", log) == 1);
  CHECK(run("--help", log) == 0);
  fs::remove_all(root);
}

TEST_CASE("config file supplies option values") {
  const fs::path root = scratch_dir("config");
  {
    std::ofstream cfg(root / "verimix.toml");
    cfg << "out = \"" << (root / "from_config").string() << "\"\n"
        << "alpha = 0.3\n"
        << "backend = \"mock:" << kFix << "/easy_hard_mock.json\"\n";
  }
  CHECK(run("--config \"" + (root / "verimix.toml").string() + "\" eval --benchmark " + kFix +
                "/easy_hard_bench.jsonl",
            root / "log.txt") == 0);
  const json report = json::parse(slurp(root / "from_config" / "eval_sv.json"));
  CHECK(report.at("alpha") == 0.3);
  fs::remove_all(root);
}
