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

// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "verimix/align_trainer.hpp"
#include "verimix/curation.hpp"
#include "verimix/error.hpp"
#include "verimix/eval_harness.hpp"
#include "verimix/gatemixer.hpp"
#include "verimix/objectives.hpp"
#include "verimix/rng.hpp"
#include "verimix/selfverify.hpp"

using namespace verimix;
namespace fs = std::filesystem;

namespace {

const std::string kFix = VMX_FIXTURE_DIR;
const std::string kGolden = VMX_GOLDEN_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// AC1: full composed objective, d=8, b=4, ten seeds.
Outcome ac1() {
  TrainConfig cfg;
  cfg.connector.d = 8;
  cfg.batch_size = 4;
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    worst = std::max(worst, gradcheck_stage1(cfg, seed));
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 30.0,
          "max rel err " + fmt("%.3e", worst) + " <= 1e-4 over 10 seeds, " +
              fmt("%.2f", secs) + " s < 30 s"};
}

// AC2: gate range, elementwise boundedness, zero-gate midpoint.
Outcome ac2() {
  Rng rng(2026);
  std::size_t violations = 0;
  for (int draw = 0; draw < 1000; ++draw) {
    const std::size_t n = 1 + rng.below(6), d = 1 + rng.below(8);
    const double scale = std::pow(10.0, rng.uniform(-2.0, 1.0));
    const Tensor hv = Tensor::normal({n, d}, scale, rng);
    const Tensor hc = Tensor::normal({n, d}, scale, rng);
    const Tensor wg = Tensor::normal({d, 2 * d}, scale, rng);
    const Tensor bg = Tensor::normal({d}, scale, rng);
    const GateResult g = gate_mix(hv, hc, wg, bg);
    for (std::size_t i = 0; i < g.h.size(); ++i) {
      const double a = g.alpha.data[i];
      const double lo = std::min(hv.data[i], hc.data[i]);
      const double hi = std::max(hv.data[i], hc.data[i]);
      if (!(a > 0.0 && a < 1.0)) ++violations;
      if (!(g.h.data[i] >= lo && g.h.data[i] <= hi)) ++violations;
    }
  }
  std::size_t mid_mismatch = 0;
  for (int draw = 0; draw < 100; ++draw) {
    const Tensor hv = Tensor::normal({4, 6}, 1.0, rng);
    const Tensor hc = Tensor::normal({4, 6}, 1.0, rng);
    const GateResult g = gate_mix(hv, hc, Tensor::zeros({6, 12}), Tensor::zeros({6}));
    for (std::size_t i = 0; i < g.h.size(); ++i) {
      if (g.alpha.data[i] != 0.5) ++mid_mismatch;
      if (g.h.data[i] != (hv.data[i] + hc.data[i]) / 2.0) ++mid_mismatch;
    }
  }
  return {violations == 0 && mid_mismatch == 0,
          std::to_string(violations) + " range/bound violations in 1000 draws, " +
              std::to_string(mid_mismatch) + " inexact midpoints"};
}

// AC3: contrastive regularizer hand cases and permutation invariance.
Outcome ac3() {
  auto wrap = [](std::size_t b, std::vector<double> v) {
    return SimilarityMatrix{Tensor({b, b}, std::move(v)), SimilarityMode::kExpCosine, 1.0};
  };
  const double one = std::abs(creg_loss(wrap(1, {3.2})));
  const double e = std::exp(1.0);
  const double hand = std::abs(creg_loss(wrap(2, {e, 1.0, 1.0, e})) - std::log(1.0 + 1.0 / e));
  Rng rng(33);
  double perm_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t b = 2 + rng.below(7);
    std::vector<double> s(b * b);
    for (double& v : s) v = std::exp(rng.uniform(-1.0, 1.0));
    std::vector<std::size_t> p(b);
    std::iota(p.begin(), p.end(), 0);
    for (std::size_t i = b - 1; i > 0; --i) std::swap(p[i], p[rng.below(i + 1)]);
    std::vector<double> ps(b * b);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < b; ++j) ps[i * b + j] = s[p[i] * b + p[j]];
    perm_err = std::max(perm_err, std::abs(creg_loss(wrap(b, s)) - creg_loss(wrap(b, ps))));
  }
  return {one <= 1e-12 && hand <= 1e-9 && perm_err <= 1e-12,
          "b=1 " + fmt("%.1e", one) + " <= 1e-12, hand case err " + fmt("%.1e", hand) +
              " <= 1e-9, permutation err " + fmt("%.1e", perm_err) + " <= 1e-12"};
}

// AC4: confidence of uniform sequences and strict monotonicity.
Outcome ac4() {
  Rng rng(44);
  double uniform_err = 0.0;
  std::size_t not_decreasing = 0;
  for (int t = 0; t < 1000; ++t) {
    const double p = rng.uniform(0.001, 1.0);
    const std::size_t n = 1 + rng.below(64);
    uniform_err = std::max(uniform_err,
                           std::abs(confidence(std::vector<double>(n, std::log(p))) - p));
    std::vector<double> lp(n);
    for (double& v : lp) v = -rng.uniform(0.0, 5.0);
    std::vector<double> lower = lp;
    lower[rng.below(n)] -= rng.uniform(1e-6, 2.0);
    if (!(confidence(lower) < confidence(lp))) ++not_decreasing;
  }
  return {uniform_err <= 1e-12 && not_decreasing == 0,
          "uniform err " + fmt("%.1e", uniform_err) + " <= 1e-12, " +
              std::to_string(not_decreasing) + " non-decreasing cases in 1000"};
}

// AC5: the decision rule against a literal transcription.
std::string literal(const std::string& ad, double sd, double cd, const std::string& ac,
                    double sc, double cc, double alpha) {
  if (ad == ac) return ac;
  const double sc_direct = (1 - alpha) * sd + alpha * cd;
  const double sc_cot = (1 - alpha) * sc + alpha * cc;
  return sc_cot >= sc_direct ? ac : ad;
}

Outcome ac5() {
  auto scored = [](const std::string& a, double s, double c) {
    ScoredResponse r;
    r.answer = a;
    r.s = s;
    r.c = c;
    return r;
  };
  std::size_t cells = 0, mismatches = 0;
  for (int sd = 0; sd <= 10; ++sd)
    for (int cd = 0; cd <= 10; ++cd)
      for (int sc = 0; sc <= 10; ++sc)
        for (int cc = 0; cc <= 10; ++cc)
          for (int al = 0; al <= 10; ++al) {
            const double a = al / 10.0;
            const auto got = self_verify(scored("A", sd / 10.0, cd / 10.0),
                                         scored("B", sc / 10.0, cc / 10.0), a);
            ++cells;
            if (got.final_answer !=
                literal("A", sd / 10.0, cd / 10.0, "B", sc / 10.0, cc / 10.0, a))
              ++mismatches;
          }
  // Agreement cases: equal answers return the CoT answer whatever the scores.
  std::size_t agree_bad = 0;
  for (const auto& [d, c] : std::vector<std::pair<double, double>>{{0.9, 0.1}, {0.1, 0.9}}) {
    const auto v = self_verify(scored("C", d, d), scored("C", c, c), 0.7);
    if (v.final_answer != "C" || v.branch != Branch::kCotByAgreement) ++agree_bad;
  }
  return {mismatches == 0 && agree_bad == 0,
          std::to_string(mismatches) + " mismatches over " + std::to_string(cells) +
              " (S,C,alpha) cells, " + std::to_string(agree_bad) + " agreement failures"};
}

bool frozen_identical(const FrozenModel& a, const FrozenModel& b) {
  const auto ta = a.tensors(), tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i)
    if (!bitwise_equal(*ta[i], *tb[i])) return false;
  return true;
}

// AC6: default desk training.
Outcome ac6() {
  const TrainConfig cfg;
  const auto t0 = std::chrono::steady_clock::now();
  const TrainingRun a = train_stage1(cfg);
  const double secs = seconds_since(t0);
  const TrainingRun b = train_stage1(cfg);
  const double ratio = a.report.final_loss / a.report.initial_loss;
  const bool frozen = frozen_identical(a.frozen_before, a.frozen_after) &&
                      frozen_identical(a.frozen_before, make_frozen_model(cfg));
  const bool rerun = a.report.curve == b.report.curve && a.params.flatten() == b.params.flatten() &&
                     encode_checkpoint(a.params) == encode_checkpoint(b.params);
  return {ratio <= 0.5 && frozen && rerun && secs < 60.0,
          "loss " + fmt("%.4f", a.report.initial_loss) + " -> " + fmt("%.4f", a.report.final_loss) +
              " (ratio " + fmt("%.3f", ratio) + " <= 0.5), frozen " +
              (frozen ? "bit-identical" : "CHANGED") + ", rerun " +
              (rerun ? "bit-identical" : "DIFFERS") + ", " + fmt("%.2f", secs) + " s < 60 s"};
}

// AC7: easy/hard fixture.
Outcome ac7() {
  const auto inst = load_benchmark(kFix + "/easy_hard_bench.jsonl").instances;
  const MockBackend mock(MockScript::load(kFix + "/easy_hard_mock.json"));
  const double d = run_eval(mock, inst, Strategy::kDirect).accuracy;
  const double c = run_eval(mock, inst, Strategy::kCot).accuracy;
  const double s = run_eval(mock, inst, Strategy::kSv, kDefaultAlpha).accuracy;
  return {d == 0.5 && c == 0.5 && s == 1.0,
          "direct " + fmt("%.4f", d) + " (want 0.5), cot " + fmt("%.4f", c) +
              " (want 0.5), sv " + fmt("%.4f", s) + " (want 1.0)"};
}

// AC8: alpha sweep.
Outcome ac8() {
  const auto grid = default_alpha_grid();
  const auto inst = load_benchmark(kFix + "/sweep_bench.jsonl").instances;
  const MockBackend mock(MockScript::load(kFix + "/sweep_mock.json"));
  const auto pts = alpha_sweep(mock, inst, grid);
  const SweepPoint best = sweep_argmax(pts);
  return {grid.size() == 11 && pts.size() == 11 && best.alpha == 0.7,
          std::to_string(pts.size()) + " points (want 11), argmax alpha " +
              fmt("%.1f", best.alpha) + " (want 0.7)"};
}

// AC9: curation selection, ties and golden prompts.
Outcome ac9() {
  const auto ingest = load_curation_records(kFix + "/curation_records.jsonl");
  const MockCompleter scorer = MockCompleter::load(kFix + "/curation_scorer.json");
  const CurationResult res = run_curation(ingest.records, scorer);

  std::set<std::string> want, got;
  bool tie_ok = true;
  std::size_t ties = 0;
  for (const auto& r : res.records) {
    const double raw = *r.raw_score;
    const double best = r.rewritten_score ? std::max(raw, *r.rewritten_score) : raw;
    if (best >= 0.6) want.insert(r.id);
  }
  for (const auto& c : res.instances) {
    got.insert(c.id);
    for (const auto& r : res.records) {
      if (r.id != c.id || !r.rewritten_score || *r.rewritten_score != *r.raw_score) continue;
      ++ties;
      if (!c.from_rewrite) tie_ok = false;
    }
  }
  const auto& recs = ingest.records;
  const bool golden =
      build_rewrite_prompt(recs.at(0)) == slurp(kGolden + "/rewrite_prompt_r1.txt") &&
      build_score_prompt(recs.at(0), recs.at(0).raw_cot) == slurp(kGolden + "/score_prompt_r1.txt") &&
      build_score_prompt(recs.at(1), recs.at(1).raw_cot) == slurp(kGolden + "/score_prompt_r2.txt");
  return {want == got && !want.empty() && ties > 0 && tie_ok && golden,
          "kept " + std::to_string(got.size()) + " of " + std::to_string(res.records.size()) +
              " (oracle " + std::to_string(want.size()) + (want == got ? ", same set" : ", DIFFERENT set") +
              "), " + std::to_string(ties) + " tie(s) to rewrite " + (tie_ok ? "ok" : "WRONG") +
              ", golden prompts " + (golden ? "byte-equal" : "DIFFER")};
}

// AC10: every CLI subcommand twice, byte comparison of all artifacts.
int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + VMX_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return status != -1 && WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome ac10() {
  const fs::path root = fs::temp_directory_path() / "vmx_acceptance_ac10";
  fs::remove_all(root);
  const std::string eh = "--backend mock:" + kFix + "/easy_hard_mock.json ";
  const std::vector<std::pair<std::string, std::string>> cmds{
      {"gradcheck", "gradcheck"},
      {"train-align", "train-align"},
      {"verify", eh + "verify --question \"What colour is the marked object in scene hard1?\" "
                      "--option red --option blue --option green --option yellow --image img/hard1.png"},
      {"eval", eh + "--workers 4 --cache-dir \"{out}/cache\" eval --benchmark " + kFix +
                   "/easy_hard_bench.jsonl --strategy sv"},
      {"sweep", "--backend mock:" + kFix + "/sweep_mock.json sweep --benchmark " + kFix +
                    "/sweep_bench.jsonl"},
      {"curate", "--workers 3 curate --records " + kFix + "/curation_records.jsonl --scorer mock:" +
                     kFix + "/curation_scorer.json"},
      {"validate-stage", "validate-stage --stage-config " + kFix + "/stage2_config.json"}};

  std::vector<std::string> failed;
  std::size_t files = 0;
  for (const auto& [name, args] : cmds) {
    std::map<std::string, std::string> snap[2];
    bool ok = true;
    for (int r = 0; r < 2; ++r) {
      const fs::path out = root / name / (r == 0 ? "a" : "b");
      std::string a = args;
      for (auto pos = a.find("{out}"); pos != std::string::npos; pos = a.find("{out}"))
        a.replace(pos, 5, out.string());
      if (run_cli("--seed 0 --out \"" + out.string() + "\" " + a) != 0) ok = false;
      if (!fs::exists(out)) continue;
      for (const auto& e : fs::recursive_directory_iterator(out))
        if (e.is_regular_file()) snap[r][fs::relative(e.path(), out).string()] = slurp(e.path());
    }
    if (!ok || snap[0].empty() || snap[0] != snap[1]) failed.push_back(name);
    files += snap[0].size();
  }
  fs::remove_all(root);
  std::string detail = std::to_string(cmds.size()) + " subcommands, " + std::to_string(files) +
                       " artifacts compared";
  if (!failed.empty()) {
    detail += "; differing or failing:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1 gradient fidelity", ac1},
      {"AC2 gate invariants", ac2},
      {"AC3 contrastive regularizer oracle", ac3},
      {"AC4 confidence oracle", ac4},
      {"AC5 decision-rule equivalence", ac5},
      {"AC6 toy alignment training", ac6},
      {"AC7 easy/hard scenario", ac7},
      {"AC8 alpha sweep", ac8},
      {"AC9 curation", ac9},
      {"AC10 CLI determinism", ac10}};
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
