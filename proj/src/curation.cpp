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

#include "verimix/curation.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
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

namespace {

const std::string kRewriteSystem =
#include "prompt_cot_rewrite_system.v1.inc"
    ;
const std::string kRewrite =
#include "prompt_cot_rewrite.v1.inc"
    ;
const std::string kScoreSystem =
#include "prompt_cot_score_system.v1.inc"
    ;
const std::string kScore =
#include "prompt_cot_score.v1.inc"
    ;

std::string lower(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

std::optional<double> first_number(const std::string& s) {
  static const std::regex kNumber(R"([-+]?(?:\d+(?:\.\d+)?|\.\d+))");
  std::smatch m;
  if (!std::regex_search(s, m, kNumber)) return std::nullopt;
  return std::stod(m.str());
}

// The text after `key:` on the first line mentioning it, ignoring markdown
// emphasis around the key.
std::optional<std::string> keyed_value(const std::string& reply,
                                       const std::string& key) {
  std::istringstream is(reply);
  std::string line;
  while (std::getline(is, line)) {
    std::string flat;
    for (char ch : line) {
      if (ch != '*') flat.push_back(ch);
    }
    const std::string low = lower(flat);
    const auto k = low.find(key);
    if (k == std::string::npos) continue;
    const auto colon = low.find(':', k + key.size());
    if (colon == std::string::npos) continue;
    if (trim(low.substr(k + key.size(), colon - k - key.size())).size() > 0) {
      continue;
    }
    return flat.substr(colon + 1);
  }
  return std::nullopt;
}

void check_score(const std::optional<double>& s, const char* name) {
  if (s && !(*s >= 0.0 && *s <= 1.0)) {
    throw Error(ErrorCode::kValidation,
                std::string(name) + " must lie in [0, 1]");
  }
}

}  // namespace

const char* source_kind_name(SourceKind k) {
  return k == SourceKind::kManual ? "manual" : "ai-generated";
}

SourceKind parse_source_kind(const std::string& s) {
  if (s == "manual") return SourceKind::kManual;
  if (s == "ai-generated") return SourceKind::kAiGenerated;
  throw Error(ErrorCode::kValidation,
              "source_kind must be manual or ai-generated, got '" + s + "'");
}

bool is_held_out_split(const std::string& split) {
  static const std::set<std::string> kHeldOut{"test", "val", "validation",
                                              "dev"};
  return kHeldOut.count(lower(trim(split))) > 0;
}

CurationRecord record_from_json(const json& j) {
  CurationRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.image_ref = j.value("image_ref", std::string());
    r.question = j.at("question").get<std::string>();
    if (j.contains("options")) r.options = options_from_json(j.at("options"));
    r.raw_cot = j.value("raw_cot", std::string());
    if (j.contains("rewritten_cot") && !j.at("rewritten_cot").is_null()) {
      r.rewritten_cot = j.at("rewritten_cot").get<std::string>();
    }
    if (j.contains("raw_score") && !j.at("raw_score").is_null()) {
      r.raw_score = j.at("raw_score").get<double>();
    }
    if (j.contains("rewritten_score") && !j.at("rewritten_score").is_null()) {
      r.rewritten_score = j.at("rewritten_score").get<double>();
    }
    r.source_kind =
        parse_source_kind(j.value("source_kind", std::string("manual")));
    if (j.contains("image_description") &&
        !j.at("image_description").is_null()) {
      r.image_description = j.at("image_description").get<std::string>();
    }
    r.split = j.value("split", std::string("train"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("curation record: ") + e.what());
  }
  if (r.id.empty()) throw Error(ErrorCode::kValidation, "record id is empty");
  if (is_held_out_split(r.split)) {
    throw Error(ErrorCode::kValidation,
                "record " + r.id + " belongs to held-out split '" + r.split +
                    "' and cannot be used for training data");
  }
  check_score(r.raw_score, "raw_score");
  check_score(r.rewritten_score, "rewritten_score");
  return r;
}

json record_to_json(const CurationRecord& r) {
  json j{{"id", r.id},
         {"image_ref", r.image_ref},
         {"question", r.question},
         {"options", options_to_json(r.options)},
         {"raw_cot", r.raw_cot},
         {"source_kind", source_kind_name(r.source_kind)},
         {"split", r.split}};
  j["rewritten_cot"] = r.rewritten_cot ? json(*r.rewritten_cot) : json();
  j["raw_score"] = r.raw_score ? json(*r.raw_score) : json();
  j["rewritten_score"] = r.rewritten_score ? json(*r.rewritten_score) : json();
  if (r.image_description) j["image_description"] = *r.image_description;
  return j;
}

json instance_to_json(const CuratedInstance& c) {
  return json{{"id", c.id},
              {"image_ref", c.image_ref},
              {"instruction", c.instruction},
              {"cot_response", c.cot_response},
              {"overall_score", c.overall_score},
              {"from_rewrite", c.from_rewrite}};
}

CuratedInstance instance_from_json(const json& j) {
  try {
    return CuratedInstance{j.at("id").get<std::string>(),
                           j.at("image_ref").get<std::string>(),
                           j.at("instruction").get<std::string>(),
                           j.at("cot_response").get<std::string>(),
                           j.at("overall_score").get<double>(),
                           j.value("from_rewrite", false)};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("curated instance: ") + e.what());
  }
}

std::string format_question_options(const std::string& question,
                                    const std::vector<AnswerOption>& options) {
  std::string out = question;
  for (const auto& o : options) out += "\n" + o.letter + ". " + o.text;
  return out;
}

const std::string& rewrite_system_prompt() { return kRewriteSystem; }
const std::string& score_system_prompt() { return kScoreSystem; }
const std::string& rewrite_template() { return kRewrite; }
const std::string& score_template() { return kScore; }

std::string expand_template(
    const std::string& tmpl,
    const std::vector<std::pair<std::string, std::string>>& slots) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string::npos) {
        const std::string name = tmpl.substr(i + 1, close - i - 1);
        const auto it = std::find_if(slots.begin(), slots.end(),
                                     [&](const auto& s) { return s.first == name; });
        if (it != slots.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

std::string build_rewrite_prompt(const CurationRecord& rec) {
  if (trim(rec.question).empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "record " + rec.id + " has no question to rewrite against");
  }
  if (trim(rec.raw_cot).empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "record " + rec.id + " has no raw_cot to rewrite");
  }
  return expand_template(
      kRewrite, {{"question_options", format_question_options(rec.question, rec.options)},
                 {"cot", rec.raw_cot}});
}

std::string build_score_prompt(const CurationRecord& rec,
                               const std::string& cot) {
  if (trim(cot).empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "record " + rec.id + ": cannot score an empty CoT");
  }
  const std::string desc = rec.image_description && !trim(*rec.image_description).empty()
                               ? *rec.image_description
                               : std::string(kNoImageDescription);
  return expand_template(
      kScore, {{"image_description", desc},
               {"question_options", format_question_options(rec.question, rec.options)},
               {"cot", cot}});
}

double parse_overall_score(const std::string& reply, bool strict) {
  std::optional<double> v;
  if (auto s = keyed_value(reply, "scoring")) v = first_number(*s);
  if (!v) {
    if (auto s = keyed_value(reply, "overall")) v = first_number(*s);
  }
  if (!v) {
    throw Error(ErrorCode::kParse, "no overall score in reply: " + reply);
  }
  if (*v < 0.0 || *v > 1.0) {
    if (strict) {
      throw Error(ErrorCode::kParse,
                  "overall score outside [0, 1] in reply: " + reply);
    }
    v = std::clamp(*v, 0.0, 1.0);
  }
  return *v;
}

std::optional<CuratedInstance> select_and_filter(const CurationRecord& rec,
                                                 double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::kConfig, "threshold must lie in [0, 1]");
  }
  if (!rec.raw_score) {
    throw Error(ErrorCode::kPipelineOrder,
                "record " + rec.id + " has no raw_score; score it first");
  }
  check_score(rec.raw_score, "raw_score");
  bool use_rewrite = false;
  double chosen = *rec.raw_score;
  if (rec.source_kind == SourceKind::kManual) {
    if (!rec.rewritten_cot) {
      throw Error(ErrorCode::kPipelineOrder,
                  "manual record " + rec.id + " must be rewritten before selection");
    }
    if (!rec.rewritten_score) {
      throw Error(ErrorCode::kPipelineOrder,
                  "record " + rec.id + " has no rewritten_score; score it first");
    }
    check_score(rec.rewritten_score, "rewritten_score");
    if (*rec.rewritten_score >= *rec.raw_score) {
      use_rewrite = true;
      chosen = *rec.rewritten_score;
    }
  }
  if (chosen < threshold) return std::nullopt;
  CuratedInstance out;
  out.id = rec.id;
  out.image_ref = rec.image_ref;
  out.instruction = build_prompt(rec.question, rec.options, PromptMode::kCot);
  out.cot_response = trim(use_rewrite ? *rec.rewritten_cot : rec.raw_cot);
  out.overall_score = chosen;
  out.from_rewrite = use_rewrite;
  return out;
}

json CurationStats::to_json() const {
  json bins = json::array();
  for (std::size_t i = 0; i < histogram.size(); ++i) {
    std::ostringstream label;
    label.precision(1);
    label << std::fixed << i / 10.0 << "-" << (i + 1) / 10.0;
    bins.push_back({{"bin", label.str()}, {"count", histogram[i]}});
  }
  return json{{"n_input", n_input},
              {"n_rejected_held_out", n_rejected_held_out},
              {"n_kept", n_kept},
              {"n_dropped", n_dropped},
              {"n_rewrite_chosen", n_rewrite_chosen},
              {"n_raw_chosen", n_raw_chosen},
              {"score_histogram", bins}};
}

IngestResult load_curation_records(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIo, "cannot open " + path);
  IngestResult out;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParse, where + e.what());
    }
    if (j.is_object() && is_held_out_split(j.value("split", std::string()))) {
      ++out.n_rejected_held_out;
      log_warning(where + "held-out record rejected");
      continue;
    }
    try {
      CurationRecord r = record_from_json(j);
      if (!ids.insert(r.id).second) {
        throw Error(ErrorCode::kValidation, "duplicate record id " + r.id);
      }
      out.records.push_back(std::move(r));
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
  }
  return out;
}

namespace {

// Fills in the rewrite and the scores that the record still lacks.
void complete_record(CurationRecord& r, const TextCompleter& llm,
                     const CurationOptions& opts) {
  auto ask = [&](CompletionKind kind, const std::string& system,
                 const std::string& prompt) {
    return llm.complete(CompletionRequest{kind, system, prompt, opts.decoding});
  };
  if (r.source_kind == SourceKind::kManual && !r.rewritten_cot) {
    std::string text = trim(ask(CompletionKind::kRewrite, kRewriteSystem,
                                build_rewrite_prompt(r)));
    if (text.empty()) {
      throw Error(ErrorCode::kValidation, "rewriter returned an empty CoT");
    }
    r.rewritten_cot = std::move(text);
  }
  if (!r.raw_score) {
    r.raw_score = parse_overall_score(
        ask(CompletionKind::kScore, kScoreSystem, build_score_prompt(r, r.raw_cot)),
        opts.strict_scores);
  }
  if (r.source_kind == SourceKind::kManual && !r.rewritten_score) {
    r.rewritten_score = parse_overall_score(
        ask(CompletionKind::kScore, kScoreSystem,
            build_score_prompt(r, *r.rewritten_cot)),
        opts.strict_scores);
  }
}

}  // namespace

CurationResult run_curation(const std::vector<CurationRecord>& records,
                            const TextCompleter& llm,
                            const CurationOptions& opts) {
  if (opts.max_inflight < 1) {
    throw Error(ErrorCode::kConfig, "max_inflight must be >= 1");
  }
  CurationResult result;
  result.stats.n_input = records.size();
  std::vector<CurationRecord> work;
  for (const auto& r : records) {
    if (is_held_out_split(r.split)) {
      ++result.stats.n_rejected_held_out;
    } else {
      work.push_back(r);
    }
  }

  std::vector<std::exception_ptr> errors(work.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) {
      try {
        complete_record(work[i], llm, opts);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(opts.max_inflight, work.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < work.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "record " + work[i].id + ": " + e.what());
    }
  }

  for (const auto& r : work) {
    std::optional<CuratedInstance> kept = select_and_filter(r, opts.threshold);
    const double chosen =
        r.source_kind == SourceKind::kManual
            ? std::max(*r.raw_score, *r.rewritten_score)
            : *r.raw_score;
    const auto bin = std::min<std::size_t>(9, static_cast<std::size_t>(chosen * 10.0));
    ++result.stats.histogram[bin];
    if (kept) {
      ++result.stats.n_kept;
      ++(kept->from_rewrite ? result.stats.n_rewrite_chosen
                            : result.stats.n_raw_chosen);
      result.instances.push_back(std::move(*kept));
    } else {
      ++result.stats.n_dropped;
    }
  }
  result.records = std::move(work);
  return result;
}

void write_curation_outputs(const CurationResult& result,
                            const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + out_dir + ": " + ec.message());
  auto open = [&](const std::string& name) {
    std::ofstream os(std::filesystem::path(out_dir) / name, std::ios::binary);
    if (!os) throw Error(ErrorCode::kIo, "cannot write " + out_dir + "/" + name);
    return os;
  };
  {
    auto os = open("curated.jsonl");
    for (const auto& c : result.instances) os << instance_to_json(c).dump() << "\n";
  }
  {
    auto os = open("scored_records.jsonl");
    for (const auto& r : result.records) os << record_to_json(r).dump() << "\n";
  }
  {
    auto os = open("curation_stats.json");
    os << result.stats.to_json().dump(2) << "\n";
    if (!os) throw Error(ErrorCode::kIo, "write failed in " + out_dir);
  }
}

}  // namespace verimix
