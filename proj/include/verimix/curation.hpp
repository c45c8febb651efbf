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

#ifndef VERIMIX_CURATION_HPP_
#define VERIMIX_CURATION_HPP_

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "verimix/backend.hpp"
#include "verimix/selfverify.hpp"

namespace verimix {

inline constexpr double kDefaultScoreThreshold = 0.6;
inline constexpr const char* kNoImageDescription = "(no description provided)";

// Manual CoTs are rewritten and both versions are scored. AI-generated CoTs
// are already standardized, so only the raw CoT is scored.
enum class SourceKind { kManual, kAiGenerated };

const char* source_kind_name(SourceKind k);
SourceKind parse_source_kind(const std::string& s);

struct CurationRecord {
  std::string id;
  std::string image_ref;
  std::string question;
  std::vector<AnswerOption> options;
  std::string raw_cot;
  std::optional<std::string> rewritten_cot;
  std::optional<double> raw_score;
  std::optional<double> rewritten_score;
  SourceKind source_kind = SourceKind::kManual;
  std::optional<std::string> image_description;
  std::string split = "train";

  bool operator==(const CurationRecord&) const = default;
};

struct CuratedInstance {
  std::string id;
  std::string image_ref;
  std::string instruction;
  std::string cot_response;
  double overall_score = 0.0;
  bool from_rewrite = false;

  bool operator==(const CuratedInstance&) const = default;
};

/// True for split names reserved for evaluation (test, val, validation, dev).
bool is_held_out_split(const std::string& split);

/// Parses and validates one record. A held-out split is a validation error.
CurationRecord record_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const CurationRecord& r);
nlohmann::json instance_to_json(const CuratedInstance& c);
CuratedInstance instance_from_json(const nlohmann::json& j);

/// The question followed by one "L. text" line per option.
std::string format_question_options(const std::string& question,
                                    const std::vector<AnswerOption>& options);

const std::string& rewrite_system_prompt();
const std::string& score_system_prompt();
const std::string& rewrite_template();
const std::string& score_template();

/// Single-pass substitution of {name} slots. Text inserted into a slot is
/// never rescanned, and unknown {names} are left alone.
std::string expand_template(
    const std::string& tmpl,
    const std::vector<std::pair<std::string, std::string>>& slots);

std::string build_rewrite_prompt(const CurationRecord& rec);
std::string build_score_prompt(const CurationRecord& rec,
                               const std::string& cot);

/// Reads the value after "Scoring:" (or, failing that, an "Overall" key).
/// Strict parsing rejects values outside [0, 1]; lenient parsing clamps.
double parse_overall_score(const std::string& reply, bool strict = true);

/// Keeps the higher-scoring CoT (ties favour the rewrite) and drops the
/// record when that score is below the threshold.
std::optional<CuratedInstance> select_and_filter(
    const CurationRecord& rec, double threshold = kDefaultScoreThreshold);

struct CurationStats {
  std::size_t n_input = 0;
  std::size_t n_rejected_held_out = 0;
  std::size_t n_kept = 0;
  std::size_t n_dropped = 0;
  std::size_t n_rewrite_chosen = 0;
  std::size_t n_raw_chosen = 0;
  // Chosen scores in ten bins [0, 0.1), ..., [0.9, 1.0].
  std::array<std::size_t, 10> histogram{};

  nlohmann::json to_json() const;
};

struct CurationOptions {
  double threshold = kDefaultScoreThreshold;
  bool strict_scores = true;
  std::size_t max_inflight = 4;
  DecodingConfig decoding{0.0, 1.0, 1024};
};

struct CurationResult {
  std::vector<CuratedInstance> instances;  // input order
  std::vector<CurationRecord> records;     // with filled CoTs and scores
  CurationStats stats;
};

struct IngestResult {
  std::vector<CurationRecord> records;
  std::size_t n_rejected_held_out = 0;
};

/// Reads CurationRecord JSONL. Held-out records are skipped and counted;
/// malformed lines and duplicate ids are errors.
IngestResult load_curation_records(const std::string& path);

CurationResult run_curation(const std::vector<CurationRecord>& records,
                            const TextCompleter& llm,
                            const CurationOptions& opts = {});

void write_curation_outputs(const CurationResult& result,
                            const std::string& out_dir);

}  // namespace verimix

#endif  // VERIMIX_CURATION_HPP_
