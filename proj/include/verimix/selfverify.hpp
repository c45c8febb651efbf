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

#ifndef VERIMIX_SELFVERIFY_HPP_
#define VERIMIX_SELFVERIFY_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "verimix/tensor.hpp"

namespace verimix {

inline constexpr double kDefaultAlpha = 0.7;

enum class PromptMode { kDirect, kCot };

const char* prompt_mode_name(PromptMode mode);
PromptMode parse_prompt_mode(const std::string& s);

/// One backend call's output.
struct GenerationTrace {
  std::string text;
  // log P(w_t | w_<t) for generated tokens only; every entry <= 0.
  std::vector<double> token_logprobs;
  // Pooled representations; empty when the backend cannot provide them.
  std::vector<double> img_rep;
  std::vector<double> txt_rep;
  PromptMode prompt_mode = PromptMode::kDirect;

  bool has_representations() const {
    return !img_rep.empty() && !txt_rep.empty();
  }
  bool operator==(const GenerationTrace&) const = default;
};

/// A labelled option of a multi-choice question, e.g. {"B", "a cat"}.
struct AnswerOption {
  std::string letter;
  std::string text;
  bool operator==(const AnswerOption&) const = default;
};

struct ScoredResponse {
  GenerationTrace trace;
  std::string answer;
  double s = 0.5;  // similarity in [0, 1]
  double c = 1.0;  // confidence in (0, 1]

  double sc(double alpha) const { return (1.0 - alpha) * s + alpha * c; }
};

enum class Branch { kCotByAgreement, kCotByScore, kDirectByScore };

const char* branch_name(Branch b);

struct VerifyDecision {
  std::string final_answer;
  Branch branch = Branch::kCotByAgreement;
  double alpha = kDefaultAlpha;
  double sc_direct = 0.0;
  double sc_cot = 0.0;
  ScoredResponse direct;
  ScoredResponse cot;
};

/// exp(mean(token_logprobs)): the inverse perplexity of the generation.
double confidence(std::span<const double> token_logprobs);

/// (1 + cos(img, txt)) / 2, mapping cosine onto [0, 1].
double similarity_score(std::span<const double> img_rep,
                        std::span<const double> txt_rep);

/// Rule cascade, first hit wins:
///   1. last explicit declaration ("answer is X", "Answer: X");
///   2. a standalone option letter ending the text;
///   3. the unique option whose text appears in the final sentence;
///   4. the whole trimmed text.
/// Letters are returned upper-case. Matching is case-insensitive.
std::string extract_answer(const std::string& text,
                           std::span<const AnswerOption> options = {});

/// Canonical answer comparison: option letters compare case-insensitively,
/// free text compares exactly after trimming.
bool answers_match(const std::string& a, const std::string& b);

/// Extracts the answer, computes C and S. A trace without representations
/// gets the neutral S = 0.5 (a warning is logged by the caller).
ScoredResponse score_response(const GenerationTrace& trace,
                              std::span<const AnswerOption> options = {});

/// Final-answer decision: agreement returns the CoT answer; otherwise the
/// branch with the larger (1 - alpha) S + alpha C wins, ties going to CoT.
VerifyDecision self_verify(const ScoredResponse& direct,
                           const ScoredResponse& cot, double alpha);

void check_alpha(double alpha);

std::string trim(const std::string& s);

}  // namespace verimix

#endif  // VERIMIX_SELFVERIFY_HPP_
