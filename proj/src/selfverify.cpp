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

#include "verimix/selfverify.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>

#include "verimix/error.hpp"

namespace verimix {

namespace {

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string to_upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  return s;
}

bool is_single_letter(const std::string& s) {
  return s.size() == 1 && std::isalpha(static_cast<unsigned char>(s[0]));
}

bool has_letter(std::span<const AnswerOption> options, char letter) {
  const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(letter)));
  return std::any_of(options.begin(), options.end(), [&](const auto& o) {
    return to_upper(trim(o.letter)) == std::string(1, up);
  });
}

// Cuts at the first sentence terminator ('.', '!', '?' followed by space or
// end of text) or newline. Decimal points such as "0.5" survive.
std::string first_sentence(const std::string& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '\n') return s.substr(0, i);
    if (c == '.' || c == '!' || c == '?') {
      if (i + 1 == s.size() ||
          std::isspace(static_cast<unsigned char>(s[i + 1]))) {
        return s.substr(0, i);
      }
    }
  }
  return s;
}

std::string strip_wrapping(std::string s) {
  const std::string junk = " \t\r\n\"'*`[]";
  std::size_t b = s.find_first_not_of(junk);
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(junk);
  s = s.substr(b, e - b + 1);
  // "(B)" -> "B"
  if (s.size() >= 3 && s.front() == '(' && s.back() == ')') {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

std::optional<std::string> letter_from_declaration(
    const std::string& candidate, std::span<const AnswerOption> options) {
  static const std::regex kLetterOnly(R"(^\(?([A-Za-z])\)?$)");
  static const std::regex kLetterPunct(R"(^\(?([A-Za-z])[\.\):])");
  static const std::regex kUpperSpace(R"(^([A-Z])\s)");
  std::smatch m;
  if (std::regex_search(candidate, m, kLetterOnly) ||
      std::regex_search(candidate, m, kLetterPunct)) {
    return to_upper(m[1].str());
  }
  if (!options.empty() && std::regex_search(candidate, m, kUpperSpace) &&
      has_letter(options, m[1].str()[0])) {
    return m[1].str();
  }
  return std::nullopt;
}

std::optional<std::string> rule_declaration(
    const std::string& text, std::span<const AnswerOption> options) {
  static const std::regex kDecl(R"(answer\s*(?:is\s*:?|:)\s*)",
                                std::regex::icase);
  std::optional<std::size_t> tail;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kDecl);
       it != std::sregex_iterator(); ++it) {
    tail = static_cast<std::size_t>(it->position(0) + it->length(0));
  }
  if (!tail) return std::nullopt;
  const std::string candidate = strip_wrapping(first_sentence(text.substr(*tail)));
  if (candidate.empty()) return std::nullopt;
  if (auto letter = letter_from_declaration(candidate, options)) return letter;
  const std::string lc = to_lower(candidate);
  for (const auto& o : options) {
    if (!trim(o.text).empty() && to_lower(trim(o.text)) == lc) {
      return to_upper(trim(o.letter));
    }
  }
  return candidate;
}

std::optional<std::string> rule_trailing_letter(
    const std::string& text, std::span<const AnswerOption> options) {
  std::string t = trim(text);
  while (!t.empty() && (t.back() == '.' || t.back() == ')' || t.back() == ']' ||
                        std::isspace(static_cast<unsigned char>(t.back())))) {
    t.pop_back();
  }
  if (t.empty()) return std::nullopt;
  const char last = t.back();
  if (!std::isalpha(static_cast<unsigned char>(last))) return std::nullopt;
  if (t.size() >= 2) {
    const char prev = t[t.size() - 2];
    if (!(std::isspace(static_cast<unsigned char>(prev)) || prev == '(' ||
          prev == '[' || prev == ':')) {
      return std::nullopt;
    }
  }
  if (options.empty()) {
    if (!std::isupper(static_cast<unsigned char>(last))) return std::nullopt;
    return std::string(1, last);
  }
  if (!has_letter(options, last)) return std::nullopt;
  return std::string(
      1, static_cast<char>(std::toupper(static_cast<unsigned char>(last))));
}

std::optional<std::string> rule_option_in_final_sentence(
    const std::string& text, std::span<const AnswerOption> options) {
  if (options.empty()) return std::nullopt;
  // Split into sentences and keep the last non-empty one.
  std::string last, current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const bool end =
        c == '\n' || ((c == '.' || c == '!' || c == '?') &&
                      (i + 1 == text.size() ||
                       std::isspace(static_cast<unsigned char>(text[i + 1]))));
    if (end) {
      if (!trim(current).empty()) last = current;
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!trim(current).empty()) last = current;
  const std::string sentence = to_lower(last);
  std::optional<std::string> hit;
  for (const auto& o : options) {
    const std::string needle = to_lower(trim(o.text));
    if (needle.empty() || sentence.find(needle) == std::string::npos) continue;
    if (hit) return std::nullopt;  // ambiguous
    hit = to_upper(trim(o.letter));
  }
  return hit;
}

}  // namespace

const char* prompt_mode_name(PromptMode mode) {
  return mode == PromptMode::kDirect ? "direct" : "cot";
}

PromptMode parse_prompt_mode(const std::string& s) {
  if (s == "direct") return PromptMode::kDirect;
  if (s == "cot") return PromptMode::kCot;
  throw Error(ErrorCode::kParse, "unknown prompt mode '" + s + "'");
}

const char* branch_name(Branch b) {
  switch (b) {
    case Branch::kCotByAgreement: return "cot-by-agreement";
    case Branch::kCotByScore: return "cot-by-score";
    case Branch::kDirectByScore: return "direct-by-score";
  }
  return "?";
}

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n\f\v";
  const std::size_t b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

double confidence(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) {
    throw Error(ErrorCode::kInvalidLogprob,
                "confidence: empty log-probability list");
  }
  double sum = 0.0;
  for (double lp : token_logprobs) {
    if (!(lp <= 0.0)) {
      throw Error(ErrorCode::kInvalidLogprob,
                  "confidence: log-probability " + std::to_string(lp) +
                      " is positive or NaN");
    }
    sum += lp;
  }
  return std::exp(sum / static_cast<double>(token_logprobs.size()));
}

double similarity_score(std::span<const double> img_rep,
                        std::span<const double> txt_rep) {
  return (1.0 + cosine_sim(img_rep, txt_rep)) / 2.0;
}

std::string extract_answer(const std::string& text,
                           std::span<const AnswerOption> options) {
  if (auto a = rule_declaration(text, options)) return *a;
  if (auto a = rule_trailing_letter(text, options)) return *a;
  if (auto a = rule_option_in_final_sentence(text, options)) return *a;
  return trim(text);
}

bool answers_match(const std::string& a, const std::string& b) {
  const std::string ta = trim(a), tb = trim(b);
  if (is_single_letter(ta) && is_single_letter(tb)) {
    return std::toupper(static_cast<unsigned char>(ta[0])) ==
           std::toupper(static_cast<unsigned char>(tb[0]));
  }
  return ta == tb;
}

ScoredResponse score_response(const GenerationTrace& trace,
                              std::span<const AnswerOption> options) {
  ScoredResponse r;
  r.trace = trace;
  r.answer = extract_answer(trace.text, options);
  r.c = confidence(trace.token_logprobs);
  r.s = trace.has_representations()
            ? similarity_score(trace.img_rep, trace.txt_rep)
            : 0.5;
  return r;
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::kConfig,
                "alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
}

VerifyDecision self_verify(const ScoredResponse& direct,
                           const ScoredResponse& cot, double alpha) {
  check_alpha(alpha);
  VerifyDecision d;
  d.alpha = alpha;
  d.direct = direct;
  d.cot = cot;
  d.sc_direct = direct.sc(alpha);
  d.sc_cot = cot.sc(alpha);
  if (answers_match(cot.answer, direct.answer)) {
    d.final_answer = cot.answer;
    d.branch = Branch::kCotByAgreement;
  } else if (d.sc_cot >= d.sc_direct) {
    d.final_answer = cot.answer;
    d.branch = Branch::kCotByScore;
  } else {
    d.final_answer = direct.answer;
    d.branch = Branch::kDirectByScore;
  }
  return d;
}

}  // namespace verimix
