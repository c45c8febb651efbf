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

#include "verimix/backend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "http_client.hpp"
#include "json_util.hpp"
#include "verimix/error.hpp"
#include "verimix/log.hpp"

namespace verimix {

using nlohmann::json;

void DecodingConfig::validate() const {
  if (max_tokens < 1) {
    throw Error(ErrorCode::kConfig, "max_tokens must be >= 1");
  }
  if (!(temperature >= 0.0)) {
    throw Error(ErrorCode::kConfig, "temperature must be >= 0");
  }
  if (!(top_p > 0.0 && top_p <= 1.0)) {
    throw Error(ErrorCode::kConfig, "top_p must lie in (0, 1]");
  }
}

namespace {

DecodingConfig decoding_from_json(const json& j, DecodingConfig d,
                                  const std::string& what) {
  detail::check_keys(j, {"temperature", "top_p", "max_tokens"}, what);
  detail::read_key(j, "temperature", d.temperature, what);
  detail::read_key(j, "top_p", d.top_p, what);
  detail::read_key(j, "max_tokens", d.max_tokens, what);
  d.validate();
  return d;
}

}  // namespace

InferenceConfig InferenceConfig::from_json(const json& j) {
  detail::check_keys(j, {"direct", "cot"}, "inference");
  InferenceConfig c;
  if (j.contains("direct")) {
    c.direct = decoding_from_json(j.at("direct"), c.direct, "inference.direct");
  }
  if (j.contains("cot")) {
    c.cot = decoding_from_json(j.at("cot"), c.cot, "inference.cot");
  }
  return c;
}

RemoteConfig RemoteConfig::from_json(const json& j) {
  const std::string what = "remote";
  detail::check_keys(j,
                     {"url", "model", "api_key_env", "timeout_s", "retries",
                      "retry_backoff_ms", "max_inflight"},
                     what);
  RemoteConfig c;
  detail::read_key(j, "url", c.url, what);
  detail::read_key(j, "model", c.model, what);
  detail::read_key(j, "api_key_env", c.api_key_env, what);
  detail::read_key(j, "timeout_s", c.timeout_s, what);
  detail::read_key(j, "retries", c.retries, what);
  detail::read_key(j, "retry_backoff_ms", c.retry_backoff_ms, what);
  detail::read_key(j, "max_inflight", c.max_inflight, what);
  c.validate();
  return c;
}

void BackendRequest::validate() const { decoding.validate(); }

void RemoteConfig::validate() const {
  if (url.empty()) throw Error(ErrorCode::kConfig, "remote url is empty");
  if (!(timeout_s > 0.0)) {
    throw Error(ErrorCode::kConfig, "remote timeout must be positive");
  }
  if (retries < 0) throw Error(ErrorCode::kConfig, "retries must be >= 0");
  if (max_inflight < 1 || max_inflight > 1024) {
    throw Error(ErrorCode::kConfig, "max_inflight must lie in [1, 1024]");
  }
}

const std::string& direct_task_prompt(bool has_options) {
  static const std::string with_options =
      "Answer with the option's letter from the given choices directly.";
  static const std::string free_form =
      "Answer the question using a single word or phrase.";
  return has_options ? with_options : free_form;
}

const std::string& cot_task_prompt(bool has_options) {
  static const std::string with_options =
      "Think through the problem step by step, explaining each reasoning "
      "step. Then finish with the line \"The answer is X.\", where X is the "
      "letter of the correct option.";
  static const std::string free_form =
      "Think through the problem step by step, explaining each reasoning "
      "step. Then finish with the line \"The answer is X.\", where X is a "
      "single word or phrase.";
  return has_options ? with_options : free_form;
}

std::string build_prompt(const std::string& question,
                         std::span<const AnswerOption> options,
                         PromptMode mode) {
  std::string p = question;
  p += '\n';
  for (const auto& o : options) {
    p += o.letter;
    p += ". ";
    p += o.text;
    p += '\n';
  }
  p += mode == PromptMode::kDirect ? direct_task_prompt(!options.empty())
                                   : cot_task_prompt(!options.empty());
  return p;
}

json trace_to_json(const GenerationTrace& t) {
  return json{{"text", t.text},
              {"logprobs", t.token_logprobs},
              {"img_rep", t.img_rep},
              {"txt_rep", t.txt_rep},
              {"mode", prompt_mode_name(t.prompt_mode)}};
}

GenerationTrace trace_from_json(const json& j, PromptMode mode) {
  GenerationTrace t;
  t.prompt_mode = mode;
  try {
    t.text = j.at("text").get<std::string>();
    if (j.contains("logprobs")) {
      t.token_logprobs = j.at("logprobs").get<std::vector<double>>();
    } else if (j.contains("confidence")) {
      // Shorthand for fixtures: n_tokens copies of log(confidence).
      const double c = j.at("confidence").get<double>();
      const int n = j.value("n_tokens", 4);
      t.token_logprobs.assign(static_cast<std::size_t>(n), std::log(c));
    }
    if (j.contains("img_rep")) {
      t.img_rep = j.at("img_rep").get<std::vector<double>>();
      t.txt_rep = j.at("txt_rep").get<std::vector<double>>();
    } else if (j.contains("similarity")) {
      // Shorthand: unit vectors whose cosine is 2s - 1.
      const double cos = 2.0 * j.at("similarity").get<double>() - 1.0;
      t.img_rep = {1.0, 0.0};
      t.txt_rep = {cos, std::sqrt(std::max(0.0, 1.0 - cos * cos))};
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad trace: ") + e.what());
  }
  if (t.token_logprobs.empty() && !t.text.empty()) {
    throw Error(ErrorCode::kParse, "trace with text but no logprobs");
  }
  for (double lp : t.token_logprobs) {
    if (!(lp <= 0.0)) {
      throw Error(ErrorCode::kInvalidLogprob,
                  "trace log-probability " + std::to_string(lp) + " > 0");
    }
  }
  if (t.img_rep.size() != t.txt_rep.size()) {
    throw Error(ErrorCode::kDimension,
                "trace img_rep and txt_rep lengths differ");
  }
  return t;
}

json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIo, "cannot open " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
}

std::vector<AnswerOption> options_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kParse, "options must be an array");
  if (j.size() > 26) throw Error(ErrorCode::kValidation, "at most 26 options");
  std::vector<AnswerOption> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& o = j[i];
    AnswerOption opt;
    if (o.is_string()) {
      opt.letter = std::string(1, static_cast<char>('A' + i));
      opt.text = o.get<std::string>();
    } else if (o.is_object() && o.contains("letter") && o.contains("text")) {
      opt.letter = o.at("letter").get<std::string>();
      opt.text = o.at("text").get<std::string>();
    } else {
      throw Error(ErrorCode::kParse,
                  "option " + std::to_string(i) +
                      " must be a string or {letter, text}");
    }
    if (opt.letter.size() != 1 || !std::isalpha(static_cast<unsigned char>(opt.letter[0]))) {
      throw Error(ErrorCode::kValidation,
                  "option letter must be a single letter, got '" + opt.letter + "'");
    }
    opt.letter[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(opt.letter[0])));
    for (const auto& prev : out) {
      if (prev.letter == opt.letter) {
        throw Error(ErrorCode::kValidation, "duplicate option letter " + opt.letter);
      }
    }
    out.push_back(std::move(opt));
  }
  return out;
}

json options_to_json(std::span<const AnswerOption> options) {
  json out = json::array();
  for (const auto& o : options) out.push_back({{"letter", o.letter}, {"text", o.text}});
  return out;
}

MockScript MockScript::from_json(const json& j) {
  MockScript s;
  s.fallback.token_logprobs = {0.0};
  try {
    if (j.contains("default")) {
      s.fallback = trace_from_json(j.at("default"), PromptMode::kDirect);
    }
    for (const auto& e : j.value("entries", json::array())) {
      const PromptMode mode =
          parse_prompt_mode(e.at("mode").get<std::string>());
      Key key{e.value("image_ref", std::string{}),
              e.at("question").get<std::string>(), mode};
      s.entries[key] = trace_from_json(e.at("trace"), mode);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("mock script: ") + e.what());
  }
  return s;
}

MockScript MockScript::load(const std::string& path) {
  return from_json(read_json_file(path));
}

GenerationTrace MockBackend::generate(const BackendRequest& req) const {
  req.validate();
  auto it = script_.entries.find({req.image_ref, req.question, req.prompt_mode});
  GenerationTrace t = it != script_.entries.end() ? it->second : script_.fallback;
  t.prompt_mode = req.prompt_mode;
  return t;
}

RemoteBackend::RemoteBackend(RemoteConfig cfg)
    : cfg_(std::move(cfg)), client_(std::make_unique<HttpJsonClient>(cfg_)) {}

RemoteBackend::~RemoteBackend() = default;

json RemoteBackend::request_body(const BackendRequest& req,
                                 const std::string& model) {
  json body{{"model", model},
            {"prompt", build_prompt(req.question, req.options, req.prompt_mode)},
            {"temperature", req.decoding.temperature},
            {"top_p", req.decoding.top_p},
            {"max_tokens", req.decoding.max_tokens},
            {"want_logprobs", true},
            {"want_embeddings", true}};
  if (!req.image_ref.empty()) body["image_ref"] = req.image_ref;
  return body;
}

GenerationTrace RemoteBackend::parse_reply(const json& reply, PromptMode mode) {
  GenerationTrace t;
  t.prompt_mode = mode;
  if (!reply.is_object() || !reply.contains("text") ||
      !reply.at("text").is_string()) {
    throw Error(ErrorCode::kParse, "remote reply has no 'text' string");
  }
  t.text = reply.at("text").get<std::string>();
  if (!reply.contains("logprobs") || !reply.at("logprobs").is_array() ||
      reply.at("logprobs").empty()) {
    throw Error(ErrorCode::kCapability,
                "remote reply carries no per-token logprobs; the service "
                "must support want_logprobs");
  }
  try {
    t.token_logprobs = reply.at("logprobs").get<std::vector<double>>();
    if (reply.contains("embeddings") && reply.at("embeddings").is_object()) {
      const json& e = reply.at("embeddings");
      t.img_rep = e.value("prompt", std::vector<double>{});
      t.txt_rep = e.value("completion", std::vector<double>{});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("remote reply: ") + e.what());
  }
  for (double lp : t.token_logprobs) {
    if (!(lp <= 0.0)) {
      throw Error(ErrorCode::kInvalidLogprob,
                  "remote log-probability " + std::to_string(lp) + " > 0");
    }
  }
  if (!t.has_representations() || t.img_rep.size() != t.txt_rep.size()) {
    log_warning("remote reply lacks usable embeddings; similarity falls back "
                "to 0.5");
    t.img_rep.clear();
    t.txt_rep.clear();
  }
  return t;
}

GenerationTrace RemoteBackend::generate(const BackendRequest& req) const {
  req.validate();
  return parse_reply(client_->post(request_body(req, cfg_.model)),
                     req.prompt_mode);
}

BackendRequest make_request(const std::string& image_ref,
                            const std::string& question,
                            std::span<const AnswerOption> options,
                            PromptMode mode, const InferenceConfig& cfg) {
  BackendRequest r;
  r.image_ref = image_ref;
  r.question = question;
  r.options.assign(options.begin(), options.end());
  r.prompt_mode = mode;
  r.decoding = cfg.for_mode(mode);
  return r;
}

std::pair<GenerationTrace, GenerationTrace> dual_generate(
    const Backend& backend, const std::string& image_ref,
    const std::string& question, std::span<const AnswerOption> options,
    const InferenceConfig& cfg) {
  auto run = [&](PromptMode mode) {
    try {
      return backend.generate(
          make_request(image_ref, question, options, mode, cfg));
    } catch (const TransportError& e) {
      throw TransportError(std::string(prompt_mode_name(mode)) +
                               " branch: " + e.what(),
                           e.attempts());
    } catch (const Error& e) {
      throw Error(e.code(),
                  std::string(prompt_mode_name(mode)) + " branch: " + e.what());
    }
  };
  GenerationTrace direct = run(PromptMode::kDirect);
  GenerationTrace cot = run(PromptMode::kCot);
  return {std::move(direct), std::move(cot)};
}

const char* completion_kind_name(CompletionKind k) {
  return k == CompletionKind::kRewrite ? "rewrite" : "score";
}

MockCompleter MockCompleter::from_json(const json& j) {
  std::vector<CompletionRule> rules;
  try {
    for (const auto& r : j.value("rules", json::array())) {
      CompletionRule rule;
      if (r.contains("kind")) {
        const auto k = r.at("kind").get<std::string>();
        if (k == "rewrite") {
          rule.kind = CompletionKind::kRewrite;
        } else if (k == "score") {
          rule.kind = CompletionKind::kScore;
        } else {
          throw Error(ErrorCode::kParse, "unknown completion kind '" + k + "'");
        }
      }
      if (r.contains("contains")) {
        const json& c = r.at("contains");
        if (c.is_string()) {
          rule.contains.push_back(c.get<std::string>());
        } else {
          rule.contains = c.get<std::vector<std::string>>();
        }
      }
      rule.reply = r.at("reply").get<std::string>();
      rules.push_back(std::move(rule));
    }
    return MockCompleter(std::move(rules), j.value("default", std::string{}));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("mock completer: ") + e.what());
  }
}

MockCompleter MockCompleter::load(const std::string& path) {
  return from_json(read_json_file(path));
}

std::string MockCompleter::complete(const CompletionRequest& req) const {
  for (const auto& r : rules_) {
    if (r.kind && *r.kind != req.kind) continue;
    bool all = true;
    for (const auto& needle : r.contains) {
      if (req.prompt.find(needle) == std::string::npos) {
        all = false;
        break;
      }
    }
    if (all) return r.reply;
  }
  return fallback_;
}

RemoteCompleter::RemoteCompleter(RemoteConfig cfg)
    : cfg_(std::move(cfg)), client_(std::make_unique<HttpJsonClient>(cfg_)) {}

RemoteCompleter::~RemoteCompleter() = default;

std::string RemoteCompleter::complete(const CompletionRequest& req) const {
  req.decoding.validate();
  const json body{{"model", cfg_.model},
                  {"system", req.system},
                  {"prompt", req.prompt},
                  {"temperature", req.decoding.temperature},
                  {"top_p", req.decoding.top_p},
                  {"max_tokens", req.decoding.max_tokens},
                  {"want_logprobs", false},
                  {"want_embeddings", false}};
  const json reply = client_->post(body);
  if (!reply.is_object() || !reply.contains("text") ||
      !reply.at("text").is_string()) {
    throw Error(ErrorCode::kParse, "completion reply has no 'text' string");
  }
  return reply.at("text").get<std::string>();
}

}  // namespace verimix
