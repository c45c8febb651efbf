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

#ifndef VERIMIX_BACKEND_HPP_
#define VERIMIX_BACKEND_HPP_

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"
#include "verimix/selfverify.hpp"

namespace verimix {

struct DecodingConfig {
  double temperature = 1.0;
  double top_p = 1.0;
  int max_tokens = 1024;

  void validate() const;
  bool operator==(const DecodingConfig&) const = default;
};

/// Per-mode decoding. Direct answers use temperature 1.0; reasoning uses
/// temperature 0.4 with nucleus 0.9. Both cap generation at 1024 tokens.
struct InferenceConfig {
  DecodingConfig direct{1.0, 1.0, 1024};
  DecodingConfig cot{0.4, 0.9, 1024};

  const DecodingConfig& for_mode(PromptMode m) const {
    return m == PromptMode::kDirect ? direct : cot;
  }

  /// {"direct": {...}, "cot": {...}}; absent keys keep their defaults.
  static InferenceConfig from_json(const nlohmann::json& j);
};

struct BackendRequest {
  std::string image_ref;
  std::string question;
  std::vector<AnswerOption> options;
  PromptMode prompt_mode = PromptMode::kDirect;
  DecodingConfig decoding;

  void validate() const;
};

/// Task-prompt suffixes, frozen; see tests/golden/.
const std::string& direct_task_prompt(bool has_options);
const std::string& cot_task_prompt(bool has_options);

/// "<question>\n<A. opt>\n...\n<task prompt>". The two modes differ only in
/// the final task-prompt line.
std::string build_prompt(const std::string& question,
                         std::span<const AnswerOption> options,
                         PromptMode mode);

/// Produces GenerationTraces. Implementations must be safe to call from
/// several threads at once.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual GenerationTrace generate(const BackendRequest& req) const = 0;
  virtual std::string name() const = 0;
};

/// Scripted traces keyed by (image_ref, question, mode) with a default.
struct MockScript {
  using Key = std::tuple<std::string, std::string, PromptMode>;
  std::map<Key, GenerationTrace> entries;
  GenerationTrace fallback;

  static MockScript from_json(const nlohmann::json& j);
  static MockScript load(const std::string& path);
};

class MockBackend : public Backend {
 public:
  explicit MockBackend(MockScript script) : script_(std::move(script)) {}
  GenerationTrace generate(const BackendRequest& req) const override;
  std::string name() const override { return "mock"; }

 private:
  MockScript script_;
};

struct RemoteConfig {
  std::string url;  // http://host:port/path
  std::string model = "default";
  std::string api_key_env = "VERIMIX_API_KEY";
  double timeout_s = 60.0;
  int retries = 2;
  int retry_backoff_ms = 200;
  int max_inflight = 4;

  void validate() const;
  static RemoteConfig from_json(const nlohmann::json& j);
};

class HttpJsonClient;

/// Client for an inference service returning text, per-token log-probs and
/// pooled embeddings. A reply without log-probs is a capability error; a
/// reply without embeddings yields a trace without representations.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig cfg);
  ~RemoteBackend() override;
  GenerationTrace generate(const BackendRequest& req) const override;
  std::string name() const override { return "remote"; }

  static nlohmann::json request_body(const BackendRequest& req,
                                     const std::string& model);
  static GenerationTrace parse_reply(const nlohmann::json& reply,
                                     PromptMode mode);

 private:
  RemoteConfig cfg_;
  std::unique_ptr<HttpJsonClient> client_;
};

/// Issues the direct and the reasoning request for one question.
std::pair<GenerationTrace, GenerationTrace> dual_generate(
    const Backend& backend, const std::string& image_ref,
    const std::string& question, std::span<const AnswerOption> options,
    const InferenceConfig& cfg);

BackendRequest make_request(const std::string& image_ref,
                            const std::string& question,
                            std::span<const AnswerOption> options,
                            PromptMode mode, const InferenceConfig& cfg);

// Plain text completion, used by the curation pipeline.

enum class CompletionKind { kRewrite, kScore };

const char* completion_kind_name(CompletionKind k);

struct CompletionRequest {
  CompletionKind kind = CompletionKind::kScore;
  std::string system;
  std::string prompt;
  DecodingConfig decoding{0.0, 1.0, 1024};
};

class TextCompleter {
 public:
  virtual ~TextCompleter() = default;
  virtual std::string complete(const CompletionRequest& req) const = 0;
};

/// Ordered rules: the first rule whose kind matches (or is unset) and whose
/// every `contains` needle occurs in the prompt supplies the reply.
struct CompletionRule {
  std::optional<CompletionKind> kind;
  std::vector<std::string> contains;
  std::string reply;
};

class MockCompleter : public TextCompleter {
 public:
  MockCompleter(std::vector<CompletionRule> rules, std::string fallback)
      : rules_(std::move(rules)), fallback_(std::move(fallback)) {}
  static MockCompleter from_json(const nlohmann::json& j);
  static MockCompleter load(const std::string& path);
  std::string complete(const CompletionRequest& req) const override;

 private:
  std::vector<CompletionRule> rules_;
  std::string fallback_;
};

class RemoteCompleter : public TextCompleter {
 public:
  explicit RemoteCompleter(RemoteConfig cfg);
  ~RemoteCompleter() override;
  std::string complete(const CompletionRequest& req) const override;

 private:
  RemoteConfig cfg_;
  std::unique_ptr<HttpJsonClient> client_;
};

// Trace (de)serialization shared by mock scripts, caches and audits.
nlohmann::json trace_to_json(const GenerationTrace& t);
GenerationTrace trace_from_json(const nlohmann::json& j, PromptMode mode);

nlohmann::json read_json_file(const std::string& path);

/// Options are either [{"letter": "A", "text": ...}, ...] or a plain list of
/// strings, lettered A, B, C... in order.
std::vector<AnswerOption> options_from_json(const nlohmann::json& j);
nlohmann::json options_to_json(std::span<const AnswerOption> options);

}  // namespace verimix

#endif  // VERIMIX_BACKEND_HPP_
