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

#include "http_client.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "verimix/error.hpp"

namespace verimix {

namespace {

struct SemaphoreGuard {
  explicit SemaphoreGuard(std::counting_semaphore<1024>& s) : sem(s) {
    sem.acquire();
  }
  ~SemaphoreGuard() { sem.release(); }
  std::counting_semaphore<1024>& sem;
};

const RemoteConfig& validated(const RemoteConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

HttpJsonClient::HttpJsonClient(const RemoteConfig& cfg)
    : cfg_(validated(cfg)), inflight_(cfg.max_inflight) {
  const std::string& url = cfg_.url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kConfig, "remote url needs a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

nlohmann::json HttpJsonClient::post(const nlohmann::json& body) const {
  SemaphoreGuard guard(inflight_);

  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str());
      key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string payload = body.dump();
  const auto timeout = std::chrono::duration<double>(cfg_.timeout_s);
  const int attempts = 1 + cfg_.retries;

  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    httplib::Client client(origin_);
    client.set_connection_timeout(
        std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(
        std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(
        std::chrono::duration_cast<std::chrono::microseconds>(timeout));

    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "request to " + cfg_.url + " failed: " +
                   httplib::to_string(res.error());
    } else if (res->status >= 500) {
      last_error = "server error " + std::to_string(res->status) + " from " +
                   cfg_.url;
    } else if (res->status >= 400) {
      throw TransportError("request rejected with status " +
                               std::to_string(res->status) + " by " +
                               cfg_.url + ": " + res->body,
                           attempt);
    } else {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::kParse,
                    "remote reply is not JSON: " + std::string(e.what()));
      }
    }
    if (attempt < attempts) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(cfg_.retry_backoff_ms * attempt));
    }
  }
  throw TransportError(
      last_error + " (after " + std::to_string(attempts) + " attempts)",
      attempts);
}

}  // namespace verimix
