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

#ifndef VERIMIX_SRC_HTTP_CLIENT_HPP_
#define VERIMIX_SRC_HTTP_CLIENT_HPP_

#include <memory>
#include <semaphore>
#include <string>

#include "json.hpp"
#include "verimix/backend.hpp"

namespace verimix {

/// POSTs JSON bodies to one endpoint with retries and a bound on the number
/// of requests in flight. Safe to share between threads: every call opens
/// its own connection.
class HttpJsonClient {
 public:
  explicit HttpJsonClient(const RemoteConfig& cfg);

  /// Throws TransportError once all attempts fail, kParse on a non-JSON
  /// reply body.
  nlohmann::json post(const nlohmann::json& body) const;

 private:
  RemoteConfig cfg_;
  std::string origin_;  // scheme://host:port
  std::string path_;
  mutable std::counting_semaphore<1024> inflight_;
};

}  // namespace verimix

#endif  // VERIMIX_SRC_HTTP_CLIENT_HPP_
