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

// Helpers for strict JSON config reading. Private to the library.

#ifndef VERIMIX_SRC_JSON_UTIL_HPP_
#define VERIMIX_SRC_JSON_UTIL_HPP_

#include <initializer_list>
#include <string>

#include "json.hpp"
#include "verimix/error.hpp"

namespace verimix::detail {

inline void require_object(const nlohmann::json& j, const std::string& what) {
  if (!j.is_object()) {
    throw Error(ErrorCode::kConfig, what + " must be a JSON object");
  }
}

inline void check_keys(const nlohmann::json& j,
                       std::initializer_list<const char*> allowed,
                       const std::string& what) {
  require_object(j, what);
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) known = known || item.key() == k;
    if (!known) {
      throw Error(ErrorCode::kConfig,
                  what + ": unknown key '" + item.key() + "'");
    }
  }
}

// Overwrites `out` with j[key] when present, turning type errors into
// config errors that name the key.
template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out,
              const std::string& what) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kConfig,
                what + ": bad value for '" + key + "': " + j.at(key).dump());
  }
}

}  // namespace verimix::detail

#endif  // VERIMIX_SRC_JSON_UTIL_HPP_
