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

#ifndef VERIMIX_LOG_HPP_
#define VERIMIX_LOG_HPP_

#include <functional>
#include <string>

namespace verimix {

using WarningSink = std::function<void(const std::string&)>;

// Replaces the process-wide warning sink; an empty sink restores the default
// (one line on stderr). Returns the previous sink.
WarningSink set_warning_sink(WarningSink sink);

void log_warning(const std::string& message);

}  // namespace verimix

#endif  // VERIMIX_LOG_HPP_
