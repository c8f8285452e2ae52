// Copyright 2026 The codemix Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <string_view>

namespace codemix::metrics {

/// Martin Porter's suffix-stripping stemmer, following his reference C
/// implementation (including its "bli" -> "ble" and "logi" -> "log" step-2
/// rules). Words that are not entirely ASCII lowercase letters, and words of
/// two letters or fewer, are returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace codemix::metrics
