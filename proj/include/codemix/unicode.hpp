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

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Thin UTF-8 helpers over ICU so the rest of the library never touches ICU
// types directly.
namespace codemix::unicode {

enum class Script { kLatin, kDevanagari, kBengali, kGujarati, kOther };

std::vector<char32_t> decode(std::string_view utf8);
std::string encode(char32_t cp);
std::string encode(const std::vector<char32_t>& cps);

std::string to_lower(std::string_view utf8);
std::string nfc(std::string_view utf8);

bool is_whitespace(char32_t cp);
bool is_letter(char32_t cp);
// Unicode general categories P* and S*.
bool is_punct_or_symbol(char32_t cp);
Script script_of(char32_t cp);

// Trims Unicode whitespace from both ends.
std::string trim(std::string_view utf8);

}  // namespace codemix::unicode
