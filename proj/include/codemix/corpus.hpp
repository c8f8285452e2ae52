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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace codemix {

enum class PairId { kEnHi, kEnBn, kEnGu, kEnFr, kEnEs };

enum class MatrixScript { kDevanagari, kBengali, kGujarati, kLatin };

/// One of the five English-X pairs. Instances come only from the static
/// table behind `all_pairs()`.
struct LanguagePair {
  PairId id;
  std::string_view code;             // "en-hi"
  std::string_view display_name;     // "English-Hindi"
  std::string_view matrix_language;  // "Hindi"
  // Name used inside prompts; the Bengali prompts say "Bangla".
  std::string_view prompt_alias;
  MatrixScript matrix_script;
  // Default for the chatbot's transliteration bridge.
  bool requires_translit_bridge;

  bool is_latin() const noexcept { return matrix_script == MatrixScript::kLatin; }
  bool operator==(const LanguagePair& other) const noexcept { return id == other.id; }
};

/// Table order is HI, BN, GU, FR, ES and every table or listing follows it.
std::span<const LanguagePair> all_pairs() noexcept;
const LanguagePair& pair_of(PairId id) noexcept;
/// Accepts "en-hi", "EN_HI", "english-hindi" (case-insensitive).
std::optional<LanguagePair> find_pair(std::string_view name);
/// Like find_pair but throws PreconditionError for unknown names.
const LanguagePair& parse_pair(std::string_view name);
std::string_view script_name(MatrixScript script) noexcept;

struct ParallelExample {
  std::string id;
  LanguagePair pair;
  std::string english;
  std::string code_mixed;
};

struct Dataset {
  LanguagePair pair;
  std::vector<ParallelExample> examples;

  size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }
};

/// Reads TSV (`english<TAB>code_mixed`) or, for `.jsonl`/`.json` extensions,
/// JSON-lines with keys english/code_mixed and an optional id. Ids default to
/// the zero-padded line index. Errors name the offending 1-based line.
Dataset load_parallel(const std::filesystem::path& path, const LanguagePair& pair);
/// Same parser on in-memory content; `jsonl` selects the format.
Dataset parse_parallel(std::string_view content, const LanguagePair& pair, bool jsonl);

struct Split {
  Dataset pool;
  Dataset test;
};

/// Draws the example pool first, then the test set from the remainder. Both
/// keep the dataset's relative order. The shuffle is a Fisher-Yates driven by
/// mt19937_64 with rejection sampling so results do not depend on the
/// standard library's distribution implementation.
Split split_examples(const Dataset& dataset, size_t n_pool, size_t n_test, uint64_t seed);

inline constexpr std::array<std::string_view, 8> kDefaultCleanLabels{
    "Code-Mixed", "Code-Mixed Sentence", "Transliteration to Roman", "Transliteration",
    "English",    "Translation",         "Output",                   "Final Sentence"};

struct CleanOptions {
  std::vector<std::string> labels{kDefaultCleanLabels.begin(), kDefaultCleanLabels.end()};
  // Strict mode returns the raw output untouched.
  bool strict = false;
};

/// Strips leading `<Label>:` tags and matched surrounding quotes, collapses
/// whitespace runs to one space, and trims, repeating until nothing changes.
/// Case is preserved.
std::string clean_output(std::string_view raw, const CleanOptions& options = {});

/// Social-media preprocessing: lowercase, drop URLs, drop @-mentions, drop
/// '#' but keep the tag text, squeeze any character repeated more than twice
/// in a row down to one occurrence, trim.
std::string normalize_social(std::string_view text);

struct ScriptProfile {
  std::map<std::string, size_t> counts;  // keys: Latin, Devanagari, Bengali, Gujarati, Other
  double latin_ratio = 0.0;

  size_t letters() const noexcept;
};

ScriptProfile script_profile(std::string_view text);

/// Gold code-mixed sentences for non-Latin pairs should be Roman script. Returns
/// one warning per example whose code-mixed side has non-Latin letters.
std::vector<std::string> roman_script_warnings(const Dataset& dataset);

}  // namespace codemix
