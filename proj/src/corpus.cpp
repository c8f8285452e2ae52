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

#include "codemix/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "codemix/errors.hpp"
#include "codemix/unicode.hpp"

namespace codemix {

namespace {

constexpr std::array<LanguagePair, 5> kPairs{{
    {PairId::kEnHi, "en-hi", "English-Hindi", "Hindi", "Hindi", MatrixScript::kDevanagari, false},
    {PairId::kEnBn, "en-bn", "English-Bengali", "Bengali", "Bangla", MatrixScript::kBengali, true},
    {PairId::kEnGu, "en-gu", "English-Gujarati", "Gujarati", "Gujarati", MatrixScript::kGujarati,
     false},
    {PairId::kEnFr, "en-fr", "English-French", "French", "French", MatrixScript::kLatin, false},
    {PairId::kEnEs, "en-es", "English-Spanish", "Spanish", "Spanish", MatrixScript::kLatin, false},
}};

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string zero_padded(size_t index, size_t width) {
  std::string digits = std::to_string(index);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return digits;
}

std::string line_error(size_t line_no, const std::string& what) {
  return "line " + std::to_string(line_no) + ": " + what;
}

}  // namespace

std::span<const LanguagePair> all_pairs() noexcept { return kPairs; }

const LanguagePair& pair_of(PairId id) noexcept { return kPairs[static_cast<size_t>(id)]; }

std::optional<LanguagePair> find_pair(std::string_view name) {
  std::string key = ascii_lower(name);
  std::replace(key.begin(), key.end(), '_', '-');
  for (const auto& pair : kPairs) {
    if (key == pair.code || key == ascii_lower(pair.display_name)) return pair;
  }
  return std::nullopt;
}

const LanguagePair& parse_pair(std::string_view name) {
  auto found = find_pair(name);
  if (!found) throw PreconditionError("unknown language pair '" + std::string(name) + "'");
  return pair_of(found->id);
}

std::string_view script_name(MatrixScript script) noexcept {
  switch (script) {
    case MatrixScript::kDevanagari:
      return "Devanagari";
    case MatrixScript::kBengali:
      return "Bengali";
    case MatrixScript::kGujarati:
      return "Gujarati";
    case MatrixScript::kLatin:
      return "Latin";
  }
  return "Latin";
}

Dataset parse_parallel(std::string_view content, const LanguagePair& pair, bool jsonl) {
  Dataset dataset{pair, {}};
  std::vector<std::pair<size_t, std::string>> lines;
  {
    size_t line_no = 0;
    size_t start = 0;
    while (start <= content.size()) {
      size_t end = content.find('\n', start);
      if (end == std::string_view::npos) end = content.size();
      ++line_no;
      std::string line(content.substr(start, end - start));
      if (!line.empty() && line.back() == '\r') line.pop_back();
      // A trailing newline does not start another record.
      if (!(end == content.size() && line.empty())) lines.emplace_back(line_no, std::move(line));
      start = end + 1;
    }
  }
  const size_t width = std::max<size_t>(4, std::to_string(lines.size()).size());

  std::set<std::string> seen_ids;
  size_t index = 0;
  for (auto& [line_no, line] : lines) {
    if (jsonl && unicode::trim(line).empty()) continue;
    ParallelExample example{zero_padded(index, width), pair, {}, {}};
    if (jsonl) {
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(line_error(line_no, std::string("invalid JSON: ") + e.what()));
      }
      if (!obj.is_object() || !obj.contains("english") || !obj.contains("code_mixed") ||
          !obj["english"].is_string() || !obj["code_mixed"].is_string()) {
        throw ParseError(line_error(line_no, "expected string keys \"english\" and \"code_mixed\""));
      }
      example.english = obj["english"].get<std::string>();
      example.code_mixed = obj["code_mixed"].get<std::string>();
      if (obj.contains("id")) {
        const auto& id = obj["id"];
        example.id = id.is_string() ? id.get<std::string>() : id.dump();
      }
    } else {
      const auto tab = line.find('\t');
      if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
        throw ParseError(line_error(line_no, "expected exactly two TAB-separated fields"));
      }
      example.english = line.substr(0, tab);
      example.code_mixed = line.substr(tab + 1);
    }
    example.english = unicode::trim(example.english);
    example.code_mixed = unicode::trim(example.code_mixed);
    if (example.english.empty()) throw ParseError(line_error(line_no, "empty english field"));
    if (example.code_mixed.empty()) throw ParseError(line_error(line_no, "empty code_mixed field"));
    if (!seen_ids.insert(example.id).second) {
      throw ParseError(line_error(line_no, "duplicate id '" + example.id + "'"));
    }
    dataset.examples.push_back(std::move(example));
    ++index;
  }
  return dataset;
}

Dataset load_parallel(const std::filesystem::path& path, const LanguagePair& pair) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open dataset file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const auto ext = ascii_lower(path.extension().string());
  try {
    return parse_parallel(buffer.str(), pair, ext == ".jsonl" || ext == ".json");
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Split split_examples(const Dataset& dataset, size_t n_pool, size_t n_test, uint64_t seed) {
  const size_t n = dataset.size();
  if (n_pool + n_test > n) {
    throw PreconditionError("split needs " + std::to_string(n_pool + n_test) +
                            " examples but the dataset has " + std::to_string(n));
  }
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;

  std::mt19937_64 rng(seed);
  auto bounded = [&rng](uint64_t bound) {
    // Unbiased draw in [0, bound).
    const uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % bound;
    uint64_t r;
    do {
      r = rng();
    } while (r >= limit);
    return r % bound;
  };
  for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[bounded(i)]);

  std::vector<size_t> pool_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_pool));
  std::vector<size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(n_pool),
                               order.begin() + static_cast<std::ptrdiff_t>(n_pool + n_test));
  std::sort(pool_idx.begin(), pool_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  Split split{{dataset.pair, {}}, {dataset.pair, {}}};
  for (size_t i : pool_idx) split.pool.examples.push_back(dataset.examples[i]);
  for (size_t i : test_idx) split.test.examples.push_back(dataset.examples[i]);
  return split;
}

namespace {

bool strip_label(std::vector<char32_t>& text, const std::vector<std::string>& labels) {
  for (const auto& label : labels) {
    const auto label_cps = unicode::decode(label);
    if (label_cps.empty() || text.size() <= label_cps.size()) continue;
    bool match = true;
    for (size_t i = 0; i < label_cps.size() && match; ++i) {
      const char32_t a = text[i] < 128 ? static_cast<char32_t>(std::tolower(static_cast<int>(text[i]))) : text[i];
      const char32_t b = label_cps[i] < 128 ? static_cast<char32_t>(std::tolower(static_cast<int>(label_cps[i]))) : label_cps[i];
      match = a == b;
    }
    if (!match) continue;
    size_t pos = label_cps.size();
    while (pos < text.size() && (text[pos] == U' ' || text[pos] == U'\t')) ++pos;
    if (pos < text.size() && text[pos] == U':') {
      text.erase(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos + 1));
      return true;
    }
  }
  return false;
}

bool strip_quotes(std::vector<char32_t>& text) {
  static constexpr std::array<std::pair<char32_t, char32_t>, 6> kQuotes{{
      {U'"', U'"'}, {U'\'', U'\''}, {U'“', U'”'}, {U'‘', U'’'}, {U'«', U'»'}, {U'`', U'`'}}};
  if (text.size() < 2) return false;
  for (const auto& [open, close] : kQuotes) {
    if (text.front() != open || text.back() != close) continue;
    // `"a" and "b"` is not a quoted whole.
    const bool inner_clean = std::none_of(text.begin() + 1, text.end() - 1,
                                          [&](char32_t c) { return c == open || c == close; });
    if (!inner_clean) return false;
    text.erase(text.end() - 1);
    text.erase(text.begin());
    return true;
  }
  return false;
}

std::vector<char32_t> squeeze_and_trim(const std::vector<char32_t>& text) {
  std::vector<char32_t> out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char32_t c : text) {
    if (unicode::is_whitespace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string clean_output(std::string_view raw, const CleanOptions& options) {
  if (options.strict) return std::string(raw);
  auto text = squeeze_and_trim(unicode::decode(raw));
  bool changed = true;
  while (changed) {
    changed = strip_label(text, options.labels);
    changed = strip_quotes(text) || changed;
    text = squeeze_and_trim(text);
  }
  return unicode::encode(text);
}

std::string normalize_social(std::string_view text) {
  static const std::regex kUrl(R"(\S*(https?|t\.co/|www\.)\S*\s*)", std::regex::icase);
  static const std::regex kMention(R"(@\S*\s*)");

  std::string s = unicode::to_lower(text);
  s = std::regex_replace(s, kUrl, "");
  s = std::regex_replace(s, kMention, "");
  s.erase(std::remove(s.begin(), s.end(), '#'), s.end());

  const auto cps = unicode::decode(s);
  std::vector<char32_t> squeezed;
  squeezed.reserve(cps.size());
  for (size_t i = 0; i < cps.size();) {
    size_t j = i;
    while (j < cps.size() && cps[j] == cps[i]) ++j;
    const size_t run = j - i;
    squeezed.insert(squeezed.end(), run > 2 ? 1 : run, cps[i]);
    i = j;
  }
  return unicode::trim(unicode::encode(squeezed));
}

size_t ScriptProfile::letters() const noexcept {
  size_t total = 0;
  for (const auto& [_, count] : counts) total += count;
  return total;
}

ScriptProfile script_profile(std::string_view text) {
  ScriptProfile profile;
  for (const char* name : {"Latin", "Devanagari", "Bengali", "Gujarati", "Other"}) profile.counts[name] = 0;
  for (char32_t cp : unicode::decode(text)) {
    if (!unicode::is_letter(cp)) continue;
    switch (unicode::script_of(cp)) {
      case unicode::Script::kLatin:
        ++profile.counts["Latin"];
        break;
      case unicode::Script::kDevanagari:
        ++profile.counts["Devanagari"];
        break;
      case unicode::Script::kBengali:
        ++profile.counts["Bengali"];
        break;
      case unicode::Script::kGujarati:
        ++profile.counts["Gujarati"];
        break;
      case unicode::Script::kOther:
        ++profile.counts["Other"];
        break;
    }
  }
  const size_t total = profile.letters();
  profile.latin_ratio = total == 0 ? 0.0 : static_cast<double>(profile.counts["Latin"]) / static_cast<double>(total);
  return profile;
}

std::vector<std::string> roman_script_warnings(const Dataset& dataset) {
  std::vector<std::string> warnings;
  if (dataset.pair.is_latin()) return warnings;
  for (const auto& example : dataset.examples) {
    const auto profile = script_profile(example.code_mixed);
    if (profile.letters() > 0 && profile.latin_ratio < 1.0) {
      std::ostringstream msg;
      msg << "example " << example.id << ": code-mixed side is not fully Roman script (latin_ratio "
          << profile.latin_ratio << ")";
      warnings.push_back(msg.str());
    }
  }
  return warnings;
}

}  // namespace codemix
