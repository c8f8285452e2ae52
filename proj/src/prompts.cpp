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

#include "codemix/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "codemix/errors.hpp"
#include "codemix/unicode.hpp"
#include "codemix_templates.hpp"

namespace codemix {

std::string_view to_string(Direction d) noexcept { return d == Direction::kEn2Cm ? "en2cm" : "cm2en"; }

std::string_view to_string(PromptVariant v) noexcept {
  switch (v) {
    case PromptVariant::kKshotAlpha:
      return "kshot_alpha";
    case PromptVariant::kKshotBeta:
      return "kshot_beta";
    case PromptVariant::kRule:
      return "rule";
    case PromptVariant::kExtraction:
      return "extraction";
    case PromptVariant::kTranslateCm2En:
      return "translate_cm2en";
    case PromptVariant::kTranslitToMatrix:
      return "translit_to_matrix";
    case PromptVariant::kTranslateEn2Cm0Shot:
      return "translate_en2cm_0shot";
    case PromptVariant::kChatAnswer:
      return "chat_answer";
    case PromptVariant::kChatToCm:
      return "chat_to_cm";
  }
  return "unknown";
}

Direction parse_direction(std::string_view s) {
  if (s == "en2cm") return Direction::kEn2Cm;
  if (s == "cm2en") return Direction::kCm2En;
  throw PreconditionError("unknown direction '" + std::string(s) + "' (expected en2cm or cm2en)");
}

RuleId parse_rule(int number) {
  if (number < 1 || number > 4) throw PreconditionError("unknown rule id " + std::to_string(number));
  return static_cast<RuleId>(number);
}

PromptKind PromptKind::kshot(ShotStyle style, int k, Direction direction) {
  PromptKind kind{style == ShotStyle::kAlpha ? PromptVariant::kKshotAlpha : PromptVariant::kKshotBeta, k,
                  std::nullopt, direction};
  kind.validate();
  return kind;
}

PromptKind PromptKind::rule_chain(RuleId rule) {
  return PromptKind{PromptVariant::kRule, 0, rule, Direction::kEn2Cm};
}

PromptKind PromptKind::simple(PromptVariant variant, Direction direction) {
  PromptKind kind{variant, 0, std::nullopt, direction};
  kind.validate();
  return kind;
}

void PromptKind::validate() const {
  if ((variant == PromptVariant::kRule) != rule.has_value()) {
    throw PreconditionError("rule id must be present exactly for rule prompts");
  }
  if (is_kshot()) {
    if (std::find(std::begin(kAllowedShots), std::end(kAllowedShots), k) == std::end(kAllowedShots)) {
      throw PreconditionError("k must be one of 0, 1, 10, 20 (got " + std::to_string(k) + ")");
    }
  } else if (k != 0) {
    throw PreconditionError("k is only meaningful for k-shot prompts");
  }
}

std::vector<std::string_view> template_names() {
  std::vector<std::string_view> names;
  for (const auto& [name, _] : prompts::embedded::kTemplates) names.push_back(name);
  return names;
}

std::string_view template_body(std::string_view name) {
  for (const auto& [key, raw] : prompts::embedded::kTemplates) {
    if (key != name) continue;
    std::string_view body = raw;
    while (body.starts_with("## ") || body.starts_with("##\n")) {
      const auto nl = body.find('\n');
      body = nl == std::string_view::npos ? std::string_view{} : body.substr(nl + 1);
    }
    if (body.ends_with('\n')) body.remove_suffix(1);
    return body;
  }
  throw PreconditionError("no prompt template named '" + std::string(name) + "'");
}

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      size_t j = i + 1;
      while (j < tmpl.size() && (std::islower(static_cast<unsigned char>(tmpl[j])) || tmpl[j] == '_')) ++j;
      if (j < tmpl.size() && tmpl[j] == '}' && j > i + 1) {
        const std::string slot(tmpl.substr(i + 1, j - i - 1));
        auto it = values.find(slot);
        if (it == values.end()) throw PreconditionError("no value for template slot {" + slot + "}");
        out += it->second;
        i = j + 1;
        continue;
      }
    }
    out += tmpl[i++];
  }
  return out;
}

namespace {

std::map<std::string, std::string> language_slots(const LanguagePair& pair) {
  return {
      {"matrix_language", std::string(pair.matrix_language)},
      {"matrix_alias", std::string(pair.prompt_alias)},
      {"matrix_script", std::string(script_name(pair.matrix_script))},
  };
}

std::string require_sentence(std::string_view sentence) {
  std::string trimmed = unicode::trim(sentence);
  if (trimmed.empty()) throw PreconditionError("input sentence is empty");
  return trimmed;
}

std::string quote_text(std::string_view s) { return "\"" + std::string(s) + "\""; }

std::string format_examples(Direction direction, ShotStyle style, std::span<const ParallelExample> shots) {
  std::vector<std::string> blocks;
  for (const auto& shot : shots) {
    if (style == ShotStyle::kAlpha) {
      blocks.push_back(quote_text(shot.code_mixed));
    } else if (direction == Direction::kEn2Cm) {
      blocks.push_back("English: " + quote_text(shot.english) + "\n\nCode-Mixed: " + quote_text(shot.code_mixed));
    } else {
      blocks.push_back("Code-Mixed: " + quote_text(shot.code_mixed) + "\n\nEnglish: " + quote_text(shot.english));
    }
  }
  const std::string separator = style == ShotStyle::kAlpha ? "\n" : "\n\n";
  std::string out;
  for (size_t i = 0; i < blocks.size(); ++i) {
    if (i > 0) out += separator;
    out += blocks[i];
  }
  return out;
}

RenderedPrompt finish(PromptKind kind, std::optional<LanguagePair> pair, std::string_view template_name,
                      std::map<std::string, std::string> slots) {
  RenderedPrompt prompt{kind, pair, fill_template(template_body(template_name), slots), {}};
  prompt.placeholders_filled = std::move(slots);
  return prompt;
}

}  // namespace

RenderedPrompt render_kshot(const LanguagePair& pair, Direction direction, ShotStyle style, int k,
                            std::span<const ParallelExample> shots, std::string_view sentence) {
  const PromptKind kind = PromptKind::kshot(style, k, direction);
  if (shots.size() != static_cast<size_t>(k)) {
    throw PreconditionError("k-shot prompt needs " + std::to_string(k) + " examples but got " +
                            std::to_string(shots.size()));
  }
  auto slots = language_slots(pair);
  slots["sentence"] = require_sentence(sentence);

  std::string name(direction == Direction::kEn2Cm ? "en2cm" : "cm2en");
  if (k == 0) {
    name += "_0shot";
  } else {
    name += style == ShotStyle::kAlpha ? "_alpha" : "_beta";
    name += k == 1 ? "_1" : "_k";
    slots["examples"] = format_examples(direction, style, shots);
  }
  return finish(kind, pair, name, std::move(slots));
}

RenderedPrompt render_rule(RuleId rule, const LanguagePair& pair, std::string_view sentence) {
  const int number = rule_number(rule);
  if (number < 1 || number > 4) throw PreconditionError("unknown rule id " + std::to_string(number));

  // Number the "#." step lines before filling so sentence text can never be
  // mistaken for a step marker.
  std::istringstream lines{std::string(template_body("rule_" + std::to_string(number)))};
  std::string numbered;
  std::string line;
  int step = 0;
  bool first = true;
  while (std::getline(lines, line)) {
    if (line.starts_with("#.[translit] ")) {
      if (pair.is_latin()) continue;
      line = std::to_string(++step) + ". " + line.substr(13);
    } else if (line.starts_with("#. ")) {
      line = std::to_string(++step) + ". " + line.substr(3);
    }
    if (!first) numbered += '\n';
    numbered += line;
    first = false;
  }

  auto slots = language_slots(pair);
  slots["sentence"] = require_sentence(sentence);
  RenderedPrompt prompt{PromptKind::rule_chain(rule), pair, fill_template(numbered, slots), {}};
  prompt.placeholders_filled = std::move(slots);
  return prompt;
}

RenderedPrompt render_extraction(std::string_view llm_output) {
  if (unicode::trim(llm_output).empty()) throw PreconditionError("rule transcript to extract from is empty");
  size_t longest = 0;
  size_t run = 0;
  for (char c : llm_output) {
    run = c == '`' ? run + 1 : 0;
    longest = std::max(longest, run);
  }
  std::map<std::string, std::string> slots{
      {"transcript", std::string(llm_output)},
      {"fence", std::string(std::max<size_t>(3, longest + 1), '`')},
  };
  return finish(PromptKind::simple(PromptVariant::kExtraction, Direction::kEn2Cm), std::nullopt, "extraction",
                std::move(slots));
}

RenderedPrompt render_translit_to_matrix(const LanguagePair& pair, std::string_view sentence) {
  if (pair.is_latin()) {
    throw PreconditionError(std::string(pair.display_name) + " is Latin-script; nothing to transliterate");
  }
  auto slots = language_slots(pair);
  slots["sentence"] = require_sentence(sentence);
  return finish(PromptKind::simple(PromptVariant::kTranslitToMatrix, Direction::kCm2En), pair,
                "translit_to_matrix", std::move(slots));
}

RenderedPrompt render_translate_cm2en(const LanguagePair& pair, std::string_view sentence) {
  auto slots = language_slots(pair);
  slots["sentence"] = require_sentence(sentence);
  return finish(PromptKind::simple(PromptVariant::kTranslateCm2En, Direction::kCm2En), pair, "cm2en_0shot",
                std::move(slots));
}

RenderedPrompt render_translate_en2cm(const LanguagePair& pair, std::string_view sentence) {
  auto slots = language_slots(pair);
  slots["sentence"] = require_sentence(sentence);
  return finish(PromptKind::simple(PromptVariant::kTranslateEn2Cm0Shot, Direction::kEn2Cm), pair, "en2cm_0shot",
                std::move(slots));
}

RenderedPrompt render_chat_answer(std::span<const std::string> context_chunks,
                                  std::span<const HistoryTurn> history, std::string_view question_en) {
  std::string context;
  for (size_t i = 0; i < context_chunks.size(); ++i) {
    if (i > 0) context += "\n\n";
    context += unicode::trim(context_chunks[i]);
  }
  std::string history_text;
  if (!history.empty()) {
    history_text = "Conversation so far:\n";
    for (const auto& turn : history) {
      history_text += "User: " + turn.user_en + "\nAssistant: " + turn.assistant_en + "\n";
    }
    history_text += "\n";
  }
  std::map<std::string, std::string> slots{
      {"context", context},
      {"history", history_text},
      {"question", require_sentence(question_en)},
  };
  return finish(PromptKind::simple(PromptVariant::kChatAnswer, Direction::kEn2Cm), std::nullopt, "chat_answer",
                std::move(slots));
}

RenderedPrompt render_chat_to_cm(const LanguagePair& pair, std::string_view answer_en) {
  auto slots = language_slots(pair);
  slots["sentence"] = require_sentence(answer_en);
  return finish(PromptKind::simple(PromptVariant::kChatToCm, Direction::kEn2Cm), pair, "chat_to_cm",
                std::move(slots));
}

namespace {

// "12. rest" -> (12, "rest"); leading whitespace allowed.
std::optional<std::pair<int, std::string>> step_marker(std::string_view line) {
  size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  const size_t digits_begin = i;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == digits_begin || i - digits_begin > 3 || i >= line.size() || line[i] != '.') return std::nullopt;
  const int number = std::stoi(std::string(line.substr(digits_begin, i - digits_begin)));
  ++i;
  if (i < line.size() && line[i] != ' ' && line[i] != '\t') return std::nullopt;
  return std::make_pair(number, std::string(line.substr(i)));
}

}  // namespace

RuleTranscript parse_rule_transcript(std::string_view text, RuleId rule) {
  std::string normalized = unicode::nfc(text);
  normalized.erase(std::remove(normalized.begin(), normalized.end(), '\r'), normalized.end());

  struct RawStep {
    int number;
    std::string content;
  };
  std::vector<RawStep> raw;
  std::istringstream lines(normalized);
  std::string line;
  while (std::getline(lines, line)) {
    // Only the next expected number opens a step, so "3.5 million" inside a
    // body stays part of that body.
    if (auto marker = step_marker(line); marker && marker->first == static_cast<int>(raw.size()) + 1) {
      raw.push_back({marker->first, marker->second});
    } else if (!raw.empty()) {
      raw.back().content += "\n" + line;
    }
  }
  if (raw.empty()) throw ParseError("rule transcript has no numbered steps");

  RuleTranscript transcript{rule, {}, {}};
  for (const auto& step : raw) {
    RuleStep parsed{step.number, {}, {}};
    const auto colon = step.content.find(':');
    if (colon == std::string::npos) {
      parsed.label = unicode::trim(step.content.substr(0, step.content.find('\n')));
    } else {
      parsed.label = unicode::trim(step.content.substr(0, colon));
      parsed.body = unicode::trim(step.content.substr(colon + 1));
    }
    transcript.steps.push_back(std::move(parsed));
  }

  const std::string& last_body = transcript.steps.back().body;
  std::istringstream body_lines(last_body);
  while (std::getline(body_lines, line)) {
    std::string candidate = unicode::trim(line);
    if (!candidate.empty()) {
      transcript.final_sentence = std::move(candidate);
      break;
    }
  }
  if (transcript.final_sentence.empty()) {
    throw ParseError("last step (" + std::to_string(transcript.steps.back().number) + ") has no sentence payload");
  }
  return transcript;
}

}  // namespace codemix
