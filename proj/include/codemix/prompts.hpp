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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "codemix/corpus.hpp"

namespace codemix {

enum class Direction { kEn2Cm, kCm2En };

enum class PromptVariant {
  kKshotAlpha,
  kKshotBeta,
  kRule,
  kExtraction,
  kTranslateCm2En,
  kTranslitToMatrix,
  kTranslateEn2Cm0Shot,
  kChatAnswer,
  kChatToCm,
};

enum class RuleId { kR1 = 1, kR2 = 2, kR3 = 3, kR4 = 4 };

/// k-shot alpha shows only code-mixed examples; beta shows example pairs.
enum class ShotStyle { kAlpha, kBeta };

std::string_view to_string(Direction d) noexcept;
std::string_view to_string(PromptVariant v) noexcept;
Direction parse_direction(std::string_view s);
RuleId parse_rule(int number);
inline int rule_number(RuleId r) noexcept { return static_cast<int>(r); }

struct PromptKind {
  PromptVariant variant = PromptVariant::kKshotAlpha;
  int k = 0;
  std::optional<RuleId> rule;
  Direction direction = Direction::kEn2Cm;

  static PromptKind kshot(ShotStyle style, int k, Direction direction);
  static PromptKind rule_chain(RuleId rule);
  static PromptKind simple(PromptVariant variant, Direction direction);

  bool is_kshot() const noexcept {
    return variant == PromptVariant::kKshotAlpha || variant == PromptVariant::kKshotBeta;
  }
  /// Throws PreconditionError unless rule is set exactly for kRule and k is
  /// one of 0, 1, 10, 20 for k-shot kinds.
  void validate() const;
};

inline constexpr int kAllowedShots[] = {0, 1, 10, 20};

struct RenderedPrompt {
  PromptKind kind;
  std::optional<LanguagePair> pair;
  std::string text;
  std::map<std::string, std::string> placeholders_filled;
};

/// Names of the embedded template files (without `.txt`).
std::vector<std::string_view> template_names();
/// Template body with its leading `## ` comment lines removed.
std::string_view template_body(std::string_view name);

/// Replaces every `{slot}` in a single pass. Substituted values are never
/// rescanned. Throws PreconditionError on a slot missing from `values`.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

RenderedPrompt render_kshot(const LanguagePair& pair, Direction direction, ShotStyle style, int k,
                            std::span<const ParallelExample> shots, std::string_view sentence);

RenderedPrompt render_rule(RuleId rule, const LanguagePair& pair, std::string_view sentence);

RenderedPrompt render_extraction(std::string_view llm_output);

RenderedPrompt render_translit_to_matrix(const LanguagePair& pair, std::string_view sentence);
RenderedPrompt render_translate_cm2en(const LanguagePair& pair, std::string_view sentence);
RenderedPrompt render_translate_en2cm(const LanguagePair& pair, std::string_view sentence);

struct HistoryTurn {
  std::string user_en;
  std::string assistant_en;
};

RenderedPrompt render_chat_answer(std::span<const std::string> context_chunks,
                                  std::span<const HistoryTurn> history, std::string_view question_en);
RenderedPrompt render_chat_to_cm(const LanguagePair& pair, std::string_view answer_en);

struct RuleStep {
  int number = 0;
  std::string label;
  std::string body;
};

struct RuleTranscript {
  RuleId rule = RuleId::kR1;
  std::vector<RuleStep> steps;
  std::string final_sentence;
};

/// Splits a numbered rule-chain transcript ("1. Label: body" lines, bodies may
/// continue on following lines). The final sentence is the first non-empty
/// line after the last step's label colon. Input is NFC-normalized first.
/// Throws ParseError when no step numbered 1 exists or the last step has no
/// sentence payload.
RuleTranscript parse_rule_transcript(std::string_view text, RuleId rule);

}  // namespace codemix
