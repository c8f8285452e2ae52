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
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "codemix/corpus.hpp"
#include "codemix/prompts.hpp"

namespace codemix::metrics {

/// Identifier of the one tokenization policy; embedded in every report.
inline constexpr std::string_view kTokenPolicyId = "lower-punct-ws/v1";

struct TokenSeq {
  std::vector<std::string> tokens;
  std::string policy_id;

  size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
};

/// Unicode lowercasing, then every punctuation or symbol codepoint becomes its
/// own token and the rest splits on whitespace. Diacritics are kept.
TokenSeq tokenize(std::string_view text);

struct Fraction {
  uint64_t matched = 0;
  uint64_t total = 0;
  double value() const noexcept { return total == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(total); }
};

struct BleuBreakdown {
  std::array<Fraction, 4> precisions{};
  uint64_t hyp_length = 0;
  uint64_t ref_length = 0;
  double brevity_penalty = 0.0;
};

struct BleuResult {
  double score = 0.0;  // [0, 1]
  BleuBreakdown breakdown;
};

struct BleuOptions {
  // Empty hypotheses are an error by default; runs that score failed records
  // as empty output turn this on.
  bool allow_empty_hypotheses = false;
};

/// Unsmoothed corpus BLEU-4 with uniform weights and a single reference per
/// hypothesis. Clipped n-gram counts are summed over the corpus before the
/// geometric mean; any zero precision gives 0.
BleuResult corpus_bleu(std::span<const TokenSeq> hyps, std::span<const TokenSeq> refs, BleuOptions options = {});

struct RougeL {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);
RougeL rouge_l(const TokenSeq& hyp, const TokenSeq& ref);

/// Symmetric word -> synonyms map.
using SynonymTable = std::map<std::string, std::set<std::string>>;

/// One synonym group per line, words separated by TABs or commas.
SynonymTable load_synonyms(const std::filesystem::path& path);

struct MeteorOptions {
  bool stemming = false;
  std::shared_ptr<const SynonymTable> synonyms;
  std::string synonym_table_id = "none";
};

struct MeteorAlignment {
  // (hyp index, ref index), sorted by hyp index.
  std::vector<std::pair<size_t, size_t>> matches;
  size_t chunks = 0;
};

/// Greedy one-to-one alignment in stages: exact, Porter stem (optional),
/// synonym table (optional). Each stage walks the hypothesis and the
/// reference from the end and pairs each hypothesis word with the last
/// still-free equal reference word.
MeteorAlignment meteor_align(const TokenSeq& hyp, const TokenSeq& ref, const MeteorOptions& options = {});

/// F_mean = 10PR / (R + 9P), penalty = 0.5 (chunks / m)^3. Range [0, 1].
double meteor(const TokenSeq& hyp, const TokenSeq& ref, const MeteorOptions& options = {});

struct PairScores {
  double rouge_l_f1 = 0.0;
  double meteor = 0.0;
};

/// Scores are stored in [0, 1]; `*_pct` give the table scale.
struct MetricReport {
  double bleu = 0.0;
  double rouge_l_f1 = 0.0;
  double meteor = 0.0;
  size_t n_pairs = 0;
  bool stemming = false;
  std::string synonym_table_id = "none";
  std::string policy_id{kTokenPolicyId};
  bool cleaned = true;
  BleuBreakdown bleu_breakdown;
  std::vector<PairScores> per_pair;

  double bleu_pct() const noexcept { return bleu * 100.0; }
  double rouge_l_pct() const noexcept { return rouge_l_f1 * 100.0; }
  double meteor_pct() const noexcept { return meteor * 100.0; }
};

struct EvaluateOptions {
  // Unset: stemming on exactly for code-mixed -> English.
  std::optional<bool> stemming;
  std::shared_ptr<const SynonymTable> synonyms;
  std::string synonym_table_id = "none";
  CleanOptions clean;
  bool allow_empty_hypotheses = false;
};

/// Cleans hypotheses, tokenizes both sides and computes all three metrics.
/// Pairs are (hypothesis, reference).
MetricReport evaluate_corpus(std::span<const std::pair<std::string, std::string>> pairs, Direction direction,
                             const EvaluateOptions& options = {});

/// Two-decimal rendering of a [0, 1] score on the 0-100 scale.
std::string format_pct(double fraction);

}  // namespace codemix::metrics
