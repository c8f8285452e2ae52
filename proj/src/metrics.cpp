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

#include "codemix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "codemix/errors.hpp"
#include "codemix/porter.hpp"
#include "codemix/unicode.hpp"

namespace codemix::metrics {

TokenSeq tokenize(std::string_view text) {
  TokenSeq seq{{}, std::string(kTokenPolicyId)};
  std::string current;
  auto flush = [&] {
    if (!current.empty()) seq.tokens.push_back(std::move(current));
    current.clear();
  };
  for (char32_t cp : unicode::decode(unicode::to_lower(text))) {
    if (unicode::is_whitespace(cp)) {
      flush();
    } else if (unicode::is_punct_or_symbol(cp)) {
      flush();
      seq.tokens.push_back(unicode::encode(cp));
    } else {
      current += unicode::encode(cp);
    }
  }
  flush();
  return seq;
}

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, uint64_t> ngram_counts(const std::vector<std::string>& tokens, size_t n) {
  std::map<Ngram, uint64_t> counts;
  if (tokens.size() < n) return counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[Ngram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

BleuResult corpus_bleu(std::span<const TokenSeq> hyps, std::span<const TokenSeq> refs, BleuOptions options) {
  if (hyps.size() != refs.size()) {
    throw PreconditionError("corpus_bleu: " + std::to_string(hyps.size()) + " hypotheses but " +
                            std::to_string(refs.size()) + " references");
  }
  if (hyps.empty()) throw PreconditionError("corpus_bleu: empty corpus");

  BleuResult result;
  auto& bd = result.breakdown;
  for (size_t i = 0; i < hyps.size(); ++i) {
    if (hyps[i].empty() && !options.allow_empty_hypotheses) {
      throw PreconditionError("corpus_bleu: hypothesis " + std::to_string(i) + " is empty");
    }
    bd.hyp_length += hyps[i].size();
    bd.ref_length += refs[i].size();
    for (size_t n = 1; n <= 4; ++n) {
      const auto hyp_counts = ngram_counts(hyps[i].tokens, n);
      const auto ref_counts = ngram_counts(refs[i].tokens, n);
      for (const auto& [gram, count] : hyp_counts) {
        bd.precisions[n - 1].total += count;
        if (auto it = ref_counts.find(gram); it != ref_counts.end()) {
          bd.precisions[n - 1].matched += std::min(count, it->second);
        }
      }
    }
  }
  if (bd.hyp_length == 0) {
    if (!options.allow_empty_hypotheses) throw PreconditionError("corpus_bleu: total hypothesis length is 0");
    bd.brevity_penalty = 0.0;
    return result;
  }
  bd.brevity_penalty = bd.hyp_length > bd.ref_length
                           ? 1.0
                           : std::exp(1.0 - static_cast<double>(bd.ref_length) / static_cast<double>(bd.hyp_length));

  double log_sum = 0.0;
  for (const auto& p : bd.precisions) {
    if (p.matched == 0) return result;  // unsmoothed: any zero precision -> 0
    log_sum += 0.25 * std::log(p.value());
  }
  result.score = bd.brevity_penalty * std::exp(log_sum);
  return result;
}

size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<size_t> prev(b.size() + 1, 0);
  std::vector<size_t> cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeL rouge_l(const TokenSeq& hyp, const TokenSeq& ref) {
  if (hyp.empty() || ref.empty()) return {};
  const auto lcs = static_cast<double>(lcs_length(hyp.tokens, ref.tokens));
  RougeL r;
  r.precision = lcs / static_cast<double>(hyp.size());
  r.recall = lcs / static_cast<double>(ref.size());
  r.f1 = r.precision + r.recall == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

SynonymTable load_synonyms(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open synonym table " + path.string());
  SynonymTable table;
  std::string line;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', '\t');
    std::vector<std::string> group;
    std::istringstream fields(line);
    std::string word;
    while (std::getline(fields, word, '\t')) {
      word = unicode::to_lower(unicode::trim(word));
      if (!word.empty()) group.push_back(word);
    }
    for (const auto& a : group) {
      for (const auto& b : group) {
        if (a != b) table[a].insert(b);
      }
    }
  }
  return table;
}

namespace {

struct Indexed {
  size_t index;
  std::string word;
};

// Mirrors the reference implementation's backward pop-based matcher.
void match_stage(std::vector<Indexed>& hyp, std::vector<Indexed>& ref,
                 std::vector<std::pair<size_t, size_t>>& matches, const auto& equivalent) {
  for (size_t i = hyp.size(); i-- > 0;) {
    for (size_t j = ref.size(); j-- > 0;) {
      if (equivalent(hyp[i].word, ref[j].word)) {
        matches.emplace_back(hyp[i].index, ref[j].index);
        hyp.erase(hyp.begin() + static_cast<std::ptrdiff_t>(i));
        ref.erase(ref.begin() + static_cast<std::ptrdiff_t>(j));
        break;
      }
    }
  }
}

std::vector<Indexed> enumerate(const TokenSeq& seq) {
  std::vector<Indexed> out;
  out.reserve(seq.size());
  for (size_t i = 0; i < seq.size(); ++i) out.push_back({i, seq.tokens[i]});
  return out;
}

}  // namespace

MeteorAlignment meteor_align(const TokenSeq& hyp, const TokenSeq& ref, const MeteorOptions& options) {
  auto hyp_left = enumerate(hyp);
  auto ref_left = enumerate(ref);
  MeteorAlignment alignment;
  match_stage(hyp_left, ref_left, alignment.matches, [](const std::string& a, const std::string& b) { return a == b; });
  if (options.stemming) {
    for (auto& item : hyp_left) item.word = porter_stem(item.word);
    for (auto& item : ref_left) item.word = porter_stem(item.word);
    match_stage(hyp_left, ref_left, alignment.matches,
                [](const std::string& a, const std::string& b) { return a == b; });
  }
  if (options.synonyms) {
    const auto& table = *options.synonyms;
    match_stage(hyp_left, ref_left, alignment.matches, [&table](const std::string& a, const std::string& b) {
      if (a == b) return true;
      auto it = table.find(a);
      return it != table.end() && it->second.contains(b);
    });
  }
  std::sort(alignment.matches.begin(), alignment.matches.end());

  if (!alignment.matches.empty()) {
    alignment.chunks = 1;
    for (size_t i = 1; i < alignment.matches.size(); ++i) {
      const auto& [h0, r0] = alignment.matches[i - 1];
      const auto& [h1, r1] = alignment.matches[i];
      if (!(h1 == h0 + 1 && r1 == r0 + 1)) ++alignment.chunks;
    }
  }
  return alignment;
}

double meteor(const TokenSeq& hyp, const TokenSeq& ref, const MeteorOptions& options) {
  if (hyp.empty() || ref.empty()) return 0.0;
  const auto alignment = meteor_align(hyp, ref, options);
  const auto m = static_cast<double>(alignment.matches.size());
  if (m == 0.0) return 0.0;
  const double precision = m / static_cast<double>(hyp.size());
  const double recall = m / static_cast<double>(ref.size());
  const double f_mean = 10.0 * precision * recall / (recall + 9.0 * precision);
  const double fragmentation = static_cast<double>(alignment.chunks) / m;
  const double penalty = 0.5 * fragmentation * fragmentation * fragmentation;
  return f_mean * (1.0 - penalty);
}

MetricReport evaluate_corpus(std::span<const std::pair<std::string, std::string>> pairs, Direction direction,
                             const EvaluateOptions& options) {
  if (pairs.empty()) throw PreconditionError("evaluate_corpus: no pairs to score");
  MetricReport report;
  report.n_pairs = pairs.size();
  report.stemming = options.stemming.value_or(direction == Direction::kCm2En);
  report.synonym_table_id = options.synonyms ? options.synonym_table_id : "none";
  report.cleaned = !options.clean.strict;

  std::vector<TokenSeq> hyps;
  std::vector<TokenSeq> refs;
  hyps.reserve(pairs.size());
  refs.reserve(pairs.size());
  for (const auto& [hyp, ref] : pairs) {
    hyps.push_back(tokenize(clean_output(hyp, options.clean)));
    refs.push_back(tokenize(ref));
  }

  const auto bleu = corpus_bleu(hyps, refs, BleuOptions{options.allow_empty_hypotheses});
  report.bleu = bleu.score;
  report.bleu_breakdown = bleu.breakdown;

  const MeteorOptions meteor_options{report.stemming, options.synonyms, report.synonym_table_id};
  double rouge_sum = 0.0;
  double meteor_sum = 0.0;
  for (size_t i = 0; i < hyps.size(); ++i) {
    PairScores scores{rouge_l(hyps[i], refs[i]).f1, meteor(hyps[i], refs[i], meteor_options)};
    rouge_sum += scores.rouge_l_f1;
    meteor_sum += scores.meteor;
    report.per_pair.push_back(scores);
  }
  report.rouge_l_f1 = rouge_sum / static_cast<double>(hyps.size());
  report.meteor = meteor_sum / static_cast<double>(hyps.size());
  return report;
}

std::string format_pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", fraction * 100.0);
  return buf;
}

}  // namespace codemix::metrics
