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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "codemix/corpus.hpp"
#include "codemix/llm.hpp"
#include "codemix/metrics.hpp"
#include "codemix/prompts.hpp"

namespace codemix::runner {

enum class Method { kKshotAlpha, kKshotBeta, kRule, kTranslitBridge };

std::string_view to_string(Method m) noexcept;
/// "kshot-alpha", "kshot-beta", "rule", "translit-bridge".
Method parse_method(std::string_view s);

/// Commit the library was built from ("unknown" outside a git checkout).
std::string_view git_hash() noexcept;

struct ExperimentConfig {
  LanguagePair pair = pair_of(PairId::kEnHi);
  Direction direction = Direction::kEn2Cm;
  Method method = Method::kKshotBeta;
  int k = 0;
  std::optional<RuleId> rule;
  std::string backend_id = "mock";
  llm::CompletionParams params;
  uint64_t seed = 0;
  size_t n_pool = 20;
  // Unset: every example left after the pool.
  std::optional<size_t> n_test;
  std::filesystem::path dataset_path;
  std::filesystem::path output_dir;
  // Concurrent requests. Output never depends on it.
  size_t workers = 4;
  bool drop_degenerate = false;
  metrics::EvaluateOptions scoring;
  std::vector<PairId> bridge_pairs = {PairId::kEnBn, PairId::kEnGu};

  /// Throws PreconditionError on an inconsistent method/k/rule/direction.
  void validate() const;
  /// Row label in result tables, e.g. "10-shot-beta", "rule-2",
  /// "0-shot (cm2en)".
  std::string experiment_label() const;
  /// Model column in result tables: params.model_name, else backend_id.
  std::string model_label() const;
};

/// One backend call inside a record.
struct Stage {
  std::string name;  // "generate", "rule", "extract", "translit", "translate"
  std::string prompt_hash;
  std::string raw_output;
  llm::DegenerateFlags flags;
  std::string error;
};

struct GenerationRecord {
  std::string example_id;
  std::string input;
  std::string reference;
  std::vector<Stage> stages;
  // Present exactly for rule-chain runs; empty step list when parsing failed.
  std::optional<RuleTranscript> steps;
  std::string raw_final;
  std::string cleaned;
  llm::DegenerateFlags degenerate_flags;
  // "llm" or "parser" for rule chains.
  std::string extraction_source;
  bool failed = false;
  bool parse_failed = false;
  std::string error;
  std::optional<metrics::PairScores> scores;

  std::vector<std::string> prompt_hashes() const;
};

struct RunResult {
  ExperimentConfig config;
  std::vector<GenerationRecord> records;
  metrics::MetricReport report;
  size_t failures = 0;
  std::vector<std::string> script_warnings;
};

/// k-shot alpha/beta, either direction. Shots are the first k pool examples.
RunResult run_kshot(const ExperimentConfig& config, const Dataset& dataset, llm::Client& client);
/// Rule prompt, then LLM extraction with the local transcript parser as
/// fallback.
RunResult run_rule_chain(const ExperimentConfig& config, const Dataset& dataset, llm::Client& client);
/// Code-mixed -> matrix script -> English.
RunResult run_translit_bridge(const ExperimentConfig& config, const Dataset& dataset, llm::Client& client);
/// Dispatches on config.method.
RunResult run_experiment(const ExperimentConfig& config, const Dataset& dataset, llm::Client& client);

/// records.jsonl content: a `_meta` header line then one line per record.
std::string records_jsonl(const RunResult& result);
/// report.json content.
std::string report_json(const RunResult& result);

struct TableEntry {
  std::string model;
  std::string experiment;
  PairId pair;
  metrics::MetricReport report;
};

TableEntry table_entry(const RunResult& result);
/// Reads a report.json written by write_run.
TableEntry load_table_entry(const std::filesystem::path& run_dir);

struct TableCell {
  double bleu = 0.0;
  double rouge_l = 0.0;
  double meteor = 0.0;
};

struct TableRow {
  std::string model;
  std::string experiment;
  std::array<std::optional<TableCell>, 5> cells;  // HI BN GU FR ES
};

struct ResultTable {
  std::vector<TableRow> rows;

  std::string to_tsv() const;
  std::string to_markdown() const;
};

/// Rows grouped by model, then experiment, both in first-seen order. Throws
/// on an empty input or two reports for the same cell.
ResultTable emit_table(std::span<const TableEntry> entries);

/// Writes records.jsonl, report.json, table.tsv, table.md and, when a
/// recorder is given, calls.jsonl into `dir`.
void write_run(const RunResult& result, const std::filesystem::path& dir,
               const llm::CallRecorder* calls = nullptr);

}  // namespace codemix::runner
