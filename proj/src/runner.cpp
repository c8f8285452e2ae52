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

#include "codemix/runner.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "codemix/errors.hpp"

#ifndef CODEMIX_GIT_HASH
#define CODEMIX_GIT_HASH "unknown"
#endif

namespace codemix::runner {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::array<std::pair<Method, std::string_view>, 4> kMethodNames{{
    {Method::kKshotAlpha, "kshot-alpha"},
    {Method::kKshotBeta, "kshot-beta"},
    {Method::kRule, "rule"},
    {Method::kTranslitBridge, "translit-bridge"},
}};

bool is_kshot(Method m) { return m == Method::kKshotAlpha || m == Method::kKshotBeta; }

bool has_flags(const llm::DegenerateFlags& flags) { return !flags.empty(); }

// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <typename Fn>
void parallel_for(size_t n, size_t workers, Fn&& fn) {
  workers = std::clamp<size_t>(workers, 1, std::max<size_t>(n, 1));
  if (workers == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::jthread> threads;
  threads.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

Stage call(llm::Client& client, const RenderedPrompt& prompt, const llm::CompletionParams& params,
           std::string name) {
  Stage stage;
  stage.name = std::move(name);
  stage.prompt_hash = llm::prompt_hash(prompt.text);
  try {
    auto result = client.complete(prompt, params);
    stage.raw_output = std::move(result.text);
    stage.flags = std::move(result.degenerate_flags);
  } catch (const std::exception& e) {
    stage.error = e.what();
  }
  return stage;
}

struct Prepared {
  Split split;
  const std::string& (*input)(const ParallelExample&);
  const std::string& (*reference)(const ParallelExample&);
};

const std::string& english_of(const ParallelExample& e) { return e.english; }
const std::string& code_mixed_of(const ParallelExample& e) { return e.code_mixed; }

Prepared prepare(const ExperimentConfig& config, const Dataset& dataset) {
  config.validate();
  if (dataset.pair != config.pair) {
    throw PreconditionError("dataset is " + std::string(dataset.pair.code) + " but the config says " +
                            std::string(config.pair.code));
  }
  if (is_kshot(config.method) && static_cast<size_t>(config.k) > config.n_pool) {
    throw PreconditionError("k=" + std::to_string(config.k) + " needs " + std::to_string(config.k) +
                            " pool examples but the pool has " + std::to_string(config.n_pool));
  }
  const size_t n_test = config.n_test.value_or(dataset.size() > config.n_pool ? dataset.size() - config.n_pool : 0);
  Prepared p{split_examples(dataset, config.n_pool, n_test, config.seed), nullptr, nullptr};
  if (p.split.test.empty()) throw PreconditionError("the test split is empty");
  const bool en2cm = config.direction == Direction::kEn2Cm;
  p.input = en2cm ? english_of : code_mixed_of;
  p.reference = en2cm ? code_mixed_of : english_of;
  return p;
}

// Shared driver: fills records in test order, then scores.
template <typename PerExample>
RunResult drive(const ExperimentConfig& config, const Dataset& dataset, PerExample&& per_example) {
  const auto prepared = prepare(config, dataset);
  const auto& test = prepared.split.test.examples;

  RunResult run;
  run.config = config;
  run.script_warnings = roman_script_warnings(dataset);
  run.records.resize(test.size());
  parallel_for(test.size(), config.workers, [&](size_t i) {
    GenerationRecord& record = run.records[i];
    record.example_id = test[i].id;
    record.input = prepared.input(test[i]);
    record.reference = prepared.reference(test[i]);
    try {
      per_example(prepared, record);
    } catch (const std::exception& e) {
      record.failed = true;
      record.error = e.what();
    }
    if (record.failed) record.raw_final.clear();
    record.degenerate_flags = llm::detect_degenerate(record.raw_final);
    if (config.drop_degenerate && has_flags(record.degenerate_flags)) record.raw_final.clear();
    record.cleaned = clean_output(record.raw_final, config.scoring.clean);
  });

  run.failures = static_cast<size_t>(
      std::count_if(run.records.begin(), run.records.end(), [](const auto& r) { return r.failed; }));
  if (run.failures == run.records.size()) {
    throw Error("all " + std::to_string(run.failures) + " examples failed; first error: " + run.records.front().error);
  }

  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(run.records.size());
  for (const auto& r : run.records) pairs.emplace_back(r.raw_final, r.reference);
  auto scoring = config.scoring;
  scoring.allow_empty_hypotheses = true;
  run.report = metrics::evaluate_corpus(pairs, config.direction, scoring);
  for (size_t i = 0; i < run.records.size(); ++i) run.records[i].scores = run.report.per_pair[i];
  return run;
}

void require_method(const ExperimentConfig& config, bool ok, std::string_view what) {
  if (!ok) {
    throw PreconditionError(std::string(what) + " called with method " + std::string(to_string(config.method)));
  }
}

}  // namespace

std::string_view to_string(Method m) noexcept {
  for (const auto& [method, name] : kMethodNames) {
    if (method == m) return name;
  }
  return "?";
}

Method parse_method(std::string_view s) {
  for (const auto& [method, name] : kMethodNames) {
    if (name == s) return method;
  }
  throw PreconditionError("unknown method '" + std::string(s) + "' (kshot-alpha, kshot-beta, rule, translit-bridge)");
}

std::string_view git_hash() noexcept { return CODEMIX_GIT_HASH; }

void ExperimentConfig::validate() const {
  params.validate();
  if (workers == 0) throw PreconditionError("workers must be at least 1");
  switch (method) {
    case Method::kKshotAlpha:
    case Method::kKshotBeta:
      PromptKind::kshot(method == Method::kKshotAlpha ? ShotStyle::kAlpha : ShotStyle::kBeta, k, direction)
          .validate();
      if (rule) throw PreconditionError("k-shot runs take no rule");
      break;
    case Method::kRule:
      if (!rule) throw PreconditionError("rule runs need a rule (1-4)");
      if (k != 0) throw PreconditionError("rule runs take no shots");
      if (direction != Direction::kEn2Cm) throw PreconditionError("rule chains generate code-mixed text (en2cm only)");
      break;
    case Method::kTranslitBridge:
      if (rule || k != 0) throw PreconditionError("translit-bridge runs take no rule and no shots");
      if (direction != Direction::kCm2En) throw PreconditionError("translit-bridge runs are cm2en only");
      if (std::find(bridge_pairs.begin(), bridge_pairs.end(), pair.id) == bridge_pairs.end()) {
        throw PreconditionError("no transliteration bridge configured for " + std::string(pair.code));
      }
      break;
  }
}

std::string ExperimentConfig::experiment_label() const {
  std::string label;
  switch (method) {
    case Method::kKshotAlpha:
    case Method::kKshotBeta:
      // 0-shot prompts are identical for both styles.
      label = k == 0 ? "0-shot"
                     : std::to_string(k) + "-shot-" + (method == Method::kKshotAlpha ? "alpha" : "beta");
      break;
    case Method::kRule:
      label = "rule-" + std::to_string(rule ? rule_number(*rule) : 0);
      break;
    case Method::kTranslitBridge:
      label = "translit-bridge";
      break;
  }
  if (direction == Direction::kCm2En) label += " (cm2en)";
  return label;
}

std::string ExperimentConfig::model_label() const {
  return params.model_name.empty() ? backend_id : params.model_name;
}

std::vector<std::string> GenerationRecord::prompt_hashes() const {
  std::vector<std::string> hashes;
  hashes.reserve(stages.size());
  for (const auto& s : stages) hashes.push_back(s.prompt_hash);
  return hashes;
}

RunResult run_kshot(const ExperimentConfig& config, const Dataset& dataset, llm::Client& client) {
  require_method(config, is_kshot(config.method), "run_kshot");
  const auto style = config.method == Method::kKshotAlpha ? ShotStyle::kAlpha : ShotStyle::kBeta;
  return drive(config, dataset, [&](const Prepared& p, GenerationRecord& record) {
    const std::span<const ParallelExample> shots(p.split.pool.examples.data(), static_cast<size_t>(config.k));
    const auto prompt = render_kshot(config.pair, config.direction, style, config.k, shots, record.input);
    auto& stage = record.stages.emplace_back(call(client, prompt, config.params, "generate"));
    if (!stage.error.empty()) {
      record.failed = true;
      record.error = stage.error;
      return;
    }
    record.raw_final = stage.raw_output;
  });
}

RunResult run_rule_chain(const ExperimentConfig& config, const Dataset& dataset, llm::Client& client) {
  require_method(config, config.method == Method::kRule, "run_rule_chain");
  const RuleId rule = *config.rule;
  return drive(config, dataset, [&](const Prepared&, GenerationRecord& record) {
    record.steps = RuleTranscript{rule, {}, {}};
    const auto& transcript = record.stages.emplace_back(
        call(client, render_rule(rule, config.pair, record.input), config.params, "rule"));
    if (!transcript.error.empty()) {
      record.failed = true;
      record.error = transcript.error;
      return;
    }

    std::optional<RuleTranscript> parsed;
    std::string parse_error;
    try {
      parsed = parse_rule_transcript(transcript.raw_output, rule);
      record.steps = *parsed;
    } catch (const ParseError& e) {
      parse_error = e.what();
    }

    // A degenerate transcript is not worth an extraction call.
    if (!has_flags(transcript.flags)) {
      const std::string raw_transcript = transcript.raw_output;
      const auto& extract =
          record.stages.emplace_back(call(client, render_extraction(raw_transcript), config.params, "extract"));
      if (extract.error.empty() && !has_flags(extract.flags)) {
        record.raw_final = extract.raw_output;
        record.extraction_source = "llm";
        return;
      }
    }
    record.extraction_source = "parser";
    if (parsed) {
      record.raw_final = parsed->final_sentence;
    } else {
      record.parse_failed = true;
      record.error = parse_error;
    }
  });
}

RunResult run_translit_bridge(const ExperimentConfig& config, const Dataset& dataset, llm::Client& client) {
  require_method(config, config.method == Method::kTranslitBridge, "run_translit_bridge");
  return drive(config, dataset, [&](const Prepared&, GenerationRecord& record) {
    const auto& translit = record.stages.emplace_back(
        call(client, render_translit_to_matrix(config.pair, record.input), config.params, "translit"));
    if (!translit.error.empty() || has_flags(translit.flags)) {
      record.failed = true;
      record.error = !translit.error.empty()
                         ? translit.error
                         : "transliteration output flagged " + llm::flag_names(translit.flags).front();
      return;
    }
    const std::string intermediate = clean_output(translit.raw_output, config.scoring.clean);
    const auto& translate = record.stages.emplace_back(
        call(client, render_translate_cm2en(config.pair, intermediate), config.params, "translate"));
    if (!translate.error.empty()) {
      record.failed = true;
      record.error = translate.error;
      return;
    }
    record.raw_final = translate.raw_output;
  });
}

RunResult run_experiment(const ExperimentConfig& config, const Dataset& dataset, llm::Client& client) {
  switch (config.method) {
    case Method::kKshotAlpha:
    case Method::kKshotBeta:
      return run_kshot(config, dataset, client);
    case Method::kRule:
      return run_rule_chain(config, dataset, client);
    case Method::kTranslitBridge:
      return run_translit_bridge(config, dataset, client);
  }
  throw PreconditionError("unknown method");
}

namespace {

ordered_json config_json(const ExperimentConfig& c) {
  ordered_json params{{"model_name", c.params.model_name},
                      {"temperature", c.params.temperature},
                      {"max_output_tokens", c.params.max_output_tokens},
                      {"timeout_ms", c.params.timeout.count()},
                      {"max_retries", c.params.max_retries},
                      {"backoff_base_ms", c.params.backoff_base.count()}};
  ordered_json j{{"pair", c.pair.code},
                 {"direction", to_string(c.direction)},
                 {"method", to_string(c.method)},
                 {"k", c.k},
                 {"rule", c.rule ? json(rule_number(*c.rule)) : json(nullptr)},
                 {"backend", c.backend_id},
                 {"params", params},
                 {"seed", c.seed},
                 {"n_pool", c.n_pool},
                 {"n_test", c.n_test ? json(*c.n_test) : json(nullptr)},
                 {"dataset", c.dataset_path.filename().string()},
                 {"drop_degenerate", c.drop_degenerate}};
  if (c.method == Method::kTranslitBridge) {
    json bridges = json::array();
    for (auto id : c.bridge_pairs) bridges.push_back(pair_of(id).code);
    j["bridge_pairs"] = bridges;
  }
  return j;
}

ordered_json report_scores_json(const metrics::MetricReport& r) {
  ordered_json precisions = ordered_json::array();
  for (const auto& p : r.bleu_breakdown.precisions) precisions.push_back({p.matched, p.total});
  return {{"bleu", r.bleu},
          {"rouge_l_f1", r.rouge_l_f1},
          {"meteor", r.meteor},
          {"n_pairs", r.n_pairs},
          {"stemming", r.stemming},
          {"synonym_table", r.synonym_table_id},
          {"tokenize_policy", r.policy_id},
          {"cleaned", r.cleaned},
          {"bleu_breakdown",
           {{"precisions", precisions},
            {"hyp_length", r.bleu_breakdown.hyp_length},
            {"ref_length", r.bleu_breakdown.ref_length},
            {"brevity_penalty", r.bleu_breakdown.brevity_penalty}}}};
}

ordered_json meta_json(const RunResult& run) {
  const auto& clean = run.config.scoring.clean;
  return {{"_meta",
           {{"config", config_json(run.config)},
            {"experiment", run.config.experiment_label()},
            {"model", run.config.model_label()},
            {"policies",
             {{"tokenize", metrics::kTokenPolicyId},
              {"clean_labels", clean.labels},
              {"clean_strict", clean.strict},
              {"lowercase_in_clean", false},
              {"stemming", run.report.stemming},
              {"synonym_table", run.report.synonym_table_id}}},
            {"git_hash", git_hash()}}}};
}

ordered_json record_json(const GenerationRecord& r) {
  ordered_json stages = ordered_json::array();
  for (const auto& s : r.stages) {
    ordered_json stage{{"name", s.name},
                       {"prompt_hash", s.prompt_hash},
                       {"raw_output", s.raw_output},
                       {"degenerate_flags", llm::flag_names(s.flags)}};
    if (!s.error.empty()) stage["error"] = s.error;
    stages.push_back(std::move(stage));
  }
  ordered_json j{{"id", r.example_id},
                 {"input", r.input},
                 {"reference", r.reference},
                 {"prompt_hashes", r.prompt_hashes()},
                 {"stages", stages}};
  if (r.steps) {
    ordered_json steps = ordered_json::array();
    for (const auto& s : r.steps->steps) steps.push_back({{"number", s.number}, {"label", s.label}, {"body", s.body}});
    j["steps"] = steps;
    j["extraction_source"] = r.extraction_source;
  }
  j["raw_final"] = r.raw_final;
  j["cleaned"] = r.cleaned;
  j["degenerate_flags"] = llm::flag_names(r.degenerate_flags);
  j["failed"] = r.failed;
  if (r.parse_failed) j["parse_failed"] = true;
  if (!r.error.empty()) j["error"] = r.error;
  if (r.scores) j["scores"] = {{"rouge_l_f1", r.scores->rouge_l_f1}, {"meteor", r.scores->meteor}};
  return j;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

constexpr std::array<std::string_view, 5> kColumnCodes{"HI", "BN", "GU", "FR", "ES"};

}  // namespace

std::string records_jsonl(const RunResult& result) {
  std::string out = meta_json(result).dump() + "\n";
  for (const auto& r : result.records) out += record_json(r).dump() + "\n";
  return out;
}

std::string report_json(const RunResult& result) {
  ordered_json j{{"model", result.config.model_label()},
                 {"experiment", result.config.experiment_label()},
                 {"pair", result.config.pair.code},
                 {"config", config_json(result.config)},
                 {"report", report_scores_json(result.report)},
                 {"failures", result.failures},
                 {"script_warnings", result.script_warnings.size()},
                 {"git_hash", git_hash()}};
  return j.dump(2) + "\n";
}

TableEntry table_entry(const RunResult& result) {
  return {result.config.model_label(), result.config.experiment_label(), result.config.pair.id, result.report};
}

TableEntry load_table_entry(const std::filesystem::path& run_dir) {
  const auto path = run_dir / "report.json";
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    const auto j = json::parse(in);
    TableEntry entry{j.at("model").get<std::string>(), j.at("experiment").get<std::string>(),
                     parse_pair(j.at("pair").get<std::string>()).id, {}};
    const auto& r = j.at("report");
    entry.report.bleu = r.at("bleu").get<double>();
    entry.report.rouge_l_f1 = r.at("rouge_l_f1").get<double>();
    entry.report.meteor = r.at("meteor").get<double>();
    entry.report.n_pairs = r.at("n_pairs").get<size_t>();
    return entry;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

ResultTable emit_table(std::span<const TableEntry> entries) {
  if (entries.empty()) throw PreconditionError("emit_table needs at least one report");
  std::vector<std::string> models;
  for (const auto& e : entries) {
    if (std::find(models.begin(), models.end(), e.model) == models.end()) models.push_back(e.model);
  }
  ResultTable table;
  for (const auto& model : models) {
    const size_t first_row = table.rows.size();
    for (const auto& e : entries) {
      if (e.model != model) continue;
      auto row = std::find_if(table.rows.begin() + static_cast<std::ptrdiff_t>(first_row), table.rows.end(),
                              [&](const TableRow& r) { return r.experiment == e.experiment; });
      if (row == table.rows.end()) {
        table.rows.push_back({model, e.experiment, {}});
        row = table.rows.end() - 1;
      }
      auto& cell = row->cells[static_cast<size_t>(e.pair)];
      if (cell) {
        throw PreconditionError("two reports for " + model + " / " + e.experiment + " / " +
                                std::string(pair_of(e.pair).code));
      }
      cell = TableCell{e.report.bleu, e.report.rouge_l_f1, e.report.meteor};
    }
  }
  return table;
}

std::string ResultTable::to_tsv() const {
  std::ostringstream out;
  out << "model\texperiment";
  for (auto code : kColumnCodes) out << '\t' << code << " BLEU\t" << code << " R\t" << code << " M";
  out << '\n';
  for (const auto& row : rows) {
    out << row.model << '\t' << row.experiment;
    for (const auto& cell : row.cells) {
      if (cell) {
        out << '\t' << metrics::format_pct(cell->bleu) << '\t' << metrics::format_pct(cell->rouge_l) << '\t'
            << metrics::format_pct(cell->meteor);
      } else {
        out << "\t\t\t";
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string ResultTable::to_markdown() const {
  std::ostringstream out;
  out << "| Model | Experiment |";
  for (auto code : kColumnCodes) out << ' ' << code << " BLEU | " << code << " R | " << code << " M |";
  out << "\n|---|---|";
  for (size_t i = 0; i < kColumnCodes.size(); ++i) out << "---:|---:|---:|";
  out << '\n';
  for (const auto& row : rows) {
    out << "| " << row.model << " | " << row.experiment << " |";
    for (const auto& cell : row.cells) {
      if (cell) {
        out << ' ' << metrics::format_pct(cell->bleu) << " | " << metrics::format_pct(cell->rouge_l) << " | "
            << metrics::format_pct(cell->meteor) << " |";
      } else {
        out << " - | - | - |";
      }
    }
    out << '\n';
  }
  return out.str();
}

void write_run(const RunResult& result, const std::filesystem::path& dir, const llm::CallRecorder* calls) {
  std::filesystem::create_directories(dir);
  write_file(dir / "records.jsonl", records_jsonl(result));
  write_file(dir / "report.json", report_json(result));
  const TableEntry entry = table_entry(result);
  const auto table = emit_table(std::span(&entry, 1));
  write_file(dir / "table.tsv", table.to_tsv());
  write_file(dir / "table.md", table.to_markdown());
  if (calls) calls->write_jsonl(dir / "calls.jsonl");
}

}  // namespace codemix::runner
