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

// codemix: experiment runner, scorer, table builder and chatbot service.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "codemix/chat.hpp"
#include "codemix/corpus.hpp"
#include "codemix/errors.hpp"
#include "codemix/index.hpp"
#include "codemix/llm.hpp"
#include "codemix/metrics.hpp"
#include "codemix/retrieval.hpp"
#include "codemix/runner.hpp"
#include "codemix/server.hpp"
#include "codemix/unicode.hpp"

namespace {

using nlohmann::json;
using namespace codemix;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct BackendOptions {
  std::string id = "mock";
  std::string config_path;
  std::string fixtures;
  size_t rate = 0;
  int64_t window_ms = 60'000;
  std::string calls_out;

  void add(CLI::App* app) {
    app->add_option("--backend", id, "Backend id (\"mock\" is a lenient echo backend)");
    app->add_option("--backends", config_path, "JSON file describing backends");
    app->add_option("--fixtures", fixtures, "JSON-lines {prompt_hash, response}; makes the backend a strict mock");
    app->add_option("--rate", rate, "Max requests per window (0: unlimited)");
    app->add_option("--window-ms", window_ms, "Rate-limit window in milliseconds");
  }
};

// Backends file:
// {"backends": {"<id>": {"type": "remote", "endpoint": ..., "model": ...,
//                        "api_key_env": ..., "system_prompt": ...},
//               "<id>": {"type": "mock", "fixtures": ..., "strict": true}}}
std::shared_ptr<llm::Backend> make_backend(const BackendOptions& o) {
  if (!o.fixtures.empty()) return llm::MockBackend::from_jsonl(o.fixtures, o.id, true);
  if (!o.config_path.empty()) {
    const auto config = json::parse(read_file(o.config_path));
    const auto& backends = config.at("backends");
    if (backends.contains(o.id)) {
      const auto& b = backends.at(o.id);
      const auto type = b.value("type", "remote");
      if (type == "mock") {
        const bool strict = b.value("strict", true);
        if (b.contains("fixtures")) return llm::MockBackend::from_jsonl(b["fixtures"].get<std::string>(), o.id, strict);
        return std::make_shared<llm::MockBackend>(o.id, strict);
      }
      llm::RemoteConfig rc;
      rc.id = o.id;
      rc.endpoint = b.at("endpoint").get<std::string>();
      rc.model = b.value("model", "");
      rc.api_key_env = b.value("api_key_env", "");
      if (b.contains("system_prompt")) rc.system_prompt = b["system_prompt"].get<std::string>();
      return std::make_shared<llm::RemoteBackend>(rc);
    }
  }
  if (o.id == "mock") return std::make_shared<llm::MockBackend>("mock", false);
  throw PreconditionError("unknown backend '" + o.id + "'");
}

std::shared_ptr<llm::Client> make_client(const BackendOptions& o, std::shared_ptr<llm::CallRecorder> recorder) {
  std::shared_ptr<llm::RateLimiter> limiter;
  if (o.rate > 0) limiter = std::make_shared<llm::RateLimiter>(o.rate, std::chrono::milliseconds(o.window_ms));
  return std::make_shared<llm::Client>(make_backend(o), limiter, std::move(recorder));
}

struct ParamOptions {
  std::string model;
  double temperature = 0.0;
  int max_tokens = 512;
  int64_t timeout_ms = 60'000;
  int max_retries = 3;

  void add(CLI::App* app) {
    app->add_option("--model", model, "Model name sent to the backend");
    app->add_option("--temperature", temperature, "Sampling temperature");
    app->add_option("--max-tokens", max_tokens, "Max output tokens");
    app->add_option("--timeout-ms", timeout_ms, "Per-request timeout");
    app->add_option("--max-retries", max_retries, "Retries on transport errors");
  }

  llm::CompletionParams params() const {
    llm::CompletionParams p;
    p.model_name = model;
    p.temperature = temperature;
    p.max_output_tokens = max_tokens;
    p.timeout = std::chrono::milliseconds(timeout_ms);
    p.max_retries = max_retries;
    return p;
  }
};

struct ScoringOptions {
  bool strict_clean = false;
  std::vector<std::string> labels;
  std::string stemming = "auto";
  std::string synonyms;

  void add(CLI::App* app) {
    app->add_flag("--strict", strict_clean, "Score raw outputs without cleaning");
    app->add_option("--clean-label", labels, "Label stripped by cleaning (repeatable; replaces the defaults)");
    app->add_option("--stemming", stemming, "METEOR stemming: auto, on, off")
        ->check(CLI::IsMember({"auto", "on", "off"}));
    app->add_option("--synonyms", synonyms, "Synonym table for METEOR (one group per line)");
  }

  metrics::EvaluateOptions options() const {
    metrics::EvaluateOptions o;
    o.clean.strict = strict_clean;
    if (!labels.empty()) o.clean.labels = labels;
    if (stemming != "auto") o.stemming = stemming == "on";
    if (!synonyms.empty()) {
      o.synonyms = std::make_shared<const metrics::SynonymTable>(metrics::load_synonyms(synonyms));
      o.synonym_table_id = std::filesystem::path(synonyms).filename().string();
    }
    return o;
  }
};

struct RunOptions {
  std::string pair = "en-hi";
  std::string direction = "en2cm";
  std::string method = "kshot-beta";
  int k = 0;
  int rule = 0;
  uint64_t seed = 0;
  size_t n_pool = 20;
  size_t n_test = 0;
  size_t workers = 4;
  bool drop_degenerate = false;
  std::vector<std::string> bridge_pairs;
  std::string dataset;
  std::string out;
  BackendOptions backend;
  ParamOptions params;
  ScoringOptions scoring;

  void add(CLI::App* app, bool rules_only) {
    app->add_option("--pair", pair, "Language pair, e.g. en-hi")->required();
    if (!rules_only) {
      app->add_option("--direction", direction, "en2cm or cm2en");
      app->add_option("--method", method, "kshot-alpha, kshot-beta, rule, translit-bridge");
      app->add_option("--k", k, "Shots: 0, 1, 10 or 20");
      app->add_option("--bridge-pair", bridge_pairs, "Pairs allowed for translit-bridge (default en-bn, en-gu)");
    }
    app->add_option("--rule", rule, "Rule id 1-4")->check(CLI::Range(1, 4))->required(rules_only);
    app->add_option("--seed", seed, "Split seed");
    app->add_option("--n-pool", n_pool, "Example pool size");
    app->add_option("--n-test", n_test, "Test size (default: everything after the pool)");
    app->add_option("--workers", workers, "Concurrent requests");
    app->add_flag("--drop-degenerate", drop_degenerate, "Score degenerate outputs as empty");
    app->add_option("--dataset", dataset, "TSV or JSON-lines parallel data")->required()->check(CLI::ExistingFile);
    app->add_option("--out", out, "Output directory")->required();
    backend.add(app);
    params.add(app);
    scoring.add(app);
  }

  runner::ExperimentConfig config() const {
    runner::ExperimentConfig c;
    c.pair = parse_pair(pair);
    c.direction = parse_direction(direction);
    c.method = runner::parse_method(method);
    c.k = k;
    if (rule != 0) c.rule = parse_rule(rule);
    c.backend_id = backend.id;
    c.params = params.params();
    c.seed = seed;
    c.n_pool = n_pool;
    if (n_test != 0) c.n_test = n_test;
    c.dataset_path = dataset;
    c.output_dir = out;
    c.workers = workers;
    c.drop_degenerate = drop_degenerate;
    c.scoring = scoring.options();
    if (!bridge_pairs.empty()) {
      c.bridge_pairs.clear();
      for (const auto& p : bridge_pairs) c.bridge_pairs.push_back(parse_pair(p).id);
    }
    return c;
  }
};

int do_run(RunOptions& o) {
  const auto config = o.config();
  const auto dataset = load_parallel(config.dataset_path, config.pair);
  auto recorder = std::make_shared<llm::CallRecorder>();
  auto client = make_client(o.backend, recorder);
  const auto result = runner::run_experiment(config, dataset, *client);
  runner::write_run(result, config.output_dir, recorder.get());
  for (const auto& w : result.script_warnings) std::cerr << "warning: " << w << '\n';
  if (result.failures > 0) {
    std::cerr << result.failures << " of " << result.records.size() << " examples failed\n";
  }
  const auto entry = runner::table_entry(result);
  std::cout << runner::emit_table(std::span(&entry, 1)).to_markdown();
  return 0;
}

int do_score(const std::string& input, const std::string& direction, const ScoringOptions& scoring) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::istringstream lines(read_file(input));
  std::string line;
  size_t number = 0;
  while (std::getline(lines, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ParseError("line " + std::to_string(number) + ": expected hypothesis<TAB>reference");
    }
    pairs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  const auto report = metrics::evaluate_corpus(pairs, parse_direction(direction), scoring.options());
  std::cout << "bleu\trouge_l_f1\tmeteor\tn_pairs\n"
            << metrics::format_pct(report.bleu) << '\t' << metrics::format_pct(report.rouge_l_f1) << '\t'
            << metrics::format_pct(report.meteor) << '\t' << report.n_pairs << '\n';
  nlohmann::ordered_json j{{"bleu", report.bleu_pct()},
                           {"rouge_l_f1", report.rouge_l_pct()},
                           {"meteor", report.meteor_pct()},
                           {"n_pairs", report.n_pairs},
                           {"stemming", report.stemming},
                           {"synonym_table", report.synonym_table_id},
                           {"tokenize_policy", report.policy_id},
                           {"cleaned", report.cleaned}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

int do_table(const std::vector<std::string>& dirs, const std::string& out) {
  std::vector<runner::TableEntry> entries;
  for (const auto& d : dirs) entries.push_back(runner::load_table_entry(d));
  const auto table = runner::emit_table(entries);
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    std::ofstream(std::filesystem::path(out) / "table.tsv", std::ios::binary) << table.to_tsv();
    std::ofstream(std::filesystem::path(out) / "table.md", std::ios::binary) << table.to_markdown();
  }
  std::cout << table.to_markdown();
  return 0;
}

chat::ChatServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

struct ServeOptions {
  std::string index_dir;
  std::string doc;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
  std::string token_env;
  std::vector<std::string> bridge_pairs{"en-bn"};
  size_t history_turns = 6;
  std::string embedding_url, embedding_model, rerank_url, rerank_model, remote_key_env;
  BackendOptions backend;
  ParamOptions params;
};

int do_serve(const ServeOptions& o) {
  chat::ServerConfig sc;
  sc.host = o.host;
  sc.port = o.port;
  sc.cors_origin = o.cors_origin;
  sc.history_turns = o.history_turns;
  if (!o.token_env.empty()) {
    const char* token = std::getenv(o.token_env.c_str());
    if (!token || !*token) throw PreconditionError(o.token_env + " is not set");
    sc.token = token;
  }
  chat::ChatServer server(sc);
  const int port = server.bind();
  server.start();
  std::cerr << "listening on " << o.host << ':' << port << '\n';

  auto index = std::make_shared<chat::Index>(o.index_dir.empty()
                                                 ? chat::build_index(read_file(o.doc))
                                                 : chat::load_index(o.index_dir));
  std::shared_ptr<chat::LeafScorer> scorer;
  if (o.embedding_url.empty()) {
    scorer = std::make_shared<chat::Bm25Scorer>(*index);
  } else {
    scorer = std::make_shared<chat::RemoteEmbeddingScorer>(
        chat::RemoteEndpoint{o.embedding_url, o.embedding_model, o.remote_key_env});
  }
  std::shared_ptr<chat::Reranker> reranker;
  if (o.rerank_url.empty()) {
    reranker = std::make_shared<chat::LexicalReranker>();
  } else {
    reranker = std::make_shared<chat::RemoteReranker>(chat::RemoteEndpoint{o.rerank_url, o.rerank_model, o.remote_key_env});
  }
  chat::ChatOptions options;
  options.history_turns = o.history_turns;
  options.params = o.params.params();
  options.bridge_pairs.clear();
  for (const auto& p : o.bridge_pairs) options.bridge_pairs.insert(parse_pair(p).id);
  server.set_engine(std::make_shared<chat::ChatEngine>(index, scorer, reranker, make_client(o.backend, nullptr),
                                                       options));
  std::cerr << "index loaded: " << index->parents().size() << " parents, " << index->leaves().size() << " leaves\n";

  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.wait();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Code-mixed translation experiments and chatbot"};
  app.require_subcommand(1);

  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "Run one experiment cell");
  run_opts.add(run, false);

  RunOptions rules_opts;
  auto* rules = app.add_subcommand("rules", "Run a rule-based prompt chain");
  rules_opts.add(rules, true);

  std::string score_input;
  std::string score_direction = "en2cm";
  ScoringOptions score_opts;
  auto* score = app.add_subcommand("score", "Score a hypothesis<TAB>reference file");
  score->add_option("input", score_input, "TSV file")->required()->check(CLI::ExistingFile);
  score->add_option("--direction", score_direction, "en2cm or cm2en");
  score_opts.add(score);

  std::vector<std::string> table_dirs;
  std::string table_out;
  auto* table = app.add_subcommand("table", "Combine run directories into one result table");
  table->add_option("runs", table_dirs, "Run directories")->required();
  table->add_option("--out", table_out, "Write table.tsv and table.md here");

  auto* chatbot = app.add_subcommand("chatbot", "Chatbot index and service");
  chatbot->require_subcommand(1);
  std::string doc;
  std::string index_out;
  chat::IndexOptions index_opts;
  auto* index = chatbot->add_subcommand("index", "Build and save a retrieval index");
  index->add_option("--doc", doc, "Document to index")->required()->check(CLI::ExistingFile);
  index->add_option("--out", index_out, "Index directory")->required();
  index->add_option("--leaf-size", index_opts.leaf_size, "Leaf size in words");
  index->add_option("--parent-size", index_opts.parent_size, "Parent size in words");

  ServeOptions serve_opts;
  auto* serve = chatbot->add_subcommand("serve", "Serve the chat API");
  auto* index_dir = serve->add_option("--index", serve_opts.index_dir, "Saved index directory");
  serve->add_option("--doc", serve_opts.doc, "Build the index from this document instead")->excludes(index_dir);
  serve->add_option("--host", serve_opts.host, "Bind address");
  serve->add_option("--port", serve_opts.port, "Port (0 picks one)");
  serve->add_option("--cors-origin", serve_opts.cors_origin, "Allowed web UI origin");
  serve->add_option("--token-env", serve_opts.token_env, "Env var holding a bearer token required by /chat");
  serve->add_option("--bridge-pair", serve_opts.bridge_pairs, "Pairs whose queries are transliterated first");
  serve->add_option("--history", serve_opts.history_turns, "Past exchanges kept per session");
  serve->add_option("--embedding-url", serve_opts.embedding_url, "Remote /v1/embeddings endpoint");
  serve->add_option("--embedding-model", serve_opts.embedding_model, "Embedding model name");
  serve->add_option("--rerank-url", serve_opts.rerank_url, "Remote /rerank endpoint");
  serve->add_option("--rerank-model", serve_opts.rerank_model, "Reranker model name");
  serve->add_option("--remote-key-env", serve_opts.remote_key_env, "Env var with the embedding/rerank API key");
  serve_opts.backend.add(serve);
  serve_opts.params.add(serve);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return do_run(run_opts);
    if (*rules) {
      rules_opts.method = "rule";
      rules_opts.direction = "en2cm";
      return do_run(rules_opts);
    }
    if (*score) return do_score(score_input, score_direction, score_opts);
    if (*table) return do_table(table_dirs, table_out);
    if (*index) {
      const auto built = chat::build_index(read_file(doc), index_opts);
      chat::save_index(built, index_out);
      std::cout << built.parents().size() << " parents, " << built.leaves().size() << " leaves -> " << index_out
                << '\n';
      return 0;
    }
    if (*serve) {
      if (serve_opts.index_dir.empty() && serve_opts.doc.empty()) {
        throw PreconditionError("serve needs --index or --doc");
      }
      return do_serve(serve_opts);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
