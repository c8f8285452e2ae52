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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "codemix/prompts.hpp"

namespace codemix::llm {

enum class DegenerateFlag { kEmpty, kRepetition };
using DegenerateFlags = std::set<DegenerateFlag>;

std::string_view to_string(DegenerateFlag flag) noexcept;
std::vector<std::string> flag_names(const DegenerateFlags& flags);

/// EMPTY when the trimmed text is empty. REPETITION when one (lowercased,
/// whitespace-delimited) token makes up more than half of at least 20 tokens,
/// or any token repeats 10 or more times in a row.
DegenerateFlags detect_degenerate(std::string_view text);

struct CompletionParams {
  std::string model_name;
  double temperature = 0.0;
  int max_output_tokens = 512;
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 3;
  // Delay before retry n (1-based) is backoff_base * 2^(n-1).
  std::chrono::milliseconds backoff_base{500};

  void validate() const;
};

struct CompletionResult {
  std::string text;
  std::chrono::microseconds latency{0};
  int attempts = 0;
  std::string backend_id;
  DegenerateFlags degenerate_flags;
};

/// "Single prompt in, single text out". Implementations throw
/// TransportError for retryable failures and AuthError for bad credentials.
/// Must be safe to call from several threads at once.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  virtual std::string send(const std::string& prompt, const CompletionParams& params) = 0;
};

/// SHA-256 (hex) of the prompt after NFC normalization, CRLF -> LF, and
/// trailing-whitespace trimming.
std::string prompt_hash(std::string_view prompt);

/// Answers from fixtures keyed by prompt_hash. Strict mode throws
/// FixtureMissError on a miss; lenient mode echoes the prompt's last
/// non-empty line.
class MockBackend : public Backend {
 public:
  explicit MockBackend(std::string id = "mock", bool strict = true) : id_(std::move(id)), strict_(strict) {}

  /// JSON-lines of {"prompt_hash": ..., "response": ...}.
  static std::shared_ptr<MockBackend> from_jsonl(const std::filesystem::path& path, std::string id, bool strict);

  void add_response(std::string_view prompt, std::string response);
  void add_hashed(std::string hash, std::string response);
  size_t size() const;
  void write_jsonl(const std::filesystem::path& path) const;

  std::string id() const override { return id_; }
  std::string send(const std::string& prompt, const CompletionParams& params) override;

 private:
  std::string id_;
  bool strict_;
  mutable std::mutex mutex_;
  std::map<std::string, std::string> fixtures_;
};

/// Answers through a caller-supplied function. Used for scripted tests.
class ScriptedBackend : public Backend {
 public:
  using Script = std::function<std::string(const std::string& prompt)>;
  ScriptedBackend(std::string id, Script script) : id_(std::move(id)), script_(std::move(script)) {}

  std::string id() const override { return id_; }
  std::string send(const std::string& prompt, const CompletionParams&) override { return script_(prompt); }

 private:
  std::string id_;
  Script script_;
};

struct RemoteConfig {
  std::string id;
  // Full chat-completions URL, e.g. https://api.openai.com/v1/chat/completions
  std::string endpoint;
  std::string model;
  // Defaults to CODEMIX_API_KEY_<ID> (upper-cased, '-' -> '_').
  std::string api_key_env;
  // Sent as a system message when set; otherwise the prompt is the only
  // (user) message.
  std::optional<std::string> system_prompt;
};

/// OpenAI-style HTTP JSON chat-completion client.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig config);

  std::string id() const override { return config_.id; }
  std::string send(const std::string& prompt, const CompletionParams& params) override;

  const RemoteConfig& config() const noexcept { return config_; }

 private:
  RemoteConfig config_;
  std::string api_key_;
};

std::string default_api_key_env(std::string_view backend_id);

/// Sliding-window limiter: at most `max_requests` starts within any
/// `window`. The only synchronization point shared by concurrent requests.
class RateLimiter {
 public:
  RateLimiter(size_t max_requests, std::chrono::milliseconds window);
  void acquire();

 private:
  size_t max_requests_;
  std::chrono::milliseconds window_;
  std::mutex mutex_;
  std::deque<std::chrono::steady_clock::time_point> starts_;
};

struct CallRecord {
  uint64_t sequence = 0;
  std::string prompt;
  std::string prompt_hash;
  std::string prompt_kind;
  CompletionParams params;
  std::optional<CompletionResult> result;
  std::string error;
  std::string timestamp;      // UTC wall clock, ISO-8601
  int64_t started_us = 0;     // steady clock, relative to the recorder's creation
};

/// Append-only ledger of every completion in a run.
class CallRecorder {
 public:
  CallRecorder();

  uint64_t next_sequence() { return ++sequence_; }
  int64_t elapsed_us() const;
  void add(CallRecord record);

  /// Records ordered by sequence number.
  std::vector<CallRecord> records() const;
  size_t size() const;

  std::string to_jsonl() const;
  void write_jsonl(const std::filesystem::path& path) const;
  static std::vector<CallRecord> parse_jsonl(std::string_view content);

  /// Strict mock that answers every successfully recorded prompt with the
  /// recorded response.
  static std::shared_ptr<MockBackend> replay_backend(const std::vector<CallRecord>& records,
                                                     std::string id = "replay");

 private:
  std::chrono::steady_clock::time_point epoch_;
  std::atomic<uint64_t> sequence_{0};
  mutable std::mutex mutex_;
  std::vector<CallRecord> records_;
};

/// Retries, rate limiting, degenerate-output flags and call recording
/// around a Backend. Thread-safe.
class Client {
 public:
  explicit Client(std::shared_ptr<Backend> backend, std::shared_ptr<RateLimiter> limiter = nullptr,
                  std::shared_ptr<CallRecorder> recorder = nullptr);

  CompletionResult complete(const RenderedPrompt& prompt, const CompletionParams& params);
  CompletionResult complete_text(const std::string& prompt, std::string_view kind_label,
                                 const CompletionParams& params);

  const Backend& backend() const noexcept { return *backend_; }
  const std::shared_ptr<CallRecorder>& recorder() const noexcept { return recorder_; }

 private:
  std::shared_ptr<Backend> backend_;
  std::shared_ptr<RateLimiter> limiter_;
  std::shared_ptr<CallRecorder> recorder_;
};

}  // namespace codemix::llm
