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

#include "codemix/llm.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "codemix/errors.hpp"
#include "codemix/unicode.hpp"

namespace codemix::llm {

using nlohmann::json;

std::string_view to_string(DegenerateFlag flag) noexcept {
  return flag == DegenerateFlag::kEmpty ? "EMPTY" : "REPETITION";
}

std::vector<std::string> flag_names(const DegenerateFlags& flags) {
  std::vector<std::string> names;
  for (auto flag : flags) names.emplace_back(to_string(flag));
  return names;
}

DegenerateFlags detect_degenerate(std::string_view text) {
  DegenerateFlags flags;
  std::vector<std::string> tokens;
  {
    std::string current;
    for (char32_t cp : unicode::decode(text)) {
      if (unicode::is_whitespace(cp)) {
        if (!current.empty()) tokens.push_back(unicode::to_lower(current));
        current.clear();
      } else {
        current += unicode::encode(cp);
      }
    }
    if (!current.empty()) tokens.push_back(unicode::to_lower(current));
  }
  if (tokens.empty()) {
    flags.insert(DegenerateFlag::kEmpty);
    return flags;
  }

  constexpr size_t kMinTokensForDominance = 20;
  constexpr size_t kMaxConsecutive = 10;

  std::unordered_map<std::string, size_t> counts;
  size_t most = 0;
  size_t run = 0;
  size_t longest_run = 0;
  for (size_t i = 0; i < tokens.size(); ++i) {
    most = std::max(most, ++counts[tokens[i]]);
    run = (i > 0 && tokens[i] == tokens[i - 1]) ? run + 1 : 1;
    longest_run = std::max(longest_run, run);
  }
  const bool dominant = tokens.size() >= kMinTokensForDominance && 2 * most > tokens.size();
  if (dominant || longest_run >= kMaxConsecutive) flags.insert(DegenerateFlag::kRepetition);
  return flags;
}

void CompletionParams::validate() const {
  if (temperature < 0.0) throw PreconditionError("temperature must be >= 0");
  if (max_retries < 0) throw PreconditionError("max_retries must be >= 0");
  if (max_output_tokens <= 0) throw PreconditionError("max_output_tokens must be positive");
}

std::string prompt_hash(std::string_view prompt) {
  std::string normalized = unicode::nfc(prompt);
  normalized.erase(std::remove(normalized.begin(), normalized.end(), '\r'), normalized.end());
  while (!normalized.empty() && std::isspace(static_cast<unsigned char>(normalized.back()))) normalized.pop_back();

  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(normalized.data(), normalized.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::ostringstream hex;
  hex << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < length; ++i) hex << std::setw(2) << static_cast<int>(digest[i]);
  return hex.str();
}

std::shared_ptr<MockBackend> MockBackend::from_jsonl(const std::filesystem::path& path, std::string id,
                                                     bool strict) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open fixture file " + path.string());
  auto backend = std::make_shared<MockBackend>(std::move(id), strict);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (unicode::trim(line).empty()) continue;
    try {
      const auto obj = json::parse(line);
      backend->add_hashed(obj.at("prompt_hash").get<std::string>(), obj.at("response").get<std::string>());
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return backend;
}

void MockBackend::add_response(std::string_view prompt, std::string response) {
  add_hashed(prompt_hash(prompt), std::move(response));
}

void MockBackend::add_hashed(std::string hash, std::string response) {
  std::lock_guard lock(mutex_);
  fixtures_[std::move(hash)] = std::move(response);
}

size_t MockBackend::size() const {
  std::lock_guard lock(mutex_);
  return fixtures_.size();
}

void MockBackend::write_jsonl(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write fixture file " + path.string());
  std::lock_guard lock(mutex_);
  for (const auto& [hash, response] : fixtures_) {
    out << json{{"prompt_hash", hash}, {"response", response}}.dump() << '\n';
  }
}

std::string MockBackend::send(const std::string& prompt, const CompletionParams&) {
  const std::string hash = prompt_hash(prompt);
  {
    std::lock_guard lock(mutex_);
    if (auto it = fixtures_.find(hash); it != fixtures_.end()) return it->second;
  }
  if (strict_) throw FixtureMissError(hash);
  std::istringstream lines(prompt);
  std::string line;
  std::string last;
  while (std::getline(lines, line)) {
    if (!unicode::trim(line).empty()) last = line;
  }
  return last;
}

std::string default_api_key_env(std::string_view backend_id) {
  std::string name = "CODEMIX_API_KEY_";
  for (char c : backend_id) {
    name += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : '_';
  }
  return name;
}

RateLimiter::RateLimiter(size_t max_requests, std::chrono::milliseconds window)
    : max_requests_(max_requests), window_(window) {
  if (max_requests_ == 0) throw PreconditionError("rate limit must allow at least one request");
}

void RateLimiter::acquire() {
  for (;;) {
    std::chrono::steady_clock::duration wait{};
    {
      std::lock_guard lock(mutex_);
      const auto now = std::chrono::steady_clock::now();
      while (!starts_.empty() && now - starts_.front() >= window_) starts_.pop_front();
      if (starts_.size() < max_requests_) {
        starts_.push_back(now);
        return;
      }
      wait = starts_.front() + window_ - now;
    }
    std::this_thread::sleep_for(wait);
  }
}

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto seconds = std::chrono::system_clock::to_time_t(now);
  const auto millis =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&seconds, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << millis << 'Z';
  return out.str();
}

json params_to_json(const CompletionParams& p) {
  return {{"model_name", p.model_name},
          {"temperature", p.temperature},
          {"max_output_tokens", p.max_output_tokens},
          {"timeout_ms", p.timeout.count()},
          {"max_retries", p.max_retries}};
}

CompletionParams params_from_json(const json& j) {
  CompletionParams p;
  p.model_name = j.value("model_name", "");
  p.temperature = j.value("temperature", 0.0);
  p.max_output_tokens = j.value("max_output_tokens", 512);
  p.timeout = std::chrono::milliseconds(j.value("timeout_ms", int64_t{60'000}));
  p.max_retries = j.value("max_retries", 3);
  return p;
}

DegenerateFlags flags_from_names(const json& names) {
  DegenerateFlags flags;
  for (const auto& name : names) {
    if (name == "EMPTY") flags.insert(DegenerateFlag::kEmpty);
    if (name == "REPETITION") flags.insert(DegenerateFlag::kRepetition);
  }
  return flags;
}

}  // namespace

CallRecorder::CallRecorder() : epoch_(std::chrono::steady_clock::now()) {}

int64_t CallRecorder::elapsed_us() const {
  return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - epoch_).count();
}

void CallRecorder::add(CallRecord record) {
  std::lock_guard lock(mutex_);
  records_.push_back(std::move(record));
}

std::vector<CallRecord> CallRecorder::records() const {
  std::vector<CallRecord> copy;
  {
    std::lock_guard lock(mutex_);
    copy = records_;
  }
  std::sort(copy.begin(), copy.end(), [](const auto& a, const auto& b) { return a.sequence < b.sequence; });
  return copy;
}

size_t CallRecorder::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::string CallRecorder::to_jsonl() const {
  std::string out;
  for (const auto& r : records()) {
    json j{{"sequence", r.sequence},     {"timestamp", r.timestamp}, {"started_us", r.started_us},
           {"prompt_kind", r.prompt_kind}, {"prompt_hash", r.prompt_hash}, {"prompt", r.prompt},
           {"params", params_to_json(r.params)}};
    if (r.result) {
      j["result"] = {{"text", r.result->text},
                     {"latency_us", r.result->latency.count()},
                     {"attempts", r.result->attempts},
                     {"backend_id", r.result->backend_id},
                     {"degenerate_flags", flag_names(r.result->degenerate_flags)}};
    } else {
      j["error"] = r.error;
    }
    out += j.dump() + "\n";
  }
  return out;
}

void CallRecorder::write_jsonl(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write call ledger " + path.string());
  out << to_jsonl();
}

std::vector<CallRecord> CallRecorder::parse_jsonl(std::string_view content) {
  std::vector<CallRecord> records;
  std::istringstream lines{std::string(content)};
  std::string line;
  while (std::getline(lines, line)) {
    if (unicode::trim(line).empty()) continue;
    const auto j = json::parse(line);
    CallRecord r;
    r.sequence = j.at("sequence").get<uint64_t>();
    r.timestamp = j.value("timestamp", "");
    r.started_us = j.value("started_us", int64_t{0});
    r.prompt_kind = j.value("prompt_kind", "");
    r.prompt = j.at("prompt").get<std::string>();
    r.prompt_hash = j.value("prompt_hash", prompt_hash(r.prompt));
    if (j.contains("params")) r.params = params_from_json(j["params"]);
    if (j.contains("result")) {
      const auto& res = j["result"];
      CompletionResult result;
      result.text = res.at("text").get<std::string>();
      result.latency = std::chrono::microseconds(res.value("latency_us", int64_t{0}));
      result.attempts = res.value("attempts", 1);
      result.backend_id = res.value("backend_id", "");
      result.degenerate_flags = flags_from_names(res.value("degenerate_flags", json::array()));
      r.result = std::move(result);
    } else {
      r.error = j.value("error", "");
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::shared_ptr<MockBackend> CallRecorder::replay_backend(const std::vector<CallRecord>& records, std::string id) {
  auto backend = std::make_shared<MockBackend>(std::move(id), true);
  for (const auto& r : records) {
    if (r.result) backend->add_hashed(r.prompt_hash, r.result->text);
  }
  return backend;
}

Client::Client(std::shared_ptr<Backend> backend, std::shared_ptr<RateLimiter> limiter,
               std::shared_ptr<CallRecorder> recorder)
    : backend_(std::move(backend)), limiter_(std::move(limiter)), recorder_(std::move(recorder)) {
  if (!backend_) throw PreconditionError("client needs a backend");
}

CompletionResult Client::complete(const RenderedPrompt& prompt, const CompletionParams& params) {
  return complete_text(prompt.text, to_string(prompt.kind.variant), params);
}

CompletionResult Client::complete_text(const std::string& prompt, std::string_view kind_label,
                                       const CompletionParams& params) {
  params.validate();
  CallRecord record;
  if (recorder_) {
    record.sequence = recorder_->next_sequence();
    record.prompt = prompt;
    record.prompt_hash = prompt_hash(prompt);
    record.prompt_kind = std::string(kind_label);
    record.params = params;
  }

  const auto started = std::chrono::steady_clock::now();
  for (int attempt = 1;; ++attempt) {
    if (limiter_) limiter_->acquire();
    if (recorder_ && attempt == 1) {
      record.timestamp = utc_timestamp();
      record.started_us = recorder_->elapsed_us();
    }
    try {
      CompletionResult result;
      result.text = backend_->send(prompt, params);
      result.attempts = attempt;
      result.backend_id = backend_->id();
      result.latency =
          std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - started);
      result.degenerate_flags = detect_degenerate(result.text);
      if (recorder_) {
        record.result = result;
        recorder_->add(std::move(record));
      }
      return result;
    } catch (const TransportError& e) {
      if (attempt > params.max_retries) {
        const std::string message = "backend " + backend_->id() + " failed after " + std::to_string(attempt) +
                                    " attempt(s): " + e.what();
        if (recorder_) {
          record.error = message;
          recorder_->add(std::move(record));
        }
        throw TransportError(message);
      }
      std::this_thread::sleep_for(params.backoff_base * (int64_t{1} << std::min(attempt - 1, 20)));
    } catch (const std::exception& e) {
      if (recorder_) {
        record.error = e.what();
        recorder_->add(std::move(record));
      }
      throw;
    }
  }
}

}  // namespace codemix::llm
