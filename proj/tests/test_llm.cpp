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

#include <httplib.h>
#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <set>
#include <thread>

#include <json.hpp>

#include "codemix/errors.hpp"
#include "codemix/llm.hpp"

using namespace codemix;
using namespace codemix::llm;
using nlohmann::json;

namespace {

std::string repeat(const std::string& word, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) out += word + " ";
  return out;
}

CompletionParams fast_params() {
  CompletionParams p;
  p.backoff_base = std::chrono::milliseconds(1);
  return p;
}

RenderedPrompt text_prompt(std::string text) {
  return RenderedPrompt{PromptKind::simple(PromptVariant::kTranslateCm2En, Direction::kCm2En), std::nullopt,
                        std::move(text), {}};
}

// Plain-HTTP stub on a free local port, served from a background thread.
class StubServer {
 public:
  explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post(".*", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string completion_body(const json& content) {
  return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

}  // namespace

TEST(Degenerate, Examples) {
  EXPECT_EQ(detect_degenerate(""), DegenerateFlags{DegenerateFlag::kEmpty});
  EXPECT_EQ(detect_degenerate(" \n\t "), DegenerateFlags{DegenerateFlag::kEmpty});
  EXPECT_EQ(detect_degenerate(repeat("aapne", 681)), DegenerateFlags{DegenerateFlag::kRepetition});
  EXPECT_TRUE(detect_degenerate("Unhone ise market mein vapas daal diya.").empty());
}

TEST(Degenerate, Thresholds) {
  // Runs: 9 in a row is fine, 10 is not.
  EXPECT_TRUE(detect_degenerate(repeat("haan", 9)).empty());
  EXPECT_EQ(detect_degenerate(repeat("haan", 10)), DegenerateFlags{DegenerateFlag::kRepetition});
  EXPECT_EQ(detect_degenerate("x " + repeat("Haan", 5) + repeat("haan", 5)),
            DegenerateFlags{DegenerateFlag::kRepetition});
  // Dominance needs at least 20 tokens and strictly more than half.
  std::string nineteen;
  for (int i = 0; i < 19; ++i) nineteen += (i % 2 == 0 ? "the " : "w" + std::to_string(i) + " ");
  EXPECT_TRUE(detect_degenerate(nineteen).empty());  // 10 of 19, but under 20 tokens
  std::string twenty_even;
  for (int i = 0; i < 20; ++i) twenty_even += (i % 2 == 0 ? "the " : "w" + std::to_string(i) + " ");
  EXPECT_TRUE(detect_degenerate(twenty_even).empty());  // exactly half
  EXPECT_EQ(detect_degenerate(twenty_even + "the"), DegenerateFlags{DegenerateFlag::kRepetition});
}

TEST(Degenerate, RandomNormalSentencesUnflagged) {
  std::vector<std::string> vocab;
  for (const char* w : {"the", "a", "is", "market", "mein", "vapas", "daal", "diya", "kal", "hum", "office",
                        "late", "meeting", "report", "bhej", "dena", "train", "ghante", "pizza", "order"}) {
    vocab.emplace_back(w);
  }
  for (int i = 0; i < 180; ++i) vocab.push_back("word" + std::to_string(i));
  std::mt19937 rng(11);
  std::uniform_int_distribution<size_t> pick(0, vocab.size() - 1);
  std::uniform_int_distribution<int> length(1, 40);
  for (int i = 0; i < 1000; ++i) {
    std::string s;
    for (int n = length(rng); n > 0; --n) s += vocab[pick(rng)] + (n > 1 ? " " : ".");
    ASSERT_TRUE(detect_degenerate(s).empty()) << s;
  }
}

TEST(Degenerate, ShortDistinctNeverFlagged) {
  std::mt19937 rng(5);
  for (int i = 0; i < 500; ++i) {
    std::string s;
    const int n = static_cast<int>(rng() % 10);
    for (int j = 0; j < n; ++j) s += "t" + std::to_string(j) + " ";
    if (n == 0) continue;
    ASSERT_TRUE(detect_degenerate(s).empty()) << s;
  }
}

TEST(PromptHash, NormalizationAndKnownDigest) {
  EXPECT_EQ(prompt_hash("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(prompt_hash("line one\r\nline two\n\n  "), prompt_hash("line one\nline two"));
  EXPECT_EQ(prompt_hash("Café"), prompt_hash("Café"));
  EXPECT_NE(prompt_hash("a"), prompt_hash("b"));
}

TEST(Mock, FixtureEcho) {
  auto mock = std::make_shared<MockBackend>("mock", true);
  mock->add_response("P", "Unhone ise market mein vapas daal diya.");
  Client client(mock);
  const auto result = client.complete(text_prompt("P"), {});
  EXPECT_EQ(result.text, "Unhone ise market mein vapas daal diya.");
  EXPECT_EQ(result.attempts, 1);
  EXPECT_EQ(result.backend_id, "mock");
  EXPECT_TRUE(result.degenerate_flags.empty());
}

TEST(Mock, StrictMissNamesHash) {
  MockBackend mock("m", true);
  try {
    mock.send("unknown prompt", {});
    FAIL() << "no error";
  } catch (const FixtureMissError& e) {
    EXPECT_EQ(e.prompt_hash(), prompt_hash("unknown prompt"));
    EXPECT_NE(std::string(e.what()).find(prompt_hash("unknown prompt")), std::string::npos);
  }
}

TEST(Mock, LenientEchoesLastLine) {
  MockBackend mock("m", false);
  EXPECT_EQ(mock.send("Instruction\nEnglish Sentence: hello there\n\n", {}), "English Sentence: hello there");
}

TEST(Mock, JsonlRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "codemix_fixtures_test.jsonl";
  MockBackend a("a", true);
  a.add_response("one", "1");
  a.add_response("two", "2");
  a.write_jsonl(path);
  auto b = MockBackend::from_jsonl(path, "b", true);
  EXPECT_EQ(b->size(), 2u);
  EXPECT_EQ(b->send("two", {}), "2");
  std::filesystem::remove(path);
  EXPECT_THROW(MockBackend::from_jsonl(path, "b", true), ParseError);
}

TEST(Params, Validate) {
  CompletionParams p;
  EXPECT_NO_THROW(p.validate());
  p.temperature = -0.1;
  EXPECT_THROW(p.validate(), PreconditionError);
  p = {};
  p.max_retries = -1;
  EXPECT_THROW(p.validate(), PreconditionError);
}

TEST(Client, RetriesTransportErrors) {
  std::atomic<int> calls = 0;
  auto backend = std::make_shared<ScriptedBackend>("flaky", [&](const std::string&) -> std::string {
    if (++calls < 3) throw TransportError("503");
    return "ok";
  });
  Client client(backend);
  const auto result = client.complete_text("p", "test", fast_params());
  EXPECT_EQ(result.text, "ok");
  EXPECT_EQ(result.attempts, 3);
}

TEST(Client, ExhaustedRetries) {
  std::atomic<int> calls = 0;
  auto backend = std::make_shared<ScriptedBackend>("down", [&](const std::string&) -> std::string {
    ++calls;
    throw TransportError("connection refused");
  });
  auto recorder = std::make_shared<CallRecorder>();
  Client client(backend, nullptr, recorder);
  auto params = fast_params();
  params.max_retries = 2;
  EXPECT_THROW(client.complete_text("p", "test", params), TransportError);
  EXPECT_EQ(calls, 3);
  ASSERT_EQ(recorder->size(), 1u);
  EXPECT_FALSE(recorder->records()[0].result);
  EXPECT_NE(recorder->records()[0].error.find("3 attempt"), std::string::npos);
}

TEST(Client, AuthErrorsAreNotRetried) {
  std::atomic<int> calls = 0;
  auto backend = std::make_shared<ScriptedBackend>("locked", [&](const std::string&) -> std::string {
    ++calls;
    throw AuthError("bad key");
  });
  Client client(backend);
  EXPECT_THROW(client.complete_text("p", "test", fast_params()), AuthError);
  EXPECT_EQ(calls, 1);
}

TEST(Client, FlagsComputedOnRawOutput) {
  auto backend = std::make_shared<ScriptedBackend>("s", [](const std::string& p) {
    return p == "empty" ? std::string() : repeat("aapne", 681);
  });
  Client client(backend);
  EXPECT_EQ(client.complete_text("empty", "t", {}).degenerate_flags, DegenerateFlags{DegenerateFlag::kEmpty});
  EXPECT_EQ(client.complete_text("loop", "t", {}).degenerate_flags, DegenerateFlags{DegenerateFlag::kRepetition});
}

TEST(Recorder, SequenceAndReplay) {
  auto backend = std::make_shared<ScriptedBackend>("s", [](const std::string& p) { return "answer to " + p; });
  auto recorder = std::make_shared<CallRecorder>();
  Client client(backend, nullptr, recorder);
  EXPECT_TRUE(recorder->to_jsonl().empty());
  for (const char* p : {"first", "second", "third"}) client.complete_text(p, "kind", {});
  const auto records = recorder->records();
  ASSERT_EQ(records.size(), 3u);
  for (size_t i = 0; i < 3; ++i) EXPECT_EQ(records[i].sequence, i + 1);
  EXPECT_EQ(records[1].prompt, "second");
  EXPECT_EQ(records[1].prompt_kind, "kind");
  EXPECT_EQ(records[1].prompt_hash, prompt_hash("second"));
  EXPECT_FALSE(records[0].timestamp.empty());

  const auto parsed = CallRecorder::parse_jsonl(recorder->to_jsonl());
  ASSERT_EQ(parsed.size(), 3u);
  EXPECT_EQ(parsed[2].result->text, "answer to third");
  EXPECT_EQ(parsed[2].sequence, 3u);

  Client replay(CallRecorder::replay_backend(parsed));
  for (const char* p : {"first", "second", "third"}) {
    EXPECT_EQ(replay.complete_text(p, "kind", {}).text, client.complete_text(p, "kind", {}).text);
  }
  EXPECT_THROW(replay.complete_text("fourth", "kind", {}), FixtureMissError);
}

TEST(Recorder, ConcurrentSequenceNumbersUnique) {
  auto backend = std::make_shared<ScriptedBackend>("s", [](const std::string& p) { return p; });
  auto recorder = std::make_shared<CallRecorder>();
  Client client(backend, nullptr, recorder);
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 50; ++i) client.complete_text(std::to_string(t * 100 + i), "k", {});
    });
  }
  for (auto& t : threads) t.join();
  const auto records = recorder->records();
  ASSERT_EQ(records.size(), 400u);
  for (size_t i = 0; i < records.size(); ++i) EXPECT_EQ(records[i].sequence, i + 1);
}

TEST(RateLimiter, SlidingWindowFromCallRecords) {
  constexpr size_t kMax = 3;
  constexpr int64_t kWindowUs = 150'000;
  // Records are stamped just after the limiter admits a call; allow for that gap.
  constexpr int64_t kStampSlackUs = 10'000;
  auto limiter = std::make_shared<RateLimiter>(kMax, std::chrono::milliseconds(kWindowUs / 1000));
  auto recorder = std::make_shared<CallRecorder>();
  auto backend = std::make_shared<ScriptedBackend>("s", [](const std::string& p) { return p; });
  Client client(backend, limiter, recorder);
  std::vector<std::thread> threads;
  for (int t = 0; t < 3; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 3; ++i) client.complete_text(std::to_string(t) + "-" + std::to_string(i), "k", {});
    });
  }
  for (auto& t : threads) t.join();
  std::vector<int64_t> starts;
  for (const auto& r : recorder->records()) starts.push_back(r.started_us);
  std::sort(starts.begin(), starts.end());
  ASSERT_EQ(starts.size(), 9u);
  for (size_t i = 0; i + kMax < starts.size(); ++i) {
    EXPECT_GE(starts[i + kMax] - starts[i], kWindowUs - kStampSlackUs) << i;
  }
  EXPECT_THROW(RateLimiter(0, std::chrono::milliseconds(1)), PreconditionError);
}

TEST(Remote, DefaultKeyEnv) { EXPECT_EQ(default_api_key_env("gpt-4o"), "CODEMIX_API_KEY_GPT_4O"); }

TEST(Remote, ChatCompletionWireFormat) {
  json seen;
  std::string auth;
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(completion_body("Unhone ise market mein vapas daal diya."), "application/json");
  });
  setenv("CODEMIX_TEST_KEY_A", "sk-test", 1);
  auto backend = std::make_shared<RemoteBackend>(
      RemoteConfig{"stub", stub.url("/v1/chat/completions"), "stub-model", "CODEMIX_TEST_KEY_A", std::nullopt});
  Client client(backend);
  const auto result = client.complete_text("Translate this", "t", {});
  EXPECT_EQ(result.text, "Unhone ise market mein vapas daal diya.");
  EXPECT_EQ(auth, "Bearer sk-test");
  EXPECT_EQ(seen["model"], "stub-model");
  EXPECT_EQ(seen["temperature"], 0.0);
  ASSERT_EQ(seen["messages"].size(), 1u);
  EXPECT_EQ(seen["messages"][0]["role"], "user");
  EXPECT_EQ(seen["messages"][0]["content"], "Translate this");
}

TEST(Remote, SystemPromptAndNullContent) {
  json seen;
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    res.set_content(completion_body(nullptr), "application/json");
  });
  setenv("CODEMIX_TEST_KEY_B", "k", 1);
  Client client(std::make_shared<RemoteBackend>(
      RemoteConfig{"stub", stub.url("/v1/chat/completions"), "m", "CODEMIX_TEST_KEY_B", "You translate."}));
  const auto result = client.complete_text("x", "t", {});
  EXPECT_EQ(result.text, "");
  EXPECT_EQ(result.degenerate_flags, DegenerateFlags{DegenerateFlag::kEmpty});
  ASSERT_EQ(seen["messages"].size(), 2u);
  EXPECT_EQ(seen["messages"][0]["role"], "system");
}

TEST(Remote, RateLimitedThenOk) {
  std::atomic<int> calls = 0;
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    if (++calls == 1) {
      res.status = 429;
      return;
    }
    res.set_content(completion_body("fine"), "application/json");
  });
  setenv("CODEMIX_TEST_KEY_C", "k", 1);
  Client client(
      std::make_shared<RemoteBackend>(RemoteConfig{"stub", stub.url("/c"), "m", "CODEMIX_TEST_KEY_C", std::nullopt}));
  const auto result = client.complete_text("x", "t", fast_params());
  EXPECT_EQ(result.text, "fine");
  EXPECT_EQ(result.attempts, 2);
}

TEST(Remote, AuthFailures) {
  std::atomic<int> calls = 0;
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 401;
  });
  setenv("CODEMIX_TEST_KEY_D", "wrong", 1);
  Client client(
      std::make_shared<RemoteBackend>(RemoteConfig{"stub", stub.url("/c"), "m", "CODEMIX_TEST_KEY_D", std::nullopt}));
  EXPECT_THROW(client.complete_text("x", "t", fast_params()), AuthError);
  EXPECT_EQ(calls, 1);

  unsetenv("CODEMIX_TEST_KEY_MISSING");
  Client keyless(std::make_shared<RemoteBackend>(
      RemoteConfig{"stub", stub.url("/c"), "m", "CODEMIX_TEST_KEY_MISSING", std::nullopt}));
  EXPECT_THROW(keyless.complete_text("x", "t", fast_params()), AuthError);
  EXPECT_EQ(calls, 1);
}

TEST(Remote, UnreachableIsTransport) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  setenv("CODEMIX_TEST_KEY_E", "k", 1);
  auto params = fast_params();
  params.max_retries = 1;
  params.timeout = std::chrono::milliseconds(500);
  Client client(std::make_shared<RemoteBackend>(RemoteConfig{
      "stub", "http://127.0.0.1:" + std::to_string(port) + "/c", "m", "CODEMIX_TEST_KEY_E", std::nullopt}));
  EXPECT_THROW(client.complete_text("x", "t", params), TransportError);
}
