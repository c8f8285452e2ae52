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

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include <json.hpp>

#include "codemix/chat.hpp"
#include "codemix/errors.hpp"
#include "codemix/index.hpp"
#include "codemix/retrieval.hpp"
#include "codemix/server.hpp"

using namespace codemix;
using namespace codemix::chat;
using nlohmann::json;

namespace {

// `n` sentences of `len` words each, numbered so every word is distinct.
std::string sentences(size_t n, size_t len) {
  std::string doc;
  for (size_t s = 0; s < n; ++s) {
    for (size_t w = 0; w < len; ++w) {
      doc += "s" + std::to_string(s) + "w" + std::to_string(w);
      doc += w + 1 == len ? ". " : " ";
    }
  }
  return doc;
}

size_t words_in(const std::string& text) {
  size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

void expect_reassembles(const Index& index, const std::string& document) {
  EXPECT_EQ(index.text(), document);
  for (const auto& parent : index.parents()) {
    std::string joined;
    for (const auto& id : parent.child_ids) {
      const auto& leaf = index.node(id);
      EXPECT_EQ(leaf.parent_id, parent.id);
      joined += leaf.text;
    }
    EXPECT_EQ(joined, parent.text) << parent.id;
  }
}

const char* kDoc =
    "Retrieval augmented generation answers questions from a document. "
    "The document is split into parent chunks and leaf chunks. "
    "Only leaf chunks are scored against the query. "
    "When most children of a parent are retrieved the parent replaces them. "
    "A reranker keeps the six best chunks. "
    "The answer is translated back into code-mixed text. "
    "Bengali queries are transliterated into Bengali script first. "
    "Hindi queries go straight to translation.";

std::shared_ptr<const Index> small_index() {
  return std::make_shared<const Index>(build_index(kDoc, {12, 30}));
}

std::string scripted_reply(const std::string& prompt) {
  if (prompt.starts_with("Transliterate")) return "রিট্রিভাল কিভাবে কাজ করে?";
  if (prompt.starts_with("Translate the following code-mixed")) return "How are leaf chunks scored?";
  if (prompt.starts_with("Context information")) return "Leaf chunks are scored against the query.";
  if (prompt.starts_with("Translate the following English")) return "Leaf chunks query er against e score hoy.";
  return "unexpected prompt";
}

struct Harness {
  std::shared_ptr<const Index> index = small_index();
  std::shared_ptr<llm::CallRecorder> recorder = std::make_shared<llm::CallRecorder>();
  std::shared_ptr<llm::Client> client;
  std::shared_ptr<ChatEngine> engine;

  explicit Harness(llm::ScriptedBackend::Script script = scripted_reply, ChatOptions options = {}) {
    options.params.backoff_base = std::chrono::milliseconds(1);
    options.params.max_retries = 0;
    client = std::make_shared<llm::Client>(std::make_shared<llm::ScriptedBackend>("scripted", std::move(script)),
                                           nullptr, recorder);
    engine = std::make_shared<ChatEngine>(index, std::make_shared<Bm25Scorer>(*index),
                                          std::make_shared<LexicalReranker>(), client, options);
  }

  std::vector<std::string> kinds() const {
    std::vector<std::string> out;
    for (const auto& r : recorder->records()) out.push_back(r.prompt_kind);
    return out;
  }
};

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

}  // namespace

TEST(Index, FiveThousandWords) {
  // 500 sentences of 10 words: 204 whole sentences fit a 2048-word parent and
  // 51 fit a 512-word leaf.
  const auto doc = sentences(500, 10);
  const auto index = build_index(doc);
  const size_t per_parent = 2048 / 10;
  const size_t expected_parents = (500 + per_parent - 1) / per_parent;
  ASSERT_EQ(index.parents().size(), expected_parents);
  EXPECT_EQ(expected_parents, 3u);
  for (const auto& p : index.parents()) {
    EXPECT_LE(words_in(p.text), 2048u);
    EXPECT_EQ(words_in(p.text), p.word_count);
  }
  for (const auto& l : index.leaves()) EXPECT_LE(words_in(l.text), 512u);
  EXPECT_EQ(index.parents()[0].child_ids.size(), 4u);  // 204 sentences = 51 * 4
  EXPECT_EQ(index.parents()[2].word_count, 5000u - 2 * 2040u);
  expect_reassembles(index, doc);
}

TEST(Index, SmallDocument) {
  const auto doc = sentences(10, 10);
  const auto index = build_index(doc);
  ASSERT_EQ(index.parents().size(), 1u);
  ASSERT_EQ(index.leaves().size(), 1u);
  EXPECT_EQ(index.leaves()[0].text, doc);
  EXPECT_EQ(index.leaves()[0].id, "l0000");
  EXPECT_EQ(index.parents()[0].id, "p0000");
}

TEST(Index, Errors) {
  EXPECT_THROW(build_index(""), PreconditionError);
  EXPECT_THROW(build_index(" \n\t"), PreconditionError);
  EXPECT_THROW(build_index("a b", {10, 10}), PreconditionError);
  EXPECT_THROW(build_index("a b", {0, 10}), PreconditionError);
}

TEST(Index, OverlongSentenceIsCut) {
  std::string doc;
  for (int i = 0; i < 3000; ++i) doc += "x" + std::to_string(i) + " ";
  const auto index = build_index(doc);
  ASSERT_EQ(index.parents().size(), 2u);
  EXPECT_EQ(index.parents()[0].word_count, 2048u);
  EXPECT_EQ(index.parents()[1].word_count, 952u);
  EXPECT_EQ(index.leaves().size(), 6u);
  expect_reassembles(index, doc);
}

TEST(Index, SentenceBoundariesPreferred) {
  // Leaves of at most 5 words over sentences of 3 words keep sentences whole.
  const auto doc = sentences(4, 3);
  const auto index = build_index(doc, {5, 20});
  ASSERT_EQ(index.leaves().size(), 4u);
  for (const auto& l : index.leaves()) EXPECT_EQ(l.word_count, 3u);
  const auto danda = build_index("এটা ভালো। ওটা খারাপ। আর একটা।", {2, 6});
  EXPECT_EQ(danda.leaves().size(), 3u);
  EXPECT_EQ(danda.leaves()[0].text, "এটা ভালো। ");
}

TEST(Index, SaveLoadRoundTrip) {
  const auto doc = sentences(60, 7);
  const auto index = build_index(doc, {20, 60});
  const auto dir = std::filesystem::temp_directory_path() / "codemix_index_test";
  std::filesystem::remove_all(dir);
  save_index(index, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "nodes" / "p0000.json"));
  const auto loaded = load_index(dir);
  EXPECT_EQ(loaded.parents().size(), index.parents().size());
  EXPECT_EQ(loaded.leaves().size(), index.leaves().size());
  EXPECT_EQ(loaded.options().leaf_size, 20u);
  for (size_t i = 0; i < index.leaves().size(); ++i) {
    EXPECT_EQ(loaded.leaves()[i].text, index.leaves()[i].text);
    EXPECT_EQ(loaded.leaves()[i].parent_id, index.leaves()[i].parent_id);
  }
  expect_reassembles(loaded, doc);

  // A leaf that no longer matches its parent is rejected.
  auto node = json::parse(std::ifstream(dir / "nodes" / "l0000.json"));
  node["text"] = "tampered ";
  std::ofstream(dir / "nodes" / "l0000.json") << node.dump();
  EXPECT_THROW(load_index(dir), Error);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load_index(dir), Error);
}

TEST(Retrieve, RareTermRanksFirst) {
  const auto index = build_index("alpha beta gamma. delta epsilon zeta. eta theta zebra.", {3, 9});
  ASSERT_EQ(index.leaves().size(), 3u);
  Bm25Scorer bm25(index);
  const auto raw = retrieve(index, bm25, "zebra zebra");
  ASSERT_EQ(raw.nodes.size(), 3u);
  EXPECT_EQ(raw.nodes[0].node->id, "l0002");
  // Hand value: idf = ln(1 + 2.5 / 1.5), tf = 1, |leaf| = avg, counted once per query term.
  EXPECT_NEAR(raw.nodes[0].score, 2.0 * std::log(8.0 / 3.0), 1e-12);
  EXPECT_EQ(raw.nodes[1].score, 0.0);
  EXPECT_EQ(raw.stage, RetrievalStage::kRaw);
}

TEST(Retrieve, DisjointAndClamped) {
  const auto index = build_index(sentences(5, 3), {3, 30});
  ASSERT_EQ(index.leaves().size(), 5u);
  Bm25Scorer bm25(index);
  const auto raw = retrieve(index, bm25, "nothing shared here");
  ASSERT_EQ(raw.nodes.size(), 5u);
  for (size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(raw.nodes[i].score, 0.0);
    EXPECT_EQ(raw.nodes[i].node->position, i);
  }
  EXPECT_EQ(retrieve(index, bm25, "s1w1", 2).nodes.size(), 2u);
  EXPECT_THROW(retrieve(index, bm25, "  "), PreconditionError);
}

class Merge : public ::testing::Test {
 protected:
  // Two parents of four 3-word leaves each.
  Index index = build_index(sentences(8, 3), {3, 12});

  RetrievalResult raw(std::initializer_list<std::pair<size_t, double>> picks) const {
    RetrievalResult r;
    for (auto [i, score] : picks) r.nodes.push_back({&index.leaves()[i], score});
    return r;
  }
};

TEST_F(Merge, ThreeOfFourMerges) {
  ASSERT_EQ(index.parents().size(), 2u);
  ASSERT_EQ(index.parents()[0].child_ids.size(), 4u);
  const auto merged = auto_merge(raw({{0, 0.9}, {1, 0.5}, {2, 0.7}, {5, 0.8}}), index);
  EXPECT_EQ(merged.stage, RetrievalStage::kMerged);
  EXPECT_EQ(merged.ids(), (std::vector<std::string>{"p0000", "l0005"}));
  EXPECT_DOUBLE_EQ(merged.nodes[0].score, 0.9);
}

TEST_F(Merge, TwoOfFourDoesNot) {
  const auto merged = auto_merge(raw({{0, 0.9}, {3, 0.5}}), index);
  EXPECT_EQ(merged.ids(), (std::vector<std::string>{"l0000", "l0003"}));
}

TEST_F(Merge, DistinctParentsUnchanged) {
  const auto input = raw({{6, 0.9}, {1, 0.5}});
  EXPECT_EQ(auto_merge(input, index).ids(), input.ids());
}

TEST_F(Merge, RerankKeepsBest) {
  Index wide = build_index(sentences(8, 3), {3, 6});
  RetrievalResult r;
  for (const auto& leaf : wide.leaves()) r.nodes.push_back({&leaf, 1.0});
  LexicalReranker lexical;
  const auto kept = rerank(r, "s5w0 s5w1 s7w2", lexical);
  ASSERT_EQ(kept.nodes.size(), 6u);
  EXPECT_EQ(kept.nodes[0].node->id, "l0005");
  EXPECT_DOUBLE_EQ(kept.nodes[0].score, 2.0 / 3.0);
  EXPECT_EQ(kept.nodes[1].node->id, "l0007");
  // Remaining ties fall back to document order.
  EXPECT_EQ(kept.nodes[2].node->id, "l0000");
  EXPECT_EQ(kept.nodes[5].node->id, "l0003");
  EXPECT_EQ(kept.stage, RetrievalStage::kReranked);

  RetrievalResult four;
  for (size_t i = 0; i < 4; ++i) four.nodes.push_back({&wide.leaves()[i], 1.0});
  const auto reordered = rerank(four, "s3w0", lexical);
  EXPECT_EQ(reordered.ids(), (std::vector<std::string>{"l0003", "l0000", "l0001", "l0002"}));
}

TEST(RetrievalProperties, RandomIndexesAndQueries) {
  std::mt19937 rng(20240901);
  const std::vector<std::string> vocab = {"model", "code", "mixed", "query", "chunk", "parent", "leaf", "score",
                                          "hindi", "bangla", "answer", "index", "token", "merge", "rank", "text"};
  auto pick = [&](size_t n) { return static_cast<size_t>(rng() % n); };
  for (int trial = 0; trial < 500; ++trial) {
    std::string doc;
    const size_t n_words = 1 + pick(400);
    for (size_t i = 0; i < n_words; ++i) {
      doc += vocab[pick(vocab.size())];
      const auto r = pick(10);
      doc += r == 0 ? ". " : r == 1 ? "\n\n" : " ";
    }
    const size_t leaf = 1 + pick(20);
    const size_t parent = leaf + 1 + pick(60);
    const auto index = build_index(doc, {leaf, parent});
    expect_reassembles(index, doc);
    for (const auto& l : index.leaves()) ASSERT_LE(l.word_count, leaf);
    for (const auto& p : index.parents()) ASSERT_LE(p.word_count, parent);

    std::string query;
    for (size_t i = 0, n = 1 + pick(5); i < n; ++i) query += vocab[pick(vocab.size())] + " ";
    Bm25Scorer bm25(index);
    LexicalReranker lexical;
    const auto raw = retrieve(index, bm25, query);
    ASSERT_LE(raw.nodes.size(), 12u);
    for (const auto& n : raw.nodes) ASSERT_EQ(n.node->level, NodeLevel::kLeaf);
    const auto merged = auto_merge(raw, index);
    ASSERT_LE(merged.nodes.size(), raw.nodes.size());
    std::set<std::string> present;
    for (const auto& n : merged.nodes) present.insert(n.node->id);
    ASSERT_EQ(present.size(), merged.nodes.size());
    for (const auto& n : merged.nodes) {
      if (n.node->level != NodeLevel::kLeaf) continue;
      ASSERT_FALSE(present.contains(n.node->parent_id)) << trial;
    }
    const auto ranked = rerank(merged, query, lexical);
    ASSERT_LE(ranked.nodes.size(), 6u);
    ASSERT_LE(ranked.nodes.size(), merged.nodes.size());
    for (size_t i = 1; i < ranked.nodes.size(); ++i) ASSERT_GE(ranked.nodes[i - 1].score, ranked.nodes[i].score);
  }
}

TEST(Remote, EmbeddingScorer) {
  json last;
  std::string auth;
  int calls = 0;
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    last = json::parse(req.body);
    auth = req.get_header_value("Authorization");
    json data = json::array();
    size_t i = 0;
    for (const auto& text : last["input"]) {
      const auto s = text.get<std::string>();
      const double zebra = s.find("zebra") != std::string::npos ? 1.0 : 0.0;
      data.push_back({{"index", i++}, {"embedding", {zebra, 1.0 - zebra}}});
    }
    res.set_content(json{{"data", data}}.dump(), "application/json");
  });
  setenv("CODEMIX_TEST_EMBED_KEY", "ek", 1);
  const auto index = build_index("alpha beta gamma. delta epsilon zeta. eta theta zebra.", {3, 9});
  RemoteEmbeddingScorer scorer({stub.url("/v1/embeddings"), "embed-m", "CODEMIX_TEST_EMBED_KEY"});
  const auto raw = retrieve(index, scorer, "a zebra");
  EXPECT_EQ(raw.nodes[0].node->id, "l0002");
  EXPECT_DOUBLE_EQ(raw.nodes[0].score, 1.0);
  EXPECT_EQ(last["model"], "embed-m");
  EXPECT_EQ(auth, "Bearer ek");
  EXPECT_EQ(calls, 2);
  retrieve(index, scorer, "again");
  EXPECT_EQ(calls, 3);  // leaf vectors are cached
  EXPECT_EQ(scorer.id(), "embedding:embed-m");
}

TEST(Remote, Reranker) {
  json last;
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    last = json::parse(req.body);
    json results = json::array();
    const size_t n = last["documents"].size();
    for (size_t i = 0; i < n; ++i) results.push_back({{"index", i}, {"relevance_score", static_cast<double>(i)}});
    res.set_content(json{{"results", results}}.dump(), "application/json");
  });
  const auto index = build_index(sentences(8, 3), {3, 6});
  RetrievalResult r;
  for (const auto& leaf : index.leaves()) r.nodes.push_back({&leaf, 0.0});
  RemoteReranker reranker({stub.url("/rerank"), "rr", ""});
  const auto ranked = rerank(r, "q", reranker);
  EXPECT_EQ(ranked.ids(), (std::vector<std::string>{"l0007", "l0006", "l0005", "l0004", "l0003", "l0002"}));
  EXPECT_EQ(last["query"], "q");
  EXPECT_EQ(last["top_n"], 8);
  EXPECT_EQ(last["documents"].size(), 8u);
}

TEST(Remote, ErrorsAreTransport) {
  StubServer stub([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  const auto index = build_index("a b c.", {3, 9});
  RemoteEmbeddingScorer scorer({stub.url("/e"), "m", ""});
  EXPECT_THROW(retrieve(index, scorer, "a"), TransportError);
}

TEST(Engine, BengaliCallSequence) {
  Harness h;
  const auto turn = h.engine->answer("retrieval kivabe kaj kore?", pair_of(PairId::kEnBn));
  ASSERT_FALSE(turn.error) << turn.diagnostic;
  EXPECT_EQ(h.kinds(), (std::vector<std::string>{"translit_to_matrix", "translate_cm2en", "chat_answer", "chat_to_cm"}));
  EXPECT_EQ(turn.text_en, "Leaf chunks are scored against the query.");
  EXPECT_EQ(turn.text_cm, "Leaf chunks query er against e score hoy.");
  EXPECT_EQ(turn.query_en, "How are leaf chunks scored?");
  EXPECT_FALSE(turn.source_node_ids.empty());
  EXPECT_LE(turn.source_node_ids.size(), 6u);
  const auto records = h.recorder->records();
  EXPECT_NE(records[1].prompt.find("রিট্রিভাল কিভাবে কাজ করে?"), std::string::npos);
  EXPECT_NE(records[2].prompt.find("Query: How are leaf chunks scored?"), std::string::npos);
}

TEST(Engine, HindiCallSequence) {
  Harness h;
  const auto turn = h.engine->answer("leaf chunks kaise score hote hain?", pair_of(PairId::kEnHi));
  ASSERT_FALSE(turn.error) << turn.diagnostic;
  EXPECT_EQ(h.kinds(), (std::vector<std::string>{"translate_cm2en", "chat_answer", "chat_to_cm"}));
  EXPECT_NE(h.recorder->records()[0].prompt.find("leaf chunks kaise score hote hain?"), std::string::npos);
}

TEST(Engine, BridgeIsConfigurable) {
  ChatOptions options;
  options.bridge_pairs = {PairId::kEnGu};
  Harness h(scripted_reply, options);
  h.engine->answer("kem cho", pair_of(PairId::kEnGu));
  EXPECT_EQ(h.kinds().size(), 4u);
  h.engine->answer("ki khobor", pair_of(PairId::kEnBn));
  EXPECT_EQ(h.kinds().size(), 7u);
}

TEST(Engine, EmptyQueryMakesNoCalls) {
  Harness h;
  EXPECT_THROW(h.engine->answer("   ", pair_of(PairId::kEnHi)), PreconditionError);
  EXPECT_EQ(h.recorder->size(), 0u);
}

TEST(Engine, BackendFailureIsErrorTurn) {
  Harness h([](const std::string& prompt) -> std::string {
    if (prompt.starts_with("Context")) throw TransportError("upstream down");
    return scripted_reply(prompt);
  });
  const auto turn = h.engine->answer("kuch bhi", pair_of(PairId::kEnHi));
  EXPECT_TRUE(turn.error);
  EXPECT_NE(turn.diagnostic.find("upstream down"), std::string::npos);
  EXPECT_TRUE(turn.text_cm.empty());
}

TEST(Engine, DegenerateAnswerRetriedOnce) {
  int answers = 0;
  Harness once([&](const std::string& prompt) -> std::string {
    if (prompt.starts_with("Context") && ++answers == 1) return "";
    return scripted_reply(prompt);
  });
  EXPECT_FALSE(once.engine->answer("kuch bhi", pair_of(PairId::kEnHi)).error);
  EXPECT_EQ(once.kinds(), (std::vector<std::string>{"translate_cm2en", "chat_answer", "chat_answer", "chat_to_cm"}));

  Harness always([](const std::string& prompt) -> std::string {
    return prompt.starts_with("Context") ? "" : scripted_reply(prompt);
  });
  const auto turn = always.engine->answer("kuch bhi", pair_of(PairId::kEnHi));
  EXPECT_TRUE(turn.error);
  EXPECT_NE(turn.diagnostic.find("twice"), std::string::npos);
  EXPECT_EQ(always.kinds().size(), 3u);
}

TEST(Engine, HistoryIsCapped) {
  ChatOptions options;
  options.history_turns = 2;
  Harness h(scripted_reply, options);
  std::vector<HistoryTurn> history;
  for (int i = 0; i < 5; ++i) history.push_back({"question " + std::to_string(i), "answer " + std::to_string(i)});
  h.engine->answer("aur?", pair_of(PairId::kEnHi), history);
  const auto prompt = h.recorder->records()[1].prompt;
  EXPECT_EQ(prompt.find("question 2"), std::string::npos);
  EXPECT_NE(prompt.find("User: question 3\nAssistant: answer 3"), std::string::npos);
  EXPECT_NE(prompt.find("question 4"), std::string::npos);
}

TEST(Sessions, IdsAndTrimming) {
  SessionStore store(2);
  EXPECT_EQ(store.create(), "s1");
  EXPECT_EQ(store.create(), "s2");
  EXPECT_TRUE(store.exists("s1"));
  EXPECT_FALSE(store.exists("s9"));
  for (int i = 0; i < 3; ++i) store.append("s1", {"u" + std::to_string(i), "a"});
  const auto h = store.history("s1");
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h[0].user_en, "u1");
  EXPECT_TRUE(store.history("s2").empty());
}

class Server : public ::testing::Test {
 protected:
  void start(ServerConfig config = {}) {
    config.host = "127.0.0.1";
    config.port = 0;
    server = std::make_unique<ChatServer>(config);
    port = server->bind();
    server->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }

  httplib::Result chat(const json& body, const httplib::Headers& headers = {}) {
    return client->Post("/chat", headers, body.dump(), "application/json");
  }

  std::unique_ptr<ChatServer> server;
  std::unique_ptr<httplib::Client> client;
  int port = 0;
};

TEST_F(Server, LoadingThenReady) {
  start();
  auto health = client->Get("/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(json::parse(health->body)["status"], "loading");
  auto early = chat({{"pair", "en-hi"}, {"message", "kuch"}});
  ASSERT_TRUE(early);
  EXPECT_EQ(early->status, 503);

  Harness h;
  server->set_engine(h.engine);
  health = client->Get("/health");
  EXPECT_EQ(json::parse(health->body), (json{{"status", "ok"}, {"index_loaded", true}}));
}

TEST_F(Server, Pairs) {
  start();
  auto res = client->Get("/pairs");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const auto pairs = json::parse(res->body);
  ASSERT_EQ(pairs.size(), 5u);
  EXPECT_EQ(pairs[0], (json{{"id", "en-hi"}, {"name", "English-Hindi"}, {"matrix_language", "Hindi"},
                            {"matrix_script", "Devanagari"}}));
  EXPECT_EQ(pairs[1]["id"], "en-bn");
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST_F(Server, ChatRoundTripAndSessions) {
  start();
  Harness h;
  server->set_engine(h.engine);
  auto res = chat({{"pair", "en-hi"}, {"message", "leaf chunks kaise score hote hain?"}});
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  const auto body = json::parse(res->body);
  EXPECT_EQ(body["answer_cm"], "Leaf chunks query er against e score hoy.");
  EXPECT_EQ(body["answer_en"], "Leaf chunks are scored against the query.");
  ASSERT_TRUE(body["sources"].is_array());
  EXPECT_FALSE(body["sources"].empty());
  EXPECT_EQ(body["session_id"], "s1");
  EXPECT_EQ(h.kinds().size(), 3u);

  res = chat({{"pair", "en-bn"}, {"message", "ar kichu?"}, {"session_id", "s1"}});
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["session_id"], "s1");
  const auto records = h.recorder->records();
  EXPECT_NE(records[5].prompt.find("User: How are leaf chunks scored?"), std::string::npos);
  EXPECT_EQ(h.kinds().size(), 7u);
}

TEST_F(Server, BadRequests) {
  start();
  Harness h;
  server->set_engine(h.engine);
  EXPECT_EQ(chat({{"pair", "en-de"}, {"message", "hallo"}})->status, 400);
  EXPECT_EQ(chat({{"pair", "en-hi"}, {"message", "  "}})->status, 400);
  EXPECT_EQ(chat({{"pair", "en-hi"}})->status, 400);
  EXPECT_EQ(chat({{"pair", "en-hi"}, {"message", "x"}, {"session_id", 3}})->status, 400);
  EXPECT_EQ(client->Post("/chat", "{not json", "application/json")->status, 400);
  EXPECT_EQ(client->Post("/chat", "[1]", "application/json")->status, 400);
  EXPECT_EQ(h.recorder->size(), 0u);
}

TEST_F(Server, BackendFailureIs502) {
  start();
  Harness h([](const std::string&) -> std::string { throw TransportError("offline"); });
  server->set_engine(h.engine);
  auto res = chat({{"pair", "en-hi"}, {"message", "hello"}});
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 502);
  const auto body = json::parse(res->body);
  EXPECT_NE(body["error"].get<std::string>().find("offline"), std::string::npos);
  EXPECT_EQ(body["session_id"], "s1");
}

TEST_F(Server, CorsPreflight) {
  ServerConfig config;
  config.cors_origin = "http://localhost:5173";
  start(config);
  auto res = client->Options("/chat");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "http://localhost:5173");
  EXPECT_NE(res->get_header_value("Access-Control-Allow-Headers").find("Content-Type"), std::string::npos);
}

TEST_F(Server, StaticToken) {
  ServerConfig config;
  config.token = "secret";
  start(config);
  Harness h;
  server->set_engine(h.engine);
  EXPECT_EQ(chat({{"pair", "en-hi"}, {"message", "x"}})->status, 401);
  EXPECT_EQ(chat({{"pair", "en-hi"}, {"message", "x"}}, {{"Authorization", "Bearer wrong"}})->status, 401);
  EXPECT_EQ(chat({{"pair", "en-hi"}, {"message", "x"}}, {{"Authorization", "Bearer secret"}})->status, 200);
}

TEST_F(Server, RepeatableAcrossRestarts) {
  std::string first;
  for (int i = 0; i < 2; ++i) {
    start();
    Harness h;
    server->set_engine(h.engine);
    const auto body = chat({{"pair", "en-bn"}, {"message", "retrieval kivabe kaj kore?"}})->body;
    if (i == 0) first = body;
    EXPECT_EQ(body, first);
    server.reset();
  }
}
