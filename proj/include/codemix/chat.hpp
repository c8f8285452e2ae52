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

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "codemix/corpus.hpp"
#include "codemix/index.hpp"
#include "codemix/llm.hpp"
#include "codemix/prompts.hpp"
#include "codemix/retrieval.hpp"

namespace codemix::chat {

enum class Role { kUser, kAssistant };

struct ChatTurn {
  Role role = Role::kAssistant;
  LanguagePair pair = pair_of(PairId::kEnHi);
  std::string text_cm;
  std::string text_en;
  std::vector<std::string> source_node_ids;
  // English form of the question this turn answers.
  std::string query_en;
  // Set on error turns; text fields are then empty.
  bool error = false;
  std::string diagnostic;
};

struct ChatOptions {
  size_t top = 12;
  size_t keep = 6;
  // Past exchanges included in the answer prompt.
  size_t history_turns = 6;
  std::set<PairId> bridge_pairs = {PairId::kEnBn};
  llm::CompletionParams params;
};

/// Code-mixed question in, code-mixed answer out:
/// [transliterate] -> translate to English -> retrieve -> auto-merge ->
/// rerank -> answer -> translate back.
class ChatEngine {
 public:
  ChatEngine(std::shared_ptr<const Index> index, std::shared_ptr<LeafScorer> scorer,
             std::shared_ptr<Reranker> reranker, std::shared_ptr<llm::Client> client, ChatOptions options = {});

  /// Throws PreconditionError on an empty query before any backend call.
  /// Backend failures and a twice-degenerate answer come back as error turns.
  ChatTurn answer(std::string_view query_cm, const LanguagePair& pair, std::span<const HistoryTurn> history = {});

  const Index& index() const noexcept { return *index_; }
  const ChatOptions& options() const noexcept { return options_; }

 private:
  std::string complete(const RenderedPrompt& prompt);

  std::shared_ptr<const Index> index_;
  std::shared_ptr<LeafScorer> scorer_;
  std::shared_ptr<Reranker> reranker_;
  std::shared_ptr<llm::Client> client_;
  ChatOptions options_;
};

/// In-memory conversation histories keyed by session id. Thread-safe.
class SessionStore {
 public:
  explicit SessionStore(size_t max_turns = 6) : max_turns_(max_turns) {}

  /// Deterministic ids: "s1", "s2", ...
  std::string create();
  bool exists(const std::string& id) const;
  std::vector<HistoryTurn> history(const std::string& id) const;
  void append(const std::string& id, HistoryTurn turn);

 private:
  size_t max_turns_;
  mutable std::mutex mutex_;
  uint64_t next_id_ = 0;
  std::map<std::string, std::deque<HistoryTurn>> sessions_;
};

}  // namespace codemix::chat
