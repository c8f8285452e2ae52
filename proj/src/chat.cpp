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

#include "codemix/chat.hpp"

#include "codemix/errors.hpp"
#include "codemix/unicode.hpp"

namespace codemix::chat {

ChatEngine::ChatEngine(std::shared_ptr<const Index> index, std::shared_ptr<LeafScorer> scorer,
                       std::shared_ptr<Reranker> reranker, std::shared_ptr<llm::Client> client, ChatOptions options)
    : index_(std::move(index)),
      scorer_(std::move(scorer)),
      reranker_(std::move(reranker)),
      client_(std::move(client)),
      options_(std::move(options)) {
  if (!index_ || !scorer_ || !reranker_ || !client_) throw PreconditionError("chat engine is missing a component");
}

std::string ChatEngine::complete(const RenderedPrompt& prompt) {
  auto result = client_->complete(prompt, options_.params);
  if (!result.degenerate_flags.empty()) {
    throw Error(std::string(to_string(prompt.kind.variant)) + " output flagged " +
                llm::flag_names(result.degenerate_flags).front());
  }
  return clean_output(result.text);
}

ChatTurn ChatEngine::answer(std::string_view query_cm, const LanguagePair& pair,
                            std::span<const HistoryTurn> history) {
  const auto query = unicode::trim(query_cm);
  if (query.empty()) throw PreconditionError("empty message");

  ChatTurn turn;
  turn.role = Role::kAssistant;
  turn.pair = pair;
  try {
    std::string source(query);
    if (options_.bridge_pairs.contains(pair.id) && !pair.is_latin()) {
      source = complete(render_translit_to_matrix(pair, source));
    }
    const std::string query_en = complete(render_translate_cm2en(pair, source));
    turn.query_en = query_en;

    const auto raw = retrieve(*index_, *scorer_, query_en, options_.top);
    const auto merged = auto_merge(raw, *index_);
    const auto ranked = rerank(merged, query_en, *reranker_, options_.keep);
    std::vector<std::string> chunks;
    for (const auto& n : ranked.nodes) {
      chunks.push_back(n.node->text);
      turn.source_node_ids.push_back(n.node->id);
    }

    if (history.size() > options_.history_turns) history = history.last(options_.history_turns);
    const auto answer_prompt = render_chat_answer(chunks, history, query_en);
    std::string answer_en;
    for (int attempt = 0;; ++attempt) {
      auto result = client_->complete(answer_prompt, options_.params);
      if (result.degenerate_flags.empty()) {
        answer_en = clean_output(result.text);
        break;
      }
      if (attempt == 1) {
        throw Error("answer flagged " + llm::flag_names(result.degenerate_flags).front() + " twice");
      }
    }
    turn.text_en = answer_en;
    turn.text_cm = complete(render_chat_to_cm(pair, answer_en));
  } catch (const std::exception& e) {
    ChatTurn failed;
    failed.role = Role::kAssistant;
    failed.pair = pair;
    failed.error = true;
    failed.diagnostic = e.what();
    return failed;
  }
  return turn;
}

std::string SessionStore::create() {
  std::lock_guard lock(mutex_);
  std::string id = "s" + std::to_string(++next_id_);
  sessions_[id];
  return id;
}

bool SessionStore::exists(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return sessions_.contains(id);
}

std::vector<HistoryTurn> SessionStore::history(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

void SessionStore::append(const std::string& id, HistoryTurn turn) {
  std::lock_guard lock(mutex_);
  auto& turns = sessions_[id];
  turns.push_back(std::move(turn));
  while (turns.size() > max_turns_) turns.pop_front();
}

}  // namespace codemix::chat
