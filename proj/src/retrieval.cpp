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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "codemix/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>

#include <json.hpp>

#include "codemix/errors.hpp"
#include "codemix/metrics.hpp"
#include "codemix/unicode.hpp"
#include "http_util.hpp"

namespace codemix::chat {

using nlohmann::json;

std::string_view to_string(RetrievalStage stage) noexcept {
  switch (stage) {
    case RetrievalStage::kRaw:
      return "RAW";
    case RetrievalStage::kMerged:
      return "MERGED";
    case RetrievalStage::kReranked:
      return "RERANKED";
  }
  return "?";
}

std::vector<std::string> RetrievalResult::ids() const {
  std::vector<std::string> out;
  out.reserve(nodes.size());
  for (const auto& n : nodes) out.push_back(n.node->id);
  return out;
}

std::vector<std::string> terms(std::string_view text) {
  std::vector<std::string> out;
  for (auto& token : metrics::tokenize(text).tokens) {
    const auto cps = unicode::decode(token);
    if (cps.size() == 1 && unicode::is_punct_or_symbol(cps.front())) continue;
    out.push_back(std::move(token));
  }
  return out;
}

namespace {

// Higher score first, then earlier in the document.
void order(std::vector<ScoredNode>& nodes) {
  std::stable_sort(nodes.begin(), nodes.end(), [](const ScoredNode& a, const ScoredNode& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.node->word_offset != b.node->word_offset) return a.node->word_offset < b.node->word_offset;
    // A parent and its first leaf share an offset; the parent goes first.
    return a.node->level == NodeLevel::kParent && b.node->level == NodeLevel::kLeaf;
  });
}

json post_json(const RemoteEndpoint& endpoint, const json& body) {
  const auto url = detail::split_url(endpoint.url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(30, 0);
  client.set_read_timeout(60, 0);
  if (!endpoint.api_key_env.empty()) {
    if (const char* key = std::getenv(endpoint.api_key_env.c_str()); key && *key) client.set_bearer_token_auth(key);
  }
  auto response = client.Post(url.path, body.dump(), "application/json");
  if (!response) throw TransportError("request to " + endpoint.url + " failed: " + httplib::to_string(response.error()));
  if (response->status != 200) {
    throw TransportError(endpoint.url + " returned HTTP " + std::to_string(response->status));
  }
  try {
    return json::parse(response->body);
  } catch (const json::exception& e) {
    throw Error("malformed response from " + endpoint.url + ": " + e.what());
  }
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error("embedding dimensions differ");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return na == 0.0 || nb == 0.0 ? 0.0 : dot / std::sqrt(na * nb);
}

}  // namespace

Bm25Scorer::Bm25Scorer(const Index& index, double k1, double b) : k1_(k1), b_(b) {
  size_t total = 0;
  for (const auto& leaf : index.leaves()) {
    auto& counts = term_counts_.emplace_back();
    const auto leaf_terms = terms(leaf.text);
    for (const auto& t : leaf_terms) ++counts[t];
    for (const auto& [t, _] : counts) ++document_frequency_[t];
    lengths_.push_back(leaf_terms.size());
    total += leaf_terms.size();
  }
  avg_length_ = lengths_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(lengths_.size());
}

std::vector<double> Bm25Scorer::score(const Index& index, std::string_view query) {
  if (index.leaves().size() != term_counts_.size()) throw PreconditionError("BM25 scorer built for another index");
  const auto n = static_cast<double>(term_counts_.size());
  std::vector<double> scores(term_counts_.size(), 0.0);
  for (const auto& term : terms(query)) {
    auto df_it = document_frequency_.find(term);
    if (df_it == document_frequency_.end()) continue;
    const auto df = static_cast<double>(df_it->second);
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (size_t i = 0; i < term_counts_.size(); ++i) {
      auto tf_it = term_counts_[i].find(term);
      if (tf_it == term_counts_[i].end()) continue;
      const auto tf = static_cast<double>(tf_it->second);
      const double norm = avg_length_ == 0.0 ? 1.0 : static_cast<double>(lengths_[i]) / avg_length_;
      scores[i] += idf * tf * (k1_ + 1.0) / (tf + k1_ * (1.0 - b_ + b_ * norm));
    }
  }
  return scores;
}

std::vector<std::vector<double>> RemoteEmbeddingScorer::embed(const std::vector<std::string>& inputs) const {
  const auto reply = post_json(endpoint_, {{"model", endpoint_.model}, {"input", inputs}});
  std::vector<std::vector<double>> vectors(inputs.size());
  try {
    for (const auto& item : reply.at("data")) {
      const auto i = item.value("index", size_t{0});
      if (i >= vectors.size()) throw Error("embedding index out of range");
      vectors[i] = item.at("embedding").get<std::vector<double>>();
    }
  } catch (const json::exception& e) {
    throw Error("malformed embeddings response: " + std::string(e.what()));
  }
  for (const auto& v : vectors) {
    if (v.empty()) throw Error("embeddings response is missing vectors");
  }
  return vectors;
}

std::vector<double> RemoteEmbeddingScorer::score(const Index& index, std::string_view query) {
  {
    std::lock_guard lock(mutex_);
    if (cached_for_ != &index) {
      std::vector<std::string> texts;
      for (const auto& leaf : index.leaves()) texts.push_back(leaf.text);
      leaf_vectors_ = texts.empty() ? std::vector<std::vector<double>>{} : embed(texts);
      cached_for_ = &index;
    }
  }
  const auto q = embed({std::string(query)}).front();
  std::vector<double> scores;
  scores.reserve(leaf_vectors_.size());
  for (const auto& v : leaf_vectors_) scores.push_back(cosine(q, v));
  return scores;
}

RetrievalResult retrieve(const Index& index, LeafScorer& scorer, std::string_view query, size_t top) {
  if (unicode::trim(query).empty()) throw PreconditionError("empty retrieval query");
  const auto scores = scorer.score(index, query);
  if (scores.size() != index.leaves().size()) throw Error("scorer returned the wrong number of scores");
  RetrievalResult result;
  result.stage = RetrievalStage::kRaw;
  for (size_t i = 0; i < scores.size(); ++i) result.nodes.push_back({&index.leaves()[i], scores[i]});
  order(result.nodes);
  if (result.nodes.size() > top) result.nodes.resize(top);
  return result;
}

RetrievalResult auto_merge(const RetrievalResult& raw, const Index& index) {
  std::map<std::string, std::vector<const ScoredNode*>> by_parent;
  for (const auto& n : raw.nodes) {
    if (n.node->level == NodeLevel::kLeaf) by_parent[n.node->parent_id].push_back(&n);
  }
  std::set<std::string> merged_parents;
  RetrievalResult out;
  out.stage = RetrievalStage::kMerged;
  for (const auto& [parent_id, children] : by_parent) {
    const auto& parent = index.node(parent_id);
    if (2 * children.size() > parent.child_ids.size()) {
      double best = children.front()->score;
      for (const auto* c : children) best = std::max(best, c->score);
      out.nodes.push_back({&parent, best});
      merged_parents.insert(parent_id);
    }
  }
  for (const auto& n : raw.nodes) {
    if (n.node->level == NodeLevel::kLeaf && merged_parents.contains(n.node->parent_id)) continue;
    if (n.node->level == NodeLevel::kParent && merged_parents.contains(n.node->id)) continue;
    out.nodes.push_back(n);
  }
  order(out.nodes);
  return out;
}

std::vector<double> LexicalReranker::score(std::string_view query, std::span<const IndexNode* const> nodes) {
  const auto q = terms(query);
  const std::set<std::string> query_terms(q.begin(), q.end());
  std::vector<double> scores;
  scores.reserve(nodes.size());
  for (const auto* node : nodes) {
    if (query_terms.empty()) {
      scores.push_back(0.0);
      continue;
    }
    const auto t = terms(node->text);
    const std::set<std::string> node_terms(t.begin(), t.end());
    size_t hits = 0;
    for (const auto& term : query_terms) hits += node_terms.contains(term) ? 1 : 0;
    scores.push_back(static_cast<double>(hits) / static_cast<double>(query_terms.size()));
  }
  return scores;
}

std::vector<double> RemoteReranker::score(std::string_view query, std::span<const IndexNode* const> nodes) {
  if (nodes.empty()) return {};
  json documents = json::array();
  for (const auto* n : nodes) documents.push_back(n->text);
  const auto reply = post_json(endpoint_, {{"model", endpoint_.model},
                                           {"query", std::string(query)},
                                           {"documents", documents},
                                           {"top_n", nodes.size()}});
  std::vector<double> scores(nodes.size(), 0.0);
  try {
    for (const auto& item : reply.at("results")) {
      const auto i = item.at("index").get<size_t>();
      if (i >= scores.size()) throw Error("rerank index out of range");
      scores[i] = item.at("relevance_score").get<double>();
    }
  } catch (const json::exception& e) {
    throw Error("malformed rerank response: " + std::string(e.what()));
  }
  return scores;
}

RetrievalResult rerank(const RetrievalResult& merged, std::string_view query, Reranker& reranker, size_t keep) {
  std::vector<const IndexNode*> nodes;
  nodes.reserve(merged.nodes.size());
  for (const auto& n : merged.nodes) nodes.push_back(n.node);
  const auto scores = reranker.score(query, nodes);
  if (scores.size() != nodes.size()) throw Error("reranker returned the wrong number of scores");
  RetrievalResult out;
  out.stage = RetrievalStage::kReranked;
  for (size_t i = 0; i < nodes.size(); ++i) out.nodes.push_back({nodes[i], scores[i]});
  order(out.nodes);
  if (out.nodes.size() > keep) out.nodes.resize(keep);
  return out;
}

}  // namespace codemix::chat
