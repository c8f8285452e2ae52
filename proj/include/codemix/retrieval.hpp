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

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "codemix/index.hpp"

namespace codemix::chat {

enum class RetrievalStage { kRaw, kMerged, kReranked };

std::string_view to_string(RetrievalStage stage) noexcept;

struct ScoredNode {
  const IndexNode* node = nullptr;
  double score = 0.0;
};

struct RetrievalResult {
  std::vector<ScoredNode> nodes;
  RetrievalStage stage = RetrievalStage::kRaw;

  std::vector<std::string> ids() const;
};

/// Lowercased word terms used by the lexical scorers (punctuation dropped).
std::vector<std::string> terms(std::string_view text);

/// Scores every leaf of an index against a query; one value per leaf, in
/// leaf order.
class LeafScorer {
 public:
  virtual ~LeafScorer() = default;
  virtual std::string id() const = 0;
  virtual std::vector<double> score(const Index& index, std::string_view query) = 0;
};

/// Okapi BM25 over leaves with idf = ln(1 + (N - df + 0.5) / (df + 0.5)).
class Bm25Scorer : public LeafScorer {
 public:
  explicit Bm25Scorer(const Index& index, double k1 = 1.2, double b = 0.75);

  std::string id() const override { return "bm25"; }
  std::vector<double> score(const Index& index, std::string_view query) override;

 private:
  double k1_;
  double b_;
  double avg_length_ = 0.0;
  std::vector<std::map<std::string, size_t>> term_counts_;
  std::vector<size_t> lengths_;
  std::map<std::string, size_t> document_frequency_;
};

struct RemoteEndpoint {
  std::string url;
  std::string model;
  // Bearer token source; no Authorization header when unset or empty.
  std::string api_key_env;
};

/// Cosine similarity of embeddings from an OpenAI-style /v1/embeddings
/// endpoint. Leaf embeddings are fetched once and cached.
class RemoteEmbeddingScorer : public LeafScorer {
 public:
  explicit RemoteEmbeddingScorer(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

  std::string id() const override { return "embedding:" + endpoint_.model; }
  std::vector<double> score(const Index& index, std::string_view query) override;

 private:
  std::vector<std::vector<double>> embed(const std::vector<std::string>& inputs) const;

  RemoteEndpoint endpoint_;
  std::mutex mutex_;
  const Index* cached_for_ = nullptr;
  std::vector<std::vector<double>> leaf_vectors_;
};

/// Top `top` leaves by score, ties broken by document position.
RetrievalResult retrieve(const Index& index, LeafScorer& scorer, std::string_view query, size_t top = 12);

/// Replaces the retrieved children of any parent with the parent itself when
/// strictly more than half of its children were retrieved. The parent takes
/// the best child score.
RetrievalResult auto_merge(const RetrievalResult& raw, const Index& index);

class Reranker {
 public:
  virtual ~Reranker() = default;
  virtual std::string id() const = 0;
  virtual std::vector<double> score(std::string_view query, std::span<const IndexNode* const> nodes) = 0;
};

/// Fraction of distinct query terms present in the node.
class LexicalReranker : public Reranker {
 public:
  std::string id() const override { return "lexical-overlap"; }
  std::vector<double> score(std::string_view query, std::span<const IndexNode* const> nodes) override;
};

/// Cross-encoder service speaking the common /rerank shape:
/// {model, query, documents} -> {results: [{index, relevance_score}]}.
class RemoteReranker : public Reranker {
 public:
  explicit RemoteReranker(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

  std::string id() const override { return "remote:" + endpoint_.model; }
  std::vector<double> score(std::string_view query, std::span<const IndexNode* const> nodes) override;

 private:
  RemoteEndpoint endpoint_;
};

/// Re-scores with `reranker` and keeps the best `keep`, in non-increasing
/// score order with document-position tie-breaks.
RetrievalResult rerank(const RetrievalResult& merged, std::string_view query, Reranker& reranker, size_t keep = 6);

}  // namespace codemix::chat
