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
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace codemix::chat {

enum class NodeLevel { kParent, kLeaf };

std::string_view to_string(NodeLevel level) noexcept;

struct IndexNode {
  std::string id;
  NodeLevel level = NodeLevel::kLeaf;
  // Exact slice of the document, trailing whitespace included.
  std::string text;
  std::string parent_id;               // leaves only
  std::vector<std::string> child_ids;  // parents only
  size_t position = 0;                 // ordinal among nodes of the same level
  size_t word_offset = 0;              // first word's index in the document
  size_t word_count = 0;
};

struct IndexOptions {
  size_t leaf_size = 512;
  size_t parent_size = 2048;
};

/// Two-level chunk hierarchy over a single document. Immutable once built.
class Index {
 public:
  Index() = default;
  Index(IndexOptions options, std::vector<IndexNode> parents, std::vector<IndexNode> leaves);
  Index(const Index&) = delete;
  Index& operator=(const Index&) = delete;
  Index(Index&&) noexcept = default;
  Index& operator=(Index&&) noexcept = default;

  const IndexOptions& options() const noexcept { return options_; }
  const std::vector<IndexNode>& parents() const noexcept { return parents_; }
  const std::vector<IndexNode>& leaves() const noexcept { return leaves_; }
  const IndexNode& node(std::string_view id) const;
  const IndexNode& parent_of(const IndexNode& leaf) const;
  std::string text() const;

 private:
  IndexOptions options_;
  std::vector<IndexNode> parents_;
  std::vector<IndexNode> leaves_;
  std::map<std::string, const IndexNode*, std::less<>> by_id_;
};

/// Sizes are whitespace-delimited words. Sentences are packed greedily into
/// parents of at most parent_size words, then each parent into leaves of at
/// most leaf_size words; a sentence longer than the budget is cut at the
/// budget. Children reassemble their parent exactly.
Index build_index(std::string_view document, IndexOptions options = {});

/// manifest.json plus nodes/<id>.json.
void save_index(const Index& index, const std::filesystem::path& dir);
Index load_index(const std::filesystem::path& dir);

}  // namespace codemix::chat
