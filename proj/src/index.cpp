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

#include "codemix/index.hpp"

#include <cstdio>
#include <fstream>
#include <optional>

#include <json.hpp>

#include "codemix/errors.hpp"
#include "codemix/unicode.hpp"

namespace codemix::chat {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct Word {
  std::string text;  // the word plus the whitespace after it
  bool ends_sentence = false;
};

bool is_terminator(char32_t cp) {
  switch (cp) {
    case U'.':
    case U'!':
    case U'?':
    case U'।':  // danda
    case U'॥':  // double danda
    case U'…':  // ellipsis
      return true;
    default:
      return false;
  }
}

std::vector<Word> split_words(std::string_view document) {
  std::vector<Word> words;
  std::string leading;
  std::string current;
  char32_t last = 0;
  size_t newlines = 0;
  bool in_space = false;
  auto finish = [&] {
    if (current.empty()) return;
    words.push_back({std::move(current), is_terminator(last) || newlines >= 2});
    current.clear();
  };
  for (char32_t cp : unicode::decode(document)) {
    if (unicode::is_whitespace(cp)) {
      if (current.empty() && words.empty()) {
        leading += unicode::encode(cp);
        continue;
      }
      in_space = true;
      if (cp == U'\n') ++newlines;
      current += unicode::encode(cp);
      continue;
    }
    if (in_space) {
      finish();
      in_space = false;
      newlines = 0;
    }
    if (current.empty() && !leading.empty()) current = std::move(leading), leading.clear();
    current += unicode::encode(cp);
    last = cp;
  }
  finish();
  return words;
}

struct Range {
  size_t begin;
  size_t end;
  size_t size() const { return end - begin; }
};

// Greedy sentence packing over words[range] with a word budget.
std::vector<Range> pack(const std::vector<Word>& words, Range range, size_t budget) {
  std::vector<Range> chunks;
  std::optional<Range> current;
  auto flush = [&] {
    if (current && current->size() > 0) chunks.push_back(*current);
    current.reset();
  };
  size_t start = range.begin;
  for (size_t i = range.begin; i < range.end; ++i) {
    if (!words[i].ends_sentence && i + 1 != range.end) continue;
    Range sentence{start, i + 1};
    start = i + 1;
    if (sentence.size() > budget) {
      flush();
      while (sentence.size() > budget) {
        chunks.push_back({sentence.begin, sentence.begin + budget});
        sentence.begin += budget;
      }
      current = sentence;
    } else if (current && current->size() + sentence.size() > budget) {
      flush();
      current = sentence;
    } else if (current) {
      current->end = sentence.end;
    } else {
      current = sentence;
    }
  }
  flush();
  return chunks;
}

std::string node_id(char prefix, size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%04zu", prefix, n);
  return buf;
}

std::string join(const std::vector<Word>& words, Range r) {
  std::string out;
  for (size_t i = r.begin; i < r.end; ++i) out += words[i].text;
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

}  // namespace

std::string_view to_string(NodeLevel level) noexcept { return level == NodeLevel::kParent ? "parent" : "leaf"; }

Index::Index(IndexOptions options, std::vector<IndexNode> parents, std::vector<IndexNode> leaves)
    : options_(options), parents_(std::move(parents)), leaves_(std::move(leaves)) {
  for (const auto& n : parents_) by_id_.emplace(n.id, &n);
  for (const auto& n : leaves_) {
    if (!by_id_.emplace(n.id, &n).second) throw PreconditionError("duplicate node id " + n.id);
  }
}

const IndexNode& Index::node(std::string_view id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw PreconditionError("no index node " + std::string(id));
  return *it->second;
}

const IndexNode& Index::parent_of(const IndexNode& leaf) const { return node(leaf.parent_id); }

std::string Index::text() const {
  std::string out;
  for (const auto& p : parents_) out += p.text;
  return out;
}

Index build_index(std::string_view document, IndexOptions options) {
  if (options.leaf_size == 0 || options.leaf_size >= options.parent_size) {
    throw PreconditionError("leaf size must be positive and smaller than the parent size");
  }
  const auto words = split_words(document);
  if (words.empty()) throw PreconditionError("cannot index an empty document");

  std::vector<IndexNode> parents;
  std::vector<IndexNode> leaves;
  for (const auto& pr : pack(words, {0, words.size()}, options.parent_size)) {
    IndexNode parent;
    parent.id = node_id('p', parents.size());
    parent.level = NodeLevel::kParent;
    parent.text = join(words, pr);
    parent.position = parents.size();
    parent.word_offset = pr.begin;
    parent.word_count = pr.size();
    for (const auto& lr : pack(words, pr, options.leaf_size)) {
      IndexNode leaf;
      leaf.id = node_id('l', leaves.size());
      leaf.text = join(words, lr);
      leaf.parent_id = parent.id;
      leaf.position = leaves.size();
      leaf.word_offset = lr.begin;
      leaf.word_count = lr.size();
      parent.child_ids.push_back(leaf.id);
      leaves.push_back(std::move(leaf));
    }
    parents.push_back(std::move(parent));
  }
  return Index(options, std::move(parents), std::move(leaves));
}

namespace {

ordered_json node_json(const IndexNode& n) {
  ordered_json j{{"id", n.id},
                 {"level", to_string(n.level)},
                 {"position", n.position},
                 {"word_offset", n.word_offset},
                 {"word_count", n.word_count}};
  if (n.level == NodeLevel::kLeaf) {
    j["parent_id"] = n.parent_id;
  } else {
    j["child_ids"] = n.child_ids;
  }
  j["text"] = n.text;
  return j;
}

IndexNode node_from_json(const json& j) {
  IndexNode n;
  n.id = j.at("id").get<std::string>();
  n.level = j.at("level").get<std::string>() == "parent" ? NodeLevel::kParent : NodeLevel::kLeaf;
  n.position = j.at("position").get<size_t>();
  n.word_offset = j.at("word_offset").get<size_t>();
  n.word_count = j.at("word_count").get<size_t>();
  n.text = j.at("text").get<std::string>();
  if (n.level == NodeLevel::kLeaf) {
    n.parent_id = j.at("parent_id").get<std::string>();
  } else {
    n.child_ids = j.at("child_ids").get<std::vector<std::string>>();
  }
  return n;
}

}  // namespace

void save_index(const Index& index, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "nodes");
  ordered_json manifest{{"format", "codemix-index/1"},
                        {"leaf_size", index.options().leaf_size},
                        {"parent_size", index.options().parent_size},
                        {"parents", json::array()},
                        {"leaves", json::array()}};
  for (const auto& n : index.parents()) {
    manifest["parents"].push_back(n.id);
    write_file(dir / "nodes" / (n.id + ".json"), node_json(n).dump(2) + "\n");
  }
  for (const auto& n : index.leaves()) {
    manifest["leaves"].push_back(n.id);
    write_file(dir / "nodes" / (n.id + ".json"), node_json(n).dump(2) + "\n");
  }
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Index load_index(const std::filesystem::path& dir) {
  try {
    const auto manifest = json::parse(read_file(dir / "manifest.json"));
    IndexOptions options{manifest.at("leaf_size").get<size_t>(), manifest.at("parent_size").get<size_t>()};
    auto load_all = [&](const char* key) {
      std::vector<IndexNode> nodes;
      for (const auto& id : manifest.at(key)) {
        nodes.push_back(node_from_json(json::parse(read_file(dir / "nodes" / (id.get<std::string>() + ".json")))));
      }
      return nodes;
    };
    Index index(options, load_all("parents"), load_all("leaves"));
    for (const auto& parent : index.parents()) {
      std::string joined;
      for (const auto& child : parent.child_ids) {
        const auto& leaf = index.node(child);
        if (leaf.parent_id != parent.id) throw ParseError("leaf " + child + " does not point back to " + parent.id);
        joined += leaf.text;
      }
      if (joined != parent.text) throw ParseError("children of " + parent.id + " do not reassemble its text");
    }
    return index;
  } catch (const json::exception& e) {
    throw ParseError("index at " + dir.string() + ": " + e.what());
  }
}

}  // namespace codemix::chat
