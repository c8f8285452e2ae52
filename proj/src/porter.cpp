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

#include "codemix/porter.hpp"

#include <algorithm>
#include <initializer_list>
#include <utility>

namespace codemix::metrics {

namespace {

// Index conventions match the reference implementation: `k` is the last
// index of the live word, `j` marks the end of the stem found by ends().
class Stemmer {
 public:
  explicit Stemmer(std::string word) : b_(std::move(word)), k_(static_cast<int>(b_.size()) - 1) {}

  std::string run() {
    if (k_ <= 1) return b_;
    step1ab();
    if (k_ > 0) {
      step1c();
      step2();
      step3();
      step4();
      step5();
    }
    return b_.substr(0, static_cast<size_t>(k_ + 1));
  }

 private:
  bool cons(int i) const {
    switch (b_[static_cast<size_t>(i)]) {
      case 'a':
      case 'e':
      case 'i':
      case 'o':
      case 'u':
        return false;
      case 'y':
        return i == 0 ? true : !cons(i - 1);
      default:
        return true;
    }
  }

  // Number of VC sequences in b[0..j].
  int m() const {
    int n = 0;
    int i = 0;
    for (;;) {
      if (i > j_) return n;
      if (!cons(i)) break;
      ++i;
    }
    ++i;
    for (;;) {
      for (;;) {
        if (i > j_) return n;
        if (cons(i)) break;
        ++i;
      }
      ++i;
      ++n;
      for (;;) {
        if (i > j_) return n;
        if (!cons(i)) break;
        ++i;
      }
      ++i;
    }
  }

  bool vowel_in_stem() const {
    for (int i = 0; i <= j_; ++i) {
      if (!cons(i)) return true;
    }
    return false;
  }

  bool double_consonant(int i) const {
    return i >= 1 && b_[static_cast<size_t>(i)] == b_[static_cast<size_t>(i - 1)] && cons(i);
  }

  // consonant-vowel-consonant ending at i, last consonant not w, x or y.
  bool cvc(int i) const {
    if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
    const char ch = b_[static_cast<size_t>(i)];
    return ch != 'w' && ch != 'x' && ch != 'y';
  }

  bool ends(std::string_view s) {
    const int length = static_cast<int>(s.size());
    if (length > k_ + 1) return false;
    if (std::string_view(b_).substr(static_cast<size_t>(k_ - length + 1), s.size()) != s) return false;
    j_ = k_ - length;
    return true;
  }

  void set_to(std::string_view s) {
    b_.replace(static_cast<size_t>(j_ + 1), static_cast<size_t>(k_ - j_), s);
    k_ = j_ + static_cast<int>(s.size());
    b_.resize(static_cast<size_t>(k_ + 1));
  }

  void replace_if_measured(std::string_view s) {
    if (m() > 0) set_to(s);
  }

  // First matching suffix wins, whether or not its condition holds.
  void try_rules(std::initializer_list<std::pair<std::string_view, std::string_view>> rules) {
    for (const auto& [suffix, replacement] : rules) {
      if (ends(suffix)) {
        replace_if_measured(replacement);
        return;
      }
    }
  }

  void step1ab() {
    if (b_[static_cast<size_t>(k_)] == 's') {
      if (ends("sses")) {
        k_ -= 2;
      } else if (ends("ies")) {
        set_to("i");
      } else if (b_[static_cast<size_t>(k_ - 1)] != 's') {
        --k_;
      }
    }
    if (ends("eed")) {
      if (m() > 0) --k_;
    } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
      k_ = j_;
      b_.resize(static_cast<size_t>(k_ + 1));
      if (ends("at")) {
        set_to("ate");
      } else if (ends("bl")) {
        set_to("ble");
      } else if (ends("iz")) {
        set_to("ize");
      } else if (double_consonant(k_)) {
        --k_;
        const char ch = b_[static_cast<size_t>(k_)];
        if (ch == 'l' || ch == 's' || ch == 'z') ++k_;
      } else if (j_ = k_; m() == 1 && cvc(k_)) {
        set_to("e");
      }
    }
    b_.resize(static_cast<size_t>(k_ + 1));
  }

  void step1c() {
    if (ends("y") && vowel_in_stem()) b_[static_cast<size_t>(k_)] = 'i';
  }

  void step2() {
    if (k_ < 1) return;
    switch (b_[static_cast<size_t>(k_ - 1)]) {
      case 'a':
        try_rules({{"ational", "ate"}, {"tional", "tion"}});
        break;
      case 'c':
        try_rules({{"enci", "ence"}, {"anci", "ance"}});
        break;
      case 'e':
        try_rules({{"izer", "ize"}});
        break;
      case 'l':
        try_rules({{"bli", "ble"}, {"alli", "al"}, {"entli", "ent"}, {"eli", "e"}, {"ousli", "ous"}});
        break;
      case 'o':
        try_rules({{"ization", "ize"}, {"ation", "ate"}, {"ator", "ate"}});
        break;
      case 's':
        try_rules({{"alism", "al"}, {"iveness", "ive"}, {"fulness", "ful"}, {"ousness", "ous"}});
        break;
      case 't':
        try_rules({{"aliti", "al"}, {"iviti", "ive"}, {"biliti", "ble"}});
        break;
      case 'g':
        try_rules({{"logi", "log"}});
        break;
      default:
        break;
    }
  }

  void step3() {
    switch (b_[static_cast<size_t>(k_)]) {
      case 'e':
        try_rules({{"icate", "ic"}, {"ative", ""}, {"alize", "al"}});
        break;
      case 'i':
        try_rules({{"iciti", "ic"}});
        break;
      case 'l':
        try_rules({{"ical", "ic"}, {"ful", ""}});
        break;
      case 's':
        try_rules({{"ness", ""}});
        break;
      default:
        break;
    }
  }

  void step4() {
    if (k_ < 1) return;
    auto any = [this](std::initializer_list<std::string_view> suffixes) {
      return std::any_of(suffixes.begin(), suffixes.end(), [this](std::string_view s) { return ends(s); });
    };
    bool matched = false;
    switch (b_[static_cast<size_t>(k_ - 1)]) {
      case 'a':
        matched = any({"al"});
        break;
      case 'c':
        matched = any({"ance", "ence"});
        break;
      case 'e':
        matched = any({"er"});
        break;
      case 'i':
        matched = any({"ic"});
        break;
      case 'l':
        matched = any({"able", "ible"});
        break;
      case 'n':
        matched = any({"ant", "ement", "ment", "ent"});
        break;
      case 'o':
        matched = (ends("ion") && j_ >= 0 &&
                   (b_[static_cast<size_t>(j_)] == 's' || b_[static_cast<size_t>(j_)] == 't')) ||
                  ends("ou");
        break;
      case 's':
        matched = any({"ism"});
        break;
      case 't':
        matched = any({"ate", "iti"});
        break;
      case 'u':
        matched = any({"ous"});
        break;
      case 'v':
        matched = any({"ive"});
        break;
      case 'z':
        matched = any({"ize"});
        break;
      default:
        break;
    }
    if (matched && m() > 1) {
      k_ = j_;
      b_.resize(static_cast<size_t>(k_ + 1));
    }
  }

  void step5() {
    j_ = k_;
    if (b_[static_cast<size_t>(k_)] == 'e') {
      const int a = m();
      if (a > 1 || (a == 1 && !cvc(k_ - 1))) --k_;
    }
    if (b_[static_cast<size_t>(k_)] == 'l' && double_consonant(k_) && m() > 1) --k_;
    b_.resize(static_cast<size_t>(k_ + 1));
  }

  std::string b_;
  int k_;
  int j_ = 0;
};

}  // namespace

std::string porter_stem(std::string_view word) {
  const bool ascii_lower = std::all_of(word.begin(), word.end(), [](char c) { return c >= 'a' && c <= 'z'; });
  if (!ascii_lower || word.size() <= 2) return std::string(word);
  return Stemmer(std::string(word)).run();
}

}  // namespace codemix::metrics
