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

#include <stdexcept>
#include <string>

namespace codemix {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file, transcript, or request payload.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A caller violated an operation's precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Network or rate-limit failure talking to a model backend. Retryable.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Rejected credentials. Never retried.
class AuthError : public Error {
 public:
  using Error::Error;
};

/// Strict mock backend has no fixture for a prompt.
class FixtureMissError : public Error {
 public:
  FixtureMissError(const std::string& prompt_hash)
      : Error("no fixture for prompt hash " + prompt_hash), prompt_hash_(prompt_hash) {}
  const std::string& prompt_hash() const noexcept { return prompt_hash_; }

 private:
  std::string prompt_hash_;
};

}  // namespace codemix
