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

#include <memory>
#include <optional>
#include <string>

#include "codemix/chat.hpp"

namespace codemix::chat {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string cors_origin = "*";
  // When set, POST /chat requires "Authorization: Bearer <token>".
  std::optional<std::string> token;
  size_t history_turns = 6;
};

/// HTTP front end of the chatbot.
///   POST /chat   {pair, message, session_id?} -> {answer_cm, answer_en, sources, session_id}
///   GET  /pairs  the five language pairs
///   GET  /health {status, index_loaded}
/// /chat answers 503 until an engine is attached.
class ChatServer {
 public:
  explicit ChatServer(ServerConfig config);
  ~ChatServer();
  ChatServer(const ChatServer&) = delete;
  ChatServer& operator=(const ChatServer&) = delete;

  void set_engine(std::shared_ptr<ChatEngine> engine);

  /// Binds the listening socket and returns the bound port.
  int bind();
  /// Serves on a background thread (binds first if needed).
  void start();
  /// Serves on the calling thread until stop().
  void run();
  /// Stops listening. Safe to call from a signal handler.
  void stop();
  /// Joins the thread started by start().
  void wait();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace codemix::chat
