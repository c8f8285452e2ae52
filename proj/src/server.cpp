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

#include "codemix/server.hpp"

#include <mutex>
#include <thread>

#include <json.hpp>

#include "codemix/errors.hpp"
#include "codemix/unicode.hpp"

namespace codemix::chat {

using nlohmann::json;
using nlohmann::ordered_json;

struct ChatServer::Impl {
  ServerConfig config;
  httplib::Server server;
  SessionStore sessions;
  std::mutex engine_mutex;
  std::shared_ptr<ChatEngine> engine;
  int bound_port = -1;
  std::thread thread;

  explicit Impl(ServerConfig c) : config(std::move(c)), sessions(config.history_turns) {}

  std::shared_ptr<ChatEngine> current_engine() {
    std::lock_guard lock(engine_mutex);
    return engine;
  }

  static void send_json(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, {{"error", message}});
  }

  bool authorized(const httplib::Request& req) const {
    if (!config.token) return true;
    return req.get_header_value("Authorization") == "Bearer " + *config.token;
  }

  void handle_chat(const httplib::Request& req, httplib::Response& res) {
    if (!authorized(req)) return send_error(res, 401, "missing or wrong bearer token");
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      return send_error(res, 400, "request body is not valid JSON");
    }
    if (!body.is_object()) return send_error(res, 400, "request body must be a JSON object");
    const auto pair_name = body.value("pair", json()).is_string() ? body["pair"].get<std::string>() : "";
    const auto pair = find_pair(pair_name);
    if (!pair) return send_error(res, 400, "unknown pair '" + pair_name + "'");
    const auto message = body.value("message", json()).is_string() ? body["message"].get<std::string>() : "";
    if (unicode::trim(message).empty()) return send_error(res, 400, "empty message");
    std::string session_id;
    if (body.contains("session_id") && !body["session_id"].is_null()) {
      if (!body["session_id"].is_string() || body["session_id"].get<std::string>().empty()) {
        return send_error(res, 400, "session_id must be a non-empty string");
      }
      session_id = body["session_id"].get<std::string>();
    }

    auto engine = current_engine();
    if (!engine) return send_error(res, 503, "index not loaded yet");
    if (session_id.empty()) session_id = sessions.create();

    const auto history = sessions.history(session_id);
    ChatTurn turn;
    try {
      turn = engine->answer(message, *pair, history);
    } catch (const PreconditionError& e) {
      return send_error(res, 400, e.what());
    }
    if (turn.error) {
      return send_json(res, 502, {{"error", turn.diagnostic}, {"session_id", session_id}});
    }
    sessions.append(session_id, {turn.query_en, turn.text_en});
    send_json(res, 200,
              {{"answer_cm", turn.text_cm},
               {"answer_en", turn.text_en},
               {"sources", turn.source_node_ids},
               {"session_id", session_id}});
  }

  void install_routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", config.cors_origin},
                                {"Access-Control-Allow-Headers", "Content-Type, Authorization"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      const bool loaded = current_engine() != nullptr;
      send_json(res, 200, {{"status", loaded ? "ok" : "loading"}, {"index_loaded", loaded}});
    });
    server.Get("/pairs", [](const httplib::Request&, httplib::Response& res) {
      ordered_json pairs = ordered_json::array();
      for (const auto& p : all_pairs()) {
        pairs.push_back({{"id", p.code},
                         {"name", p.display_name},
                         {"matrix_language", p.matrix_language},
                         {"matrix_script", script_name(p.matrix_script)}});
      }
      send_json(res, 200, pairs);
    });
    server.Post("/chat", [this](const httplib::Request& req, httplib::Response& res) { handle_chat(req, res); });
  }
};

ChatServer::ChatServer(ServerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
  impl_->install_routes();
}

ChatServer::~ChatServer() {
  stop();
  wait();
}

void ChatServer::set_engine(std::shared_ptr<ChatEngine> engine) {
  std::lock_guard lock(impl_->engine_mutex);
  impl_->engine = std::move(engine);
}

int ChatServer::bind() {
  if (impl_->bound_port >= 0) return impl_->bound_port;
  const auto& c = impl_->config;
  impl_->bound_port =
      c.port == 0 ? impl_->server.bind_to_any_port(c.host) : (impl_->server.bind_to_port(c.host, c.port) ? c.port : -1);
  if (impl_->bound_port < 0) {
    throw Error("cannot bind " + c.host + ":" + std::to_string(c.port));
  }
  return impl_->bound_port;
}

void ChatServer::start() {
  bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void ChatServer::run() {
  bind();
  impl_->server.listen_after_bind();
}

void ChatServer::stop() { impl_->server.stop(); }

void ChatServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace codemix::chat
