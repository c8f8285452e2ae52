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

#include <cstdlib>

#include <json.hpp>

#include "codemix/errors.hpp"
#include "codemix/llm.hpp"
#include "http_util.hpp"

namespace codemix::llm {

using nlohmann::json;

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw PreconditionError("remote backend '" + config_.id + "' has no endpoint");
  if (config_.api_key_env.empty()) config_.api_key_env = default_api_key_env(config_.id);
  if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
}

std::string RemoteBackend::send(const std::string& prompt, const CompletionParams& params) {
  if (api_key_.empty()) {
    throw AuthError("no API key for backend '" + config_.id + "' (set " + config_.api_key_env + ")");
  }
  const auto url = detail::split_url(config_.endpoint);

  json messages = json::array();
  if (config_.system_prompt) messages.push_back({{"role", "system"}, {"content", *config_.system_prompt}});
  messages.push_back({{"role", "user"}, {"content", prompt}});
  json body{{"model", params.model_name.empty() ? config_.model : params.model_name},
            {"messages", messages},
            {"temperature", params.temperature},
            {"max_tokens", params.max_output_tokens}};

  httplib::Client client(url.origin);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(params.timeout).count();
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(params.timeout).count() % 1'000'000;
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);
  client.set_bearer_token_auth(api_key_);

  auto response = client.Post(url.path, body.dump(), "application/json");
  if (!response) {
    throw TransportError("request to " + config_.endpoint + " failed: " + httplib::to_string(response.error()));
  }
  const int status = response->status;
  if (status == 401 || status == 403) {
    throw AuthError("backend '" + config_.id + "' rejected credentials (HTTP " + std::to_string(status) + ")");
  }
  if (status == 408 || status == 429 || status >= 500) {
    throw TransportError("backend '" + config_.id + "' returned HTTP " + std::to_string(status));
  }
  if (status != 200) {
    throw Error("backend '" + config_.id + "' returned HTTP " + std::to_string(status) + ": " + response->body);
  }
  try {
    const auto reply = json::parse(response->body);
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    // Some providers return null content when the model produced nothing.
    return content.is_null() ? std::string{} : content.get<std::string>();
  } catch (const json::exception& e) {
    throw Error("malformed completion response from '" + config_.id + "': " + e.what());
  }
}

}  // namespace codemix::llm
