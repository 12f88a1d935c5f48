// Copyright 2026 The Relay Authors. All Rights Reserved.
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

// Client for OpenAI-compatible completion servers (vLLM, SGLang, the mock).
//
// Transport failures, 429 and 5xx responses are retried with jittered
// exponential backoff; other 4xx responses fail immediately. The client
// keeps no per-request state, so one instance can serve many sessions.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "relay/backend.hpp"
#include "relay/error.hpp"
#include "relay/wire.hpp"

namespace relay {

struct EndpointConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8000 or http://host:8000/v1
  std::string model_id;
  std::optional<std::string> api_key;
  std::chrono::milliseconds timeout{120'000};
  int max_retries = 3;
  std::size_t logprobs_top_k = 5;
  std::chrono::milliseconds backoff_base{250};
  std::chrono::milliseconds backoff_cap{8'000};
  // Ask the server to keep the stop string in its output (vLLM extension).
  bool include_stop_str_in_output = false;
};

inline void validate(const EndpointConfig& cfg) {
  if (cfg.base_url.empty()) throw Error(Errc::BadConfig, "endpoint base_url is empty");
  if (cfg.logprobs_top_k < 2) throw Error(Errc::BadConfig, "logprobs_top_k must be >= 2");
  if (cfg.max_retries < 0) throw Error(Errc::BadConfig, "max_retries must be >= 0");
}

/// Delay before retry number `attempt` (0-based): base * 2^attempt capped,
/// scaled by a uniform jitter in [0.5, 1].
inline std::chrono::milliseconds backoff_delay(const EndpointConfig& cfg, int attempt,
                                               std::mt19937_64& rng) {
  const double raw = static_cast<double>(cfg.backoff_base.count()) * std::pow(2.0, attempt);
  const double capped = std::min(raw, static_cast<double>(cfg.backoff_cap.count()));
  std::uniform_real_distribution<double> jitter(0.5, 1.0);
  return std::chrono::milliseconds(static_cast<std::int64_t>(capped * jitter(rng)));
}

class OpenAiClient final : public ModelBackend {
 public:
  explicit OpenAiClient(EndpointConfig cfg) : cfg_(std::move(cfg)) {
    validate(cfg_);
    split_url();
  }

  const EndpointConfig& config() const noexcept { return cfg_; }
  std::string model_id() const override { return cfg_.model_id; }

  GenerateResult generate(const GenerateRequest& req) const override {
    if (req.max_tokens == 0) throw Error(Errc::BadRequest, "max_tokens must be >= 1");
    wire::CompletionRequest wreq;
    wreq.model = cfg_.model_id;
    wreq.prompt = req.prompt;
    wreq.max_tokens = req.max_tokens;
    wreq.sampling = req.sampling;
    wreq.stop = req.stop;
    wreq.logprobs = cfg_.logprobs_top_k;
    wreq.include_stop_str_in_output = cfg_.include_stop_str_in_output;
    auto body = post("/completions", wire::encode_request(wreq));
    return wire::to_generate_result(wire::decode_response(body));
  }

  std::vector<TokenRecord> rescore(std::string_view text) const override {
    if (text.empty()) throw Error(Errc::BadRequest, "cannot rescore empty text");
    wire::CompletionRequest wreq;
    wreq.model = cfg_.model_id;
    wreq.prompt = std::string(text);
    wreq.max_tokens = 1;
    wreq.sampling.temperature = 0.0;
    wreq.sampling.top_p = 1.0;
    wreq.sampling.top_k = -1;
    wreq.logprobs = cfg_.logprobs_top_k;
    wreq.echo = true;
    nlohmann::json body;
    try {
      body = post("/completions", wire::encode_request(wreq));
    } catch (const Error& e) {
      if (e.code() == Errc::BadRequest) throw Error(Errc::UnsupportedCapability, e.what());
      throw;
    }
    auto raw = wire::decode_response(body);

    // Keep the echoed prompt part; the one generated token is discarded.
    std::vector<TokenRecord> out;
    std::size_t offset = 0;
    for (auto& t : raw.tokens) {
      if (offset >= text.size()) break;
      const std::size_t keep = std::min(t.text.size(), text.size() - offset);
      offset += t.text.size();
      t.text.resize(keep);
      t.position = out.size();
      out.push_back(std::move(t));
    }
    std::string echoed;
    for (const auto& t : out) echoed += t.text;
    if (echoed != text) {
      throw Error(Errc::UnsupportedCapability, "server did not echo prompt logprobs");
    }
    if (!out.front().synthetic) out.front() = synthetic_record(out.front().text, 0);
    return out;
  }

  ModelInfo health_check() const override {
    const auto body = get("/models");
    if (!body.contains("data") || !body["data"].is_array()) {
      throw Error(Errc::MalformedResponse, "/models response has no data array");
    }
    for (const auto& m : body["data"]) {
      const std::string id = m.value("id", "");
      if (cfg_.model_id.empty() || id == cfg_.model_id) return {id, m.value("owned_by", "")};
    }
    throw Error(Errc::ModelNotFound, "model '" + cfg_.model_id + "' not served at " + cfg_.base_url);
  }

  /// Fills in the model id from the server's listing when none was given.
  void resolve_model_id() {
    if (cfg_.model_id.empty()) cfg_.model_id = health_check().id;
  }

 private:
  void split_url() {
    std::string url = cfg_.base_url;
    while (!url.empty() && url.back() == '/') url.pop_back();
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    host_ = path_start == std::string::npos ? url : url.substr(0, path_start);
    prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
    if (!prefix_.ends_with("/v1")) prefix_ += "/v1";
  }

  httplib::Client make_client() const {
    httplib::Client cli(host_);
    const auto secs = cfg_.timeout.count() / 1000;
    const auto usecs = (cfg_.timeout.count() % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    return cli;
  }

  httplib::Headers headers() const {
    httplib::Headers h;
    if (cfg_.api_key && !cfg_.api_key->empty()) h.emplace("Authorization", "Bearer " + *cfg_.api_key);
    std::random_device rd;
    char id[17];
    std::snprintf(id, sizeof id, "%016llx",
                  static_cast<unsigned long long>((static_cast<std::uint64_t>(rd()) << 32) | rd()));
    h.emplace("X-Request-Id", id);
    return h;
  }

  template <typename Send>
  nlohmann::json with_retries(const std::string& what, Send&& send) const {
    std::mt19937_64 rng(std::random_device{}());
    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(backoff_delay(cfg_, attempt - 1, rng));
      httplib::Result res = send();
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status >= 400) throw_for_status(res->status, res->body);
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::MalformedResponse, std::string("non-JSON body: ") + e.what());
      }
    }
    throw Error(Errc::EndpointError, what + " failed after " + std::to_string(cfg_.max_retries + 1) +
                                         " attempts: " + last_error);
  }

  [[noreturn]] static void throw_for_status(int status, const std::string& body) {
    std::string message = body;
    std::optional<Errc> code;
    try {
      const auto j = nlohmann::json::parse(body);
      if (j.contains("error") && j["error"].is_object()) {
        message = j["error"].value("message", body);
        if (j["error"].contains("code") && j["error"]["code"].is_string()) {
          code = errc_from_string(j["error"]["code"].get<std::string>());
        }
      }
    } catch (const nlohmann::json::exception&) {
    }
    if (status == 404) throw Error(Errc::ModelNotFound, message);
    if (code && *code != Errc::EndpointError) throw Error(*code, message);
    throw Error(Errc::BadRequest, "HTTP " + std::to_string(status) + ": " + message);
  }

  nlohmann::json post(const std::string& path, const nlohmann::json& payload) const {
    const std::string body = payload.dump();
    return with_retries("POST " + path, [&] {
      auto cli = make_client();
      return cli.Post(prefix_ + path, headers(), body, "application/json");
    });
  }

  nlohmann::json get(const std::string& path) const {
    return with_retries("GET " + path, [&] {
      auto cli = make_client();
      return cli.Get(prefix_ + path, headers());
    });
  }

  EndpointConfig cfg_;
  std::string host_;
  std::string prefix_;
};

}  // namespace relay
