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

// Wire-compatible HTTP front for a script: POST /v1/completions,
// GET /v1/models, GET /health.

#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "relay/error.hpp"
#include "relay/mocksim/script.hpp"
#include "relay/wire.hpp"

namespace relay::mocksim {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  bool echo_supported = true;
  // Test hook: answer the first N completion requests with 503.
  int fail_first_n = 0;
};

class MockServer {
 public:
  explicit MockServer(Script script, ServerOptions opts = {})
      : script_(std::make_shared<const Script>(std::move(script))), opts_(std::move(opts)) {
    install_routes();
  }

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  ~MockServer() { stop(); }

  /// Binds and serves on a background thread; returns the bound port.
  int start() {
    if (opts_.port == 0) {
      port_ = server_.bind_to_any_port(opts_.host);
    } else {
      port_ = server_.bind_to_port(opts_.host, opts_.port) ? opts_.port : -1;
    }
    if (port_ < 0) {
      throw Error(Errc::IoError, "cannot bind " + opts_.host + ":" + std::to_string(opts_.port));
    }
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  /// Serves on the calling thread until stop() is called elsewhere.
  void run_blocking() {
    if (!server_.listen(opts_.host, opts_.port)) {
      throw Error(Errc::IoError, "cannot listen on " + opts_.host + ":" + std::to_string(opts_.port));
    }
  }

  void stop() {
    if (server_.is_running()) server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }
  std::string url() const { return "http://" + opts_.host + ":" + std::to_string(port_); }
  int requests_served() const noexcept { return served_.load(); }

 private:
  static void reply_error(httplib::Response& res, int status, Errc code, const std::string& msg) {
    res.status = status;
    res.set_content(wire::error_body(code, msg).dump(), "application/json");
  }

  void install_routes() {
    server_.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"status\":\"ok\"}", "application/json");
    });
    server_.Get("/v1/models", [this](const httplib::Request&, httplib::Response& res) {
      nlohmann::json body = {
          {"object", "list"},
          {"data", {{{"id", script_->model_id}, {"object", "model"}, {"owned_by", "mocksim"}}}}};
      res.set_content(body.dump(), "application/json");
    });
    server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      handle_completion(req, res);
    });
  }

  void handle_completion(const httplib::Request& http_req, httplib::Response& res) {
    if (failures_.fetch_add(1) < opts_.fail_first_n) {
      reply_error(res, 503, Errc::EndpointError, "injected failure");
      return;
    }
    try {
      const auto body = nlohmann::json::parse(http_req.body);
      const wire::CompletionRequest req = wire::decode_request(body);
      if (!req.model.empty() && req.model != script_->model_id) {
        reply_error(res, 404, Errc::ModelNotFound, "The model `" + req.model + "` does not exist.");
        return;
      }
      wire::RawCompletion out;
      GenerateRequest gen{req.prompt, req.stop, req.max_tokens, req.sampling};
      if (req.echo) {
        if (!opts_.echo_supported) {
          reply_error(res, 400, Errc::UnsupportedCapability, "echo is not supported");
          return;
        }
        out.tokens = serve_rescore(*script_, req.prompt);
        out.usage.prompt_tokens = out.tokens.size();
        out.finish_reason = "length";
        if (req.max_tokens > 0) {
          try {
            auto cont = serve_generate(*script_, gen, req.include_stop_str_in_output);
            for (auto& t : cont.tokens) out.tokens.push_back(std::move(t));
            out.finish_reason = cont.finish_reason;
            out.stop_reason = cont.stop_reason;
            out.usage.completion_tokens = cont.usage.completion_tokens;
          } catch (const Error&) {
            // Echo-table entries have no continuation.
          }
        }
      } else {
        out = serve_generate(*script_, gen, req.include_stop_str_in_output);
      }
      if (script_->per_token_latency_ms > 0.0) {
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(
            script_->per_token_latency_ms * static_cast<double>(out.usage.completion_tokens)));
      }
      ++served_;
      res.set_content(wire::encode_response(script_->model_id, out, req.logprobs).dump(),
                      "application/json");
    } catch (const Error& e) {
      reply_error(res, 400, e.code(), e.what());
    } catch (const nlohmann::json::exception& e) {
      reply_error(res, 400, Errc::BadRequest, e.what());
    }
  }

  std::shared_ptr<const Script> script_;
  ServerOptions opts_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  std::atomic<int> failures_{0};
  std::atomic<int> served_{0};
};

}  // namespace relay::mocksim
