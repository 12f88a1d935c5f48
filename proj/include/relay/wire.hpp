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

// OpenAI-compatible /v1/completions payloads (legacy completions API with
// the vLLM extensions top_k, stop_reason and include_stop_str_in_output).
// Both the HTTP client and the mock server go through these functions, so
// the two sides cannot drift apart.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relay/backend.hpp"
#include "relay/error.hpp"
#include "relay/margin.hpp"
#include "relay/trace.hpp"

namespace relay::wire {

// Log-probability emitted for zero-probability alternatives; JSON has no
// -inf and exp(-1e4) underflows to exactly 0.
inline constexpr double kLogprobFloor = -1.0e4;

struct CompletionRequest {
  std::string model;
  std::string prompt;
  std::size_t max_tokens = 1;
  Sampling sampling;
  std::vector<std::string> stop;
  std::size_t logprobs = 2;
  bool echo = false;
  bool include_stop_str_in_output = false;
};

inline nlohmann::json encode_request(const CompletionRequest& r) {
  nlohmann::json j = {
      {"model", r.model},
      {"prompt", r.prompt},
      {"max_tokens", r.max_tokens},
      {"temperature", r.sampling.temperature},
      {"top_p", r.sampling.top_p},
      {"top_k", r.sampling.top_k},
      {"logprobs", r.logprobs},
      {"stop", r.stop},
  };
  if (r.sampling.seed) j["seed"] = *r.sampling.seed;
  if (r.echo) j["echo"] = true;
  if (r.include_stop_str_in_output) j["include_stop_str_in_output"] = true;
  return j;
}

inline CompletionRequest decode_request(const nlohmann::json& j) {
  CompletionRequest r;
  try {
    r.model = j.value("model", "");
    if (j.contains("prompt")) {
      const auto& p = j["prompt"];
      if (p.is_string()) r.prompt = p.get<std::string>();
      else if (p.is_array() && p.size() == 1 && p[0].is_string()) r.prompt = p[0].get<std::string>();
      else throw Error(Errc::BadRequest, "prompt must be a string");
    }
    r.max_tokens = j.value("max_tokens", std::size_t{16});
    r.sampling.temperature = j.value("temperature", 1.0);
    r.sampling.top_p = j.value("top_p", 1.0);
    r.sampling.top_k = j.value("top_k", -1);
    if (j.contains("seed") && j["seed"].is_number_integer()) r.sampling.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("stop")) {
      if (j["stop"].is_string()) r.stop = {j["stop"].get<std::string>()};
      else if (j["stop"].is_array()) r.stop = j["stop"].get<std::vector<std::string>>();
    }
    if (j.contains("logprobs") && j["logprobs"].is_number_integer()) {
      r.logprobs = j["logprobs"].get<std::size_t>();
    }
    r.echo = j.value("echo", false);
    r.include_stop_str_in_output = j.value("include_stop_str_in_output", false);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadRequest, e.what());
  }
  return r;
}

/// What a server produced for one choice, before client-side normalization.
struct RawCompletion {
  std::vector<TokenRecord> tokens;  // synthetic = no distribution (echo head)
  std::string finish_reason;        // "stop" | "length"
  std::optional<std::string> stop_reason;
  Usage usage;
};

inline nlohmann::json encode_response(const std::string& model, const RawCompletion& c,
                                      std::size_t top_k) {
  nlohmann::json tokens = nlohmann::json::array();
  nlohmann::json token_logprobs = nlohmann::json::array();
  nlohmann::json top_logprobs = nlohmann::json::array();
  nlohmann::json offsets = nlohmann::json::array();
  std::string text;
  for (const auto& t : c.tokens) {
    offsets.push_back(text.size());
    text += t.text;
    tokens.push_back(t.text);
    if (t.synthetic) {
      token_logprobs.push_back(nullptr);
      top_logprobs.push_back(nullptr);
      continue;
    }
    auto lp = [](double p) { return p > 0.0 ? std::max(std::log(p), kLogprobFloor) : kLogprobFloor; };
    nlohmann::json top = nlohmann::json::object();
    for (std::size_t i = 0; i < t.top_probs.size() && i < top_k; ++i) {
      top[t.top_probs[i].surface] = lp(t.top_probs[i].prob);
    }
    double chosen = t.top_probs.empty() ? 0.0 : t.top_probs.front().prob;
    for (const auto& cand : t.top_probs) {
      if (cand.surface == t.text) {
        chosen = cand.prob;
        break;
      }
    }
    token_logprobs.push_back(lp(chosen));
    top_logprobs.push_back(std::move(top));
  }
  nlohmann::json choice = {
      {"index", 0},
      {"text", text},
      {"logprobs",
       {{"tokens", tokens},
        {"token_logprobs", token_logprobs},
        {"top_logprobs", top_logprobs},
        {"text_offset", offsets}}},
      {"finish_reason", c.finish_reason},
      {"stop_reason", c.stop_reason ? nlohmann::json(*c.stop_reason) : nlohmann::json(nullptr)},
  };
  return {
      {"id", "cmpl-mock"},
      {"object", "text_completion"},
      {"created", 0},
      {"model", model},
      {"choices", nlohmann::json::array({std::move(choice)})},
      {"usage",
       {{"prompt_tokens", c.usage.prompt_tokens},
        {"completion_tokens", c.usage.completion_tokens},
        {"total_tokens", c.usage.prompt_tokens + c.usage.completion_tokens}}},
  };
}

/// Parses choices[0]. Top-logprob maps are converted to probabilities and
/// sorted descending; positions with a null map come back synthetic.
inline RawCompletion decode_response(const nlohmann::json& j) {
  RawCompletion out;
  try {
    const auto& choice = j.at("choices").at(0);
    out.finish_reason = choice.value("finish_reason", "");
    if (choice.contains("stop_reason") && choice["stop_reason"].is_string()) {
      out.stop_reason = choice["stop_reason"].get<std::string>();
    }
    if (j.contains("usage") && j["usage"].is_object()) {
      out.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::size_t{0});
      out.usage.completion_tokens = j["usage"].value("completion_tokens", std::size_t{0});
    }
    if (!choice.contains("logprobs") || !choice["logprobs"].is_object()) {
      throw Error(Errc::MalformedResponse, "response carries no logprobs");
    }
    const auto& lp = choice["logprobs"];
    const auto& toks = lp.at("tokens");
    const auto& tops = lp.at("top_logprobs");
    if (!toks.is_array() || !tops.is_array() || toks.size() != tops.size()) {
      throw Error(Errc::MalformedResponse, "tokens and top_logprobs differ in length");
    }
    for (std::size_t i = 0; i < toks.size(); ++i) {
      TokenRecord r;
      r.text = toks[i].get<std::string>();
      r.position = i;
      if (tops[i].is_null()) {
        r = synthetic_record(std::move(r.text), i);
      } else {
        for (const auto& [surface, value] : tops[i].items()) {
          r.top_probs.push_back({surface, value.is_null() ? 0.0 : prob_from_logprob(value.get<double>())});
        }
        sort_candidates(r.top_probs);
        try {
          validate_top_probs(r.top_probs, i);
        } catch (const Error& e) {
          throw Error(Errc::MalformedResponse, e.what(), i);
        }
      }
      out.tokens.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedResponse, e.what());
  }
  return out;
}

/// Maps a finish reason and matched stop string onto the library's stop
/// reason, re-appending a stripped stop surface.
inline GenerateResult to_generate_result(RawCompletion raw) {
  GenerateResult r;
  r.usage = raw.usage;
  if (raw.finish_reason == "length") {
    r.stop_reason = StopReason::max_tokens();
  } else if (raw.finish_reason == "stop" && raw.stop_reason) {
    r.stop_reason = StopReason::stop(*raw.stop_reason);
  } else if (raw.finish_reason == "stop" || raw.finish_reason == "eos") {
    r.stop_reason = StopReason::eos();
  } else {
    throw Error(Errc::MalformedResponse, "unknown finish_reason '" + raw.finish_reason + "'");
  }
  r.tokens = std::move(raw.tokens);
  for (std::size_t i = 0; i < r.tokens.size(); ++i) r.tokens[i].position = i;
  ensure_stop_surface(r);
  return r;
}

inline nlohmann::json error_body(Errc code, const std::string& message) {
  return {{"error", {{"message", message}, {"type", std::string(to_string(code))},
                     {"code", std::string(to_string(code))}}}};
}

}  // namespace relay::wire
