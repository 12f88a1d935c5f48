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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relay/trace.hpp"

namespace relay {

/// Pass-through sampling parameters. Defaults follow the recommended Qwen3
/// reasoning settings; both models in a session must use the same values.
struct Sampling {
  double temperature = 0.6;
  double top_p = 0.95;
  int top_k = 20;
  std::optional<std::uint64_t> seed;

  bool operator==(const Sampling&) const = default;
};

struct StopReason {
  enum class Kind { StopSurface, MaxTokens, EndOfSequence };

  Kind kind = Kind::EndOfSequence;
  std::string surface;  // set for StopSurface

  static StopReason stop(std::string s) { return {Kind::StopSurface, std::move(s)}; }
  static StopReason max_tokens() { return {Kind::MaxTokens, {}}; }
  static StopReason eos() { return {Kind::EndOfSequence, {}}; }

  bool operator==(const StopReason&) const = default;
};

inline std::string to_string(const StopReason& r) {
  switch (r.kind) {
    case StopReason::Kind::StopSurface: return "stop:" + r.surface;
    case StopReason::Kind::MaxTokens: return "max_tokens";
    case StopReason::Kind::EndOfSequence: return "eos";
  }
  return "unknown";
}

struct Usage {
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;

  bool operator==(const Usage&) const = default;
};

struct GenerateRequest {
  std::string prompt;
  std::vector<std::string> stop;
  std::size_t max_tokens = 1;
  Sampling sampling;
};

struct GenerateResult {
  std::vector<TokenRecord> tokens;
  StopReason stop_reason;
  Usage usage;

  bool operator==(const GenerateResult&) const = default;

  std::string text() const {
    std::string out;
    for (const auto& t : tokens) out += t.text;
    return out;
  }
};

struct ModelInfo {
  std::string id;
  std::string owned_by;
};

/// A served model. Implementations must be safe to call concurrently from
/// many sessions.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual std::string model_id() const = 0;

  /// Continues `req.prompt`. When generation halts on a stop surface, the
  /// surface is the tail of the returned tokens.
  virtual GenerateResult generate(const GenerateRequest& req) const = 0;

  /// One record per token of `text` scored by this model, without sampling.
  /// The first position has no conditional distribution and comes back as a
  /// synthetic record.
  virtual std::vector<TokenRecord> rescore(std::string_view text) const = 0;

  virtual ModelInfo health_check() const = 0;
};

/// Re-appends a stripped stop surface as a single synthetic record so the
/// resulting text is the same whether or not the server kept it.
inline void ensure_stop_surface(GenerateResult& result) {
  if (result.stop_reason.kind != StopReason::Kind::StopSurface) return;
  const std::string& s = result.stop_reason.surface;
  if (result.text().ends_with(s)) return;
  result.tokens.push_back(synthetic_record(s, result.tokens.size()));
}

}  // namespace relay
