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

// Token records and traces: the atoms every other module consumes.
//
// A trace is stored as decoded token surfaces plus the endpoint-reported
// top-k alternatives at each step. All text-level analysis (cue matching,
// sentence boundaries) works on the concatenation of surfaces, so traces are
// tokenizer-agnostic.
//
// JSONL layout, one token per line:
//   {"text": " Thus", "top": [[" Thus", 0.81], [" So", 0.07]], "pos": 12}
// Optional keys: "top_logprobs" (same shape, log-space), "synthetic",
// "trace" (groups lines into traces). Unknown keys are ignored. Without a
// "trace" key a line with pos == 0 starts a new trace.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "relay/error.hpp"

namespace relay {

enum class Producer { Large, Small };

inline constexpr std::string_view to_string(Producer p) {
  return p == Producer::Large ? "large" : "small";
}

inline Producer producer_from_string(std::string_view s) {
  if (s == "large" || s == "L") return Producer::Large;
  if (s == "small" || s == "S") return Producer::Small;
  throw Error(Errc::BadRequest, "unknown producer '" + std::string(s) + "'");
}

struct Candidate {
  std::string surface;
  double prob = 0.0;

  bool operator==(const Candidate&) const = default;
};

struct TokenRecord {
  std::string text;
  std::vector<Candidate> top_probs;
  std::size_t position = 0;
  // No model distribution behind this record: a stop surface re-appended by
  // the orchestrator, or an unscored first position of a rescored text.
  bool synthetic = false;

  bool operator==(const TokenRecord&) const = default;
};

/// Builds the placeholder record used for text that has no distribution.
inline TokenRecord synthetic_record(std::string text, std::size_t position = 0) {
  TokenRecord r;
  r.top_probs = {{text, 1.0}, {"", 0.0}};
  r.text = std::move(text);
  r.position = position;
  r.synthetic = true;
  return r;
}

/// exp() of a log-probability, clamped into [0, 1]. Servers occasionally
/// report tiny positive logprobs for near-certain tokens.
inline double prob_from_logprob(double logprob) {
  if (std::isnan(logprob)) return 0.0;
  return std::clamp(std::exp(logprob), 0.0, 1.0);
}

/// Sorts alternatives by descending probability, breaking ties by surface so
/// that unordered wire maps normalize deterministically.
inline void sort_candidates(std::vector<Candidate>& top) {
  std::stable_sort(top.begin(), top.end(), [](const Candidate& a, const Candidate& b) {
    if (a.prob != b.prob) return a.prob > b.prob;
    return a.surface < b.surface;
  });
}

struct Trace {
  std::string id;
  std::string source_model;
  std::vector<TokenRecord> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
};

/// Concatenated surfaces plus the character offset where each token starts.
/// `starts` has one extra trailing entry equal to `text.size()`.
struct Detokenized {
  std::string text;
  std::vector<std::size_t> starts;

  /// Index of the token whose span contains character `offset`.
  std::size_t token_at(std::size_t offset) const {
    auto it = std::upper_bound(starts.begin(), starts.end() - 1, offset);
    return static_cast<std::size_t>(std::distance(starts.begin(), it)) - 1;
  }
};

template <typename Tokens>
Detokenized detokenize(const Tokens& tokens) {
  Detokenized d;
  d.starts.reserve(tokens.size() + 1);
  for (const auto& t : tokens) {
    d.starts.push_back(d.text.size());
    d.text += t.text;
  }
  d.starts.push_back(d.text.size());
  return d;
}

inline std::string trace_text(const Trace& trace) {
  std::string out;
  for (const auto& t : trace.tokens) out += t.text;
  return out;
}

// ---------------------------------------------------------------------------
// JSONL
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<Candidate> parse_top(const nlohmann::json& arr, bool log_space,
                                        std::size_t line) {
  if (!arr.is_array()) throw Error(Errc::MalformedRecord, "'top' must be an array", line);
  std::vector<Candidate> out;
  out.reserve(arr.size());
  for (const auto& pair : arr) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string()) {
      throw Error(Errc::MalformedRecord, "top entries must be [surface, prob]", line);
    }
    double v = pair[1].is_null() ? -INFINITY : pair[1].get<double>();
    out.push_back({pair[0].get<std::string>(), log_space ? prob_from_logprob(v) : v});
  }
  return out;
}

}  // namespace detail

inline TokenRecord token_from_json(const nlohmann::json& j, std::size_t line = 0) {
  if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
    throw Error(Errc::MalformedRecord, "token line needs a string 'text'", line);
  }
  TokenRecord r;
  r.text = j["text"].get<std::string>();
  if (j.contains("top")) {
    r.top_probs = detail::parse_top(j["top"], false, line);
  } else if (j.contains("top_logprobs")) {
    r.top_probs = detail::parse_top(j["top_logprobs"], true, line);
    sort_candidates(r.top_probs);
  } else {
    throw Error(Errc::MalformedRecord, "token line needs 'top' or 'top_logprobs'", line);
  }
  if (j.contains("pos") && j["pos"].is_number_integer()) r.position = j["pos"].get<std::size_t>();
  if (j.contains("synthetic") && j["synthetic"].is_boolean()) r.synthetic = j["synthetic"].get<bool>();
  return r;
}

inline nlohmann::json token_to_json(const TokenRecord& r) {
  nlohmann::json top = nlohmann::json::array();
  for (const auto& c : r.top_probs) top.push_back({c.surface, c.prob});
  nlohmann::json j = {{"text", r.text}, {"top", std::move(top)}, {"pos", r.position}};
  if (r.synthetic) j["synthetic"] = true;
  return j;
}

inline std::vector<Trace> read_traces_jsonl(std::istream& in, const std::string& source_model = "") {
  std::vector<Trace> traces;
  std::string line;
  std::size_t line_no = 0;
  std::string current_id;
  bool have_ids = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::MalformedRecord, std::string("invalid JSON: ") + e.what(), line_no);
    }
    TokenRecord rec = token_from_json(j, line_no);
    bool starts_new = traces.empty();
    if (j.contains("trace")) {
      have_ids = true;
      std::string id = j["trace"].is_string() ? j["trace"].get<std::string>() : j["trace"].dump();
      if (id != current_id) starts_new = true;
      current_id = id;
    } else if (!have_ids && j.contains("pos") && rec.position == 0) {
      starts_new = true;
    }
    if (starts_new) {
      Trace t;
      t.id = have_ids ? current_id : std::to_string(traces.size());
      t.source_model = source_model;
      traces.push_back(std::move(t));
    }
    rec.position = traces.back().tokens.size();
    traces.back().tokens.push_back(std::move(rec));
  }
  return traces;
}

inline void write_traces_jsonl(std::ostream& out, const std::vector<Trace>& traces) {
  for (const auto& t : traces) {
    for (std::size_t i = 0; i < t.tokens.size(); ++i) {
      auto j = token_to_json(t.tokens[i]);
      j["pos"] = i;
      j["trace"] = t.id;
      out << j.dump() << '\n';
    }
  }
}

}  // namespace relay
