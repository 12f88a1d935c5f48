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

// Analytical latency accounting for an attributed generation.
//
//   total = sum of per-token decode costs
//         + switch_overhead * (number of producer changes)
//         + prefill cost of the tokens each model ingests when it takes over
//
// With a speculative-decoding profile, every large-model segment is costed
// as ceil(len / mean_accepted_span) verifications plus per-token drafting.
// Segments are explicit so that back-to-back segments of the same model
// (per-token routing decisions) reset the draft span. Speedup is measured
// against decoding everything on the large model without speculation.

#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "relay/error.hpp"
#include "relay/trace.hpp"

namespace relay::mocksim {

/// Per-token costs in arbitrary time units.
struct CostModel {
  double large_decode = 1.0;
  double small_decode = 0.25;
  double switch_overhead = 0.0;
  double large_prefill = 0.0;
  double small_prefill = 0.0;
};

struct SpecDecodeProfile {
  double mean_accepted_span = 1.0;
  double verify_cost = 1.0;
  double draft_cost_per_token = 0.0;
};

struct Segment {
  Producer producer = Producer::Large;
  std::size_t length = 0;
};

struct LatencyBreakdown {
  double total = 0.0;
  double large_decode = 0.0;
  double small_decode = 0.0;
  double switches = 0.0;
  double prefill = 0.0;
  double baseline = 0.0;
  double speedup = 1.0;
  std::size_t switch_count = 0;
};

inline void validate(const CostModel& c) {
  auto bad = [](const char* what) { throw Error(Errc::BadCostModel, what); };
  if (!(c.large_decode > 0.0)) bad("large_decode must be positive");
  if (!(c.small_decode > 0.0)) bad("small_decode must be positive");
  if (!(c.switch_overhead >= 0.0)) bad("switch_overhead must be non-negative");
  if (!(c.large_prefill >= 0.0)) bad("large_prefill must be non-negative");
  if (!(c.small_prefill >= 0.0)) bad("small_prefill must be non-negative");
}

inline void validate(const SpecDecodeProfile& s) {
  if (!(s.mean_accepted_span >= 1.0)) {
    throw Error(Errc::BadCostModel, "mean_accepted_span must be >= 1");
  }
  if (!(s.verify_cost > 0.0)) throw Error(Errc::BadCostModel, "verify_cost must be positive");
  if (!(s.draft_cost_per_token >= 0.0)) {
    throw Error(Errc::BadCostModel, "draft_cost_per_token must be non-negative");
  }
}

/// Merges a per-token producer list into maximal runs.
inline std::vector<Segment> segments_from(std::span<const Producer> attribution) {
  std::vector<Segment> out;
  for (Producer p : attribution) {
    if (out.empty() || out.back().producer != p) out.push_back({p, 0});
    ++out.back().length;
  }
  return out;
}

inline LatencyBreakdown simulate_latency(std::span<const Segment> segments, const CostModel& cost,
                                         const std::optional<SpecDecodeProfile>& spec = std::nullopt,
                                         std::size_t prompt_tokens = 0) {
  validate(cost);
  if (spec) validate(*spec);

  LatencyBreakdown out;
  std::size_t pos = 0;
  std::size_t seen[2] = {0, 0};
  bool has_prompt[2] = {false, false};
  const Segment* prev = nullptr;
  for (const auto& seg : segments) {
    if (seg.length == 0) continue;
    const int m = seg.producer == Producer::Large ? 0 : 1;
    if (prev != nullptr && prev->producer != seg.producer) {
      ++out.switch_count;
      out.switches += cost.switch_overhead;
    }
    const std::size_t ingest = (has_prompt[m] ? 0 : prompt_tokens) + (pos - seen[m]);
    out.prefill += static_cast<double>(ingest) * (m == 0 ? cost.large_prefill : cost.small_prefill);
    has_prompt[m] = true;

    const double len = static_cast<double>(seg.length);
    if (m == 1) {
      out.small_decode += len * cost.small_decode;
    } else if (spec) {
      out.large_decode += std::ceil(len / spec->mean_accepted_span) * spec->verify_cost +
                          len * spec->draft_cost_per_token;
    } else {
      out.large_decode += len * cost.large_decode;
    }
    pos += seg.length;
    seen[m] = pos;
    prev = &seg;
  }
  out.total = out.large_decode + out.small_decode + out.switches + out.prefill;
  out.baseline = static_cast<double>(pos) * cost.large_decode +
                 static_cast<double>(prompt_tokens) * cost.large_prefill;
  out.speedup = out.total > 0.0 ? out.baseline / out.total : 1.0;
  return out;
}

inline LatencyBreakdown simulate_latency(std::span<const Producer> attribution, const CostModel& cost,
                                         const std::optional<SpecDecodeProfile>& spec = std::nullopt,
                                         std::size_t prompt_tokens = 0) {
  const auto segs = segments_from(attribution);
  return simulate_latency(std::span<const Segment>(segs), cost, spec, prompt_tokens);
}

/// Splits every large-model segment into single-token segments, the shape a
/// per-token router produces.
inline std::vector<Segment> fragment_large(std::span<const Segment> segments) {
  std::vector<Segment> out;
  for (const auto& s : segments) {
    if (s.producer == Producer::Small) {
      out.push_back(s);
      continue;
    }
    for (std::size_t i = 0; i < s.length; ++i) out.push_back({Producer::Large, 1});
  }
  return out;
}

inline nlohmann::json to_json(const LatencyBreakdown& b) {
  return {{"total", b.total},       {"large_decode", b.large_decode},
          {"small_decode", b.small_decode}, {"switches", b.switches},
          {"prefill", b.prefill},   {"baseline", b.baseline},
          {"speedup", b.speedup},   {"switch_count", b.switch_count}};
}

}  // namespace relay::mocksim
