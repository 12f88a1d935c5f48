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

// TOML configuration files. Precedence when resolving a setting:
// command-line flag, then config file, then environment, then default.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <toml.hpp>

#include "relay/backend.hpp"
#include "relay/error.hpp"
#include "relay/mocksim/latency.hpp"
#include "relay/switcher.hpp"

namespace relay {

inline constexpr const char* kEnvLargeUrl = "RELAYGEN_LARGE_URL";
inline constexpr const char* kEnvSmallUrl = "RELAYGEN_SMALL_URL";
inline constexpr const char* kEnvApiKey = "RELAYGEN_API_KEY";

inline std::optional<std::string> env_var(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

inline toml::table load_toml(const std::filesystem::path& path) {
  try {
    return toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw Error(Errc::BadConfig, path.string() + ": " + std::string(e.description()),
                e.source().begin.line);
  }
}

/// Value at a dotted path ("budgets.max_total_tokens"); wrong types are a
/// config error rather than silently ignored.
template <typename T>
std::optional<T> toml_get(const toml::table& t, std::string_view dotted) {
  const auto node = t.at_path(dotted);
  if (!node) return std::nullopt;
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = node.value<double>()) return *v;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto v = node.as_boolean()) return v->get();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = node.as_string()) return v->get();
  } else {
    if (auto v = node.as_integer()) {
      if (v->get() < 0) throw Error(Errc::BadConfig, std::string(dotted) + " must be non-negative");
      return static_cast<T>(v->get());
    }
  }
  throw Error(Errc::BadConfig, std::string(dotted) + " has the wrong type");
}

template <typename T>
void toml_apply(const toml::table& t, std::string_view dotted, T& target) {
  if (auto v = toml_get<T>(t, dotted)) target = *v;
}

inline void apply_sampling(const toml::table& t, Sampling& s) {
  toml_apply(t, "sampling.temperature", s.temperature);
  toml_apply(t, "sampling.top_p", s.top_p);
  if (auto k = t.at_path("sampling.top_k").value<std::int64_t>()) s.top_k = static_cast<int>(*k);
}

inline void apply_budgets(const toml::table& t, Budgets& b) {
  toml_apply(t, "budgets.max_total_tokens", b.max_total_tokens);
  toml_apply(t, "budgets.max_small_segment_tokens", b.max_small_segment_tokens);
}

/// [cost] large_decode, small_decode, switch_overhead, large_prefill, small_prefill
inline mocksim::CostModel cost_model_from_toml(const toml::table& t) {
  mocksim::CostModel c;
  toml_apply(t, "cost.large_decode", c.large_decode);
  toml_apply(t, "cost.small_decode", c.small_decode);
  toml_apply(t, "cost.switch_overhead", c.switch_overhead);
  toml_apply(t, "cost.large_prefill", c.large_prefill);
  toml_apply(t, "cost.small_prefill", c.small_prefill);
  mocksim::validate(c);
  return c;
}

/// [spec] mean_accepted_span, verify_cost, draft_cost_per_token
inline std::optional<mocksim::SpecDecodeProfile> spec_profile_from_toml(const toml::table& t) {
  if (!t.contains("spec")) return std::nullopt;
  mocksim::SpecDecodeProfile s;
  toml_apply(t, "spec.mean_accepted_span", s.mean_accepted_span);
  toml_apply(t, "spec.verify_cost", s.verify_cost);
  toml_apply(t, "spec.draft_cost_per_token", s.draft_cost_per_token);
  mocksim::validate(s);
  return s;
}

}  // namespace relay
