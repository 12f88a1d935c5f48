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

// Deployment metrics over session transcripts. Utilization counts generated
// tokens only; the prompt is excluded.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "relay/error.hpp"
#include "relay/switcher.hpp"
#include "relay/trace.hpp"

namespace relay {

struct SessionStats {
  std::size_t total_tokens = 0;
  std::size_t large_tokens = 0;
  std::size_t small_tokens = 0;
  std::map<std::string, std::size_t> switch_count_by_direction;
  std::map<std::string, std::size_t> prefill_tokens_by_model;
  double utilization = 0.0;
};

inline double utilization(std::span<const Producer> attribution) {
  if (attribution.empty()) throw Error(Errc::EmptyTranscript, "no generated tokens");
  std::size_t large = 0;
  for (Producer p : attribution) large += p == Producer::Large ? 1 : 0;
  return static_cast<double>(large) / static_cast<double>(attribution.size());
}

inline double utilization(const Transcript& t) {
  const auto attr = t.attribution();
  return utilization(std::span<const Producer>(attr));
}

inline SessionStats session_stats(const Transcript& t) {
  SessionStats s;
  s.total_tokens = t.tokens.size();
  for (const auto& tok : t.tokens) {
    (tok.producer == Producer::Large ? s.large_tokens : s.small_tokens) += 1;
  }
  for (auto d : {Direction::LargeToSmall, Direction::SmallToLarge, Direction::ToAnswerStage}) {
    s.switch_count_by_direction[std::string(to_string(d))] = 0;
  }
  for (const auto& e : t.events) ++s.switch_count_by_direction[std::string(to_string(e.direction))];
  s.prefill_tokens_by_model["large"] = 0;
  s.prefill_tokens_by_model["small"] = 0;
  for (const auto& turn : t.turns) {
    s.prefill_tokens_by_model[std::string(to_string(turn.model))] += turn.prefill;
  }
  s.utilization = s.total_tokens == 0 ? 0.0 : utilization(t);
  return s;
}

/// Exact-match rate between two answer lists; absent matches absent.
inline double matching_rate(std::span<const std::optional<std::string>> ref,
                            std::span<const std::optional<std::string>> test) {
  if (ref.size() != test.size()) {
    throw Error(Errc::MisalignedInputs, "answer lists differ in length: " +
                                            std::to_string(ref.size()) + " vs " +
                                            std::to_string(test.size()));
  }
  if (ref.empty()) throw Error(Errc::EmptyInput, "no answers to compare");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) hits += ref[i] == test[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ref.size());
}

inline double matching_rate(std::span<const std::string> ref, std::span<const std::string> test) {
  std::vector<std::optional<std::string>> a(ref.begin(), ref.end());
  std::vector<std::optional<std::string>> b(test.begin(), test.end());
  return matching_rate(std::span<const std::optional<std::string>>(a),
                       std::span<const std::optional<std::string>>(b));
}

struct MeanStd {
  double mean = 0.0;
  double std_dev = 0.0;
};

/// Population mean and standard deviation.
inline MeanStd mean_std(std::span<const double> xs) {
  if (xs.empty()) throw Error(Errc::EmptyInput, "no values");
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size()))};
}

/// One row of per-session numbers; metric name -> value.
using MetricRow = std::map<std::string, double>;

inline MetricRow metric_row(const SessionStats& s) {
  MetricRow r;
  r["utilization"] = s.utilization;
  r["total_tokens"] = static_cast<double>(s.total_tokens);
  r["large_tokens"] = static_cast<double>(s.large_tokens);
  r["small_tokens"] = static_cast<double>(s.small_tokens);
  for (const auto& [k, v] : s.switch_count_by_direction) r["switches." + k] = static_cast<double>(v);
  for (const auto& [k, v] : s.prefill_tokens_by_model) r["prefill." + k] = static_cast<double>(v);
  return r;
}

using Summary = std::map<std::string, MeanStd>;

/// Mean and population std for every metric present in all rows.
inline Summary aggregate(std::span<const MetricRow> rows) {
  if (rows.empty()) throw Error(Errc::EmptyInput, "no sessions to aggregate");
  Summary out;
  for (const auto& [name, _] : rows.front()) {
    std::vector<double> xs;
    for (const auto& r : rows) {
      auto it = r.find(name);
      if (it == r.end()) break;
      xs.push_back(it->second);
    }
    if (xs.size() == rows.size()) out[name] = mean_std(xs);
  }
  return out;
}

inline Summary aggregate(std::span<const SessionStats> stats) {
  std::vector<MetricRow> rows;
  rows.reserve(stats.size());
  for (const auto& s : stats) rows.push_back(metric_row(s));
  return aggregate(std::span<const MetricRow>(rows));
}

inline nlohmann::json to_json(const SessionStats& s) {
  return {{"total_tokens", s.total_tokens},
          {"large_tokens", s.large_tokens},
          {"small_tokens", s.small_tokens},
          {"switch_count_by_direction", s.switch_count_by_direction},
          {"prefill_tokens_by_model", s.prefill_tokens_by_model},
          {"utilization", s.utilization}};
}

inline nlohmann::json to_json(const Summary& s) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : s) j[k] = {{"mean", v.mean}, {"std", v.std_dev}};
  return j;
}

inline nlohmann::json to_json(const SwitchEvent& e) {
  return {{"at_position", e.at_position},
          {"direction", std::string(to_string(e.direction))},
          {"trigger", e.trigger},
          {"prefill_new_tokens", e.prefill_new_tokens}};
}

inline nlohmann::json to_json(const Transcript& t) {
  nlohmann::json tokens = nlohmann::json::array();
  for (const auto& tok : t.tokens) {
    nlohmann::json j = {{"text", tok.record.text},
                        {"producer", std::string(to_string(tok.producer))},
                        {"pos", tok.record.position}};
    if (tok.record.synthetic) j["synthetic"] = true;
    tokens.push_back(std::move(j));
  }
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : t.events) events.push_back(to_json(e));
  nlohmann::json j = {{"prompt", t.prompt},
                      {"text", t.text()},
                      {"tokens", std::move(tokens)},
                      {"events", std::move(events)},
                      {"stats", to_json(session_stats(t))},
                      {"final_phase", std::string(to_string(t.final_phase))},
                      {"budget_exhausted", t.budget_exhausted},
                      {"aborted", t.aborted}};
  if (t.aborted) j["abort_reason"] = t.abort_reason;
  return j;
}

/// One column of a speedup/utilization table.
struct MethodColumn {
  std::string method;
  MeanStd speedup;
  MeanStd utilization;  // fraction; printed as a percentage
};

/// Aligned text table: one row per metric, one column per method.
inline std::string format_method_table(std::span<const MethodColumn> cols) {
  auto cell = [](double mean, double sd, bool pct) {
    char buf[64];
    if (pct) {
      std::snprintf(buf, sizeof buf, "%.2f ± %.2f", mean * 100.0, sd * 100.0);
    } else {
      std::snprintf(buf, sizeof buf, "%.2fx ± %.2f", mean, sd);
    }
    return std::string(buf);
  };
  // "±" is two bytes but one column wide.
  auto width_of = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80 ? 1 : 0;
    return w;
  };
  auto pad = [&](const std::string& s, std::size_t w) {
    return s + std::string(w > width_of(s) ? w - width_of(s) : 0, ' ');
  };

  std::vector<std::string> head{"Metric"};
  std::vector<std::string> speed{"Speedup"};
  std::vector<std::string> util{"Large-Model Utilization (%)"};
  for (const auto& c : cols) {
    head.push_back(c.method);
    speed.push_back(cell(c.speedup.mean, c.speedup.std_dev, false));
    util.push_back(cell(c.utilization.mean, c.utilization.std_dev, true));
  }
  std::vector<std::size_t> w(head.size(), 0);
  for (const auto* row : {&head, &speed, &util}) {
    for (std::size_t i = 0; i < row->size(); ++i) w[i] = std::max(w[i], width_of((*row)[i]));
  }
  std::string out;
  for (const auto* row : {&head, &speed, &util}) {
    for (std::size_t i = 0; i < row->size(); ++i) {
      out += i + 1 == row->size() ? (*row)[i] : pad((*row)[i], w[i]) + "  ";
    }
    out += '\n';
  }
  return out;
}

}  // namespace relay
