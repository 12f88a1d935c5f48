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

// Problem sets, answer extraction, pass@1 and the answer-delegation
// consistency experiment.

#pragma once

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "relay/backend.hpp"
#include "relay/calibration.hpp"
#include "relay/error.hpp"
#include "relay/metrics.hpp"
#include "relay/parallel.hpp"
#include "relay/switcher.hpp"

namespace relay {

enum class AnswerMode { Boxed, Letter };

inline AnswerMode answer_mode_from_string(std::string_view s) {
  if (s == "boxed") return AnswerMode::Boxed;
  if (s == "letter") return AnswerMode::Letter;
  throw Error(Errc::BadConfig, "unknown answer mode '" + std::string(s) + "'");
}

struct Problem {
  std::string id;
  std::string prompt;
  std::string reference_answer;  // normalized on load
};

namespace detail {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
inline bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

inline bool braces_balanced(std::string_view s) {
  int depth = 0;
  for (char c : s) {
    depth += c == '{' ? 1 : c == '}' ? -1 : 0;
    if (depth < 0) return false;
  }
  return depth == 0;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Content of the last \boxed{...}, braces matched.
inline std::optional<std::string> last_boxed(std::string_view text) {
  static constexpr std::string_view kBox = "\\boxed{";
  std::size_t at = text.rfind(kBox);
  while (at != std::string_view::npos) {
    int depth = 1;
    const std::size_t begin = at + kBox.size();
    for (std::size_t i = begin; i < text.size(); ++i) {
      if (text[i] == '{') ++depth;
      if (text[i] == '}' && --depth == 0) return std::string(text.substr(begin, i - begin));
    }
    // Unterminated; try an earlier box.
    at = at == 0 ? std::string_view::npos : text.rfind(kBox, at - 1);
  }
  return std::nullopt;
}

/// Text following the last "answer" marker, with connectives skipped.
inline std::optional<std::string_view> after_answer_marker(std::string_view text) {
  const std::string low = lower(text);
  const std::size_t at = low.rfind("answer");
  if (at == std::string::npos) return std::nullopt;
  std::string_view rest = text.substr(at + 6);
  for (bool changed = true; changed;) {
    changed = false;
    while (!rest.empty() && (is_space(rest.front()) || rest.front() == ':' || rest.front() == '=' ||
                             rest.front() == '*')) {
      rest.remove_prefix(1);
      changed = true;
    }
    if (lower(rest.substr(0, 3)) == "is " || lower(rest.substr(0, 3)) == "is:") {
      rest.remove_prefix(2);
      changed = true;
    }
  }
  return rest;
}

}  // namespace detail

/// Whitespace removed, trailing period dropped, and plain decimals put in
/// canonical form: "042.0" -> "42", "0.50" -> "0.5".
inline std::string normalize_answer(std::string_view raw) {
  std::string s;
  for (char c : raw) {
    if (!detail::is_space(c)) s += c;
  }
  while (!s.empty() && s.back() == '.') s.pop_back();

  std::size_t i = 0;
  std::string sign;
  if (i < s.size() && (s[i] == '-' || s[i] == '+')) sign = s[i++] == '-' ? "-" : "";
  const std::size_t int_begin = i;
  while (i < s.size() && detail::is_digit(s[i])) ++i;
  std::string int_part = s.substr(int_begin, i - int_begin);
  std::string frac_part;
  if (i < s.size() && s[i] == '.') {
    const std::size_t f = ++i;
    while (i < s.size() && detail::is_digit(s[i])) ++i;
    frac_part = s.substr(f, i - f);
  }
  if (i != s.size() || (int_part.empty() && frac_part.empty())) return s;  // not a plain number

  while (int_part.size() > 1 && int_part.front() == '0') int_part.erase(0, 1);
  if (int_part.empty()) int_part = "0";
  while (!frac_part.empty() && frac_part.back() == '0') frac_part.pop_back();
  std::string out = int_part + (frac_part.empty() ? "" : "." + frac_part);
  if (out != "0") out = sign + out;
  return out;
}

inline std::optional<std::string> extract_answer(std::string_view text,
                                                 AnswerMode mode = AnswerMode::Boxed) {
  if (mode == AnswerMode::Letter) {
    auto letter = [](std::string_view s) -> std::optional<std::string> {
      std::size_t i = 0;
      while (i < s.size() && (detail::is_space(s[i]) || s[i] == '(' || s[i] == '{')) ++i;
      if (i >= s.size()) return std::nullopt;
      const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(s[i])));
      if (c < 'A' || c > 'J') return std::nullopt;
      if (i + 1 < s.size() && std::isalnum(static_cast<unsigned char>(s[i + 1]))) return std::nullopt;
      return std::string(1, c);
    };
    if (auto boxed = detail::last_boxed(text)) {
      if (auto l = letter(*boxed)) return l;
    }
    if (auto rest = detail::after_answer_marker(text)) return letter(*rest);
    return std::nullopt;
  }

  if (auto boxed = detail::last_boxed(text)) {
    auto n = normalize_answer(*boxed);
    if (!n.empty()) return n;
  }
  auto rest = detail::after_answer_marker(text);
  if (!rest) return std::nullopt;
  std::size_t end = 0;
  while (end < rest->size() && !detail::is_space((*rest)[end])) ++end;
  std::string token(rest->substr(0, end));
  while (!token.empty() && (token.back() == '.' || token.back() == ',' || token.back() == '*')) {
    token.pop_back();
  }
  if (token.empty() || !detail::braces_balanced(token)) return std::nullopt;
  return normalize_answer(token);
}

inline std::vector<Problem> read_problems_jsonl(std::istream& in,
                                                AnswerMode mode = AnswerMode::Boxed) {
  std::vector<Problem> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Problem p;
      p.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      p.prompt = j.at("prompt").get<std::string>();
      const auto& a = j.at("answer");
      const std::string ans = a.is_string() ? a.get<std::string>() : a.dump();
      p.reference_answer = mode == AnswerMode::Letter
                               ? extract_answer("answer: " + ans, mode).value_or(ans)
                               : normalize_answer(ans);
      if (!ids.insert(p.id).second) {
        throw Error(Errc::BadConfig, "duplicate problem id '" + p.id + "'", lineno);
      }
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::BadConfig, std::string("bad problem line: ") + e.what(), lineno);
    }
  }
  return out;
}

struct Sample {
  Transcript transcript;
  std::optional<std::string> extracted_answer;
  bool correct = false;
};

struct EvalRun {
  std::string problem_id;
  std::vector<Sample> samples;
};

/// Mean over problems of the per-problem fraction of correct samples.
inline double pass_at_1(std::span<const EvalRun> runs) {
  if (runs.empty()) throw Error(Errc::EmptyInput, "no runs");
  double sum = 0.0;
  for (const auto& r : runs) {
    if (r.samples.empty()) throw Error(Errc::EmptyInput, "run '" + r.problem_id + "' has no samples");
    std::size_t ok = 0;
    for (const auto& s : r.samples) ok += s.correct ? 1 : 0;
    sum += static_cast<double>(ok) / static_cast<double>(r.samples.size());
  }
  return sum / static_cast<double>(runs.size());
}

/// Seed for sample `k` of problem `i`; fixed so mock runs reproduce.
inline std::uint64_t sample_seed(std::size_t problem_index, std::size_t sample_index) {
  return static_cast<std::uint64_t>(problem_index) * 1000003ULL + sample_index;
}

struct EvalOptions {
  std::size_t samples_per_problem = 4;
  Budgets budgets;
  Sampling sampling;
  AnswerMode mode = AnswerMode::Boxed;
  std::size_t jobs = 1;
};

/// Runs every (problem, sample) through a switching session.
inline std::vector<EvalRun> evaluate(std::span<const Problem> problems,
                                     const std::set<std::string>& cue_surfaces,
                                     const ModelBackend& large, const ModelBackend& small,
                                     const EvalOptions& opt) {
  if (opt.samples_per_problem == 0) throw Error(Errc::BadConfig, "samples_per_problem must be >= 1");
  std::vector<EvalRun> runs(problems.size());
  const std::size_t k = opt.samples_per_problem;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    runs[i].problem_id = problems[i].id;
    runs[i].samples.resize(k);
  }
  parallel_for(problems.size() * k, opt.jobs, [&](std::size_t idx) {
    const std::size_t i = idx / k;
    const std::size_t j = idx % k;
    Sampling sampling = opt.sampling;
    sampling.seed = sample_seed(i, j);
    Session s = start_session(problems[i].prompt, cue_surfaces, opt.budgets, sampling);
    Sample& out = runs[i].samples[j];
    out.transcript = run(s, large, small);
    const std::string text = out.transcript.text();
    const auto ans = out.transcript.answer_start();
    std::string answer_text;
    for (std::size_t t = ans; t < out.transcript.tokens.size(); ++t) {
      answer_text += out.transcript.tokens[t].record.text;
    }
    out.extracted_answer = extract_answer(answer_text.empty() ? text : answer_text, opt.mode);
    out.correct = out.extracted_answer && *out.extracted_answer == problems[i].reference_answer;
  });
  return runs;
}

struct DelegationItem {
  std::string problem_id;
  std::optional<std::string> large_answer;
  std::optional<std::string> small_answer;
  bool match = false;
  std::optional<std::string> error;
};

struct DelegationReport {
  std::vector<DelegationItem> items;
  std::size_t total = 0;    // problems with both branches completed
  std::size_t matches = 0;
  std::size_t errors = 0;
  std::optional<double> matching_rate;
};

struct DelegationOptions {
  std::size_t max_tokens = 32768;
  Sampling sampling;
  AnswerMode mode = AnswerMode::Boxed;
  std::size_t jobs = 1;
};

/// For each problem: the large model reasons through "</think>", then both
/// models complete the answer stage from that identical prefix. Endpoint
/// errors are recorded per problem and excluded from the rate.
inline DelegationReport answer_delegation_experiment(std::span<const Problem> problems,
                                                     const ModelBackend& large,
                                                     const ModelBackend& small,
                                                     const DelegationOptions& opt = {}) {
  DelegationReport rep;
  rep.items.resize(problems.size());
  parallel_for(problems.size(), opt.jobs, [&](std::size_t i) {
    DelegationItem& item = rep.items[i];
    item.problem_id = problems[i].id;
    Sampling sampling = opt.sampling;
    sampling.seed = sample_seed(i, 0);
    try {
      auto reasoning = large.generate(
          {problems[i].prompt, {std::string(kThinkEnd)}, opt.max_tokens, sampling});
      if (reasoning.stop_reason != StopReason::stop(std::string(kThinkEnd))) {
        throw Error(Errc::MalformedResponse, "reasoning ended without </think> (" +
                                                 std::string(to_string(reasoning.stop_reason)) + ")");
      }
      const std::string prefix = problems[i].prompt + reasoning.text();
      const GenerateRequest answer_req{prefix, {}, opt.max_tokens, sampling};
      item.large_answer = extract_answer(large.generate(answer_req).text(), opt.mode);
      item.small_answer = extract_answer(small.generate(answer_req).text(), opt.mode);
      item.match = item.large_answer == item.small_answer;
    } catch (const Error& e) {
      item.error = e.what();
    }
  });
  std::vector<std::optional<std::string>> ref, test;
  for (const auto& item : rep.items) {
    if (item.error) {
      ++rep.errors;
      continue;
    }
    ++rep.total;
    rep.matches += item.match ? 1 : 0;
    ref.push_back(item.large_answer);
    test.push_back(item.small_answer);
  }
  if (!ref.empty()) {
    rep.matching_rate = matching_rate(std::span<const std::optional<std::string>>(ref),
                                      std::span<const std::optional<std::string>>(test));
  }
  return rep;
}

inline nlohmann::json to_json(const DelegationReport& r) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : r.items) {
    nlohmann::json j = {{"id", it.problem_id}, {"match", it.match}};
    j["large_answer"] = it.large_answer ? nlohmann::json(*it.large_answer) : nlohmann::json(nullptr);
    j["small_answer"] = it.small_answer ? nlohmann::json(*it.small_answer) : nlohmann::json(nullptr);
    if (it.error) j["error"] = *it.error;
    items.push_back(std::move(j));
  }
  return {{"total", r.total},
          {"matches", r.matches},
          {"errors", r.errors},
          {"matching_rate", r.matching_rate ? nlohmann::json(*r.matching_rate) : nlohmann::json(nullptr)},
          {"items", std::move(items)}};
}

inline std::string format_delegation_table(const DelegationReport& r) {
  char rate[32] = "n/a";
  if (r.matching_rate) std::snprintf(rate, sizeof rate, "%.2f%%", *r.matching_rate * 100.0);
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-13s  %-7s  %s\n%-13zu  %-7zu  %s\n", "Total Samples", "Matches",
                "Matching Rate", r.total, r.matches, rate);
  std::string out = buf;
  if (r.errors > 0) {
    out += "coverage: " + std::to_string(r.total) + " of " + std::to_string(r.items.size()) +
           " problems (" + std::to_string(r.errors) + " failed)\n";
  }
  return out;
}

}  // namespace relay
