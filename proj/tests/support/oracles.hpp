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

// Brute-force reference implementations. Deliberately naive: every candidate
// position is compared against every surface, and windows are found by a
// character walk, so that they share no code path with the library.

#pragma once

#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "relay/relay.hpp"

namespace relay::oracle {

inline std::vector<std::string> variants(const std::string& c) {
  std::string cap = c;
  cap[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(cap[0])));
  return {c, cap, c + ",", cap + ",", c + " ", cap + " "};
}

inline bool alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

inline bool terminator_at(const std::string& text, std::size_t i) {
  const char c = text[i];
  if (c == '!' || c == '?' || c == '\n') return true;
  if (c != '.') return false;
  const bool l = i > 0 && std::isdigit(static_cast<unsigned char>(text[i - 1]));
  const bool r = i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]));
  return !(l && r);
}

struct Triple {
  std::string cue;
  std::size_t begin_token;
  std::size_t end_token;
};

/// Every (cue, occurrence, window) triple in one trace.
inline std::vector<Triple> enumerate(const Trace& trace, const std::vector<std::string>& canonicals) {
  std::string text;
  std::vector<std::size_t> start;
  for (const auto& t : trace.tokens) {
    start.push_back(text.size());
    text += t.text;
  }
  struct Cand {
    std::size_t at, len;
    std::string cue, surface;
  };
  std::vector<Cand> cands;
  for (const auto& c : canonicals) {
    std::set<std::string> seen;
    for (const auto& v : variants(c)) {
      if (!seen.insert(v).second) continue;
      for (std::size_t at = 0; at + v.size() <= text.size(); ++at) {
        if (text.compare(at, v.size(), v) != 0) continue;
        if (alnum(v.front()) && at > 0 && alnum(text[at - 1])) continue;
        const std::size_t end = at + v.size();
        if (alnum(v.back()) && end < text.size() && alnum(text[end])) continue;
        cands.push_back({at, v.size(), c, v});
      }
    }
  }
  // Greedy: repeatedly take the best remaining candidate that overlaps
  // nothing taken so far.
  auto better = [](const Cand& a, const Cand& b) {
    if (a.len != b.len) return a.len > b.len;
    if (a.at != b.at) return a.at < b.at;
    return a.surface < b.surface;
  };
  std::vector<Cand> taken;
  std::vector<bool> used(cands.size(), false);
  for (;;) {
    int best = -1;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (used[i]) continue;
      bool clash = false;
      for (const auto& t : taken) clash = clash || (cands[i].at < t.at + t.len && t.at < cands[i].at + cands[i].len);
      if (clash) {
        used[i] = true;
        continue;
      }
      if (best < 0 || better(cands[i], cands[static_cast<std::size_t>(best)])) best = static_cast<int>(i);
    }
    if (best < 0) break;
    used[static_cast<std::size_t>(best)] = true;
    taken.push_back(cands[static_cast<std::size_t>(best)]);
  }

  auto token_of = [&](std::size_t ch) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < start.size(); ++i) {
      if (start[i] <= ch) k = i;
    }
    return k;
  };
  std::vector<Triple> out;
  for (const auto& m : taken) {
    const std::size_t b = token_of(m.at);
    std::size_t e = trace.tokens.size() - 1;
    for (std::size_t ch = start[b]; ch < text.size(); ++ch) {
      if (terminator_at(text, ch)) {
        e = token_of(ch);
        break;
      }
    }
    out.push_back({m.cue, b, e});
  }
  return out;
}

struct CueSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double se = 0.0;
};

inline std::map<std::string, CueSummary> cue_summaries(const std::vector<Trace>& traces,
                                                      const std::vector<MarginSeries>& series,
                                                      const std::vector<std::string>& canonicals) {
  std::map<std::string, std::vector<double>> per;
  for (std::size_t t = 0; t < traces.size(); ++t) {
    for (const auto& tr : enumerate(traces[t], canonicals)) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t i = tr.begin_token; i <= tr.end_token; ++i) {
        if (series[t].excluded[i]) continue;
        sum += series[t].values[i];
        ++n;
      }
      if (n > 0) per[tr.cue].push_back(sum / static_cast<double>(n));
    }
  }
  std::map<std::string, CueSummary> out;
  for (const auto& [cue, xs] : per) {
    double s = 0.0;
    for (double x : xs) s += x;
    const double mean = s / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(xs.size()));
    out[cue] = {xs.size(), mean, sd / std::sqrt(static_cast<double>(xs.size()))};
  }
  return out;
}

/// Canonicals clearing the threshold, recomputed from scratch.
inline std::set<std::string> selected(const std::vector<Trace>& traces,
                                      const std::vector<MarginSeries>& series,
                                      const std::vector<std::string>& canonicals,
                                      std::size_t min_count) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (!s.excluded[i]) {
        sum += s.values[i];
        ++n;
      }
    }
  }
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (!s.excluded[i]) ss += (s.values[i] - mean) * (s.values[i] - mean);
    }
  }
  const double se = std::sqrt(ss / static_cast<double>(n)) / std::sqrt(static_cast<double>(n));
  std::set<std::string> out;
  for (const auto& [cue, st] : cue_summaries(traces, series, canonicals)) {
    if (st.count >= min_count && st.mean >= mean + se) out.insert(cue);
  }
  return out;
}

inline std::vector<std::string> default_canonicals() {
  return {"now",   "then",      "next",         "again", "wait",  "however", "alternatively", "but",
          "maybe", "hmm",       "oh",           "thus",  "hence", "therefore", "similarly",   "specifically",
          "so",    "check",     "double-check", "verify", "another", "other",  "any",           "ah"};
}

}  // namespace relay::oracle
