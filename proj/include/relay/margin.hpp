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

// Probability margins: top-1 minus top-2 probability at each decoding step.
// Low margin means the model was torn between candidates.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "relay/error.hpp"
#include "relay/trace.hpp"

namespace relay {

inline constexpr double kProbSumSlack = 1e-6;

struct MarginSeries {
  std::vector<double> values;
  // Positions that carry no model distribution (synthetic records). They
  // keep their slot so indices line up with the trace, but are skipped by
  // every statistic.
  std::vector<bool> excluded;
  std::string source_model;

  std::size_t size() const noexcept { return values.size(); }
  bool counts(std::size_t i) const { return i >= excluded.size() || !excluded[i]; }

  static MarginSeries from_values(std::vector<double> v, std::string model = "") {
    MarginSeries s;
    s.excluded.assign(v.size(), false);
    s.values = std::move(v);
    s.source_model = std::move(model);
    return s;
  }
};

struct MarginStats {
  double mean = 0.0;
  double std_dev = 0.0;
  double std_err = 0.0;
  std::size_t n = 0;
};

/// Validates a top-k list: at least two entries, each probability in [0, 1],
/// non-increasing, total mass at most one (plus slack).
inline void validate_top_probs(std::span<const Candidate> top, std::size_t position = 0) {
  if (top.size() < 2) {
    throw Error(Errc::MalformedRecord, "need top-1 and top-2 probabilities", position);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < top.size(); ++i) {
    double p = top[i].prob;
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(Errc::MalformedRecord, "probability out of [0,1]", position);
    }
    if (i > 0 && p > top[i - 1].prob) {
      throw Error(Errc::MalformedRecord, "top probabilities not sorted descending", position);
    }
    sum += p;
  }
  if (sum > 1.0 + kProbSumSlack) {
    throw Error(Errc::MalformedRecord, "top probabilities sum above 1", position);
  }
}

inline double compute_margin(std::span<const Candidate> top, std::size_t position = 0) {
  validate_top_probs(top, position);
  return top[0].prob - top[1].prob;
}

inline MarginSeries margins_from_trace(const Trace& trace) {
  MarginSeries s;
  s.source_model = trace.source_model;
  s.values.reserve(trace.size());
  s.excluded.reserve(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& tok = trace.tokens[i];
    s.values.push_back(compute_margin(tok.top_probs, i));
    s.excluded.push_back(tok.synthetic);
  }
  return s;
}

/// Mean, population standard deviation and standard error of a set of
/// values.
inline MarginStats describe(std::span<const double> values) {
  MarginStats st;
  st.n = values.size();
  if (st.n == 0) return st;
  double sum = 0.0;
  for (double v : values) sum += v;
  st.mean = sum / static_cast<double>(st.n);
  double ss = 0.0;
  for (double v : values) ss += (v - st.mean) * (v - st.mean);
  st.std_dev = std::sqrt(ss / static_cast<double>(st.n));
  st.std_err = st.std_dev / std::sqrt(static_cast<double>(st.n));
  return st;
}

/// Statistics over every counted position of every series, pooled.
inline MarginStats global_margin_stats(std::span<const MarginSeries> series_list) {
  std::vector<double> pooled;
  for (const auto& s : series_list) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.counts(i)) pooled.push_back(s.values[i]);
    }
  }
  if (pooled.size() < 2) {
    throw Error(Errc::InsufficientData,
                "need at least 2 token positions, got " + std::to_string(pooled.size()));
  }
  return describe(pooled);
}

/// Centered moving average with truncated windows at the edges. For even
/// windows the extra element is taken on the left.
inline std::vector<double> margin_trajectory(const MarginSeries& series, std::size_t window) {
  const std::size_t n = series.size();
  if (window == 0 || window > n) {
    throw Error(Errc::BadWindow,
                "window " + std::to_string(window) + " for series of length " + std::to_string(n));
  }
  const std::size_t left = window / 2;
  const std::size_t right = window - 1 - left;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t lo = i >= left ? i - left : 0;
    std::size_t hi = std::min(n - 1, i + right);
    double sum = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) sum += series.values[k];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

}  // namespace relay
