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

// Offline switch-cue selection.
//
// For every cue occurrence in the calibration traces we average the margin
// from the cue token through the token that ends its sentence (both
// inclusive). A cue is selected when the mean of those per-occurrence
// averages is at least the pooled token-level mean plus one standard error
// of that pooled mean, and it occurred at least `min_count` times.
//
// Margins are taken under the small model by default: large-model traces are
// rescored by the small model, so the selected cues mark continuations the
// small model finds easy.

#pragma once

#include <algorithm>
#include <cstddef>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "relay/backend.hpp"
#include "relay/cues.hpp"
#include "relay/error.hpp"
#include "relay/margin.hpp"
#include "relay/parallel.hpp"
#include "relay/trace.hpp"

namespace relay {

inline constexpr std::string_view kThinkEnd = "</think>";

struct CueStats {
  std::string cue_canonical;
  std::size_t occurrence_count = 0;
  double post_sentence_mean = 0.0;
  double post_sentence_std_err = 0.0;
  bool selected = false;
};

struct ModelPair {
  std::string large_id;
  std::string small_id;

  bool operator==(const ModelPair&) const = default;
};

struct SwitchCueSet {
  ModelPair model_pair;
  std::set<std::string> surfaces;
  std::vector<CueStats> report;
  MarginStats global_stats;
  nlohmann::json config_echo = nlohmann::json::object();
  std::vector<std::string> warnings;

  std::vector<std::string> selected_canonicals() const {
    std::vector<std::string> out;
    for (const auto& s : report) {
      if (s.selected) out.push_back(s.cue_canonical);
    }
    std::sort(out.begin(), out.end());
    return out;
  }
};

/// A trace paired with the margins it is scored under.
struct ScoredTrace {
  Trace trace;
  MarginSeries series;
};

inline std::optional<double> post_sentence_margin(const MarginSeries& series,
                                                  const Detokenized& text,
                                                  std::size_t cue_position) {
  const std::size_t n = text.starts.size() - 1;
  if (series.size() != n) {
    throw Error(Errc::MisalignedInputs, "series length " + std::to_string(series.size()) +
                                            " vs trace length " + std::to_string(n));
  }
  const std::size_t end = std::min(next_sentence_end(text, cue_position), n - 1);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = cue_position; i <= end; ++i) {
    if (!series.counts(i)) continue;
    sum += series.values[i];
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

inline std::optional<double> post_sentence_margin(const MarginSeries& series, const Trace& trace,
                                                  const CueOccurrence& occ) {
  if (series.size() != trace.size()) {
    throw Error(Errc::MisalignedInputs, "series length " + std::to_string(series.size()) +
                                            " vs trace length " + std::to_string(trace.size()));
  }
  return post_sentence_margin(series, detokenize(trace.tokens), occ.token_position);
}

/// Per-cue statistics over all occurrence-level post-sentence margins.
/// Cues that never occur are omitted; output is ordered by canonical form.
inline std::vector<CueStats> aggregate_cue_stats(std::span<const ScoredTrace> corpus,
                                                 const CuePool& pool) {
  std::map<std::string, std::vector<double>> per_cue;
  for (std::size_t t = 0; t < corpus.size(); ++t) {
    const auto& [trace, series] = corpus[t];
    if (series.size() != trace.size()) {
      throw Error(Errc::MisalignedInputs, "trace " + trace.id + ": series length " +
                                              std::to_string(series.size()) + " vs " +
                                              std::to_string(trace.size()));
    }
    if (trace.empty()) continue;
    const Detokenized d = detokenize(trace.tokens);
    for (const auto& occ : find_occurrences(trace, pool)) {
      if (auto m = post_sentence_margin(series, d, occ.token_position)) {
        per_cue[occ.cue_canonical].push_back(*m);
      }
    }
  }
  std::vector<CueStats> out;
  out.reserve(per_cue.size());
  for (const auto& [cue, margins] : per_cue) {
    const MarginStats st = describe(margins);
    out.push_back({cue, st.n, st.mean, st.std_err, false});
  }
  return out;
}

inline double selection_threshold(const MarginStats& global) {
  return global.mean + global.std_err;
}

inline std::set<std::string> surfaces_for(const CuePool& pool, const std::string& canonical) {
  if (const auto* e = pool.find(canonical)) return e->variants;
  return expand_variants(canonical);
}

/// Applies the selection criterion. The report is ordered by descending
/// post-sentence mean, ties broken by canonical form.
inline SwitchCueSet select_switch_cues(std::vector<CueStats> stats, const MarginStats& global,
                                       std::size_t min_count, ModelPair model_pair,
                                       const CuePool& pool = default_pool()) {
  if (global.n < 2) {
    throw Error(Errc::InsufficientData, "global statistics need n >= 2");
  }
  SwitchCueSet out;
  out.model_pair = std::move(model_pair);
  out.global_stats = global;
  if (stats.empty()) {
    out.warnings.emplace_back(std::string(to_string(Errc::EmptySelection)) +
                              ": no cue occurrences in calibration traces");
    return out;
  }
  const double threshold = selection_threshold(global);
  for (auto& s : stats) {
    s.selected = s.occurrence_count >= min_count && s.post_sentence_mean >= threshold;
    if (s.selected) {
      auto v = surfaces_for(pool, s.cue_canonical);
      out.surfaces.insert(v.begin(), v.end());
    }
  }
  std::sort(stats.begin(), stats.end(), [](const CueStats& a, const CueStats& b) {
    if (a.post_sentence_mean != b.post_sentence_mean) {
      return a.post_sentence_mean > b.post_sentence_mean;
    }
    return a.cue_canonical < b.cue_canonical;
  });
  out.report = std::move(stats);
  if (out.surfaces.empty()) {
    out.warnings.emplace_back(std::string(to_string(Errc::EmptySelection)) +
                              ": no cue cleared the threshold");
  }
  return out;
}

// ---------------------------------------------------------------------------
// End-to-end calibration
// ---------------------------------------------------------------------------

enum class ScoreUnder { Small, Large };

inline std::string_view to_string(ScoreUnder s) {
  return s == ScoreUnder::Small ? "small" : "large";
}

inline ScoreUnder score_under_from_string(std::string_view s) {
  if (s == "small") return ScoreUnder::Small;
  if (s == "large") return ScoreUnder::Large;
  throw Error(Errc::BadConfig, "score_under must be \"small\" or \"large\"");
}

struct CalibrationConfig {
  std::size_t samples_per_prompt = 4;
  std::size_t min_count = 3;
  ScoreUnder score_under = ScoreUnder::Small;
  // Ablation: deploy every pool surface instead of the selected ones.
  bool all_candidates = false;
  std::size_t max_trace_tokens = 32768;
  Sampling sampling;
  unsigned jobs = 1;
};

/// Either pre-recorded large-model traces or prompts to generate them from.
/// `small` rescored the traces when scoring under the small model.
struct TraceSource {
  std::vector<std::string> prompts;
  std::vector<Trace> recorded;
  const ModelBackend* large = nullptr;
  const ModelBackend* small = nullptr;
};

struct CalibrationResult {
  SwitchCueSet cue_set;
  std::vector<ScoredTrace> scored;
};

namespace detail {

/// Keeps records of a rescored `prompt + generated` text that start at or
/// after the prompt boundary.
inline std::vector<TokenRecord> drop_prompt_records(std::vector<TokenRecord> records,
                                                    std::size_t prompt_chars) {
  std::vector<TokenRecord> out;
  std::size_t offset = 0;
  for (auto& r : records) {
    const std::size_t start = offset;
    offset += r.text.size();
    if (start < prompt_chars) continue;
    r.position = out.size();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace detail

inline CalibrationResult calibrate(const CalibrationConfig& cfg, const TraceSource& source,
                                   const CuePool& pool = default_pool()) {
  struct Raw {
    std::string prompt;
    Trace trace;
  };
  std::vector<Raw> raw;

  if (!source.recorded.empty()) {
    for (const auto& t : source.recorded) raw.push_back({"", t});
  } else {
    if (source.large == nullptr) {
      throw Error(Errc::BadConfig, "calibration needs recorded traces or a large-model endpoint");
    }
    if (cfg.samples_per_prompt == 0) throw Error(Errc::BadConfig, "samples_per_prompt must be >= 1");
    raw.resize(source.prompts.size() * cfg.samples_per_prompt);
    parallel_for(raw.size(), cfg.jobs, [&](std::size_t k) {
      const std::size_t p = k / cfg.samples_per_prompt;
      const std::size_t s = k % cfg.samples_per_prompt;
      GenerateRequest req;
      req.prompt = source.prompts[p];
      req.stop = {std::string(kThinkEnd)};
      req.max_tokens = cfg.max_trace_tokens;
      req.sampling = cfg.sampling;
      req.sampling.seed = s;
      GenerateResult res = source.large->generate(req);
      Trace t;
      t.id = "p" + std::to_string(p) + "-s" + std::to_string(s);
      t.source_model = source.large->model_id();
      t.tokens = std::move(res.tokens);
      for (std::size_t i = 0; i < t.tokens.size(); ++i) t.tokens[i].position = i;
      raw[k] = {source.prompts[p], std::move(t)};
    });
  }

  std::vector<ScoredTrace> scored(raw.size());
  const ModelBackend* scorer = nullptr;
  if (cfg.score_under == ScoreUnder::Small) {
    if (source.small == nullptr) {
      throw Error(Errc::BadConfig, "score_under = small needs a small-model endpoint");
    }
    scorer = source.small;
  }
  parallel_for(raw.size(), cfg.jobs, [&](std::size_t k) {
    ScoredTrace st;
    if (scorer != nullptr) {
      const std::string text = raw[k].prompt + trace_text(raw[k].trace);
      st.trace.id = raw[k].trace.id;
      st.trace.source_model = scorer->model_id();
      if (!text.empty()) {
        st.trace.tokens = detail::drop_prompt_records(scorer->rescore(text), raw[k].prompt.size());
      }
    } else {
      st.trace = raw[k].trace;
    }
    st.series = margins_from_trace(st.trace);
    scored[k] = std::move(st);
  });

  std::vector<MarginSeries> all_series;
  all_series.reserve(scored.size());
  for (const auto& s : scored) all_series.push_back(s.series);
  const MarginStats global = global_margin_stats(all_series);

  ModelPair pair;
  if (source.large != nullptr) pair.large_id = source.large->model_id();
  else if (!source.recorded.empty()) pair.large_id = source.recorded.front().source_model;
  if (pair.large_id.empty()) pair.large_id = "recorded";
  if (source.small != nullptr) pair.small_id = source.small->model_id();

  SwitchCueSet set =
      select_switch_cues(aggregate_cue_stats(scored, pool), global, cfg.min_count, pair, pool);
  if (cfg.all_candidates) set.surfaces = pool.all_surfaces();

  set.config_echo = {
      {"samples_per_prompt", cfg.samples_per_prompt},
      {"min_count", cfg.min_count},
      {"score_under", to_string(cfg.score_under)},
      {"all_candidates", cfg.all_candidates},
      {"max_trace_tokens", cfg.max_trace_tokens},
      {"traces", scored.size()},
      {"prompts", source.recorded.empty() ? source.prompts.size() : 0},
      {"pool_size", pool.size()},
  };
  return {std::move(set), std::move(scored)};
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const MarginStats& g) {
  return {{"mean", g.mean}, {"std", g.std_dev}, {"se", g.std_err}, {"n", g.n}};
}

inline nlohmann::json to_json(const SwitchCueSet& set) {
  nlohmann::json report = nlohmann::json::array();
  for (const auto& s : set.report) {
    report.push_back({{"cue", s.cue_canonical},
                      {"count", s.occurrence_count},
                      {"mean", s.post_sentence_mean},
                      {"se", s.post_sentence_std_err},
                      {"selected", s.selected}});
  }
  return {
      {"model_pair", {{"large", set.model_pair.large_id}, {"small", set.model_pair.small_id}}},
      {"surfaces", set.surfaces},
      {"report", std::move(report)},
      {"global", to_json(set.global_stats)},
      {"config_echo", set.config_echo},
      {"warnings", set.warnings},
  };
}

inline SwitchCueSet switch_cue_set_from_json(const nlohmann::json& j) {
  try {
    SwitchCueSet set;
    set.model_pair.large_id = j.at("model_pair").value("large", "");
    set.model_pair.small_id = j.at("model_pair").value("small", "");
    for (const auto& s : j.at("surfaces")) set.surfaces.insert(s.get<std::string>());
    if (j.contains("report")) {
      for (const auto& r : j["report"]) {
        set.report.push_back({r.at("cue").get<std::string>(), r.at("count").get<std::size_t>(),
                              r.at("mean").get<double>(), r.at("se").get<double>(),
                              r.value("selected", false)});
      }
    }
    if (j.contains("global")) {
      const auto& g = j["global"];
      set.global_stats = {g.at("mean").get<double>(), g.at("std").get<double>(),
                          g.at("se").get<double>(), g.at("n").get<std::size_t>()};
    }
    if (j.contains("config_echo")) set.config_echo = j["config_echo"];
    if (j.contains("warnings")) set.warnings = j["warnings"].get<std::vector<std::string>>();
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadConfig, std::string("switch cue set: ") + e.what());
  }
}

/// Human-readable selection report.
inline std::string format_report(const SwitchCueSet& set) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "model pair: " << set.model_pair.large_id << " / " << set.model_pair.small_id << '\n';
  os << "global margin: mean " << set.global_stats.mean << "  std " << set.global_stats.std_dev
     << "  se " << set.global_stats.std_err << "  n " << set.global_stats.n << '\n';
  os << "threshold (mean + 1 se): " << selection_threshold(set.global_stats) << "\n\n";
  os << std::left << std::setw(16) << "cue" << std::right << std::setw(8) << "count"
     << std::setw(10) << "mean" << std::setw(10) << "se" << "  selected\n";
  for (const auto& s : set.report) {
    os << std::left << std::setw(16) << s.cue_canonical << std::right << std::setw(8)
       << s.occurrence_count << std::setw(10) << s.post_sentence_mean << std::setw(10)
       << s.post_sentence_std_err << "  " << (s.selected ? "yes" : "no") << '\n';
  }
  os << "\nsurfaces (" << set.surfaces.size() << "):";
  for (const auto& s : set.surfaces) os << " \"" << s << '"';
  os << '\n';
  for (const auto& w : set.warnings) os << "warning: " << w << '\n';
  return os.str();
}

}  // namespace relay
