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

// Discourse cues: the candidate pool, surface variants, occurrence search
// and sentence boundaries.
//
// Matching runs on detokenized text so a surface such as "So " can span
// several tokens. A match must not touch an alphanumeric character on either
// side ("await" does not contain "wait"). Overlapping matches are resolved
// longest surface first.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <toml.hpp>

#include "relay/error.hpp"
#include "relay/trace.hpp"

namespace relay {

enum class CueCategory {
  Progression,
  Reconsideration,
  Inference,
  Consolidation,
  Reference,
  Acknowledgement,
};

inline constexpr std::string_view to_string(CueCategory c) {
  switch (c) {
    case CueCategory::Progression: return "progression";
    case CueCategory::Reconsideration: return "reconsideration";
    case CueCategory::Inference: return "inference";
    case CueCategory::Consolidation: return "consolidation";
    case CueCategory::Reference: return "reference";
    case CueCategory::Acknowledgement: return "acknowledgement";
  }
  return "unknown";
}

inline CueCategory category_from_string(std::string_view s) {
  for (auto c : {CueCategory::Progression, CueCategory::Reconsideration, CueCategory::Inference,
                 CueCategory::Consolidation, CueCategory::Reference,
                 CueCategory::Acknowledgement}) {
    if (to_string(c) == s) return c;
  }
  throw Error(Errc::BadCue, "unknown cue category '" + std::string(s) + "'");
}

struct CueEntry {
  std::string canonical;
  CueCategory category = CueCategory::Progression;
  std::set<std::string> variants;
};

struct CueOccurrence {
  std::string cue_canonical;
  std::size_t token_position = 0;
  std::string matched_surface;
  std::size_t char_offset = 0;

  bool operator==(const CueOccurrence&) const = default;
};

namespace detail {

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

inline bool is_canonical_form(std::string_view s) {
  if (s.empty()) return false;
  if (std::isspace(static_cast<unsigned char>(s.front())) ||
      std::isspace(static_cast<unsigned char>(s.back()))) {
    return false;
  }
  return std::none_of(s.begin(), s.end(),
                      [](char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; });
}

}  // namespace detail

/// Surface forms generated for a canonical cue: lowercase and capitalized,
/// each bare, with a trailing comma and with a trailing space.
inline std::set<std::string> expand_variants(std::string_view canonical) {
  if (!detail::is_canonical_form(canonical)) {
    throw Error(Errc::BadCue, "canonical cue must be non-empty, lowercase and trimmed: '" +
                                  std::string(canonical) + "'");
  }
  std::string lower(canonical);
  std::string upper = lower;
  upper[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(upper[0])));
  std::set<std::string> out;
  for (const auto& base : {lower, upper}) {
    out.insert(base);
    out.insert(base + ",");
    out.insert(base + " ");
  }
  return out;
}

class CuePool {
 public:
  CuePool() = default;

  explicit CuePool(std::vector<CueEntry> entries) {
    for (auto& e : entries) add(std::move(e));
  }

  /// Adds an entry; the canonical form and its generated variants are always
  /// present in `variants`.
  void add(CueEntry entry) {
    auto base = expand_variants(entry.canonical);
    entry.variants.insert(base.begin(), base.end());
    if (find(entry.canonical) != nullptr) {
      throw Error(Errc::BadCue, "duplicate canonical cue '" + entry.canonical + "'");
    }
    entries_.push_back(std::move(entry));
  }

  const std::vector<CueEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  const CueEntry* find(std::string_view canonical) const {
    for (const auto& e : entries_) {
      if (e.canonical == canonical) return &e;
    }
    return nullptr;
  }

  std::set<std::string> all_surfaces() const {
    std::set<std::string> out;
    for (const auto& e : entries_) out.insert(e.variants.begin(), e.variants.end());
    return out;
  }

 private:
  std::vector<CueEntry> entries_;
};

/// The fixed candidate pool. "therefore" is listed under two categories in
/// the source table; it is stored once under its first category.
inline CuePool default_pool() {
  const std::pair<CueCategory, std::vector<std::string_view>> table[] = {
      {CueCategory::Progression, {"now", "then", "next", "again"}},
      {CueCategory::Reconsideration,
       {"wait", "however", "alternatively", "but", "maybe", "hmm", "oh"}},
      {CueCategory::Inference, {"thus", "hence", "therefore", "similarly", "specifically"}},
      {CueCategory::Consolidation, {"so", "therefore", "check", "double-check", "verify"}},
      {CueCategory::Reference, {"another", "other", "any"}},
      {CueCategory::Acknowledgement, {"ah"}},
  };
  CuePool pool;
  for (const auto& [category, cues] : table) {
    for (auto c : cues) {
      if (pool.find(c) != nullptr) continue;
      pool.add(CueEntry{std::string(c), category, {}});
    }
  }
  return pool;
}

/// Loads a replacement pool from TOML:
///   [[cue]]
///   canonical = "thus"
///   category = "inference"
///   extra_variants = ["THUS"]
inline CuePool load_pool_toml(const std::filesystem::path& path) {
  toml::table doc;
  try {
    doc = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw Error(Errc::BadConfig, path.string() + ": " + std::string(e.description()));
  }
  const auto* cues = doc["cue"].as_array();
  if (cues == nullptr) throw Error(Errc::BadConfig, path.string() + ": no [[cue]] tables");
  CuePool pool;
  for (const auto& node : *cues) {
    const auto* tbl = node.as_table();
    if (tbl == nullptr) throw Error(Errc::BadConfig, "[[cue]] entries must be tables");
    CueEntry e;
    e.canonical = (*tbl)["canonical"].value_or(std::string{});
    e.category = category_from_string((*tbl)["category"].value_or(std::string{"progression"}));
    if (const auto* extra = (*tbl)["extra_variants"].as_array()) {
      for (const auto& v : *extra) {
        if (auto s = v.value<std::string>(); s && !s->empty()) e.variants.insert(*s);
      }
    }
    pool.add(std::move(e));
  }
  return pool;
}

/// Every cue occurrence in the trace, ordered by position.
inline std::vector<CueOccurrence> find_occurrences(const Trace& trace, const CuePool& pool) {
  struct Match {
    std::size_t begin;
    std::size_t end;
    const std::string* canonical;
    const std::string* surface;
  };
  const Detokenized d = detokenize(trace.tokens);
  const std::string& text = d.text;

  std::vector<Match> matches;
  for (const auto& entry : pool.entries()) {
    for (const auto& surface : entry.variants) {
      if (surface.empty()) continue;
      const bool check_left = detail::is_word_char(surface.front());
      const bool check_right = detail::is_word_char(surface.back());
      for (auto at = text.find(surface); at != std::string::npos; at = text.find(surface, at + 1)) {
        const std::size_t end = at + surface.size();
        if (check_left && at > 0 && detail::is_word_char(text[at - 1])) continue;
        if (check_right && end < text.size() && detail::is_word_char(text[end])) continue;
        matches.push_back({at, end, &entry.canonical, &surface});
      }
    }
  }

  // Longest first; equal lengths by earlier start, then surface for a total
  // order independent of pool iteration.
  std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
    const auto la = a.end - a.begin;
    const auto lb = b.end - b.begin;
    if (la != lb) return la > lb;
    if (a.begin != b.begin) return a.begin < b.begin;
    return *a.surface < *b.surface;
  });
  std::vector<Match> accepted;
  std::vector<bool> taken(text.size(), false);
  for (const auto& m : matches) {
    bool clash = false;
    for (std::size_t i = m.begin; i < m.end && !clash; ++i) clash = taken[i];
    if (clash) continue;
    for (std::size_t i = m.begin; i < m.end; ++i) taken[i] = true;
    accepted.push_back(m);
  }
  std::sort(accepted.begin(), accepted.end(),
            [](const Match& a, const Match& b) { return a.begin < b.begin; });

  std::vector<CueOccurrence> out;
  out.reserve(accepted.size());
  for (const auto& m : accepted) {
    out.push_back({*m.canonical, d.token_at(m.begin), *m.surface, m.begin});
  }
  return out;
}

/// True when text[i] ends a sentence: '.', '!', '?' or a newline, except a
/// '.' with a digit on both sides.
inline bool is_sentence_terminator(std::string_view text, std::size_t i) {
  const char c = text[i];
  if (c == '!' || c == '?' || c == '\n') return true;
  if (c != '.') return false;
  const bool digit_before = i > 0 && std::isdigit(static_cast<unsigned char>(text[i - 1]));
  const bool digit_after =
      i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]));
  return !(digit_before && digit_after);
}

/// Smallest position >= `from_position` whose token contains a sentence
/// terminator, or the trace length when none does.
inline std::size_t next_sentence_end(const Detokenized& d, std::size_t from_position) {
  const std::size_t n = d.starts.size() - 1;
  if (from_position >= n) {
    throw Error(Errc::BadPosition,
                "position " + std::to_string(from_position) + " beyond trace of length " +
                    std::to_string(n));
  }
  for (std::size_t pos = from_position; pos < n; ++pos) {
    for (std::size_t i = d.starts[pos]; i < d.starts[pos + 1]; ++i) {
      if (is_sentence_terminator(d.text, i)) return pos;
    }
  }
  return n;
}

inline std::size_t next_sentence_end(const Trace& trace, std::size_t from_position) {
  return next_sentence_end(detokenize(trace.tokens), from_position);
}

}  // namespace relay
