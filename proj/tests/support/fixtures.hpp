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

// Shared fixtures and hand-rolled generators for the test suites.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "relay/relay.hpp"

namespace relay::testing {

/// Two-candidate record whose margin is exactly `m` for dyadic m.
inline TokenRecord rec(std::string text, double m, std::size_t pos = 0) {
  TokenRecord r;
  r.top_probs = {{text, (1.0 + m) / 2.0}, {text == "<alt>" ? "<alt2>" : "<alt>", (1.0 - m) / 2.0}};
  r.text = std::move(text);
  r.position = pos;
  return r;
}

inline Trace make_trace(const std::vector<std::pair<std::string, double>>& toks,
                        std::string id = "t", std::string model = "large") {
  Trace t;
  t.id = std::move(id);
  t.source_model = std::move(model);
  for (const auto& [text, m] : toks) t.tokens.push_back(rec(text, m, t.tokens.size()));
  return t;
}

inline Trace text_trace(const std::vector<std::string>& toks, double m = 0.5) {
  std::vector<std::pair<std::string, double>> v;
  for (const auto& s : toks) v.emplace_back(s, m);
  return make_trace(v);
}

inline mocksim::ScriptPath script_path(const std::vector<std::string>& surfaces) {
  mocksim::ScriptPath p;
  for (const auto& s : surfaces) p.push_back({s, mocksim::one_hot(s)});
  return p;
}

inline mocksim::Script script_of(std::string model_id, const std::vector<std::string>& surfaces) {
  mocksim::Script s;
  s.model_id = std::move(model_id);
  s.paths.push_back(script_path(surfaces));
  return s;
}

// ---------------------------------------------------------------------------
// Two-cue session document: Large hits "Thus," twice, then "</think>".

inline const std::vector<std::string>& two_cue_prompt_tokens() {
  static const std::vector<std::string> t = {"Q", ":", " solve", " 2", "x", "=", "4", "?", "\n"};
  return t;
}

inline const std::vector<std::string>& two_cue_generated_tokens() {
  static const std::vector<std::string> t = {
      " We", " divide", " both", " sides", " by", " 2", ".",        // large
      " Thus,",                                                   // cue
      " x", " is", " 2", ".",                                      // small
      " Check", " it", ":", " 2", "*", "2", "=", "4", ".",         // large
      " Thus,",                                                   // cue
      " the", " value", " holds", ".",                             // small
      " Done", "</think>",                                        // large
      "\n", "The", " answer", " is", " \\boxed{2}", "."};          // small answer
  return t;
}

inline std::string two_cue_prompt() {
  std::string s;
  for (const auto& t : two_cue_prompt_tokens()) s += t;
  return s;
}

inline mocksim::Script two_cue_script(const std::string& model_id) {
  std::vector<std::string> all = two_cue_prompt_tokens();
  for (const auto& t : two_cue_generated_tokens()) all.push_back(t);
  return script_of(model_id, all);
}

inline std::set<std::string> thus_surfaces() { return expand_variants("thus"); }

// ---------------------------------------------------------------------------
// Planted calibration corpus: "Thus," opens high-margin sentences, "Wait,"
// opens low-margin ones, filler sits in between.

struct PlantedCorpus {
  std::vector<Trace> traces;     // large-model traces (margins as generated)
  mocksim::Script small_script;  // same texts, small-model distributions
};

inline PlantedCorpus planted_corpus(std::size_t n_traces, std::uint64_t seed,
                                    const std::string& large_id = "mock-large",
                                    const std::string& small_id = "mock-small") {
  static const std::vector<std::vector<std::string>> filler = {
      {" We", " add", " the", " terms", "."},
      {" The", " sum", " is", " 12", "."},
      {" Let", " n", " be", " even", "."},
      {" Compute", " 3", "^", "2", "."},
      {" Consider", " the", " case", " n", "=", "1", "."},
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mid(0.2, 0.6);
  std::uniform_real_distribution<double> high(0.9, 1.0);
  std::uniform_real_distribution<double> low(0.0, 0.15);

  PlantedCorpus out;
  out.small_script.model_id = small_id;
  for (std::size_t i = 0; i < n_traces; ++i) {
    std::vector<std::pair<std::string, double>> large;
    mocksim::ScriptPath small;
    auto put = [&](const std::string& text, double m_small) {
      large.emplace_back(text, mid(rng));
      small.push_back({text, {{text, (1.0 + m_small) / 2.0}, {"<alt>", (1.0 - m_small) / 2.0}}});
    };
    put("#" + std::to_string(i) + ":", mid(rng));  // keeps texts prefix-free
    const std::size_t sentences = 4 + rng() % 4;
    const std::size_t thus_at = rng() % sentences;
    const std::size_t wait_at = (thus_at + 1 + rng() % (sentences - 1)) % sentences;
    for (std::size_t s = 0; s < sentences; ++s) {
      if (s == thus_at) {
        for (const char* t : {" Thus,", " x", " equals", " 4", "."}) put(t, high(rng));
      } else if (s == wait_at) {
        for (const char* t : {" Wait,", " maybe", " not", "?"}) put(t, low(rng));
      } else {
        for (const auto& t : filler[rng() % filler.size()]) put(t, mid(rng));
      }
    }
    out.traces.push_back(make_trace(large, "trace-" + std::to_string(i), large_id));
    out.small_script.paths.push_back(std::move(small));
  }
  return out;
}

/// Large and small scripts serving `n_prompts * samples` planted documents:
/// "Problem <p>:" followed by one planted trace and "</think>". Sample s of
/// prompt p is path s among the paths sharing that prompt.
struct PlantedScripts {
  std::vector<std::string> prompts;
  mocksim::Script large;
  mocksim::Script small;
};

inline PlantedScripts planted_scripts(std::size_t n_prompts, std::size_t samples, std::uint64_t seed) {
  const PlantedCorpus corpus = planted_corpus(n_prompts * samples, seed);
  PlantedScripts out;
  out.large.model_id = "mock-large";
  out.small.model_id = "mock-small";
  for (std::size_t p = 0; p < n_prompts; ++p) {
    const std::vector<std::string> prompt = {"Problem", " " + std::to_string(p), ":"};
    out.prompts.push_back(prompt[0] + prompt[1] + prompt[2]);
    for (std::size_t s = 0; s < samples; ++s) {
      const std::size_t k = p * samples + s;
      mocksim::ScriptPath large, small;
      for (const auto& t : prompt) {
        large.push_back({t, mocksim::one_hot(t)});
        small.push_back({t, mocksim::one_hot(t)});
      }
      for (const auto& r : corpus.traces[k].tokens) large.push_back({r.text, r.top_probs});
      for (const auto& t : corpus.small_script.paths[k].tokens()) small.push_back(t);
      large.push_back({"</think>", mocksim::one_hot("</think>")});
      small.push_back({"</think>", mocksim::one_hot("</think>")});
      out.large.paths.push_back(std::move(large));
      out.small.paths.push_back(std::move(small));
    }
  }
  return out;
}

/// Delegation fixture: problem i reasons to "</think>" identically on both
/// models; the answers agree except on the problems in `diverge`.
struct DelegationFixture {
  std::vector<Problem> problems;
  mocksim::Script large;
  mocksim::Script small;
};

inline DelegationFixture delegation_fixture(std::size_t n, const std::set<std::size_t>& diverge) {
  DelegationFixture f;
  f.large.model_id = "mock-large";
  f.small.model_id = "mock-small";
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = std::to_string(i);
    const std::string answer = std::to_string(i % 97);
    f.problems.push_back({id, "P" + id + ":", answer});
    const std::vector<std::string> head = {"P", id, ":", " Add", " them", ".", "</think>", " The", " answer",
                                           " is"};
    auto with_answer = [&](const std::string& a) {
      auto v = head;
      v.push_back(" \\boxed{" + a + "}");
      v.push_back(".");
      return script_path(v);
    };
    f.large.paths.push_back(with_answer(answer));
    f.small.paths.push_back(with_answer(diverge.count(i) ? answer + "1" : answer));
  }
  return f;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("relay-test-" + name + "-" + std::to_string(std::random_device{}()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace relay::testing
