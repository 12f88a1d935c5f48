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

// Segment-level model switching.
//
// A session alternates successive generation requests between a large and a
// small model using nothing but stop sequences:
//
//   Large, reasoning   stops on any switch-cue surface or "</think>".
//                      cue      -> Small takes over (LargeToSmall)
//   Small, reasoning   stops on '.', '!', '?', '\n' or "</think>", and is
//                      capped at max_small_segment_tokens.
//                      sentence -> Large resumes (SmallToLarge)
//                      cap      -> Large resumes (SmallToLarge, "budget")
//   "</think>" from either model -> answer stage, Small only, no stops.
//   EOS or an exhausted total budget ends the session.
//
// Matched stop surfaces stay in the context. Each model is billed only for
// the context it has not yet seen (prefix reuse on the serving side).

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "relay/backend.hpp"
#include "relay/calibration.hpp"
#include "relay/error.hpp"
#include "relay/trace.hpp"

namespace relay {

enum class Phase { Reasoning, Answer, Done };
enum class Direction { LargeToSmall, SmallToLarge, ToAnswerStage };

inline constexpr std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Reasoning: return "reasoning";
    case Phase::Answer: return "answer";
    case Phase::Done: return "done";
  }
  return "unknown";
}

inline constexpr std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::LargeToSmall: return "LargeToSmall";
    case Direction::SmallToLarge: return "SmallToLarge";
    case Direction::ToAnswerStage: return "ToAnswerStage";
  }
  return "unknown";
}

inline const std::vector<std::string>& sentence_stop_surfaces() {
  static const std::vector<std::string> stops = {".", "!", "?", "\n"};
  return stops;
}

struct SwitchEvent {
  std::size_t at_position = 0;  // context index of the first token after the switch
  Direction direction = Direction::LargeToSmall;
  std::string trigger;  // stop surface, "sentence_end", "budget" or "</think>"
  std::size_t prefill_new_tokens = 0;

  bool operator==(const SwitchEvent&) const = default;
};

struct Budgets {
  std::size_t max_total_tokens = 32768;
  std::size_t max_small_segment_tokens = 128;
};

struct ContextToken {
  TokenRecord record;
  Producer producer = Producer::Large;
};

/// One generation request and, once applied, what came back.
struct GenerationTurn {
  Producer model = Producer::Large;
  std::vector<std::string> stop_surfaces;
  std::size_t max_tokens = 0;
  std::vector<TokenRecord> emitted;
  StopReason stop_reason;
  Usage usage;
};

struct TurnRecord {
  Producer model = Producer::Large;
  std::size_t prefill = 0;
  std::size_t produced = 0;
  StopReason stop_reason;
};

class Session {
 public:
  std::string prompt;
  std::set<std::string> cue_surfaces;
  Budgets budgets;
  Sampling sampling;

  std::vector<ContextToken> context;
  Phase phase = Phase::Reasoning;
  Producer active = Producer::Large;
  std::vector<SwitchEvent> events;
  std::vector<TurnRecord> turns;
  std::optional<std::size_t> prompt_tokens;

  bool budget_exhausted = false;
  bool aborted = false;
  std::string abort_reason;
  // Cue stops that fired inside a word ("know" for "now") and were ignored.
  std::size_t suppressed_cue_hits = 0;

  const std::string& generated_text() const noexcept { return text_; }

  std::size_t remaining_budget() const noexcept {
    return budgets.max_total_tokens > context.size() ? budgets.max_total_tokens - context.size() : 0;
  }

  /// Context tokens `model` has not ingested or produced yet, including the
  /// prompt when it has never run.
  std::size_t unseen_by(Producer model) const {
    const auto m = index(model);
    return (seen_prompt_[m] ? 0 : prompt_tokens.value_or(0)) + (context.size() - seen_upto_[m]);
  }

  void append(TokenRecord rec, Producer producer) {
    rec.position = context.size();
    text_ += rec.text;
    context.push_back({std::move(rec), producer});
  }

  void mark_seen(Producer model) {
    seen_upto_[index(model)] = context.size();
    seen_prompt_[index(model)] = true;
  }

 private:
  static std::size_t index(Producer p) { return p == Producer::Large ? 0 : 1; }

  std::string text_;
  std::array<std::size_t, 2> seen_upto_{0, 0};
  std::array<bool, 2> seen_prompt_{false, false};
};

inline Session start_session(std::string prompt, std::set<std::string> cue_surfaces,
                             Budgets budgets = {}, Sampling sampling = {},
                             std::optional<std::size_t> prompt_tokens = std::nullopt) {
  if (prompt.empty()) throw Error(Errc::BadRequest, "empty prompt");
  if (budgets.max_total_tokens == 0) throw Error(Errc::BadRequest, "max_total_tokens must be >= 1");
  if (budgets.max_small_segment_tokens == 0) {
    throw Error(Errc::BadRequest, "max_small_segment_tokens must be >= 1");
  }
  cue_surfaces.erase("");
  Session s;
  s.prompt = std::move(prompt);
  s.cue_surfaces = std::move(cue_surfaces);
  s.budgets = budgets;
  s.sampling = sampling;
  s.prompt_tokens = prompt_tokens;
  return s;
}

inline Session start_session(std::string prompt, const SwitchCueSet& cues, Budgets budgets = {},
                             Sampling sampling = {},
                             std::optional<std::size_t> prompt_tokens = std::nullopt) {
  return start_session(std::move(prompt), cues.surfaces, budgets, sampling, prompt_tokens);
}

/// Tokens `target` must prefill before its next turn.
inline std::size_t prefill_accounting(const Session& s, Producer target) {
  return s.unseen_by(target);
}

inline GenerationTurn next_turn_request(const Session& s) {
  if (s.phase == Phase::Done) throw Error(Errc::SessionClosed, "session is done");
  GenerationTurn t;
  t.model = s.active;
  t.max_tokens = s.remaining_budget();
  if (s.phase == Phase::Answer) {
    t.model = Producer::Small;
    return t;
  }
  if (s.active == Producer::Large) {
    t.stop_surfaces.assign(s.cue_surfaces.begin(), s.cue_surfaces.end());
  } else {
    t.stop_surfaces = sentence_stop_surfaces();
    t.max_tokens = std::min(t.max_tokens, s.budgets.max_small_segment_tokens);
  }
  t.stop_surfaces.emplace_back(kThinkEnd);
  return t;
}

namespace detail {

inline bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

/// False when the stop surface at the end of `text` starts mid-word, e.g.
/// "now" completing "know".
inline bool starts_on_word_boundary(std::string_view text, std::string_view surface) {
  if (surface.empty() || !word_char(surface.front()) || !text.ends_with(surface)) return true;
  const std::size_t at = text.size() - surface.size();
  return at == 0 || !word_char(text[at - 1]);
}

}  // namespace detail

/// Appends a completed turn and advances the state machine.
inline void apply_turn(Session& s, const GenerationTurn& turn) {
  if (s.phase == Phase::Done) throw Error(Errc::SessionClosed, "session is done");
  if (turn.model != s.active) {
    throw Error(Errc::ProtocolViolation, "turn by " + std::string(to_string(turn.model)) +
                                             " while " + std::string(to_string(s.active)) +
                                             " is active");
  }
  const GenerationTurn expected = next_turn_request(s);
  const bool stopped_on_surface = turn.stop_reason.kind == StopReason::Kind::StopSurface;
  if (stopped_on_surface &&
      std::find(expected.stop_surfaces.begin(), expected.stop_surfaces.end(),
                turn.stop_reason.surface) == expected.stop_surfaces.end()) {
    throw Error(Errc::ProtocolViolation,
                "stop surface '" + turn.stop_reason.surface + "' was not requested");
  }
  if (turn.emitted.empty() && turn.stop_reason.kind != StopReason::Kind::EndOfSequence) {
    throw Error(Errc::ProtocolViolation, "turn made no progress");
  }

  if (!s.prompt_tokens) s.prompt_tokens = turn.usage.prompt_tokens;
  const std::size_t prefill = prefill_accounting(s, turn.model);

  // Append within budget. A large-model turn that runs past "</think>" is
  // cut at the boundary so the answer stage stays small-only.
  const std::size_t room = s.remaining_budget();
  std::size_t produced = 0;
  bool saw_think_end = false;
  std::string turn_text;
  for (const auto& rec : turn.emitted) {
    if (produced == room || saw_think_end) break;
    turn_text += rec.text;
    s.append(rec, turn.model);
    ++produced;
    if (s.phase == Phase::Reasoning && turn_text.find(kThinkEnd) != std::string::npos) {
      saw_think_end = true;
    }
  }
  s.mark_seen(turn.model);
  s.turns.push_back({turn.model, prefill, produced, turn.stop_reason});

  auto switch_to = [&](Producer target, Direction dir, std::string trigger) {
    s.active = target;
    s.events.push_back({s.context.size(), dir, std::move(trigger), prefill_accounting(s, target)});
  };

  if (s.phase == Phase::Reasoning && saw_think_end) {
    s.phase = Phase::Answer;
    switch_to(Producer::Small, Direction::ToAnswerStage, std::string(kThinkEnd));
  } else if (produced < turn.emitted.size()) {
    // Truncated by the total budget.
  } else if (stopped_on_surface && s.phase == Phase::Reasoning) {
    if (turn.model == Producer::Large) {
      const std::string full = s.prompt + s.generated_text();
      if (detail::starts_on_word_boundary(full, turn.stop_reason.surface)) {
        switch_to(Producer::Small, Direction::LargeToSmall, turn.stop_reason.surface);
      } else {
        ++s.suppressed_cue_hits;
      }
    } else {
      switch_to(Producer::Large, Direction::SmallToLarge, "sentence_end");
    }
  } else if (turn.stop_reason.kind == StopReason::Kind::EndOfSequence) {
    s.phase = Phase::Done;
  } else if (turn.stop_reason.kind == StopReason::Kind::MaxTokens && s.remaining_budget() > 0 &&
             s.phase == Phase::Reasoning && turn.model == Producer::Small) {
    switch_to(Producer::Large, Direction::SmallToLarge, "budget");
  }

  if (s.phase != Phase::Done && s.remaining_budget() == 0) {
    s.phase = Phase::Done;
    s.budget_exhausted = true;
  }
}

struct Transcript {
  std::string prompt;
  std::size_t prompt_tokens = 0;
  std::vector<ContextToken> tokens;
  std::vector<SwitchEvent> events;
  std::vector<TurnRecord> turns;
  Phase final_phase = Phase::Done;
  bool budget_exhausted = false;
  bool aborted = false;
  std::string abort_reason;
  std::size_t suppressed_cue_hits = 0;

  std::string text() const {
    std::string out;
    for (const auto& t : tokens) out += t.record.text;
    return out;
  }

  /// Index of the first answer-stage token, or tokens.size() when the
  /// session never reached the answer stage.
  std::size_t answer_start() const {
    for (const auto& e : events) {
      if (e.direction == Direction::ToAnswerStage) return e.at_position;
    }
    return tokens.size();
  }

  std::vector<Producer> attribution() const {
    std::vector<Producer> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.producer);
    return out;
  }
};

inline Transcript make_transcript(const Session& s) {
  Transcript t;
  t.prompt = s.prompt;
  t.prompt_tokens = s.prompt_tokens.value_or(0);
  t.tokens = s.context;
  t.events = s.events;
  t.turns = s.turns;
  t.final_phase = s.phase;
  t.budget_exhausted = s.budget_exhausted;
  t.aborted = s.aborted;
  t.abort_reason = s.abort_reason;
  t.suppressed_cue_hits = s.suppressed_cue_hits;
  return t;
}

/// Drives the session to completion. Any endpoint or protocol error aborts
/// the session; the partial transcript is returned with `aborted` set.
inline Transcript run(Session& s, const ModelBackend& large, const ModelBackend& small) {
  while (s.phase != Phase::Done) {
    GenerationTurn turn = next_turn_request(s);
    const ModelBackend& backend = turn.model == Producer::Large ? large : small;
    try {
      GenerateRequest req{s.prompt + s.generated_text(), turn.stop_surfaces, turn.max_tokens,
                          s.sampling};
      GenerateResult res = backend.generate(req);
      turn.emitted = std::move(res.tokens);
      turn.stop_reason = std::move(res.stop_reason);
      turn.usage = res.usage;
      apply_turn(s, turn);
    } catch (const Error& e) {
      s.aborted = true;
      s.abort_reason = std::string(to_string(Errc::AbortedSession)) + ": " + e.what();
      s.phase = Phase::Done;
    }
  }
  return make_transcript(s);
}

}  // namespace relay
