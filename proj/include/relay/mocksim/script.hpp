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

// Deterministic scripted model.
//
// A script holds one or more token paths. Each path is a full document
// (prompt included) with the distribution the model "had" at every token.
// A request is served by finding the paths whose text starts with the
// request prompt and replaying from that character offset, so the mock
// needs no tokenizer and can resume in the middle of a token. When several
// paths share the prompt, the request seed picks one.
//
// Script JSONL:
//   {"model_id": "mock-large", "per_token_latency_ms": 0}      (optional header)
//   {"surface": " Thus", "top": [[" Thus", 0.9], [" So", 0.1]], "path": 0}
//   {"echo": "some text", "tokens": [{"text": ..., "top": [...]}, ...]}
// "top" defaults to a one-hot distribution; "path" defaults to 0.

#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "relay/backend.hpp"
#include "relay/error.hpp"
#include "relay/margin.hpp"
#include "relay/trace.hpp"
#include "relay/wire.hpp"

namespace relay::mocksim {

struct ScriptToken {
  std::string surface;
  std::vector<Candidate> top_probs;
};

class ScriptPath {
 public:
  ScriptPath() = default;
  explicit ScriptPath(std::vector<ScriptToken> tokens) : tokens_(std::move(tokens)) { index(); }

  void push_back(ScriptToken t) {
    starts_.back() = text_.size();
    text_ += t.surface;
    starts_.push_back(text_.size());
    tokens_.push_back(std::move(t));
  }

  const std::vector<ScriptToken>& tokens() const noexcept { return tokens_; }
  const std::string& text() const noexcept { return text_; }
  std::size_t start_of(std::size_t i) const { return starts_[i]; }

  /// Token whose span contains character `offset` (offset < text size).
  std::size_t token_at(std::size_t offset) const {
    auto it = std::upper_bound(starts_.begin(), starts_.end() - 1, offset);
    return static_cast<std::size_t>(it - starts_.begin()) - 1;
  }

 private:
  void index() {
    text_.clear();
    starts_.clear();
    for (const auto& t : tokens_) {
      starts_.push_back(text_.size());
      text_ += t.surface;
    }
    starts_.push_back(text_.size());
  }

  std::vector<ScriptToken> tokens_;
  std::string text_;
  std::vector<std::size_t> starts_{0};
};

struct Script {
  std::string model_id = "mock";
  std::vector<ScriptPath> paths;
  std::map<std::string, std::vector<TokenRecord>> echo_table;
  double per_token_latency_ms = 0.0;
};

/// One-hot distribution for a scripted token.
inline std::vector<Candidate> one_hot(const std::string& surface) {
  return {{surface, 1.0}, {surface == "<alt>" ? "<alt2>" : "<alt>", 0.0}};
}

// ---------------------------------------------------------------------------
// Script files
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<Candidate> parse_script_top(const nlohmann::json& j, const std::string& surface,
                                               std::size_t line) {
  if (!j.contains("top")) return one_hot(surface);
  std::vector<Candidate> top;
  std::set<std::string> seen;
  for (const auto& pair : j["top"]) {
    if (!pair.is_array() || pair.size() != 2) {
      throw Error(Errc::BadConfig, "script line " + std::to_string(line) + ": bad top entry");
    }
    Candidate c{pair[0].get<std::string>(), pair[1].get<double>()};
    if (!seen.insert(c.surface).second) {
      throw Error(Errc::BadConfig,
                  "script line " + std::to_string(line) + ": duplicate surface '" + c.surface + "'");
    }
    top.push_back(std::move(c));
  }
  try {
    validate_top_probs(top, line);
  } catch (const Error& e) {
    throw Error(Errc::BadConfig, std::string("script: ") + e.what());
  }
  return top;
}

}  // namespace detail

inline Script read_script_jsonl(std::istream& in) {
  Script script;
  std::map<std::string, std::size_t> path_index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::BadConfig, "script line " + std::to_string(line_no) + ": " + e.what());
    }
    if (j.contains("echo")) {
      std::vector<TokenRecord> recs;
      for (const auto& t : j.at("tokens")) recs.push_back(token_from_json(t, line_no));
      for (std::size_t i = 0; i < recs.size(); ++i) recs[i].position = i;
      script.echo_table[j["echo"].get<std::string>()] = std::move(recs);
      continue;
    }
    if (!j.contains("surface")) {
      if (j.contains("model_id")) script.model_id = j["model_id"].get<std::string>();
      if (j.contains("per_token_latency_ms")) {
        script.per_token_latency_ms = j["per_token_latency_ms"].get<double>();
      }
      continue;
    }
    std::string key = "0";
    if (j.contains("path")) key = j["path"].is_string() ? j["path"].get<std::string>() : j["path"].dump();
    auto [it, inserted] = path_index.try_emplace(key, script.paths.size());
    if (inserted) script.paths.emplace_back();
    std::string surface = j["surface"].get<std::string>();
    auto top = detail::parse_script_top(j, surface, line_no);
    script.paths[it->second].push_back({std::move(surface), std::move(top)});
  }
  return script;
}

inline Script load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open script " + path.string());
  return read_script_jsonl(in);
}

inline void write_script_jsonl(std::ostream& out, const Script& script) {
  out << nlohmann::json{{"model_id", script.model_id},
                        {"per_token_latency_ms", script.per_token_latency_ms}}
             .dump()
      << '\n';
  for (std::size_t p = 0; p < script.paths.size(); ++p) {
    for (const auto& t : script.paths[p].tokens()) {
      nlohmann::json top = nlohmann::json::array();
      for (const auto& c : t.top_probs) top.push_back({c.surface, c.prob});
      out << nlohmann::json{{"surface", t.surface}, {"top", std::move(top)}, {"path", p}}.dump()
          << '\n';
    }
  }
  for (const auto& [text, recs] : script.echo_table) {
    nlohmann::json toks = nlohmann::json::array();
    for (const auto& r : recs) toks.push_back(token_to_json(r));
    out << nlohmann::json{{"echo", text}, {"tokens", std::move(toks)}}.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Serving
// ---------------------------------------------------------------------------

namespace detail {

inline const ScriptPath& select_path(const Script& script, std::string_view prompt,
                                     const Sampling& sampling) {
  std::vector<const ScriptPath*> matches;
  for (const auto& p : script.paths) {
    if (std::string_view(p.text()).starts_with(prompt)) matches.push_back(&p);
  }
  if (matches.empty()) {
    throw Error(Errc::ScriptMiss, "prompt is not a prefix of any path in script '" +
                                      script.model_id + "'");
  }
  return *matches[sampling.seed.value_or(0) % matches.size()];
}

struct Match {
  std::size_t begin = std::string::npos;
  const std::string* surface = nullptr;
};

/// Earliest stop match that ends inside the last `fresh` characters of
/// `gen`; ties on start go to the longest surface.
inline Match find_stop(const std::string& gen, std::size_t fresh,
                       const std::vector<std::string>& stops) {
  Match best;
  for (const auto& s : stops) {
    if (s.empty() || s.size() > gen.size()) continue;
    const std::size_t tail = gen.size() - fresh;
    const std::size_t from = tail >= s.size() - 1 ? tail - (s.size() - 1) : 0;
    const std::size_t at = gen.find(s, from);
    if (at == std::string::npos) continue;
    if (at < best.begin || (at == best.begin && s.size() > best.surface->size())) {
      best = {at, &s};
    }
  }
  return best;
}

}  // namespace detail

/// Replays the script from the request prompt. Stop surfaces are matched on
/// generated text only, like a real server; with `include_stop` false the
/// matched surface is stripped from the output (the OpenAI default).
inline wire::RawCompletion serve_generate(const Script& script, const GenerateRequest& req,
                                          bool include_stop = false) {
  if (req.max_tokens == 0) throw Error(Errc::BadRequest, "max_tokens must be >= 1");
  const ScriptPath& path = detail::select_path(script, req.prompt, req.sampling);
  const std::size_t offset = req.prompt.size();

  wire::RawCompletion out;
  out.finish_reason = "stop";
  if (offset >= path.text().size()) {
    out.usage.prompt_tokens = path.tokens().size();
    return out;
  }
  std::size_t k = path.token_at(offset);
  out.usage.prompt_tokens = k + (offset > path.start_of(k) ? 1 : 0);

  std::string gen;
  std::vector<std::size_t> rec_start;
  for (std::size_t cut = offset - path.start_of(k); k < path.tokens().size(); ++k, cut = 0) {
    const ScriptToken& tok = path.tokens()[k];
    TokenRecord rec;
    rec.text = tok.surface.substr(cut);
    rec.top_probs = tok.top_probs;
    rec.position = out.tokens.size();
    rec_start.push_back(gen.size());
    gen += rec.text;
    out.tokens.push_back(std::move(rec));
    ++out.usage.completion_tokens;

    const auto m = detail::find_stop(gen, out.tokens.back().text.size(), req.stop);
    if (m.surface != nullptr) {
      const std::size_t cut_at = include_stop ? m.begin + m.surface->size() : m.begin;
      while (!out.tokens.empty() && rec_start.back() >= cut_at) {
        out.tokens.pop_back();
        rec_start.pop_back();
      }
      if (!out.tokens.empty()) {
        auto& last = out.tokens.back();
        last.text.resize(std::min(last.text.size(), cut_at - rec_start.back()));
      }
      out.stop_reason = *m.surface;
      return out;
    }
    if (out.tokens.size() >= req.max_tokens) {
      out.finish_reason = "length";
      return out;
    }
  }
  return out;
}

/// Scored records for `text`: the echo table first, otherwise a path that
/// starts with `text`. The first record is synthetic (no conditional
/// distribution for the opening position).
inline std::vector<TokenRecord> serve_rescore(const Script& script, std::string_view text) {
  if (text.empty()) throw Error(Errc::BadRequest, "cannot rescore empty text");
  if (auto it = script.echo_table.find(std::string(text)); it != script.echo_table.end()) {
    auto recs = it->second;
    if (!recs.empty()) recs.front() = synthetic_record(recs.front().text, 0);
    return recs;
  }
  const ScriptPath* path = nullptr;
  for (const auto& p : script.paths) {
    if (std::string_view(p.text()).starts_with(text)) {
      path = &p;
      break;
    }
  }
  if (path == nullptr) {
    throw Error(Errc::ScriptMiss, "text not derivable from script '" + script.model_id + "'");
  }
  std::vector<TokenRecord> out;
  for (std::size_t k = 0; k < path->tokens().size() && path->start_of(k) < text.size(); ++k) {
    const auto& tok = path->tokens()[k];
    TokenRecord r;
    r.text = tok.surface.substr(0, text.size() - path->start_of(k));
    r.top_probs = tok.top_probs;
    r.position = k;
    out.push_back(std::move(r));
  }
  out.front() = synthetic_record(out.front().text, 0);
  return out;
}

/// In-process backend over a script. Shareable read-only across threads.
class ScriptedBackend final : public ModelBackend {
 public:
  explicit ScriptedBackend(Script script, bool include_stop = false)
      : script_(std::make_shared<const Script>(std::move(script))), include_stop_(include_stop) {}

  explicit ScriptedBackend(std::shared_ptr<const Script> script, bool include_stop = false)
      : script_(std::move(script)), include_stop_(include_stop) {}

  std::string model_id() const override { return script_->model_id; }

  GenerateResult generate(const GenerateRequest& req) const override {
    return wire::to_generate_result(serve_generate(*script_, req, include_stop_));
  }

  std::vector<TokenRecord> rescore(std::string_view text) const override {
    return serve_rescore(*script_, text);
  }

  ModelInfo health_check() const override { return {script_->model_id, "mocksim"}; }

  const Script& script() const noexcept { return *script_; }

 private:
  std::shared_ptr<const Script> script_;
  bool include_stop_;
};

}  // namespace relay::mocksim
