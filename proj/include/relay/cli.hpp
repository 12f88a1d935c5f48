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

// The `relay` command line: calibrate, run, bench, analyze,
// delegation-test and mock-serve.
//
// Endpoint URLs of the form "mock:path/to/script.jsonl" load a script
// in-process instead of talking HTTP.

#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "relay/calibration.hpp"
#include "relay/client.hpp"
#include "relay/config.hpp"
#include "relay/cues.hpp"
#include "relay/error.hpp"
#include "relay/evalharness.hpp"
#include "relay/io.hpp"
#include "relay/margin.hpp"
#include "relay/metrics.hpp"
#include "relay/mocksim.hpp"
#include "relay/switcher.hpp"

namespace relay::cli {

namespace fs = std::filesystem;
using nlohmann::json;

struct EndpointFlags {
  std::string url;
  std::string model;
};

struct Globals {
  std::string config_path;
  std::string log_level = "warn";
  std::string api_key;
  unsigned jobs = 1;
  EndpointFlags large;
  EndpointFlags small;
  bool include_stop = false;
};

/// A flag counts only when given on the command line; otherwise the config
/// file, then the environment, then the default decide.
class Resolver {
 public:
  Resolver(const CLI::App& app, const Globals& g) : app_(app) {
    if (!g.config_path.empty()) table_ = load_toml(g.config_path);
  }

  bool flag_given(const std::string& name) const {
    for (const CLI::App* a = &app_; a != nullptr; a = a->get_parent()) {
      try {
        if (a->get_option(name)->count() > 0) return true;
      } catch (const CLI::OptionNotFound&) {
      }
    }
    return false;
  }

  template <typename T>
  void resolve(const std::string& flag, const T& flag_value, std::string_view key, T& out,
               const char* env = nullptr) const {
    if (flag_given(flag)) {
      out = flag_value;
      return;
    }
    if (table_) {
      if (auto v = toml_get<T>(*table_, key)) {
        out = *v;
        return;
      }
    }
    if constexpr (std::is_same_v<T, std::string>) {
      if (env != nullptr) {
        if (auto v = env_var(env)) {
          out = *v;
          return;
        }
      }
    }
    out = flag_value;
  }

  const std::optional<toml::table>& table() const { return table_; }

 private:
  const CLI::App& app_;
  std::optional<toml::table> table_;
};

inline std::shared_ptr<ModelBackend> make_backend(const std::string& url, const std::string& model,
                                                  const std::string& api_key, bool include_stop,
                                                  const std::string& role) {
  if (url.empty()) {
    throw Error(Errc::BadConfig, "no " + role + "-model endpoint (flag, config file or " +
                                     (role == "large" ? kEnvLargeUrl : kEnvSmallUrl) + ")");
  }
  if (url.starts_with("mock:")) {
    return std::make_shared<mocksim::ScriptedBackend>(mocksim::load_script(url.substr(5)),
                                                      include_stop);
  }
  EndpointConfig cfg;
  cfg.base_url = url;
  cfg.model_id = model;
  if (!api_key.empty()) cfg.api_key = api_key;
  cfg.include_stop_str_in_output = include_stop;
  auto client = std::make_shared<OpenAiClient>(cfg);
  client->resolve_model_id();
  return client;
}

struct Endpoints {
  std::string large_url, small_url, large_model, small_model, api_key;
  std::shared_ptr<ModelBackend> large, small;
};

inline Endpoints resolve_endpoints(const Resolver& r, const Globals& g, bool need_large,
                                   bool need_small) {
  Endpoints e;
  r.resolve("--large-url", g.large.url, "endpoints.large.url", e.large_url, kEnvLargeUrl);
  r.resolve("--small-url", g.small.url, "endpoints.small.url", e.small_url, kEnvSmallUrl);
  r.resolve("--large-model", g.large.model, "endpoints.large.model", e.large_model);
  r.resolve("--small-model", g.small.model, "endpoints.small.model", e.small_model);
  r.resolve("--api-key", g.api_key, "endpoints.api_key", e.api_key, kEnvApiKey);
  if (need_large) e.large = make_backend(e.large_url, e.large_model, e.api_key, g.include_stop, "large");
  if (need_small) e.small = make_backend(e.small_url, e.small_model, e.api_key, g.include_stop, "small");
  return e;
}

inline json endpoint_echo(const Endpoints& e) {
  // URLs only; keys are never echoed.
  json j = json::object();
  if (e.large) j["large"] = {{"url", e.large_url}, {"model", e.large->model_id()}};
  if (e.small) j["small"] = {{"url", e.small_url}, {"model", e.small->model_id()}};
  return j;
}

inline json sampling_echo(const Sampling& s) {
  return {{"temperature", s.temperature}, {"top_p", s.top_p}, {"top_k", s.top_k}};
}

/// One prompt per line, or {"prompt": ...} objects in a .jsonl file.
inline std::vector<std::string> read_prompts(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  const bool jsonl = path.extension() == ".jsonl";
  std::vector<std::string> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!jsonl) {
      out.push_back(line);
      continue;
    }
    try {
      out.push_back(json::parse(line).at("prompt").get<std::string>());
    } catch (const json::exception& e) {
      throw Error(Errc::BadConfig, path.string() + ": " + e.what(), n);
    }
  }
  if (out.empty()) throw Error(Errc::EmptyInput, path.string() + " has no prompts");
  return out;
}

inline std::vector<Problem> load_problems(const fs::path& path, AnswerMode mode) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  auto out = read_problems_jsonl(in, mode);
  if (out.empty()) throw Error(Errc::EmptyInput, path.string() + " has no problems");
  return out;
}

inline SwitchCueSet load_cue_set(const fs::path& path) {
  try {
    return switch_cue_set_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw Error(Errc::BadConfig, path.string() + ": " + e.what());
  }
}

inline void emit(const std::string& path, const std::string& contents, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << contents;
  } else {
    atomic_write(path, contents);
  }
}

// ---------------------------------------------------------------------------

struct CalibrateFlags {
  std::string prompts, traces, pool, out, report;
  std::size_t samples_per_prompt = 4;
  std::size_t min_count = 3;
  std::size_t max_trace_tokens = 32768;
  bool all_candidates = false;
  std::string score_under = "small";
};

inline int cmd_calibrate(const CLI::App& app, const Globals& g, const CalibrateFlags& f,
                         std::ostream& out) {
  Resolver r(app, g);
  CalibrationConfig cfg;
  std::string prompts, traces, pool_path, score_under;
  r.resolve("--prompts", f.prompts, "prompts_path", prompts);
  r.resolve("--traces", f.traces, "traces_path", traces);
  r.resolve("--pool", f.pool, "pool_path", pool_path);
  r.resolve("--samples-per-prompt", f.samples_per_prompt, "samples_per_prompt", cfg.samples_per_prompt);
  r.resolve("--min-count", f.min_count, "min_count", cfg.min_count);
  r.resolve("--max-trace-tokens", f.max_trace_tokens, "max_trace_tokens", cfg.max_trace_tokens);
  r.resolve("--all-candidates", f.all_candidates, "all_candidates", cfg.all_candidates);
  r.resolve("--score-under", f.score_under, "score_under", score_under);
  cfg.score_under = score_under_from_string(score_under);
  cfg.jobs = g.jobs;
  if (r.table()) apply_sampling(*r.table(), cfg.sampling);

  if (prompts.empty() == traces.empty()) {
    throw Error(Errc::BadConfig, "give exactly one of --prompts or --traces");
  }
  const CuePool pool = pool_path.empty() ? default_pool() : load_pool_toml(pool_path);

  TraceSource source;
  const bool need_small = cfg.score_under == ScoreUnder::Small;
  Endpoints ep = resolve_endpoints(r, g, traces.empty(), need_small);
  source.large = ep.large.get();
  source.small = ep.small.get();
  if (!traces.empty()) {
    std::ifstream in(traces);
    if (!in) throw Error(Errc::IoError, "cannot open " + traces);
    source.recorded = read_traces_jsonl(in);
    if (source.recorded.empty()) throw Error(Errc::EmptyInput, traces + " has no traces");
  } else {
    source.prompts = read_prompts(prompts);
  }
  spdlog::info("calibrating over {} {}", traces.empty() ? source.prompts.size() : source.recorded.size(),
               traces.empty() ? "prompts" : "recorded traces");

  CalibrationResult res = calibrate(cfg, source, pool);
  res.cue_set.config_echo["sampling"] = sampling_echo(cfg.sampling);
  const std::string report = format_report(res.cue_set);
  if (f.out.empty()) {
    out << to_json(res.cue_set).dump(2) << '\n';
  } else {
    atomic_write(f.out, to_json(res.cue_set).dump(2) + "\n");
    out << report;
  }
  if (!f.report.empty()) atomic_write(f.report, report);
  return 0;
}

// ---------------------------------------------------------------------------

struct RunFlags {
  std::string prompt, prompt_file, cues, out;
  std::size_t max_tokens = 32768;
  std::size_t max_small_segment = 128;
  std::optional<std::uint64_t> seed;
};

inline int cmd_run(const CLI::App& app, const Globals& g, const RunFlags& f, std::ostream& out) {
  Resolver r(app, g);
  std::string cues_path;
  r.resolve("--cues", f.cues, "cue_set_path", cues_path);
  Budgets budgets;
  Sampling sampling;
  if (r.table()) {
    apply_budgets(*r.table(), budgets);
    apply_sampling(*r.table(), sampling);
  }
  if (r.flag_given("--max-tokens")) budgets.max_total_tokens = f.max_tokens;
  if (r.flag_given("--max-small-segment")) budgets.max_small_segment_tokens = f.max_small_segment;
  sampling.seed = f.seed;

  std::string prompt = f.prompt;
  if (!f.prompt_file.empty()) prompt = read_file(f.prompt_file);
  const SwitchCueSet cues = cues_path.empty() ? SwitchCueSet{} : load_cue_set(cues_path);
  Endpoints ep = resolve_endpoints(r, g, true, true);

  Session s = start_session(prompt, cues, budgets, sampling);
  const Transcript t = run(s, *ep.large, *ep.small);
  json j = to_json(t);
  j["config"] = {{"cue_set_path", cues_path},
                 {"surfaces", cues.surfaces},
                 {"budgets",
                  {{"max_total_tokens", budgets.max_total_tokens},
                   {"max_small_segment_tokens", budgets.max_small_segment_tokens}}},
                 {"sampling", sampling_echo(sampling)},
                 {"endpoints", endpoint_echo(ep)}};
  emit(f.out, j.dump(2) + "\n", out);
  if (t.aborted) {
    spdlog::error("session aborted: {}", t.abort_reason);
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct BenchFlags {
  std::string problems, cues, cost_model, spec_profile, out, answer_mode = "boxed";
  std::size_t repeats = 5;
  std::size_t max_tokens = 32768;
  std::size_t max_small_segment = 128;
};

inline int cmd_bench(const CLI::App& app, const Globals& g, const BenchFlags& f, std::ostream& out) {
  Resolver r(app, g);
  std::string problems_path, cues_path, mode;
  r.resolve("--problems", f.problems, "problems_path", problems_path);
  r.resolve("--cues", f.cues, "cue_set_path", cues_path);
  r.resolve("--answer-mode", f.answer_mode, "answer_mode", mode);
  if (problems_path.empty()) throw Error(Errc::BadConfig, "--problems is required");

  EvalOptions opt;
  opt.mode = answer_mode_from_string(mode);
  r.resolve("--repeats", f.repeats, "repeats", opt.samples_per_problem);
  if (r.table()) {
    apply_budgets(*r.table(), opt.budgets);
    apply_sampling(*r.table(), opt.sampling);
  }
  if (r.flag_given("--max-tokens")) opt.budgets.max_total_tokens = f.max_tokens;
  if (r.flag_given("--max-small-segment")) opt.budgets.max_small_segment_tokens = f.max_small_segment;
  opt.jobs = g.jobs;

  const mocksim::CostModel cost =
      f.cost_model.empty() ? mocksim::CostModel{} : cost_model_from_toml(load_toml(f.cost_model));
  const auto spec = f.spec_profile.empty() ? std::nullopt
                                           : spec_profile_from_toml(load_toml(f.spec_profile));

  const auto problems = load_problems(problems_path, opt.mode);
  const SwitchCueSet cues = cues_path.empty() ? SwitchCueSet{} : load_cue_set(cues_path);
  Endpoints ep = resolve_endpoints(r, g, true, true);
  const auto runs = evaluate(problems, cues.surfaces, *ep.large, *ep.small, opt);

  // Per-problem means first; error bars are the spread over problems.
  struct Col {
    std::string name;
    std::vector<double> speed, util;
  };
  std::vector<Col> cols{{"Large only", {}, {}}, {"Relay", {}, {}}};
  if (spec) {
    cols.insert(cols.begin() + 1, Col{"Large + spec", {}, {}});
    cols.push_back({"Relay + spec", {}, {}});
  }
  json per_problem = json::array();
  std::size_t aborted = 0;
  for (const auto& run : runs) {
    std::vector<double> sum(cols.size() * 2, 0.0);
    json samples = json::array();
    for (const auto& sample : run.samples) {
      const Transcript& t = sample.transcript;
      aborted += t.aborted ? 1 : 0;
      const auto attr = t.attribution();
      const std::vector<Producer> all_large(attr.size(), Producer::Large);
      const double u = attr.empty() ? 0.0 : utilization(t);
      std::vector<std::pair<double, double>> vals;
      auto lat = [&](const std::vector<Producer>& a, const std::optional<mocksim::SpecDecodeProfile>& sp) {
        return mocksim::simulate_latency(std::span<const Producer>(a), cost, sp, t.prompt_tokens);
      };
      const auto relay_lat = lat(attr, std::nullopt);
      vals.push_back({lat(all_large, std::nullopt).speedup, attr.empty() ? 0.0 : 1.0});
      if (spec) vals.push_back({lat(all_large, spec).speedup, attr.empty() ? 0.0 : 1.0});
      vals.push_back({relay_lat.speedup, u});
      if (spec) vals.push_back({lat(attr, spec).speedup, u});
      for (std::size_t c = 0; c < cols.size(); ++c) {
        sum[2 * c] += vals[c].first;
        sum[2 * c + 1] += vals[c].second;
      }
      samples.push_back({{"answer", sample.extracted_answer ? json(*sample.extracted_answer) : json(nullptr)},
                         {"correct", sample.correct},
                         {"aborted", t.aborted},
                         {"stats", to_json(session_stats(t))},
                         {"latency", mocksim::to_json(relay_lat)}});
    }
    const double k = static_cast<double>(run.samples.size());
    for (std::size_t c = 0; c < cols.size(); ++c) {
      cols[c].speed.push_back(sum[2 * c] / k);
      cols[c].util.push_back(sum[2 * c + 1] / k);
    }
    per_problem.push_back({{"id", run.problem_id}, {"samples", std::move(samples)}});
  }

  std::vector<MethodColumn> table;
  json methods = json::array();
  for (const auto& c : cols) {
    MethodColumn m{c.name, mean_std(c.speed), mean_std(c.util)};
    methods.push_back({{"method", c.name},
                       {"speedup", {{"mean", m.speedup.mean}, {"std", m.speedup.std_dev}}},
                       {"utilization", {{"mean", m.utilization.mean}, {"std", m.utilization.std_dev}}}});
    table.push_back(std::move(m));
  }
  const double p1 = pass_at_1(runs);
  json report = {{"config",
                  {{"problems_path", problems_path},
                   {"cue_set_path", cues_path},
                   {"repeats", opt.samples_per_problem},
                   {"answer_mode", mode},
                   {"budgets",
                    {{"max_total_tokens", opt.budgets.max_total_tokens},
                     {"max_small_segment_tokens", opt.budgets.max_small_segment_tokens}}},
                   {"sampling", sampling_echo(opt.sampling)},
                   {"cost_model",
                    {{"large_decode", cost.large_decode},
                     {"small_decode", cost.small_decode},
                     {"switch_overhead", cost.switch_overhead},
                     {"large_prefill", cost.large_prefill},
                     {"small_prefill", cost.small_prefill}}},
                   {"endpoints", endpoint_echo(ep)}}},
                 {"pass_at_1", p1},
                 {"methods", std::move(methods)},
                 {"problems", std::move(per_problem)}};
  if (spec) {
    report["config"]["spec_profile"] = {{"mean_accepted_span", spec->mean_accepted_span},
                                        {"verify_cost", spec->verify_cost},
                                        {"draft_cost_per_token", spec->draft_cost_per_token}};
  }
  std::ostringstream text;
  text << format_method_table(table);
  text << "pass@1: " << std::fixed << std::setprecision(4) << p1 << " over " << runs.size()
       << " problems x " << opt.samples_per_problem << " runs\n";
  if (!f.out.empty()) atomic_write(f.out, report.dump(2) + "\n");
  out << text.str();
  if (aborted > 0) {
    spdlog::error("{} session(s) aborted", aborted);
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct AnalyzeFlags {
  std::string traces, pool, out_dir = ".";
  std::size_t window = 1;
};

inline int cmd_analyze(const CLI::App& app, const Globals& g, const AnalyzeFlags& f, std::ostream& out) {
  Resolver r(app, g);
  std::ifstream in(f.traces);
  if (!in) throw Error(Errc::IoError, "cannot open " + f.traces);
  const auto traces = read_traces_jsonl(in);
  if (traces.empty()) throw Error(Errc::EmptyInput, f.traces + " has no traces");
  const CuePool pool = f.pool.empty() ? default_pool() : load_pool_toml(f.pool);

  std::vector<ScoredTrace> scored;
  std::vector<MarginSeries> series;
  for (const auto& t : traces) {
    scored.push_back({t, margins_from_trace(t)});
    series.push_back(scored.back().series);
  }

  std::ostringstream traj;
  traj << std::setprecision(17);
  traj << "trace_id,position,margin,smoothed,synthetic\n";
  std::size_t rows = 0;
  for (const auto& st : scored) {
    const auto smooth = margin_trajectory(st.series, f.window);
    for (std::size_t i = 0; i < st.series.size(); ++i, ++rows) {
      traj << st.trace.id << ',' << i << ',' << st.series.values[i] << ',' << smooth[i] << ','
           << (st.series.excluded[i] ? 1 : 0) << '\n';
    }
  }

  const auto stats = aggregate_cue_stats(scored, pool);
  std::ostringstream cues;
  cues << std::setprecision(17);
  cues << "cue,count,post_sentence_mean,post_sentence_se\n";
  for (const auto& c : stats) {
    cues << c.cue_canonical << ',' << c.occurrence_count << ',' << c.post_sentence_mean << ','
         << c.post_sentence_std_err << '\n';
  }

  const fs::path dir = f.out_dir;
  atomic_write(dir / "margin_trajectories.csv", traj.str());
  atomic_write(dir / "cue_margins.csv", cues.str());
  std::ostringstream summary;
  summary << "traces: " << traces.size() << ", trajectory rows: " << rows
          << ", cues occurring: " << stats.size() << '\n';
  try {
    const auto global = global_margin_stats(series);
    summary << std::fixed << std::setprecision(4) << "global margin: mean " << global.mean << ", std "
            << global.std_dev << ", se " << global.std_err << ", n " << global.n << '\n';
  } catch (const Error& e) {
    spdlog::warn("{}", e.what());
  }
  out << summary.str();
  return 0;
}

// ---------------------------------------------------------------------------

struct DelegationFlags {
  std::string problems, out, answer_mode = "boxed";
  std::size_t max_tokens = 32768;
};

inline int cmd_delegation(const CLI::App& app, const Globals& g, const DelegationFlags& f,
                          std::ostream& out) {
  Resolver r(app, g);
  std::string problems_path, mode;
  r.resolve("--problems", f.problems, "problems_path", problems_path);
  r.resolve("--answer-mode", f.answer_mode, "answer_mode", mode);
  if (problems_path.empty()) throw Error(Errc::BadConfig, "--problems is required");
  DelegationOptions opt;
  opt.mode = answer_mode_from_string(mode);
  opt.max_tokens = f.max_tokens;
  opt.jobs = g.jobs;
  if (r.table()) apply_sampling(*r.table(), opt.sampling);

  const auto problems = load_problems(problems_path, opt.mode);
  Endpoints ep = resolve_endpoints(r, g, true, true);
  const auto rep = answer_delegation_experiment(problems, *ep.large, *ep.small, opt);
  json j = to_json(rep);
  j["config"] = {{"problems_path", problems_path},
                 {"answer_mode", mode},
                 {"max_tokens", opt.max_tokens},
                 {"sampling", sampling_echo(opt.sampling)},
                 {"endpoints", endpoint_echo(ep)}};
  if (!f.out.empty()) atomic_write(f.out, j.dump(2) + "\n");
  out << format_delegation_table(rep);
  return rep.errors > 0 ? 1 : 0;
}

// ---------------------------------------------------------------------------

struct MockServeFlags {
  std::string script, host = "127.0.0.1";
  int port = 8000;
  bool no_echo = false;
};

inline int cmd_mock_serve(const MockServeFlags& f, std::ostream& out) {
  mocksim::ServerOptions opts;
  opts.host = f.host;
  opts.port = f.port;
  opts.echo_supported = !f.no_echo;
  mocksim::MockServer server(mocksim::load_script(f.script), opts);
  out << "serving " << f.script << " on http://" << f.host << ':' << f.port << std::endl;
  server.run_blocking();
  return 0;
}

// ---------------------------------------------------------------------------

inline void setup_logging(const std::string& level) {
  auto logger = spdlog::get("relay");
  if (!logger) logger = spdlog::stderr_logger_mt("relay");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(level));
}

/// Parses and runs one command; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Segment-level switching between a large and a small reasoning model", "relay"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  Globals g;
  app.add_option("--config", g.config_path, "TOML config file");
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off");
  app.add_option("--jobs", g.jobs, "Concurrent sessions or requests")->check(CLI::PositiveNumber);
  app.add_option("--large-url", g.large.url, "Large-model endpoint or mock:script.jsonl");
  app.add_option("--small-url", g.small.url, "Small-model endpoint or mock:script.jsonl");
  app.add_option("--large-model", g.large.model, "Large model id (default: first served)");
  app.add_option("--small-model", g.small.model, "Small model id (default: first served)");
  app.add_option("--api-key", g.api_key, "Bearer token for both endpoints");
  app.add_flag("--include-stop-str", g.include_stop, "Ask servers to keep stop strings in output");

  CalibrateFlags cf;
  auto* cal = app.add_subcommand("calibrate", "Select switch cues from calibration traces");
  cal->add_option("--prompts", cf.prompts, "Prompt file (lines, or .jsonl with a prompt field)");
  cal->add_option("--traces", cf.traces, "Recorded trace JSONL instead of generating");
  cal->add_option("--samples-per-prompt", cf.samples_per_prompt)->capture_default_str();
  cal->add_option("--min-count", cf.min_count)->capture_default_str();
  cal->add_option("--max-trace-tokens", cf.max_trace_tokens)->capture_default_str();
  cal->add_flag("--all-candidates", cf.all_candidates, "Export the whole pool (ablation)");
  cal->add_option("--score-under", cf.score_under)->check(CLI::IsMember({"small", "large"}))->capture_default_str();
  cal->add_option("--pool", cf.pool, "Cue pool TOML");
  cal->add_option("--out", cf.out, "Cue set JSON (default: stdout)");
  cal->add_option("--report", cf.report, "Text report file");

  RunFlags rf;
  auto* runc = app.add_subcommand("run", "Run one switching session");
  auto* p1 = runc->add_option("--prompt", rf.prompt, "Prompt text");
  auto* p2 = runc->add_option("-f,--prompt-file", rf.prompt_file, "Prompt file");
  p1->excludes(p2);
  runc->add_option("--cues", rf.cues, "Cue set JSON from calibrate");
  runc->add_option("--max-tokens", rf.max_tokens)->capture_default_str();
  runc->add_option("--max-small-segment", rf.max_small_segment)->capture_default_str();
  runc->add_option("--seed", rf.seed);
  runc->add_option("--out", rf.out, "Transcript JSON (default: stdout)");

  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "Utilization and simulated speedup over a problem set");
  bench->add_option("--problems", bf.problems, "Problem JSONL {id, prompt, answer}");
  bench->add_option("--cues", bf.cues, "Cue set JSON");
  bench->add_option("--repeats", bf.repeats, "Runs per problem")->capture_default_str();
  bench->add_option("--cost-model", bf.cost_model, "TOML with a [cost] table");
  bench->add_option("--spec-profile", bf.spec_profile, "TOML with a [spec] table");
  bench->add_option("--answer-mode", bf.answer_mode)->check(CLI::IsMember({"boxed", "letter"}));
  bench->add_option("--max-tokens", bf.max_tokens)->capture_default_str();
  bench->add_option("--max-small-segment", bf.max_small_segment)->capture_default_str();
  bench->add_option("--out", bf.out, "Report JSON");

  AnalyzeFlags af;
  auto* an = app.add_subcommand("analyze", "Margin trajectories and per-cue margins as CSV");
  an->add_option("--traces", af.traces, "Trace JSONL with top probabilities")->required();
  an->add_option("--window", af.window, "Smoothing window")->capture_default_str()->check(CLI::PositiveNumber);
  an->add_option("--pool", af.pool, "Cue pool TOML");
  an->add_option("--out-dir", af.out_dir)->capture_default_str();

  DelegationFlags df;
  auto* del = app.add_subcommand("delegation-test", "Answer-stage delegation consistency");
  del->add_option("--problems", df.problems, "Problem JSONL {id, prompt, answer}");
  del->add_option("--answer-mode", df.answer_mode)->check(CLI::IsMember({"boxed", "letter"}));
  del->add_option("--max-tokens", df.max_tokens)->capture_default_str();
  del->add_option("--out", df.out, "Report JSON");

  MockServeFlags mf;
  auto* mock = app.add_subcommand("mock-serve", "Serve a script over the completions API");
  mock->add_option("--script", mf.script, "Script JSONL")->required();
  mock->add_option("--port", mf.port)->capture_default_str();
  mock->add_option("--host", mf.host)->capture_default_str();
  mock->add_flag("--no-echo", mf.no_echo, "Reject echo requests");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    setup_logging(g.log_level);
    if (*cal) return cmd_calibrate(*cal, g, cf, out);
    if (*runc) {
      if (rf.prompt.empty() && rf.prompt_file.empty()) throw Error(Errc::BadRequest, "give --prompt or -f");
      return cmd_run(*runc, g, rf, out);
    }
    if (*bench) return cmd_bench(*bench, g, bf, out);
    if (*an) return cmd_analyze(*an, g, af, out);
    if (*del) return cmd_delegation(*del, g, df, out);
    if (*mock) return cmd_mock_serve(mf, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace relay::cli
