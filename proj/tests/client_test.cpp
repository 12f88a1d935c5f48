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

#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "support/fixtures.hpp"

namespace relay {
namespace {

using mocksim::MockServer;
using mocksim::ServerOptions;

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::EndpointError;
}

EndpointConfig endpoint(const MockServer& srv, std::string model) {
  EndpointConfig c;
  c.base_url = srv.url();
  c.model_id = std::move(model);
  c.timeout = std::chrono::milliseconds(5000);
  c.backoff_base = std::chrono::milliseconds(1);
  c.backoff_cap = std::chrono::milliseconds(4);
  return c;
}

mocksim::Script thus_doc(const std::string& model) {
  mocksim::Script s = testing::script_of(model, {"Q", ":", " one", ".", " Thus,", " two", "."});
  return s;
}

TEST(OpenAiClient, GenerateStopsAndReappends) {
  MockServer srv(thus_doc("m"));
  srv.start();
  OpenAiClient cli(endpoint(srv, "m"));
  GenerateRequest req{"Q:", {" Thus,", "Thus,"}, 10, {}};
  const auto r = cli.generate(req);
  EXPECT_EQ(r.text(), " one. Thus,");
  EXPECT_EQ(r.stop_reason, StopReason::stop(" Thus,"));
  EXPECT_TRUE(r.tokens.back().synthetic);
  EXPECT_EQ(r.usage.prompt_tokens, 2u);
}

TEST(OpenAiClient, IncludeStopKeepsRealToken) {
  MockServer srv(thus_doc("m"));
  srv.start();
  auto cfg = endpoint(srv, "m");
  cfg.include_stop_str_in_output = true;
  OpenAiClient cli(cfg);
  const auto r = cli.generate({"Q:", {" Thus,"}, 10, {}});
  EXPECT_EQ(r.text(), " one. Thus,");
  EXPECT_FALSE(r.tokens.back().synthetic);
}

TEST(OpenAiClient, MaxTokensAndEos) {
  MockServer srv(thus_doc("m"));
  srv.start();
  OpenAiClient cli(endpoint(srv, "m"));
  const auto a = cli.generate({"Q:", {}, 2, {}});
  EXPECT_EQ(a.text(), " one.");
  EXPECT_EQ(a.stop_reason, StopReason::max_tokens());
  const auto b = cli.generate({"Q:", {}, 100, {}});
  EXPECT_EQ(b.text(), " one. Thus, two.");
  EXPECT_EQ(b.stop_reason, StopReason::eos());
  for (const auto& t : b.tokens) {
    double sum = 0.0;
    for (const auto& c : t.top_probs) sum += c.prob;
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(OpenAiClient, ResumesMidToken) {
  MockServer srv(thus_doc("m"));
  srv.start();
  OpenAiClient cli(endpoint(srv, "m"));
  const auto r = cli.generate({"Q: on", {}, 1, {}});
  EXPECT_EQ(r.text(), "e");
}

TEST(OpenAiClient, Rescore) {
  MockServer srv(thus_doc("m"));
  srv.start();
  OpenAiClient cli(endpoint(srv, "m"));
  const auto recs = cli.rescore("Q: one. Thus,");
  ASSERT_EQ(recs.size(), 5u);
  EXPECT_TRUE(recs.front().synthetic);
  std::string text;
  for (const auto& r : recs) text += r.text;
  EXPECT_EQ(text, "Q: one. Thus,");
  EXPECT_DOUBLE_EQ(recs[4].top_probs.front().prob, 1.0);
}

TEST(OpenAiClient, RescoreWithoutEcho) {
  ServerOptions opts;
  opts.echo_supported = false;
  MockServer srv(thus_doc("m"), opts);
  srv.start();
  OpenAiClient cli(endpoint(srv, "m"));
  EXPECT_EQ(code_of([&] { cli.rescore("Q: one."); }), Errc::UnsupportedCapability);
}

TEST(OpenAiClient, HealthAndModelDiscovery) {
  MockServer srv(thus_doc("mock-large"));
  srv.start();
  OpenAiClient named(endpoint(srv, "mock-large"));
  EXPECT_EQ(named.health_check().id, "mock-large");

  OpenAiClient blank(endpoint(srv, ""));
  blank.resolve_model_id();
  EXPECT_EQ(blank.model_id(), "mock-large");

  OpenAiClient wrong(endpoint(srv, "other"));
  EXPECT_EQ(code_of([&] { wrong.health_check(); }), Errc::ModelNotFound);
  EXPECT_EQ(code_of([&] { wrong.generate({"Q:", {}, 1, {}}); }), Errc::ModelNotFound);
}

TEST(OpenAiClient, UrlWithV1Suffix) {
  MockServer srv(thus_doc("m"));
  srv.start();
  auto cfg = endpoint(srv, "m");
  cfg.base_url += "/v1/";
  OpenAiClient cli(cfg);
  EXPECT_EQ(cli.generate({"Q:", {}, 1, {}}).text(), " one");
}

TEST(OpenAiClient, RetriesTransientFailures) {
  ServerOptions opts;
  opts.fail_first_n = 2;
  MockServer srv(thus_doc("m"), opts);
  srv.start();
  OpenAiClient cli(endpoint(srv, "m"));
  EXPECT_EQ(cli.generate({"Q:", {}, 1, {}}).text(), " one");
  EXPECT_EQ(srv.requests_served(), 1);
}

TEST(OpenAiClient, GivesUpAfterRetries) {
  ServerOptions opts;
  opts.fail_first_n = 10;
  MockServer srv(thus_doc("m"), opts);
  srv.start();
  auto cfg = endpoint(srv, "m");
  cfg.max_retries = 2;
  OpenAiClient cli(cfg);
  EXPECT_EQ(code_of([&] { cli.generate({"Q:", {}, 1, {}}); }), Errc::EndpointError);
}

TEST(OpenAiClient, ScriptMissIsNotRetried) {
  MockServer srv(thus_doc("m"));
  srv.start();
  OpenAiClient cli(endpoint(srv, "m"));
  EXPECT_EQ(code_of([&] { cli.generate({"nothing like it", {}, 1, {}}); }), Errc::ScriptMiss);
}

TEST(OpenAiClient, UnreachableServer) {
  EndpointConfig c;
  c.base_url = "http://127.0.0.1:1";
  c.model_id = "m";
  c.max_retries = 1;
  c.timeout = std::chrono::milliseconds(200);
  c.backoff_base = std::chrono::milliseconds(1);
  OpenAiClient cli(c);
  EXPECT_EQ(code_of([&] { cli.generate({"Q:", {}, 1, {}}); }), Errc::EndpointError);
}

TEST(OpenAiClient, ConfigValidation) {
  EndpointConfig c;
  EXPECT_EQ(code_of([&] { OpenAiClient x(c); }), Errc::BadConfig);
  c.base_url = "http://x";
  c.logprobs_top_k = 1;
  EXPECT_EQ(code_of([&] { OpenAiClient x(c); }), Errc::BadConfig);
  c.logprobs_top_k = 5;
  OpenAiClient ok(c);
  EXPECT_EQ(code_of([&] { ok.generate({"Q", {}, 0, {}}); }), Errc::BadRequest);
  EXPECT_EQ(code_of([&] { ok.rescore(""); }), Errc::BadRequest);
}

TEST(Backoff, BoundedAndGrowing) {
  EndpointConfig c;
  c.backoff_base = std::chrono::milliseconds(100);
  c.backoff_cap = std::chrono::milliseconds(1000);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    for (int a = 0; a < 8; ++a) {
      const double ideal = std::min(100.0 * std::pow(2.0, a), 1000.0);
      const auto d = backoff_delay(c, a, rng).count();
      EXPECT_GE(d, static_cast<long>(ideal * 0.5) - 1);
      EXPECT_LE(d, static_cast<long>(ideal));
    }
  }
}

TEST(Wire, RequestRoundTrip) {
  wire::CompletionRequest r;
  r.model = "m";
  r.prompt = "p";
  r.max_tokens = 7;
  r.stop = {".", "</think>"};
  r.sampling.seed = 11;
  r.logprobs = 5;
  r.echo = true;
  const auto back = wire::decode_request(wire::encode_request(r));
  EXPECT_EQ(back.model, r.model);
  EXPECT_EQ(back.prompt, r.prompt);
  EXPECT_EQ(back.max_tokens, r.max_tokens);
  EXPECT_EQ(back.stop, r.stop);
  EXPECT_EQ(back.sampling, r.sampling);
  EXPECT_TRUE(back.echo);
}

TEST(Backend, ClientAndScriptAgree) {
  MockServer srv(testing::two_cue_script("L"));
  srv.start();
  OpenAiClient remote(endpoint(srv, "L"));
  mocksim::ScriptedBackend local(testing::two_cue_script("L"));
  std::string prompt = testing::two_cue_prompt();
  const std::vector<std::string> stops = {" Thus,", "Thus,", "."};
  for (int i = 0; i < 6; ++i) {
    GenerateRequest req{prompt, stops, 50, {}};
    auto a = remote.generate(req);
    auto b = local.generate(req);
    ensure_stop_surface(b);
    EXPECT_EQ(a.text(), b.text());
    EXPECT_EQ(a.stop_reason, b.stop_reason);
    prompt += a.text();
  }
}

}  // namespace
}  // namespace relay
