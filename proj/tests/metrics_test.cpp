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

#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "support/fixtures.hpp"

namespace relay {
namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::EndpointError;
}

std::vector<Producer> blocks(std::size_t large, std::size_t small) {
  std::vector<Producer> v(large, Producer::Large);
  v.insert(v.end(), small, Producer::Small);
  return v;
}

TEST(Utilization, Examples) {
  EXPECT_DOUBLE_EQ(utilization(blocks(698, 302)), 0.698);
  EXPECT_DOUBLE_EQ(utilization(blocks(7, 3)), 0.7);
  EXPECT_DOUBLE_EQ(utilization(blocks(0, 4)), 0.0);
  EXPECT_DOUBLE_EQ(utilization(blocks(4, 0)), 1.0);
  EXPECT_EQ(code_of([] { utilization(std::vector<Producer>{}); }), Errc::EmptyTranscript);
}

TEST(Utilization, OrderDoesNotMatter) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    std::vector<Producer> a(1 + rng() % 300);
    for (auto& p : a) p = rng() % 2 ? Producer::Large : Producer::Small;
    const double u = utilization(a);
    std::shuffle(a.begin(), a.end(), rng);
    EXPECT_DOUBLE_EQ(utilization(a), u);
    EXPECT_GE(u, 0.0);
    EXPECT_LE(u, 1.0);
  }
}

TEST(MatchingRate, Examples) {
  std::vector<std::string> a(728, "1"), b(728, "1");
  b[100] = "2";
  EXPECT_NEAR(matching_rate(a, b), 727.0 / 728.0, 1e-15);
  EXPECT_NEAR(matching_rate(a, b) * 100.0, 99.86, 0.01);

  using Opt = std::optional<std::string>;
  std::vector<Opt> x = {Opt("1"), std::nullopt, Opt("3"), std::nullopt};
  std::vector<Opt> y = {Opt("1"), std::nullopt, std::nullopt, Opt("4")};
  EXPECT_DOUBLE_EQ(matching_rate(std::span<const Opt>(x), std::span<const Opt>(y)), 0.5);

  std::vector<std::string> shorter(3, "1");
  EXPECT_EQ(code_of([&] { matching_rate(a, shorter); }), Errc::MisalignedInputs);
  std::vector<std::string> none;
  EXPECT_EQ(code_of([&] { matching_rate(none, none); }), Errc::EmptyInput);
}

TEST(MatchingRate, Symmetric) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + rng() % 50;
    std::vector<std::string> a(n), b(n);
    for (std::size_t k = 0; k < n; ++k) {
      a[k] = std::to_string(rng() % 3);
      b[k] = std::to_string(rng() % 3);
    }
    EXPECT_DOUBLE_EQ(matching_rate(a, b), matching_rate(b, a));
    EXPECT_DOUBLE_EQ(matching_rate(a, a), 1.0);
  }
}

TEST(Aggregate, PopulationStd) {
  std::vector<MetricRow> rows = {{{"utilization", 0.6}}, {{"utilization", 0.8}}};
  const Summary s = aggregate(std::span<const MetricRow>(rows));
  EXPECT_NEAR(s.at("utilization").mean, 0.7, 1e-12);
  EXPECT_NEAR(s.at("utilization").std_dev, 0.1, 1e-12);
  EXPECT_EQ(code_of([] { aggregate(std::span<const MetricRow>()); }), Errc::EmptyInput);

  const std::vector<double> one = {3.0};
  EXPECT_DOUBLE_EQ(mean_std(one).std_dev, 0.0);
}

TEST(Aggregate, KeepsOnlySharedMetrics) {
  std::vector<MetricRow> rows = {{{"a", 1.0}, {"b", 2.0}}, {{"a", 3.0}}};
  const Summary s = aggregate(std::span<const MetricRow>(rows));
  EXPECT_EQ(s.count("a"), 1u);
  EXPECT_EQ(s.count("b"), 0u);
}

TEST(SessionStats, FromTwoCueRun) {
  mocksim::ScriptedBackend large(testing::two_cue_script("L")), small(testing::two_cue_script("S"));
  Session s = start_session(testing::two_cue_prompt(), testing::thus_surfaces());
  const Transcript t = run(s, large, small);
  const SessionStats st = session_stats(t);
  EXPECT_EQ(st.total_tokens, t.tokens.size());
  EXPECT_EQ(st.large_tokens + st.small_tokens, st.total_tokens);
  EXPECT_EQ(st.switch_count_by_direction.at("LargeToSmall"), 2u);
  EXPECT_EQ(st.switch_count_by_direction.at("SmallToLarge"), 2u);
  EXPECT_EQ(st.switch_count_by_direction.at("ToAnswerStage"), 1u);
  EXPECT_DOUBLE_EQ(st.utilization, static_cast<double>(st.large_tokens) / st.total_tokens);

  const auto j = to_json(t);
  EXPECT_EQ(j["text"], t.text());
  EXPECT_EQ(j["events"].size(), 5u);
  EXPECT_EQ(j["final_phase"], "done");
  EXPECT_FALSE(j.contains("abort_reason"));
}

TEST(MethodTable, Layout) {
  std::vector<MethodColumn> cols = {{"Large only", {1.0, 0.0}, {1.0, 0.0}},
                                    {"Relay", {1.2903, 0.01}, {0.7, 0.1}}};
  const std::string out = format_method_table(cols);
  EXPECT_NE(out.find("Metric"), std::string::npos);
  EXPECT_NE(out.find("1.29x ± 0.01"), std::string::npos);
  EXPECT_NE(out.find("70.00 ± 10.00"), std::string::npos);
  EXPECT_NE(out.find("Large-Model Utilization (%)"), std::string::npos);
}

}  // namespace
}  // namespace relay
