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
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "support/fixtures.hpp"

namespace relay {
namespace {

using testing::make_trace;
using testing::rec;

std::vector<Candidate> softmax(const std::vector<double>& logits) {
  double z = 0.0;
  for (double l : logits) z += std::exp(l);
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.push_back({"t" + std::to_string(i), std::exp(logits[i]) / z});
  }
  return out;
}

TEST(ComputeMargin, OneHotAndTie) {
  EXPECT_EQ(compute_margin(std::vector<Candidate>{{"a", 1.0}, {"b", 0.0}}), 1.0);
  EXPECT_EQ(compute_margin(std::vector<Candidate>{{"a", 0.5}, {"b", 0.5}}), 0.0);
}

TEST(ComputeMargin, SoftmaxOfThreeLogits) {
  const auto top = softmax({2.0, 1.0, 0.0});
  EXPECT_NEAR(top[0].prob, 0.6652, 1e-4);
  EXPECT_NEAR(top[1].prob, 0.2447, 1e-4);
  EXPECT_NEAR(top[2].prob, 0.0900, 1e-4);
  EXPECT_NEAR(compute_margin(top), 0.4205, 1e-4);
}

TEST(ComputeMargin, RejectsMalformedRecords) {
  auto code = [](std::vector<Candidate> top) {
    try {
      compute_margin(top, 7);
    } catch (const Error& e) {
      EXPECT_EQ(e.position(), 7u);
      return e.code();
    }
    return Errc::EndpointError;
  };
  EXPECT_EQ(code({{"a", 1.0}}), Errc::MalformedRecord);
  EXPECT_EQ(code({}), Errc::MalformedRecord);
  EXPECT_EQ(code({{"a", 0.2}, {"b", 0.7}}), Errc::MalformedRecord);
  EXPECT_EQ(code({{"a", 1.2}, {"b", 0.0}}), Errc::MalformedRecord);
  EXPECT_EQ(code({{"a", 0.5}, {"b", -0.1}}), Errc::MalformedRecord);
}

TEST(ComputeMargin, PropertiesOnRandomRecords) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int iter = 0; iter < 2000; ++iter) {
    const std::size_t k = 2 + rng() % 6;
    std::vector<double> w(k);
    double z = 0.0;
    for (auto& x : w) z += (x = u(rng));
    std::vector<Candidate> top;
    for (std::size_t i = 0; i < k; ++i) top.push_back({"s" + std::to_string(i), w[i] / z * u(rng)});
    sort_candidates(top);
    const double m = compute_margin(top);
    EXPECT_GE(m, 0.0);
    EXPECT_LE(m, top[0].prob);
    auto extended = top;
    extended.push_back({"tail", 0.0});
    EXPECT_EQ(compute_margin(extended), m);
    auto first_two = std::vector<Candidate>(top.begin(), top.begin() + 2);
    EXPECT_EQ(compute_margin(first_two), m);
  }
}

TEST(MarginsFromTrace, Examples) {
  EXPECT_TRUE(margins_from_trace(Trace{}).values.empty());
  const auto one_hot = margins_from_trace(testing::text_trace({"a", "b", "c"}, 1.0));
  EXPECT_EQ(one_hot.values, (std::vector<double>{1.0, 1.0, 1.0}));

  Trace t;
  t.tokens.push_back(rec("x", 1.0));
  t.tokens.push_back(rec("y", 0.0));
  TokenRecord soft;
  soft.text = "z";
  soft.top_probs = softmax({2.0, 1.0, 0.0});
  t.tokens.push_back(soft);
  const auto s = margins_from_trace(t);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s.values[0], 1.0);
  EXPECT_EQ(s.values[1], 0.0);
  EXPECT_NEAR(s.values[2], 0.4205, 1e-4);
}

TEST(MarginsFromTrace, ReportsOffendingPosition) {
  Trace t = testing::text_trace({"a", "b", "c"});
  t.tokens[2].top_probs.resize(1);
  try {
    margins_from_trace(t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MalformedRecord);
    EXPECT_EQ(e.position(), 2u);
  }
}

TEST(MarginsFromTrace, SyntheticRecordsAreExcluded) {
  Trace t = testing::text_trace({"a", "b"});
  t.tokens.push_back(synthetic_record("Thus,", 2));
  const auto s = margins_from_trace(t);
  EXPECT_FALSE(s.excluded[0]);
  EXPECT_TRUE(s.excluded[2]);
  EXPECT_FALSE(s.counts(2));
}

TEST(GlobalStats, Examples) {
  auto stats = [](std::vector<double> v) {
    std::vector<MarginSeries> one{MarginSeries::from_values(std::move(v))};
    return global_margin_stats(one);
  };
  auto a = stats({0.5, 0.5, 0.5});
  EXPECT_DOUBLE_EQ(a.mean, 0.5);
  EXPECT_DOUBLE_EQ(a.std_dev, 0.0);
  EXPECT_DOUBLE_EQ(a.std_err, 0.0);

  auto b = stats({0.0, 1.0});
  EXPECT_DOUBLE_EQ(b.mean, 0.5);
  EXPECT_DOUBLE_EQ(b.std_dev, 0.5);
  EXPECT_NEAR(b.std_err, 0.35355, 1e-5);

  auto c = stats({0.2, 0.4, 0.6, 0.8});
  EXPECT_NEAR(c.mean, 0.5, 1e-15);
  EXPECT_NEAR(c.std_dev, 0.22361, 1e-5);
  EXPECT_NEAR(c.std_err, 0.11180, 1e-5);
  EXPECT_EQ(c.n, 4u);
}

TEST(GlobalStats, InsufficientData) {
  std::vector<MarginSeries> one{MarginSeries::from_values({0.3})};
  EXPECT_THROW(
      {
        try {
          global_margin_stats(one);
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), Errc::InsufficientData);
          throw;
        }
      },
      Error);
  EXPECT_THROW(global_margin_stats(std::vector<MarginSeries>{}), Error);
}

TEST(GlobalStats, PoolingIsAssociative) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<MarginSeries> parts;
    std::vector<double> pooled;
    const std::size_t k = 1 + rng() % 5;
    for (std::size_t p = 0; p < k; ++p) {
      std::vector<std::pair<std::string, double>> toks;
      const std::size_t n = 1 + rng() % 20;
      for (std::size_t i = 0; i < n; ++i) toks.emplace_back("w", u(rng));
      parts.push_back(margins_from_trace(make_trace(toks)));
      for (double v : parts.back().values) pooled.push_back(v);
    }
    if (pooled.size() < 2) continue;
    const auto a = global_margin_stats(parts);
    const auto b = describe(pooled);
    EXPECT_NEAR(a.mean, b.mean, 1e-12);
    EXPECT_NEAR(a.std_dev, b.std_dev, 1e-12);
    EXPECT_EQ(a.n, b.n);
  }
}

TEST(GlobalStats, IdenticalValues) {
  for (double v : {0.0, 0.125, 0.7, 1.0}) {
    std::vector<MarginSeries> one{MarginSeries::from_values(std::vector<double>(9, v))};
    const auto s = global_margin_stats(one);
    EXPECT_NEAR(s.mean, v, 1e-15);
    EXPECT_NEAR(s.std_dev, 0.0, 1e-15);
    EXPECT_NEAR(s.std_err, 0.0, 1e-15);
  }
}

TEST(Trajectory, Examples) {
  const auto s = MarginSeries::from_values({0.0, 1.0, 0.0});
  const auto t = margin_trajectory(s, 3);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_DOUBLE_EQ(t[0], 0.5);
  EXPECT_DOUBLE_EQ(t[1], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(t[2], 0.5);
  EXPECT_EQ(margin_trajectory(s, 1), s.values);
}

TEST(Trajectory, BadWindow) {
  const auto s = MarginSeries::from_values({0.1, 0.2});
  for (std::size_t w : {0u, 3u}) {
    try {
      margin_trajectory(s, w);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::BadWindow);
    }
  }
}

TEST(Trajectory, Properties) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int iter = 0; iter < 300; ++iter) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    const auto s = MarginSeries::from_values(v);
    EXPECT_EQ(margin_trajectory(s, 1), v);
    const std::size_t w = 1 + rng() % n;
    const auto c = MarginSeries::from_values(std::vector<double>(n, 0.375));
    for (double x : margin_trajectory(c, w)) EXPECT_NEAR(x, 0.375, 1e-15);
    EXPECT_EQ(margin_trajectory(s, w).size(), n);
  }
}

TEST(TraceJsonl, RoundTripAndGrouping) {
  std::vector<Trace> traces = {make_trace({{"a", 0.5}, {"b", 0.25}}, "one"),
                               make_trace({{"c", 1.0}}, "two")};
  traces[1].tokens.push_back(synthetic_record(".", 1));
  std::stringstream ss;
  write_traces_jsonl(ss, traces);
  auto back = read_traces_jsonl(ss, "large");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].id, "one");
  EXPECT_EQ(back[0].tokens, traces[0].tokens);
  EXPECT_EQ(back[1].tokens, traces[1].tokens);
}

TEST(TraceJsonl, AcceptsLogprobsAndRejectsGarbage) {
  std::stringstream ok(R"({"text":"a","pos":0,"top_logprobs":[["a",-0.1],["b",-2.5]]})" "\n");
  auto t = read_traces_jsonl(ok);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_NEAR(t[0].tokens[0].top_probs[0].prob, std::exp(-0.1), 1e-12);

  std::stringstream bad("{\"text\": 3}\n");
  try {
    read_traces_jsonl(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MalformedRecord);
    EXPECT_EQ(e.position(), 1u);
  }
}

}  // namespace
}  // namespace relay
