/*
 * Copyright 2026 The hedgekit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <CLI11.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "hedgekit/dataset.hpp"
#include "hedgekit/metrics.hpp"
#include "hedgekit/shapley.hpp"
#include "support/fakes.hpp"
#include "support/oracles.hpp"

namespace hedgekit {
namespace {

using oracle::Sigmoid;

Dataset One(const std::string& text) { return {{"x", TokenSequence::FromText(text), std::nullopt}}; }

TEST(TopCountTest, CeilingWithFloorOfOne) {
  EXPECT_EQ(TopCount(4, 20), 1u);
  EXPECT_EQ(TopCount(4, 25), 1u);
  EXPECT_EQ(TopCount(4, 26), 2u);
  EXPECT_EQ(TopCount(10, 20), 2u);
  EXPECT_EQ(TopCount(3, 100), 3u);
  EXPECT_EQ(TopCount(1, 1), 1u);
  EXPECT_THROW(TopCount(4, 0), DomainError);
  EXPECT_THROW(TopCount(4, 101), DomainError);
}

TEST(RankByScoreTest, DescendingStable) {
  EXPECT_EQ(RankByScore({0.1, 0.5, 0.1, -1.0}), (Ranking{1, 0, 2, 3}));
}

TEST(AopcTest, WorkedExample) {
  Predictor predictor(fakes::FromModel(oracle::NegationModel()));
  const auto data = One("a not bad movie");
  const std::vector<Ranking> r{{2, 1, 0, 3}};
  // Delete "bad": "a not movie".
  auto res = Aopc(predictor, data, r, 25);
  EXPECT_NEAR(res.mean, Sigmoid(3) - Sigmoid(-1), 1e-15);
  EXPECT_FALSE(res.records[0].all_removed);
  // Delete "bad" and "not": "a movie".
  res = Aopc(predictor, data, r, 50);
  EXPECT_NEAR(res.mean, Sigmoid(3) - 0.5, 1e-15);
  // Everything deleted: the all-pad sequence stands in.
  res = Aopc(predictor, data, r, 100);
  EXPECT_TRUE(res.records[0].all_removed);
  EXPECT_NEAR(res.mean, Sigmoid(3) - 0.5, 1e-15);
}

TEST(AopcTest, RejectsBadRankings) {
  Predictor predictor(fakes::FromModel(oracle::NegationModel()));
  const auto data = One("a not bad movie");
  EXPECT_THROW(Aopc(predictor, data, {{0, 1, 2}}, 20), DomainError);
  EXPECT_THROW(Aopc(predictor, data, {{0, 1, 1, 2}}, 20), DomainError);
  EXPECT_THROW(Aopc(predictor, data, {}, 20), DomainError);
}

TEST(LogOddsTest, WorkedExample) {
  Predictor predictor(fakes::FromModel(oracle::NegationModel()));
  const auto data = One("a not bad movie");
  const auto res = LogOdds(predictor, data, {{2, 1, 0, 3}}, 25);
  EXPECT_NEAR(res.mean, std::log(Sigmoid(-1) / Sigmoid(3)), 1e-14);
}

TEST(LogOddsTest, ClampsAtTheFloor) {
  BuiltinModel m;
  m.unigrams = {{"huge", 40.0}, {"anti", -80.0}};
  Predictor predictor(fakes::FromModel(m));
  const Dataset data = One("huge anti");  // class 0 with probability 1
  // Padding "anti" leaves class 0 at about e^-80, well below the floor.
  const auto res = LogOdds(predictor, data, {{1, 0}}, 50);
  EXPECT_NEAR(res.mean, std::log(kLogOddsFloor), 1e-9);
}

TEST(CohesionTest, MatchesExhaustiveExpectation) {
  const auto model = oracle::NegationModel();
  Predictor predictor(fakes::FromModel(model));
  const auto data = One("a not bad movie");
  // Remaining "a movie"; "not" goes to one of 3 slots, then "bad" to one of 4.
  double expected_after = 0.0;
  for (std::size_t p = 0; p <= 2; ++p) {
    for (std::size_t q = 0; q <= 3; ++q) {
      oracle::Tokens t{"a", "movie"};
      t.insert(t.begin() + static_cast<std::ptrdiff_t>(p), "not");
      t.insert(t.begin() + static_cast<std::ptrdiff_t>(q), "bad");
      expected_after += oracle::Probs(model, t)[1] / 12.0;
    }
  }
  EXPECT_NEAR(expected_after, (3 * Sigmoid(3) + 9 * Sigmoid(-5)) / 12.0, 1e-15);
  const double expected = Sigmoid(3) - expected_after;

  constexpr int kQ = 4000;
  const auto res = CohesionOfSpans(predictor, data, {{1, 3}}, kQ, 99);
  // Each draw takes one of two values; its spread bounds the standard error.
  const double hi = Sigmoid(3) - Sigmoid(-5), sd = hi * std::sqrt(0.25 * 0.75);
  EXPECT_NEAR(res.mean, expected, 4.0 * sd / std::sqrt(kQ));
  EXPECT_EQ(res.mean, res.records[0].value);
}

TEST(CohesionTest, ZeroForBagOfWordsModels) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const auto model = oracle::RandomModel(rng, 6, 0, 2.0);
    Predictor predictor(fakes::FromModel(model));
    const TokenSequence seq(oracle::RandomSentence(rng, 6, 7));
    Dataset data;
    std::vector<Span> spans;
    for (std::size_t a = 0; a < 7; ++a) {
      for (std::size_t b = a + 1; b <= 7; ++b) {
        data.push_back({"s", seq, std::nullopt});
        spans.push_back({a, b});
      }
    }
    const auto res = CohesionOfSpans(predictor, data, spans, 30, 5);
    for (const auto& r : res.records) EXPECT_NEAR(r.value, 0.0, 1e-12);
  }
}

TEST(CohesionTest, VarianceShrinksWithPerturbations) {
  Predictor predictor(fakes::FromModel(oracle::NegationModel()));
  const auto data = One("the a not bad movie a");
  auto spread = [&](int q) {
    std::vector<double> v;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      v.push_back(CohesionOfSpans(predictor, data, {{2, 4}}, q, seed).mean);
    }
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size() - 1);
  };
  EXPECT_LT(spread(100), spread(10));
}

TEST(CohesionTest, UsesTopFeature) {
  Predictor predictor(fakes::FromModel(oracle::NegationModel()));
  const auto data = One("a not bad movie");
  const auto e = Explain(predictor, data[0].tokens);
  const auto a = Cohesion(predictor, data, {e}, 50, std::nullopt, 3);
  const auto b = CohesionOfSpans(predictor, data, {TopFeature(e).span}, 50, 3);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_GT(a.mean, 0.3);
}

TEST(ScatterSpanTest, KeepsMultisetAndContextOrder) {
  Rng rng(4);
  const auto seq = TokenSequence::FromText("a b c d e f");
  for (int i = 0; i < 100; ++i) {
    auto out = ScatterSpan(seq, {1, 4}, rng);
    ASSERT_EQ(out.size(), 6u);
    auto pos = [&](const std::string& w) { return std::find(out.begin(), out.end(), w) - out.begin(); };
    EXPECT_LT(pos("a"), pos("e"));
    EXPECT_LT(pos("e"), pos("f"));
    std::sort(out.begin(), out.end());
    EXPECT_EQ(out, seq.tokens());
  }
}

TEST(AggregateTest, MeanOfRecords) {
  Predictor predictor(fakes::FromModel(oracle::NegationModel()));
  Dataset data{{"1", TokenSequence::FromText("a not bad movie"), {}},
               {"2", TokenSequence::FromText("bad movie"), {}},
               {"3", TokenSequence::FromText("not"), {}}};
  std::vector<Ranking> r{{0, 1, 2, 3}, {0, 1}, {0}};
  for (int k : {20, 50, 100}) {
    const auto res = Aopc(predictor, data, r, k);
    double sum = 0.0;
    for (const auto& rec : res.records) sum += rec.value;
    EXPECT_NEAR(res.mean, sum / 3.0, 1e-15);
    const auto lo = LogOdds(predictor, data, r, k);
    sum = 0.0;
    for (const auto& rec : lo.records) sum += rec.value;
    EXPECT_NEAR(lo.mean, sum / 3.0, 1e-15);
  }
}

TEST(LeaveOneOutTest, WorkedExample) {
  Predictor predictor(fakes::FromModel(oracle::NegationModel()));
  const auto seq = TokenSequence::FromText("a not bad movie");
  const auto s = LeaveOneOutScores(predictor, seq);
  EXPECT_NEAR(s[0], 0.0, 1e-15);
  EXPECT_NEAR(s[1], Sigmoid(3) - Sigmoid(-4), 1e-15);
  EXPECT_NEAR(s[2], Sigmoid(3) - Sigmoid(-1), 1e-15);
  EXPECT_EQ(LeaveOneOut(predictor, seq), (Ranking{1, 2, 0, 3}));
}

TEST(SampleShapleyTest, ConvergesToExactValues) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial);
    const auto model = oracle::RandomModel(rng, 6, 4);
    const TokenSequence seq(oracle::BigramRichSentence(rng, model, 6, n));
    Predictor predictor(fakes::FromModel(model));
    const std::size_t y = predictor.Predict(seq).ArgMax();
    const auto exact = ExactShapleyValues(predictor, seq, y);
    const auto approx = SampleShapleyValues(predictor, seq, 10000, 7);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(approx[i], exact[i], 0.02);
    // Each permutation telescopes, so the estimates are efficient too.
    double sum = 0.0, want = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum += approx[i];
      want += exact[i];
    }
    EXPECT_NEAR(sum, want, 1e-9);
  }
}

TEST(SampleShapleyTest, DeterministicPerSeed) {
  Predictor predictor(fakes::FromModel(oracle::NegationModel()));
  const auto seq = TokenSequence::FromText("a not bad movie");
  EXPECT_EQ(SampleShapleyValues(predictor, seq, 700, 3), SampleShapleyValues(predictor, seq, 700, 3));
  EXPECT_NE(SampleShapleyValues(predictor, seq, 700, 3), SampleShapleyValues(predictor, seq, 700, 4));
}

TEST(RandomRankingTest, PermutationAndSeeded) {
  auto r = RandomRanking(10, 5);
  EXPECT_EQ(r, RandomRanking(10, 5));
  EXPECT_NE(r, RandomRanking(10, 6));
  std::sort(r.begin(), r.end());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(r[i], i);
}

TEST(RngTest, BelowIsUniform) {
  Rng rng(DeriveSeed(1, 2));
  std::vector<int> hist(6, 0);
  for (int i = 0; i < 60000; ++i) ++hist[rng.Below(6)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 400);
  EXPECT_NE(DeriveSeed(1, 0), DeriveSeed(1, 1));
  EXPECT_NE(DeriveSeed(1, 0), DeriveSeed(2, 0));
}

TEST(DatasetTest, ParsesAndValidates) {
  std::istringstream ok(R"({"id":"a","tokens":["x","y"],"label":1}

{"tokens":["z"]})");
  const auto data = ReadDataset(ok);
  ASSERT_EQ(data.size(), 2u);
  EXPECT_EQ(data[0].id, "a");
  EXPECT_EQ(data[0].label, 1);
  EXPECT_EQ(data[1].id, "1");
  EXPECT_FALSE(data[1].label.has_value());

  auto line_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      ReadDataset(in);
    } catch (const DatasetError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  EXPECT_EQ(line_of("{\"tokens\":[\"a\"]}\nnot json"), 2u);
  EXPECT_EQ(line_of("{\"tokens\":[]}"), 1u);
  EXPECT_EQ(line_of("{\"tokens\":[\"<pad>\"]}"), 1u);
  EXPECT_EQ(line_of("{\"tokens\":[1]}"), 1u);
  EXPECT_EQ(line_of("{\"text\":\"a b\"}"), 1u);
}

}  // namespace
}  // namespace hedgekit
