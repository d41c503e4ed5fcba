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

#include <functional>

#include "hedgekit/core.hpp"

namespace hedgekit {
namespace {

TEST(TokenSequenceTest, RejectsEmpty) {
  EXPECT_THROW(TokenSequence(std::vector<std::string>{}), DomainError);
  EXPECT_THROW(TokenSequence::FromText("   "), DomainError);
}

TEST(TokenSequenceTest, FromTextSplitsOnWhitespace) {
  const auto seq = TokenSequence::FromText(" a  not\tbad movie ");
  ASSERT_EQ(seq.size(), 4u);
  EXPECT_EQ(seq[1], "not");
  EXPECT_EQ(seq.Join(1, 3), "not bad");
  EXPECT_TRUE(seq.Contains("movie"));
  EXPECT_FALSE(seq.Contains("<pad>"));
}

TEST(PartitionTest, RejectsGapsOverlapsAndShortCovers) {
  EXPECT_THROW(Partition({{0, 2}, {3, 4}}, 4), StructuralError);
  EXPECT_THROW(Partition({{0, 2}, {1, 4}}, 4), StructuralError);
  EXPECT_THROW(Partition({{0, 2}}, 4), StructuralError);
  EXPECT_THROW(Partition({{0, 0}, {0, 4}}, 4), StructuralError);
  EXPECT_THROW(Partition({}, 0), StructuralError);
  EXPECT_NO_THROW(Partition({{0, 1}, {1, 4}}, 4));
}

TEST(PartitionTest, IndexOf) {
  const Partition p({{0, 1}, {1, 3}, {3, 4}}, 4);
  EXPECT_EQ(p.IndexOf({1, 3}), 1u);
  EXPECT_EQ(p.IndexOf({1, 2}), p.size());
  EXPECT_TRUE(Partition::Singletons(3).IsSingletons());
  EXPECT_FALSE(p.IsSingletons());
}

TEST(SplitSpanTest, SplitsInPlace) {
  const Partition p = SplitSpan(Partition::Whole(4), {0, 4}, 1);
  EXPECT_EQ(p, Partition({{0, 1}, {1, 4}}, 4));
  const Partition q = SplitSpan(p, {1, 4}, 3);
  EXPECT_EQ(q, Partition({{0, 1}, {1, 3}, {3, 4}}, 4));
}

TEST(SplitSpanTest, Errors) {
  const Partition p = Partition::Whole(4);
  EXPECT_THROW(SplitSpan(p, {0, 2}, 1), StructuralError);
  EXPECT_THROW(SplitSpan(p, {0, 4}, 0), DomainError);
  EXPECT_THROW(SplitSpan(p, {0, 4}, 4), DomainError);
}

TEST(MergeSpansTest, InvertsSplit) {
  const Partition p = Partition::Singletons(3);
  EXPECT_EQ(MergeSpans(p, {0, 1}, {1, 2}), Partition({{0, 2}, {2, 3}}, 3));
  EXPECT_THROW(MergeSpans(p, {0, 1}, {2, 3}), StructuralError);
}

TEST(CandidateSplitsTest, OrderedBySpanThenCut) {
  const Partition p({{0, 3}, {3, 4}, {4, 6}}, 6);
  const auto c = CandidateSplits(p);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0].span, (Span{0, 3}));
  EXPECT_EQ(c[0].j, 1u);
  EXPECT_EQ(c[1].j, 2u);
  EXPECT_EQ(c[2].span, (Span{4, 6}));
  EXPECT_EQ(c[2].j, 5u);
}

// Every split order of a length-n sequence: there are (n-1)! of them, each a
// valid hierarchy, and each partition has n - |P| candidates.
TEST(HierarchyPropertyTest, ExhaustiveSplitSequences) {
  for (std::size_t n = 1; n <= 8; ++n) {
    std::size_t count = 0;
    Hierarchy h{{Partition::Whole(n)}};
    std::function<void()> walk = [&] {
      const Partition p = h.partitions.back();
      const auto cands = CandidateSplits(p);
      ASSERT_EQ(cands.size(), n - p.size());
      if (cands.empty()) {
        ASSERT_NO_THROW(ValidateHierarchy(h, n));
        ++count;
        return;
      }
      for (const auto& c : cands) {
        h.partitions.push_back(SplitSpan(p, c.span, c.j));
        walk();
        h.partitions.pop_back();
      }
    };
    walk();
    std::size_t factorial = 1;
    for (std::size_t k = 2; k < n; ++k) factorial *= k;
    EXPECT_EQ(count, factorial) << "n=" << n;
  }
}

TEST(ValidateHierarchyTest, RejectsBrokenChains) {
  Hierarchy h{{Partition::Whole(3), Partition::Singletons(3)}};
  EXPECT_THROW(ValidateHierarchy(h, 3), StructuralError);
  Hierarchy wrong_root{{Partition({{0, 1}, {1, 3}}, 3), Partition::Singletons(3)}};
  EXPECT_THROW(ValidateHierarchy(wrong_root, 3), StructuralError);
  Hierarchy ok{{Partition::Whole(3), Partition({{0, 2}, {2, 3}}, 3), Partition::Singletons(3)}};
  EXPECT_NO_THROW(ValidateHierarchy(ok, 3));
}

}  // namespace
}  // namespace hedgekit
