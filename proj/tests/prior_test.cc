// Copyright 2026 The embinv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "embinv/prior.h"

#include <cmath>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "embinv/error.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace embinv {
namespace {

using ::embinv::testing::RandomSequence;
using ::embinv::testing::TableWithTokens;
using ::embinv::testing::TempPath;
using ::testing::ElementsAre;
using ::testing::Optional;

constexpr TokenId kA = 0;
constexpr TokenId kB = 1;

void ExpectNormalized(const std::vector<double>& logprobs) {
  double total = 0.0;
  for (const double lp : logprobs) {
    ASSERT_TRUE(std::isfinite(lp));
    total += std::exp(lp);
  }
  EXPECT_NEAR(total, 1.0, 1e-6);
}

TEST(UniformPriorTest, Values) {
  EXPECT_THAT(UniformLogProbs(1), ElementsAre(0.0));
  const auto four = UniformLogProbs(4);
  ASSERT_EQ(four.size(), 4u);
  for (const double lp : four) EXPECT_DOUBLE_EQ(lp, -std::log(4.0));
  EXPECT_NEAR(LogSumExp(four), 0.0, 1e-15);
  UniformPrior prior(7);
  EXPECT_EQ(prior.NextTokenLogProbs(TokenSequence{1, 2, 3}), UniformLogProbs(7));
  EXPECT_THROW(UniformPrior(0), InvalidArgumentError);
}

TEST(NgramPriorTest, BigramCountsFromHandEnumeration) {
  const std::vector<TokenSequence> corpus{{kA, kB, kA, kB}};
  const auto prior = NgramPrior::Train(corpus, 2, 2, 1.0);
  EXPECT_EQ(prior.Count(TokenSequence{kA}, kB), 2u);
  EXPECT_EQ(prior.Count(TokenSequence{kA}, kA), 0u);
  EXPECT_EQ(prior.HistoryTotal(TokenSequence{kA}), 2u);
  EXPECT_EQ(prior.HistoryTotal(TokenSequence{kB}), 1u);
  const auto lp = prior.NextTokenLogProbs(TokenSequence{kA});
  EXPECT_NEAR(std::exp(lp[kB]), 0.75, 1e-15);
  EXPECT_NEAR(std::exp(lp[kA]), 0.25, 1e-15);
  EXPECT_NEAR(lp[kA], std::log(0.25), 1e-15);
  EXPECT_NEAR(lp[kB], std::log(0.75), 1e-15);
}

TEST(NgramPriorTest, EmptyContextUsesUnigramCounts) {
  const std::vector<TokenSequence> corpus{{kA, kB, kA, kB}, {kA}};
  const auto prior = NgramPrior::Train(corpus, 3, 2, 1.0);
  const auto lp = prior.NextTokenLogProbs(TokenSequence{});
  // Unigram counts a=3, b=2, c=0 over 5 tokens.
  EXPECT_NEAR(std::exp(lp[0]), 4.0 / 8.0, 1e-15);
  EXPECT_NEAR(std::exp(lp[1]), 3.0 / 8.0, 1e-15);
  EXPECT_NEAR(std::exp(lp[2]), 1.0 / 8.0, 1e-15);
}

TEST(NgramPriorTest, BacksOffToLongestSeenSuffix) {
  const std::vector<TokenSequence> corpus{{0, 1, 2}, {3, 1, 2}};
  const auto prior = NgramPrior::Train(corpus, 5, 3, 0.5);
  // History (4, 1) never occurred; (1) did, followed by 2 twice.
  const auto backed = prior.NextTokenLogProbs(TokenSequence{4, 1});
  EXPECT_EQ(backed, prior.NextTokenLogProbs(TokenSequence{1}));
  EXPECT_NEAR(std::exp(backed[2]), (2 + 0.5) / (2 + 0.5 * 5), 1e-15);
  // History 2 is only ever sequence-final, so it backs off to unigrams.
  EXPECT_EQ(prior.NextTokenLogProbs(TokenSequence{2}),
            prior.NextTokenLogProbs(TokenSequence{}));
  // Seen full history wins over its suffix.
  const auto full = prior.NextTokenLogProbs(TokenSequence{0, 1});
  EXPECT_NEAR(std::exp(full[2]), (1 + 0.5) / (1 + 0.5 * 5), 1e-15);
}

TEST(NgramPriorTest, LargeAlphaApproachesUniform) {
  const std::vector<TokenSequence> corpus{{0, 0, 0, 1, 2, 0}};
  const auto prior = NgramPrior::Train(corpus, 4, 1, 1e6);
  for (const double lp : prior.NextTokenLogProbs(TokenSequence{3})) {
    EXPECT_NEAR(std::exp(lp), 0.25, 0.01 * 0.25);
  }
}

TEST(NgramPriorTest, RejectsBadTraining) {
  const std::vector<TokenSequence> empty;
  EXPECT_THROW(NgramPrior::Train(empty, 4, 2, 1.0), InvalidArgumentError);
  const std::vector<TokenSequence> corpus{{0, 1}};
  EXPECT_THROW(NgramPrior::Train(corpus, 4, 0, 1.0), InvalidArgumentError);
  EXPECT_THROW(NgramPrior::Train(corpus, 4, 2, 0.0), InvalidArgumentError);
  EXPECT_THROW(NgramPrior::Train(corpus, 1, 2, 1.0), DataError);
}

TEST(NgramPriorTest, NormalizedPositiveAndDeterministic) {
  for (std::size_t order = 1; order <= 4; ++order) {
    std::vector<TokenSequence> corpus;
    for (uint64_t s = 0; s < 30; ++s) corpus.push_back(RandomSequence(20, 25, s));
    const auto prior = NgramPrior::Train(corpus, 25, order, 0.01);
    for (uint64_t s = 0; s < 50; ++s) {
      const auto context = RandomSequence(s % 6, 25, 1000 + s);
      const auto lp = prior.NextTokenLogProbs(context);
      ExpectNormalized(lp);
      for (const double v : lp) EXPECT_GT(std::exp(v), 0.0);
      EXPECT_EQ(lp, prior.NextTokenLogProbs(context));
    }
  }
}

TEST(NgramPriorTest, SaveLoadPreservesDistribution) {
  std::vector<TokenSequence> corpus;
  for (uint64_t s = 0; s < 10; ++s) corpus.push_back(RandomSequence(12, 9, s));
  const auto prior = NgramPrior::Train(corpus, 9, 3, 0.2);
  const auto path = TempPath("prior.json");
  prior.Save(path);
  const auto loaded = NgramPrior::Load(path);
  EXPECT_EQ(loaded.order(), 3u);
  EXPECT_EQ(loaded.alpha(), 0.2);
  for (uint64_t s = 0; s < 20; ++s) {
    const auto context = RandomSequence(s % 4, 9, 50 + s);
    EXPECT_EQ(loaded.NextTokenLogProbs(context), prior.NextTokenLogProbs(context));
  }
}

TEST(TokenMapTest, IdenticalTablesGiveIdentity) {
  const auto table = TableWithTokens({"a", "b", "c", "d"}, 3, 1);
  const auto map = BuildTokenMap(table, table);
  EXPECT_EQ(map.mapped_count(), 4u);
  for (TokenId id = 0; id < 4; ++id) EXPECT_THAT(map.src_to_dst[id], Optional(id));
}

TEST(TokenMapTest, DisjointVocabulariesGiveEmptyMap) {
  const auto src = TableWithTokens({"a", "b"}, 3, 1);
  const auto dst = TableWithTokens({"c", "d"}, 3, 2);
  const auto map = BuildTokenMap(src, dst);
  EXPECT_EQ(map.mapped_count(), 0u);
  EXPECT_THAT(map.unmapped_src, ElementsAre(0, 1));
}

TEST(TokenMapTest, StringIntersection) {
  const auto src = TableWithTokens({"a", "b"}, 3, 1);
  const auto dst = TableWithTokens({"b", "c"}, 3, 2);
  const auto map = BuildTokenMap(src, dst);
  EXPECT_EQ(map.mapped_count(), 1u);
  EXPECT_FALSE(map.src_to_dst[0].has_value());
  EXPECT_THAT(map.src_to_dst[1], Optional(0u));
}

TEST(TokenMapTest, RestrictionIntersectsAllowSet) {
  const auto src = TableWithTokens({"a", "b", "c"}, 3, 1);
  const auto dst = TableWithTokens({"c", "b", "a"}, 3, 2);
  const std::vector<std::string> allowed{"a", "c", "zzz"};
  const auto map = BuildTokenMap(src, dst, &allowed);
  EXPECT_TRUE(map.restricted);
  EXPECT_THAT(map.src_to_dst[0], Optional(2u));
  EXPECT_FALSE(map.src_to_dst[1].has_value());
  EXPECT_THAT(map.src_to_dst[2], Optional(0u));
}

TEST(TokenMapTest, IsInjective) {
  std::vector<std::string> src_tokens;
  std::vector<std::string> dst_tokens;
  for (int i = 0; i < 200; ++i) src_tokens.push_back("w" + std::to_string(i * 3 % 211));
  for (int i = 0; i < 150; ++i) dst_tokens.push_back("w" + std::to_string(i * 7 % 157));
  const auto map = BuildTokenMap(TableWithTokens(src_tokens, 2, 1),
                                 TableWithTokens(dst_tokens, 2, 2));
  std::set<TokenId> targets;
  for (const auto& target : map.src_to_dst) {
    if (!target) continue;
    EXPECT_LT(*target, 150u);
    EXPECT_TRUE(targets.insert(*target).second) << "dst id hit twice: " << *target;
  }
  EXPECT_GT(targets.size(), 0u);
}

TEST(TranslateContextTest, DropsUnmappedPositions) {
  const auto src = TableWithTokens({"a", "b"}, 3, 1);
  const auto full = BuildTokenMap(src, src);
  const auto lossless = TranslateContext(full, TokenSequence{1, 0, 1});
  EXPECT_THAT(lossless.ids, ElementsAre(1, 0, 1));
  EXPECT_EQ(lossless.dropped, 0u);

  const auto empty = BuildTokenMap(src, TableWithTokens({"x", "y"}, 3, 2));
  const auto none = TranslateContext(empty, TokenSequence{0, 1, 1});
  EXPECT_TRUE(none.ids.empty());
  EXPECT_EQ(none.dropped, 3u);

  const auto partial = BuildTokenMap(src, TableWithTokens({"b", "c"}, 3, 2));
  const auto one = TranslateContext(partial, TokenSequence{0, 1});
  EXPECT_THAT(one.ids, ElementsAre(0));
  EXPECT_EQ(one.dropped, 1u);
}

TEST(MappedPriorTest, NormalizedOverSourceVocabulary) {
  const auto src = TableWithTokens({"a", "b", "c", "d"}, 3, 1);
  const auto dst = TableWithTokens({"c", "b", "e"}, 3, 2);
  std::vector<TokenSequence> corpus{{0, 1, 2, 1, 0}, {2, 2, 1}};
  auto inner = std::make_shared<NgramPrior>(NgramPrior::Train(corpus, 3, 2, 0.1));
  MappedPrior mapped(inner, BuildTokenMap(src, dst));
  EXPECT_EQ(mapped.vocab_size(), 4u);
  for (const auto& context : {TokenSequence{}, TokenSequence{2}, TokenSequence{0, 3, 1}}) {
    const auto lp = mapped.NextTokenLogProbs(context);
    ExpectNormalized(lp);
    for (const double v : lp) EXPECT_GT(std::exp(v), 0.0);
  }
  // With "a" and "d" unmapped the context {c} translates to dst {0}.
  const auto lp = mapped.NextTokenLogProbs(TokenSequence{0, 2});
  const auto inner_lp = inner->NextTokenLogProbs(TokenSequence{0});
  // Relative odds between mapped tokens are those of the inner prior.
  EXPECT_NEAR(lp[2] - lp[1], inner_lp[0] - inner_lp[1], 1e-12);
}

TEST(MappedPriorTest, RejectsVocabularyMismatch) {
  const auto src = TableWithTokens({"a", "b"}, 3, 1);
  auto inner = std::make_shared<UniformPrior>(5);
  EXPECT_THROW(MappedPrior(inner, BuildTokenMap(src, src)), InvalidArgumentError);
}

}  // namespace
}  // namespace embinv
