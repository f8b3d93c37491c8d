// Copyright 2026 The sasvkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <limits>

#include "gtest/gtest.h"
#include "sasv/core_model.hpp"
#include "sasv/random.hpp"

namespace sasv {
namespace {

ErrorKind KindOf(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kParse;
}

TEST(EmbeddingTest, RejectsAnyNaNComponent) {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t d = 1 + rng.below(64);
    std::vector<float> v(d);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    v[rng.below(d)] = std::numeric_limits<float>::quiet_NaN();
    EXPECT_EQ(KindOf([&] { Embedding("u", v); }), ErrorKind::kNonFinite);
  }
}

TEST(EmbeddingTest, RejectsInfZeroAndEmpty) {
  EXPECT_EQ(KindOf([] { Embedding("u", {1.0f, std::numeric_limits<float>::infinity()}); }),
            ErrorKind::kNonFinite);
  EXPECT_EQ(KindOf([] { Embedding("u", {0.0f, 0.0f}); }), ErrorKind::kZeroNorm);
  EXPECT_EQ(KindOf([] { Embedding("", {1.0f}); }), ErrorKind::kEmptyId);
  EXPECT_EQ(KindOf([] { Embedding("u", {}); }), ErrorKind::kDimensionMismatch);
}

TEST(EmbeddingSetTest, ExactLookupAndDuplicates) {
  EmbeddingSet set;
  set.add(Embedding("spk1/utt1.wav", {1.0f, 0.0f}));
  set.add(Embedding("SPK1/utt1.wav", {0.0f, 1.0f}));
  EXPECT_EQ(set.dim(), 2u);
  ASSERT_NE(set.find("spk1/utt1.wav"), nullptr);
  EXPECT_EQ(set.find("spk1/utt1.wav")->values()[0], 1.0f);
  EXPECT_EQ(set.find("spk1/utt1"), nullptr);
  EXPECT_EQ(set.find("spk1/utt1.wav "), nullptr);
  EXPECT_EQ(KindOf([&] { set.add(Embedding("spk1/utt1.wav", {1.0f, 1.0f})); }), ErrorKind::kDuplicateId);
  EXPECT_EQ(KindOf([&] { set.add(Embedding("x", {1.0f, 1.0f, 1.0f})); }), ErrorKind::kDimensionMismatch);
  EXPECT_EQ(KindOf([&] { set.at("nope"); }), ErrorKind::kMissingEmbedding);
  EXPECT_EQ(set.size(), 2u);
}

TEST(TrialLabelTest, ExactLowercaseTokensOnly) {
  EXPECT_EQ(ParseTrialLabel("target"), TrialLabel::kTarget);
  EXPECT_EQ(ParseTrialLabel("nontarget"), TrialLabel::kNontarget);
  EXPECT_EQ(ParseTrialLabel("spoof"), TrialLabel::kSpoof);
  EXPECT_FALSE(ParseTrialLabel("Target"));
  EXPECT_FALSE(ParseTrialLabel("non-target"));
  EXPECT_FALSE(ParseTrialLabel(""));
}

TEST(ScoreSetTest, UniquePairsFiniteScoresSelfTrialsAllowed) {
  ScoreSet s;
  s.add(Trial("a", "a", TrialLabel::kTarget), 1.0);
  s.add(Trial("a", "b", TrialLabel::kNontarget), 0.1);
  s.add(Trial("b", "a", TrialLabel::kNontarget), 0.2);
  EXPECT_EQ(KindOf([&] { s.add(Trial("a", "b"), 0.3); }), ErrorKind::kDuplicateId);
  EXPECT_EQ(KindOf([&] { s.add(Trial("c", "d"), std::nan("")); }), ErrorKind::kNonFinite);
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(s[*s.find("b", "a")].score, 0.2);
  EXPECT_EQ(KindOf([] { Trial("", "x"); }), ErrorKind::kEmptyId);
}

TEST(PartitionScoresTest, Examples) {
  ScoreSet s;
  s.add(Trial("e", "t1", TrialLabel::kTarget), 0.9);
  s.add(Trial("e", "t2", TrialLabel::kSpoof), -5.0);
  auto p = PartitionScores(s);
  EXPECT_EQ(p.target, std::vector<double>{0.9});
  EXPECT_TRUE(p.nontarget.empty());
  EXPECT_EQ(p.spoof, std::vector<double>{-5.0});

  auto empty = PartitionScores(ScoreSet{});
  EXPECT_TRUE(empty.target.empty() && empty.nontarget.empty() && empty.spoof.empty());
}

TEST(PartitionScoresTest, UnlabeledNamesTrial) {
  ScoreSet s;
  s.add(Trial("e", "t1", TrialLabel::kTarget), 0.9);
  s.add(Trial("e", "t2"), 0.1);
  try {
    PartitionScores(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUnlabeledTrial);
    EXPECT_NE(std::string(e.what()).find("(e, t2)"), std::string::npos);
  }
}

TEST(PartitionScoresTest, IsAPermutationOfRecords) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    ScoreSet s;
    const std::size_t n = rng.below(40);
    std::vector<std::pair<double, int>> in;
    for (std::size_t i = 0; i < n; ++i) {
      const int label = static_cast<int>(rng.below(3));
      const double score = rng.normal();
      s.add(Trial("e" + std::to_string(i), "t", static_cast<TrialLabel>(label)), score);
      in.emplace_back(score, label);
    }
    auto p = PartitionScores(s);
    std::vector<std::pair<double, int>> out;
    for (double x : p.target) out.emplace_back(x, 0);
    for (double x : p.nontarget) out.emplace_back(x, 1);
    for (double x : p.spoof) out.emplace_back(x, 2);
    ASSERT_EQ(out.size(), in.size());
    // order within a class is preserved
    std::vector<double> expect_target;
    for (auto& [x, l] : in)
      if (l == 0) expect_target.push_back(x);
    EXPECT_EQ(p.target, expect_target);
    std::sort(in.begin(), in.end());
    std::sort(out.begin(), out.end());
    EXPECT_EQ(in, out);
  }
}

}  // namespace
}  // namespace sasv
