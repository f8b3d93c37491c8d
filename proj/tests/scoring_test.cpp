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
#include <numeric>
#include <unordered_map>

#include "gtest/gtest.h"
#include "sasv/random.hpp"
#include "sasv/scoring.hpp"

namespace sasv {
namespace {

Embedding RandomEmbedding(Rng& rng, const std::string& id, std::size_t d) {
  std::vector<float> v(d);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return Embedding(id, v);
}

EmbeddingSet RandomSet(Rng& rng, const std::string& prefix, std::size_t n, std::size_t d) {
  EmbeddingSet s(d);
  for (std::size_t i = 0; i < n; ++i) s.add(RandomEmbedding(rng, prefix + std::to_string(i), d));
  return s;
}

TEST(CosineTest, Examples) {
  const std::vector<double> a{3, 4};
  EXPECT_DOUBLE_EQ(Cosine(a, a), 1.0);
  EXPECT_EQ(Cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
  EXPECT_NEAR(Cosine(std::vector<double>{1, 2, 2}, std::vector<double>{2, 1, 2}), 8.0 / 9.0, 1e-15);
}

TEST(CosineTest, Errors) {
  try {
    Cosine(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimensionMismatch);
  }
  try {
    Cosine(std::vector<double>{0, 0}, std::vector<double>{1, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kZeroNorm);
  }
}

TEST(CosineTest, ClampedAndScaleInvariant) {
  Rng rng(1);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> a(7), b(7);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal();
    const double la = 0.01 + 100 * rng.uniform(), lb = 0.01 + 100 * rng.uniform();
    std::vector<double> sa = a, sb = b;
    for (auto& x : sa) x *= la;
    for (auto& x : sb) x *= lb;
    const double c = Cosine(a, b);
    EXPECT_LE(std::abs(c), 1.0);
    EXPECT_NEAR(c, Cosine(sa, sb), 1e-12);
    EXPECT_LE(Cosine(a, a), 1.0);
  }
}

TEST(TopKCohortTest, SelectsLargestDescending) {
  const Embedding probe("p", {1.0f, 0.0f});
  EmbeddingSet cohort;
  for (double c : {0.1, 0.5, 0.3})
    cohort.add(Embedding("c" + std::to_string(c), {static_cast<float>(c),
                                                   static_cast<float>(std::sqrt(1 - c * c))}));
  auto top = TopKCohortScores(probe, cohort, 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_NEAR(top[0], 0.5, 1e-7);
  EXPECT_NEAR(top[1], 0.3, 1e-7);
  EXPECT_EQ(TopKCohortScores(probe, cohort, 10).size(), 3u);
  try {
    TopKCohortScores(probe, EmbeddingSet(2), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEmptyCohort);
  }
}

TEST(TopKCohortTest, MatchesSortAllOracle) {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto cohort = RandomSet(rng, "c", 50, 8);
    const auto probe = RandomEmbedding(rng, "p", 8);
    const std::size_t k = 1 + rng.below(60);
    std::vector<double> all;
    for (const auto& c : cohort) all.push_back(Cosine(probe, c));
    std::vector<double> sorted = all;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    sorted.resize(std::min<std::size_t>(k, sorted.size()));
    const auto top = TopKCohortScores(probe, cohort, k);
    EXPECT_EQ(top, sorted);
    EXPECT_TRUE(std::is_sorted(top.begin(), top.end(), std::greater<>()));
    // multiset subset of all scores
    std::vector<double> pool = all;
    for (double x : top) {
      auto it = std::find(pool.begin(), pool.end(), x);
      ASSERT_NE(it, pool.end());
      pool.erase(it);
    }
  }
}

TEST(CohortStatsTest, Examples) {
  const std::vector<double> a{0.1, 0.3};
  auto s = ComputeCohortStats(a);
  EXPECT_NEAR(s.mu, 0.2, 1e-15);
  EXPECT_NEAR(s.sigma, 0.1, 1e-15);
  EXPECT_EQ(s.k_used, 2u);

  const std::vector<double> flat{0.7, 0.7, 0.7};
  s = ComputeCohortStats(flat, 1e-8);
  EXPECT_DOUBLE_EQ(s.mu, 0.7);
  EXPECT_EQ(s.sigma, 1e-8);

  const std::vector<double> pm{-1.0, 1.0};
  s = ComputeCohortStats(pm);
  EXPECT_EQ(s.mu, 0.0);
  EXPECT_EQ(s.sigma, 1.0);

  try {
    ComputeCohortStats(std::vector<double>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEmptyList);
  }
}

TEST(AsNormTest, Examples) {
  EXPECT_DOUBLE_EQ(AsNorm(0.5, {0.2, 0.1, 2}, {0.2, 0.2, 2}), 2.25);
  EXPECT_EQ(AsNorm(0.5, {0.0, 1.0, 1}, {0.0, 1.0, 1}), 0.5);
  const CohortStats m{0.3, 0.05, 4};
  EXPECT_NEAR(AsNorm(0.9, m, m), (0.9 - 0.3) / 0.05, 1e-12);
}

TEST(AsNormTest, HandExampleFromCohortScores) {
  const std::vector<double> ce{0.1, 0.3}, ct{0.0, 0.4};
  EXPECT_EQ(AsNorm(0.5, ComputeCohortStats(ce), ComputeCohortStats(ct)), 2.25);
}

TEST(AsNormTest, JointAffineInvariance) {
  Rng rng(3);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> ce(2 + rng.below(29)), ct(2 + rng.below(29));
    for (auto& x : ce) x = rng.normal();
    for (auto& x : ct) x = rng.normal();
    const double raw = rng.normal();
    const double alpha = 0.1 + 10 * rng.uniform(), beta = 5 * rng.normal();
    auto tf = [&](std::vector<double> v) {
      for (auto& x : v) x = alpha * x + beta;
      return v;
    };
    const double base = AsNorm(raw, ComputeCohortStats(ce, 1e-300), ComputeCohortStats(ct, 1e-300));
    const double moved = AsNorm(alpha * raw + beta, ComputeCohortStats(tf(ce), 1e-300),
                                ComputeCohortStats(tf(ct), 1e-300));
    EXPECT_NEAR(base, moved, 1e-9 * std::max(1.0, std::abs(base)));
  }
}

TEST(ScoreTrialsTest, RawCosineWithoutCohort) {
  EmbeddingSet e;
  e.add(Embedding("a", {1, 2, 2}));
  e.add(Embedding("b", {2, 1, 2}));
  const std::vector<Trial> trials{Trial("a", "b", TrialLabel::kTarget)};
  const auto s = ScoreTrials(trials, e, nullptr);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_NEAR(s[0].score, 8.0 / 9.0, 1e-12);
  EXPECT_EQ(s[0].trial.label, TrialLabel::kTarget);
}

TEST(ScoreTrialsTest, CohortMatchesManualComposition) {
  Rng rng(4);
  const auto emb = RandomSet(rng, "u", 12, 6);
  const auto cohort = RandomSet(rng, "c", 25, 6);
  std::vector<Trial> trials;
  for (int i = 0; i < 10; ++i)
    trials.emplace_back("u" + std::to_string(i), "u" + std::to_string((i * 7 + 3) % 12));
  const AsNormConfig cfg{5, 1e-8};
  const auto s = ScoreTrials(trials, emb, &cohort, cfg);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& a = emb.at(trials[i].enroll_id);
    const auto& b = emb.at(trials[i].test_id);
    const double expect = AsNorm(Cosine(a, b), ComputeCohortStats(TopKCohortScores(a, cohort, 5)),
                                 ComputeCohortStats(TopKCohortScores(b, cohort, 5)));
    EXPECT_EQ(s[i].score, expect);
  }
}

TEST(ScoreTrialsTest, MissingEmbeddingNamesId) {
  EmbeddingSet e;
  e.add(Embedding("a", {1, 0}));
  const std::vector<Trial> trials{Trial("a", "spk9-utt3")};
  try {
    ScoreTrials(trials, e, nullptr);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::kMissingEmbedding);
    EXPECT_NE(std::string(err.what()).find("spk9-utt3"), std::string::npos);
  }
}

ScoreSet OneTrial(double v) {
  ScoreSet s;
  s.add(Trial("e", "t", TrialLabel::kTarget), v);
  return s;
}

TEST(CascadeTest, Examples) {
  const CascadeConfig cfg{0.5, -5.0};
  EXPECT_EQ(Cascade(OneTrial(0.1), OneTrial(2.25), cfg)[0].score, -5.0);
  EXPECT_EQ(Cascade(OneTrial(0.9), OneTrial(2.25), cfg)[0].score, 2.25);
  EXPECT_EQ(Cascade(OneTrial(0.5), OneTrial(2.25), cfg)[0].score, 2.25);
}

TEST(CascadeTest, MismatchListsTrials) {
  ScoreSet sd = OneTrial(0.9);
  ScoreSet asv;
  asv.add(Trial("e", "x"), 1.0);
  try {
    Cascade(sd, asv, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTrialMismatch);
    EXPECT_NE(std::string(e.what()).find("(e, t)"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("(e, x)"), std::string::npos);
  }
}

TEST(CascadeTest, RejectsExactlyBelowThreshold) {
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    std::vector<Trial> trials;
    std::unordered_map<std::string, double> sd_by_utt;
    for (int u = 0; u < 10; ++u) sd_by_utt["t" + std::to_string(u)] = rng.normal();
    ScoreSet asv;
    for (int i = 0; i < 30; ++i) {
      trials.emplace_back("e" + std::to_string(i), "t" + std::to_string(i % 10), TrialLabel::kTarget);
      asv.add(trials.back(), 3 * rng.normal());
    }
    const ScoreSet sd = ExpandUtteranceScores(trials, sd_by_utt);
    const CascadeConfig cfg{0.3 * rng.normal(), -5.0};
    const ScoreSet out = Cascade(sd, asv, cfg);
    ASSERT_EQ(out.size(), asv.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_EQ(out[i].trial, asv[i].trial);
      const bool spoof = sd_by_utt[asv[i].trial.test_id] < cfg.sd_threshold;
      EXPECT_EQ(out[i].score, spoof ? cfg.reject_score : asv[i].score);
    }
  }
}

TEST(EnsembleTest, Examples) {
  std::vector<ScoreSet> one{OneTrial(1.0)};
  EXPECT_EQ(Ensemble(one)[0].score, 1.0);
  std::vector<ScoreSet> two{OneTrial(1.0), OneTrial(3.0)};
  EXPECT_EQ(Ensemble(two)[0].score, 2.0);
  std::vector<ScoreSet> w{OneTrial(0.0), OneTrial(4.0)};
  const std::vector<double> weights{1, 3};
  EXPECT_DOUBLE_EQ(Ensemble(w, weights)[0].score, 3.0);
}

TEST(EnsembleTest, Errors) {
  std::vector<ScoreSet> two{OneTrial(1.0), OneTrial(3.0)};
  for (auto bad : {std::vector<double>{1}, std::vector<double>{0, 0}, std::vector<double>{1, -1}}) {
    try {
      Ensemble(two, bad);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kBadWeights);
    }
  }
  ScoreSet other;
  other.add(Trial("x", "y"), 1.0);
  std::vector<ScoreSet> mismatched{OneTrial(1.0), other};
  try {
    Ensemble(mismatched);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTrialMismatch);
  }
}

TEST(EnsembleTest, IdentityAndPermutationInvariance) {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n_sets = 1 + rng.below(4);
    std::vector<ScoreSet> sets(n_sets);
    std::vector<double> weights(n_sets);
    for (std::size_t k = 0; k < n_sets; ++k) {
      weights[k] = 0.1 + rng.uniform();
      for (int i = 0; i < 20; ++i) sets[k].add(Trial("e" + std::to_string(i), "t"), rng.normal());
    }
    std::vector<ScoreSet> single{sets[0]};
    EXPECT_EQ(Ensemble(single), sets[0]);

    const auto base = Ensemble(sets, weights);
    std::vector<std::size_t> perm(n_sets);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span(perm));
    std::vector<ScoreSet> psets;
    std::vector<double> pw;
    for (auto k : perm) {
      psets.push_back(sets[k]);
      pw.push_back(weights[k]);
    }
    const auto moved = Ensemble(psets, pw);
    for (const auto& r : base)
      EXPECT_NEAR(moved[*moved.find(r.trial.enroll_id, r.trial.test_id)].score, r.score, 1e-12);
  }
}

}  // namespace
}  // namespace sasv
