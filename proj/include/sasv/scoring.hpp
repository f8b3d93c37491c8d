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

#ifndef SASV_SCORING_HPP_
#define SASV_SCORING_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <ranges>
#include <string>
#include <unordered_map>
#include <vector>

#include "sasv/core_model.hpp"
#include "sasv/error.hpp"

namespace sasv {

/// Cosine similarity in double precision, clamped to [-1, 1].
template <std::ranges::contiguous_range A, std::ranges::contiguous_range B>
double Cosine(const A& a, const B& b) {
  const auto n = std::ranges::size(a);
  if (n != std::ranges::size(b))
    throw Error(ErrorKind::kDimensionMismatch,
                "cosine of vectors with dimensions " + std::to_string(n) + " and " +
                    std::to_string(std::ranges::size(b)));
  const auto* pa = std::ranges::data(a);
  const auto* pb = std::ranges::data(b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(pa[i]);
    const double y = static_cast<double>(pb[i]);
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (!(na > 0.0) || !(nb > 0.0)) throw Error(ErrorKind::kZeroNorm, "cosine of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

inline double Cosine(const Embedding& a, const Embedding& b) {
  return Cosine(a.values(), b.values());
}

struct AsNormConfig {
  std::size_t top_k = 300;
  double min_sigma = 1e-8;

  void Validate() const {
    if (top_k < 1) throw Error(ErrorKind::kBadConfig, "AS-Norm top_k must be >= 1");
    if (!(min_sigma > 0.0)) throw Error(ErrorKind::kBadConfig, "AS-Norm min_sigma must be > 0");
  }
};

struct CohortStats {
  double mu = 0.0;
  double sigma = 1.0;
  std::size_t k_used = 1;
};

/// The min(top_k, |cohort|) largest probe-vs-cohort cosines, descending.
/// Equal scores keep cohort insertion order.
inline std::vector<double> TopKCohortScores(const Embedding& probe, const EmbeddingSet& cohort,
                                            std::size_t top_k) {
  if (cohort.empty()) throw Error(ErrorKind::kEmptyCohort, "imposter cohort is empty");
  std::vector<double> scores;
  scores.reserve(cohort.size());
  for (const auto& c : cohort) scores.push_back(Cosine(probe, c));
  std::stable_sort(scores.begin(), scores.end(), std::greater<>());
  scores.resize(std::min(top_k, scores.size()));
  return scores;
}

/// Mean and population (1/N) standard deviation, sigma floored at min_sigma.
inline CohortStats ComputeCohortStats(std::span<const double> scores, double min_sigma = 1e-8) {
  if (scores.empty()) throw Error(ErrorKind::kEmptyList, "cohort score list is empty");
  const double n = static_cast<double>(scores.size());
  const double mu = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : scores) ss += (s - mu) * (s - mu);
  double sigma = std::sqrt(ss / n);
  if (sigma < min_sigma) sigma = min_sigma;
  return {mu, sigma, scores.size()};
}

/// Symmetric score normalization: mean of the enroll-side and test-side
/// z-scores of the raw score.
inline double AsNorm(double raw, const CohortStats& enroll, const CohortStats& test) {
  return 0.5 * ((raw - enroll.mu) / enroll.sigma + (raw - test.mu) / test.sigma);
}

/// Cosine-scores every trial, AS-Norm'd against `cohort` when one is given.
/// Cohort stats are computed per utterance (once each) and the same cohort
/// serves both sides.
inline ScoreSet ScoreTrials(std::span<const Trial> trials, const EmbeddingSet& embeddings,
                            const EmbeddingSet* cohort, const AsNormConfig& cfg = {}) {
  cfg.Validate();
  if (cohort && cohort->empty()) throw Error(ErrorKind::kEmptyCohort, "imposter cohort is empty");
  if (cohort && cohort->dim() != embeddings.dim())
    throw Error(ErrorKind::kDimensionMismatch, "cohort dimension " + std::to_string(cohort->dim()) +
                                                   " != embedding dimension " +
                                                   std::to_string(embeddings.dim()));
  std::unordered_map<std::string, CohortStats> stats_cache;
  auto stats_for = [&](const Embedding& e) -> const CohortStats& {
    auto it = stats_cache.find(e.id());
    if (it != stats_cache.end()) return it->second;
    auto top = TopKCohortScores(e, *cohort, cfg.top_k);
    return stats_cache.emplace(e.id(), ComputeCohortStats(top, cfg.min_sigma)).first->second;
  };

  ScoreSet out;
  for (const auto& t : trials) {
    const Embedding& enroll = embeddings.at(t.enroll_id);
    const Embedding& test = embeddings.at(t.test_id);
    double score = Cosine(enroll, test);
    if (cohort) score = AsNorm(score, stats_for(enroll), stats_for(test));
    out.add(t, score);
  }
  return out;
}

namespace detail {

inline void RequireSameTrials(const ScoreSet& a, const ScoreSet& b, const char* what) {
  std::vector<std::string> diff;
  for (const auto& r : a)
    if (!b.find(r.trial.enroll_id, r.trial.test_id)) diff.push_back(r.trial.Describe());
  for (const auto& r : b)
    if (!a.find(r.trial.enroll_id, r.trial.test_id)) diff.push_back(r.trial.Describe());
  if (diff.empty()) return;
  std::string msg = std::string(what) + ": " + std::to_string(diff.size()) +
                    " trial(s) in only one set:";
  for (std::size_t i = 0; i < diff.size() && i < 10; ++i) msg += " " + diff[i];
  if (diff.size() > 10) msg += " ...";
  throw Error(ErrorKind::kTrialMismatch, msg);
}

}  // namespace detail

struct CascadeConfig {
  double sd_threshold = 0.5;
  double reject_score = -5.0;
};

/// Spoof-detector gate in front of the verifier. A trial whose SD score is
/// strictly below the threshold is rejected with `reject_score`; otherwise
/// the ASV score passes through. Output follows the order of `asv_scores`.
inline ScoreSet Cascade(const ScoreSet& sd_scores, const ScoreSet& asv_scores,
                        const CascadeConfig& cfg) {
  if (!std::isfinite(cfg.reject_score))
    throw Error(ErrorKind::kBadConfig, "reject score must be finite");
  detail::RequireSameTrials(sd_scores, asv_scores, "cascade");
  ScoreSet out;
  for (const auto& r : asv_scores) {
    const double sd = sd_scores[*sd_scores.find(r.trial.enroll_id, r.trial.test_id)].score;
    out.add(r.trial, sd < cfg.sd_threshold ? cfg.reject_score : r.score);
  }
  return out;
}

/// Expands per-test-utterance SD scores to a per-trial ScoreSet.
inline ScoreSet ExpandUtteranceScores(std::span<const Trial> trials,
                                      const std::unordered_map<std::string, double>& by_test_id) {
  ScoreSet out;
  for (const auto& t : trials) {
    auto it = by_test_id.find(t.test_id);
    if (it == by_test_id.end())
      throw Error(ErrorKind::kMissingEmbedding, "no SD score for test utterance '" + t.test_id + "'");
    out.add(t, it->second);
  }
  return out;
}

/// Weighted mean of several systems' scores over an identical trial set.
/// Inputs should already be on comparable scales (e.g. AS-Norm'd).
inline ScoreSet Ensemble(std::span<const ScoreSet> sets, std::span<const double> weights = {}) {
  if (sets.empty()) throw Error(ErrorKind::kBadWeights, "ensemble needs at least one score set");
  std::vector<double> w(weights.begin(), weights.end());
  if (w.empty()) w.assign(sets.size(), 1.0);
  if (w.size() != sets.size())
    throw Error(ErrorKind::kBadWeights, std::to_string(w.size()) + " weights for " +
                                            std::to_string(sets.size()) + " score sets");
  double total = 0.0;
  for (double x : w) {
    if (!std::isfinite(x)) throw Error(ErrorKind::kBadWeights, "non-finite weight");
    total += x;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::kBadWeights, "weights must sum to a positive value");
  for (std::size_t i = 1; i < sets.size(); ++i)
    detail::RequireSameTrials(sets[0], sets[i], "ensemble");

  ScoreSet out;
  for (const auto& r : sets[0]) {
    double acc = 0.0;
    for (std::size_t i = 0; i < sets.size(); ++i)
      acc += w[i] * sets[i][*sets[i].find(r.trial.enroll_id, r.trial.test_id)].score;
    out.add(r.trial, acc / total);
  }
  return out;
}

}  // namespace sasv

#endif  // SASV_SCORING_HPP_
