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

#ifndef SASV_METRICS_HPP_
#define SASV_METRICS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sasv/core_model.hpp"
#include "sasv/error.hpp"

namespace sasv {

// All metrics use one decision rule: a trial is accepted iff score >= tau.
// Candidate thresholds are the distinct observed scores, ascending, followed
// by +inf. Any tau at or below the smallest score gives the same error rates
// as the smallest score itself, so -inf is not enumerated separately.

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

struct ErrorRatePoint {
  double threshold = 0.0;
  double p_miss = 0.0;
  double p_fa_nontarget = 0.0;
  double p_fa_spoof = 0.0;
};

struct ADcfConfig {
  double c_miss = 1.0;
  double c_fa_nontarget = 10.0;
  double c_fa_spoof = 10.0;
  double pi_target = 0.9405;
  double pi_nontarget = 0.0095;
  double pi_spoof = 0.05;

  void Validate() const {
    if (!(c_miss > 0.0) || !(c_fa_nontarget > 0.0) || !(c_fa_spoof > 0.0))
      throw Error(ErrorKind::kBadConfig, "a-DCF costs must be positive");
    if (!(pi_target > 0.0) || !(pi_nontarget > 0.0) || !(pi_spoof > 0.0))
      throw Error(ErrorKind::kBadConfig, "a-DCF priors must be positive");
    if (std::abs(pi_target + pi_nontarget + pi_spoof - 1.0) > 1e-9)
      throw Error(ErrorKind::kBadConfig, "a-DCF priors must sum to 1");
  }

  /// Cost of the better of the accept-all and reject-all systems.
  double DummyCost() const {
    return std::min(c_miss * pi_target, c_fa_nontarget * pi_nontarget + c_fa_spoof * pi_spoof);
  }
};

struct ADcfResult {
  double min_a_dcf = 0.0;
  double threshold = 0.0;
  double normalized = 0.0;
};

namespace detail {

/// Per-candidate counts of scores strictly below the threshold, per class.
struct SweepStep {
  double threshold;
  std::array<std::int64_t, 3> below;
};

template <std::size_t N>
std::vector<SweepStep> Sweep(const std::array<std::span<const double>, N>& classes) {
  static_assert(N <= 3);
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t c = 0; c < N; ++c)
    for (double s : classes[c]) all.emplace_back(s, c);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<SweepStep> steps;
  std::array<std::int64_t, 3> below{0, 0, 0};
  std::size_t i = 0;
  while (i < all.size()) {
    const double tau = all[i].first;
    steps.push_back({tau, below});
    while (i < all.size() && all[i].first == tau) ++below[all[i++].second];
  }
  steps.push_back({std::numeric_limits<double>::infinity(), below});
  return steps;
}

inline void RequireNonEmpty(std::span<const double> xs, const char* what) {
  if (xs.empty()) throw Error(ErrorKind::kEmptyClass, std::string("no ") + what + " scores");
}

}  // namespace detail

/// Equal error rate between a positive and a negative score list. Picks the
/// candidate threshold with the smallest |FRR - FAR| (lowest threshold on
/// ties) and reports (FRR + FAR) / 2 there.
inline EerResult ComputeEer(std::span<const double> positive, std::span<const double> negative) {
  detail::RequireNonEmpty(positive, "positive");
  detail::RequireNonEmpty(negative, "negative");
  const std::int64_t np = static_cast<std::int64_t>(positive.size());
  const std::int64_t nn = static_cast<std::int64_t>(negative.size());
  auto steps = detail::Sweep<2>({positive, negative});

  // |FRR - FAR| compared exactly as |miss * nn - fa * np| over a shared denominator.
  std::int64_t best_gap = std::numeric_limits<std::int64_t>::max();
  EerResult best;
  for (const auto& st : steps) {
    const std::int64_t miss = st.below[0];
    const std::int64_t fa = nn - st.below[1];
    const std::int64_t gap = std::abs(miss * nn - fa * np);
    if (gap < best_gap) {
      best_gap = gap;
      const double frr = static_cast<double>(miss) / static_cast<double>(np);
      const double far = static_cast<double>(fa) / static_cast<double>(nn);
      best = {0.5 * (frr + far), st.threshold};
    }
  }
  return best;
}

/// Target vs nontarget EER; spoof trials are excluded.
inline EerResult SvEer(const ScoreSet& scores) {
  auto p = PartitionScores(scores);
  detail::RequireNonEmpty(p.target, "target");
  detail::RequireNonEmpty(p.nontarget, "nontarget");
  return ComputeEer(p.target, p.nontarget);
}

/// Target vs spoof EER; nontarget trials are excluded.
inline EerResult SpfEer(const ScoreSet& scores) {
  auto p = PartitionScores(scores);
  detail::RequireNonEmpty(p.target, "target");
  detail::RequireNonEmpty(p.spoof, "spoof");
  return ComputeEer(p.target, p.spoof);
}

inline std::vector<ErrorRatePoint> DetPoints(std::span<const double> target,
                                             std::span<const double> nontarget,
                                             std::span<const double> spoof) {
  detail::RequireNonEmpty(target, "target");
  detail::RequireNonEmpty(nontarget, "nontarget");
  detail::RequireNonEmpty(spoof, "spoof");
  const double nt = static_cast<double>(target.size());
  const double nn = static_cast<double>(nontarget.size());
  const double ns = static_cast<double>(spoof.size());
  std::vector<ErrorRatePoint> out;
  for (const auto& st : detail::Sweep<3>({target, nontarget, spoof})) {
    out.push_back({st.threshold, static_cast<double>(st.below[0]) / nt,
                   (nn - static_cast<double>(st.below[1])) / nn,
                   (ns - static_cast<double>(st.below[2])) / ns});
  }
  return out;
}

inline std::vector<ErrorRatePoint> DetPoints(const ScoreSet& scores) {
  auto p = PartitionScores(scores);
  return DetPoints(p.target, p.nontarget, p.spoof);
}

inline double ADcfAt(const ErrorRatePoint& pt, const ADcfConfig& cfg) {
  return cfg.c_miss * cfg.pi_target * pt.p_miss +
         cfg.c_fa_nontarget * cfg.pi_nontarget * pt.p_fa_nontarget +
         cfg.c_fa_spoof * cfg.pi_spoof * pt.p_fa_spoof;
}

/// Minimum architecture-agnostic detection cost over all candidate
/// thresholds (lowest threshold on ties), plus its value normalized by the
/// best dummy system's cost.
inline ADcfResult MinADcf(std::span<const double> target, std::span<const double> nontarget,
                          std::span<const double> spoof, const ADcfConfig& cfg = {}) {
  cfg.Validate();
  ADcfResult best{std::numeric_limits<double>::infinity(), 0.0, 0.0};
  for (const auto& pt : DetPoints(target, nontarget, spoof)) {
    const double cost = ADcfAt(pt, cfg);
    if (cost < best.min_a_dcf) best = {cost, pt.threshold, 0.0};
  }
  best.normalized = best.min_a_dcf / cfg.DummyCost();
  return best;
}

inline ADcfResult MinADcf(const ScoreSet& scores, const ADcfConfig& cfg = {}) {
  auto p = PartitionScores(scores);
  return MinADcf(p.target, p.nontarget, p.spoof, cfg);
}

}  // namespace sasv

#endif  // SASV_METRICS_HPP_
