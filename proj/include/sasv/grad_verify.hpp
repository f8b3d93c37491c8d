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

#ifndef SASV_GRAD_VERIFY_HPP_
#define SASV_GRAD_VERIFY_HPP_

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "sasv/grad_check.hpp"
#include "sasv/losses.hpp"
#include "sasv/random.hpp"

namespace sasv {

// Finite-difference checks of the loss kernels. The numeric side only ever
// evaluates loss values; circle weights are frozen at the base point.

/// B x D embeddings and C x D class weights with standard normal entries.
/// Labels cycle through the classes so every class appears when B >= C.
inline LossBatch RandomLossBatch(Rng& rng, std::size_t b, std::size_t c, std::size_t d) {
  LossBatch batch{Matrix(b, d), Matrix(c, d), std::vector<int>(b)};
  for (double& v : batch.embeddings.flat()) v = rng.normal();
  for (double& v : batch.class_weights.flat()) v = rng.normal();
  for (std::size_t i = 0; i < b; ++i) batch.labels[i] = static_cast<int>(i % c);
  return batch;
}

inline GradCheckReport CheckSphereFaceGradients(const LossBatch& batch, const SphereFaceConfig& cfg,
                                                const GradCheckOptions& opts = {}) {
  const auto point = FlattenParams(batch);
  const auto analytic = FlattenGrad(SphereFaceLoss(batch, cfg));
  const auto singular = SphereFaceSingularCoordinates(batch);
  return GradCheck(
      [&](std::span<const double> x) { return SphereFaceLoss(WithParams(batch, x), cfg).loss; },
      point, analytic, opts, singular);
}

/// Coordinates are [s_p..., s_n...]; pairs whose weight is within 1e-3 of
/// the hinge are excluded.
inline GradCheckReport CheckCircleGradients(const PairSet& pairs, const CircleConfig& cfg,
                                            const GradCheckOptions& opts = {}) {
  const CircleWeights w = ComputeCircleWeights(pairs, cfg);
  const CircleResult r = CircleLossWithWeights(pairs, w, cfg);
  const std::size_t np = pairs.s_p.size();
  std::vector<double> point(pairs.s_p), analytic(r.grad_sp);
  point.insert(point.end(), pairs.s_n.begin(), pairs.s_n.end());
  analytic.insert(analytic.end(), r.grad_sn.begin(), r.grad_sn.end());
  std::vector<std::size_t> hinge;
  for (std::size_t i = 0; i < np; ++i)
    if (w.alpha_p[i] <= 1e-3) hinge.push_back(i);
  for (std::size_t i = 0; i < pairs.s_n.size(); ++i)
    if (w.alpha_n[i] <= 1e-3) hinge.push_back(np + i);
  return GradCheck(
      [&](std::span<const double> x) {
        PairSet q = pairs;
        std::copy_n(x.begin(), np, q.s_p.begin());
        std::copy(x.begin() + static_cast<std::ptrdiff_t>(np), x.end(), q.s_n.begin());
        return CircleLossWithWeights(q, w, cfg).loss;
      },
      point, analytic, opts, hinge);
}

inline GradCheckReport CheckCombinedGradients(const LossBatch& batch, const SphereFaceConfig& sf,
                                              const CircleConfig& cc,
                                              const GradCheckOptions& opts = {}) {
  const CircleWeights w = ComputeCircleWeights(MinePairs(batch.embeddings, batch.labels), cc);
  const auto point = FlattenParams(batch);
  const auto analytic = FlattenGrad(CombinedLoss(batch, sf, cc, w));
  const auto singular = SphereFaceSingularCoordinates(batch);
  return GradCheck(
      [&](std::span<const double> x) {
        const LossBatch moved = WithParams(batch, x);
        const PairSet pairs = MinePairs(moved.embeddings, moved.labels);
        return SphereFaceLoss(moved, sf).loss + cc.weight * CircleLossWithWeights(pairs, w, cc).loss;
      },
      point, analytic, opts, singular);
}

}  // namespace sasv

#endif  // SASV_GRAD_VERIFY_HPP_
