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

#ifndef SASV_MOE_FUSION_HPP_
#define SASV_MOE_FUSION_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sasv/error.hpp"
#include "sasv/matrix.hpp"
#include "sasv/random.hpp"

namespace sasv {

/// One utterance-level embedding per layer, ordered by depth; the last row
/// is the final layer.
struct LayerStack {
  Matrix layers;  // L x D

  std::size_t num_layers() const { return layers.rows(); }
  std::size_t dim() const { return layers.cols(); }
  std::span<const double> final_layer() const { return layers.row(layers.rows() - 1); }
};

/// Linear gate over the final-layer embedding producing one logit per
/// non-final layer.
struct GateParams {
  Matrix weight;  // (L-1) x D
  std::vector<double> bias;
  std::size_t top_k = 3;
  bool unweighted = false;  // sum the selected layers without gate weights

  std::size_t num_experts() const { return weight.rows(); }
};

inline GateParams RandomGateParams(std::size_t num_layers, std::size_t dim, std::uint64_t seed,
                                   double scale = 0.1, std::size_t top_k = 3) {
  if (num_layers < 2) throw Error(ErrorKind::kBadParams, "need at least 2 layers");
  Rng rng(seed);
  GateParams g{Matrix(num_layers - 1, dim), std::vector<double>(num_layers - 1), top_k, false};
  for (double& v : g.weight.flat()) v = scale * rng.normal();
  for (double& v : g.bias) v = scale * rng.normal();
  return g;
}

inline std::vector<double> GateProbs(std::span<const double> final_emb, const GateParams& params) {
  const std::size_t e = params.num_experts();
  if (params.weight.cols() != final_emb.size())
    throw Error(ErrorKind::kDimensionMismatch,
                "gate expects dimension " + std::to_string(params.weight.cols()) + ", got " +
                    std::to_string(final_emb.size()));
  if (params.bias.size() != e)
    throw Error(ErrorKind::kDimensionMismatch, "gate bias length != number of experts");
  if (e == 0) throw Error(ErrorKind::kDimensionMismatch, "gate has no experts");
  std::vector<double> logits(e);
  for (std::size_t i = 0; i < e; ++i) logits[i] = Dot(params.weight.row(i), final_emb) + params.bias[i];
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) total += (l = std::exp(l - mx));
  for (double& l : logits) l /= total;
  return logits;
}

/// Keeps the k largest probabilities (lower index wins ties), renormalized to
/// sum to 1; all other entries are exactly 0.
inline std::vector<double> TopKMask(std::span<const double> probs, std::size_t k) {
  if (k < 1 || k > probs.size())
    throw Error(ErrorKind::kBadK, "k=" + std::to_string(k) + " for " +
                                      std::to_string(probs.size()) + " experts");
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  double kept = 0.0;
  for (std::size_t i = 0; i < k; ++i) kept += probs[order[i]];
  std::vector<double> out(probs.size(), 0.0);
  for (std::size_t i = 0; i < k; ++i) out[order[i]] = probs[order[i]] / kept;
  return out;
}

struct FusionResult {
  std::vector<double> fused;
  std::vector<double> mask;  // sparse renormalized gate weights over non-final layers
};

/// fused = e_final + sum over selected layers of w_i * e_i. Unselected layers
/// are never read.
inline FusionResult FuseDetailed(const LayerStack& stack, const GateParams& params) {
  const std::size_t l = stack.num_layers();
  if (l < 2) throw Error(ErrorKind::kDimensionMismatch, "layer stack needs at least 2 layers");
  if (params.num_experts() != l - 1)
    throw Error(ErrorKind::kDimensionMismatch,
                "gate has " + std::to_string(params.num_experts()) + " experts for " +
                    std::to_string(l) + " layers");
  if (!stack.layers.all_finite())
    throw Error(ErrorKind::kNonFinite, "layer stack has non-finite entries");
  const auto final_emb = stack.final_layer();
  FusionResult out;
  out.mask = TopKMask(GateProbs(final_emb, params), params.top_k);
  out.fused.assign(final_emb.begin(), final_emb.end());
  for (std::size_t i = 0; i + 1 < l; ++i) {
    if (out.mask[i] == 0.0) continue;
    const double w = params.unweighted ? 1.0 : out.mask[i];
    const auto layer = stack.layers.row(i);
    for (std::size_t k = 0; k < out.fused.size(); ++k) out.fused[k] += w * layer[k];
  }
  return out;
}

inline std::vector<double> Fuse(const LayerStack& stack, const GateParams& params) {
  return FuseDetailed(stack, params).fused;
}

}  // namespace sasv

#endif  // SASV_MOE_FUSION_HPP_
