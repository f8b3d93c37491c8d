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

#ifndef SASV_LOSSES_HPP_
#define SASV_LOSSES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sasv/error.hpp"
#include "sasv/matrix.hpp"

namespace sasv {

/// Multiplicative angular-margin softmax. Defaults: s = 30, m = 1.5.
struct SphereFaceConfig {
  double scale = 30.0;
  double margin = 1.5;
  double cos_clamp_eps = 1e-7;

  void Validate() const {
    if (!(scale > 0.0)) throw Error(ErrorKind::kBadConfig, "SphereFace scale must be > 0");
    if (!(margin >= 1.0)) throw Error(ErrorKind::kBadConfig, "SphereFace margin must be >= 1");
    if (!(cos_clamp_eps > 0.0) || cos_clamp_eps >= 1.0)
      throw Error(ErrorKind::kBadConfig, "cos clamp eps must be in (0, 1)");
  }
};

/// Circle loss with relaxation margin m_c:
///   Delta_p = 1 - m_c, Delta_n = m_c, O_p = 1 + m_c, O_n = -m_c,
///   alpha_p = [O_p - s_p]_+, alpha_n = [s_n - O_n]_+.
/// gamma and m_c defaults are the conventional Circle-loss values; `weight`
/// is its share in the combined objective.
struct CircleConfig {
  double gamma = 80.0;
  double margin = 0.25;
  double weight = 0.2;

  double delta_p() const { return 1.0 - margin; }
  double delta_n() const { return margin; }
  double optimum_p() const { return 1.0 + margin; }
  double optimum_n() const { return -margin; }

  void Validate() const {
    if (!(gamma > 0.0)) throw Error(ErrorKind::kBadConfig, "circle gamma must be > 0");
    if (!(margin > 0.0 && margin < 1.0))
      throw Error(ErrorKind::kBadConfig, "circle margin must be in (0, 1)");
    if (!(weight >= 0.0) || !std::isfinite(weight))
      throw Error(ErrorKind::kBadConfig, "circle weight must be >= 0");
  }
};

/// Raw (un-normalized) embeddings x_i, class weights w_j and labels y_i.
struct LossBatch {
  Matrix embeddings;     // B x D
  Matrix class_weights;  // C x D
  std::vector<int> labels;

  void Validate() const {
    const std::size_t b = embeddings.rows(), c = class_weights.rows();
    if (b < 1) throw Error(ErrorKind::kInvalidBatch, "empty batch");
    if (c < 2) throw Error(ErrorKind::kInvalidBatch, "need at least 2 classes");
    if (embeddings.cols() != class_weights.cols() || embeddings.cols() == 0)
      throw Error(ErrorKind::kInvalidBatch, "embedding/weight dimension mismatch");
    if (labels.size() != b) throw Error(ErrorKind::kInvalidBatch, "label count != batch size");
    for (int y : labels)
      if (y < 0 || static_cast<std::size_t>(y) >= c)
        throw Error(ErrorKind::kInvalidBatch, "label " + std::to_string(y) + " out of range");
    if (!embeddings.all_finite() || !class_weights.all_finite())
      throw Error(ErrorKind::kInvalidBatch, "non-finite batch entry");
  }
};

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad_embeddings;
  Matrix grad_weights;
};

namespace detail {

inline double LogSumExp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const auto top = std::max_element(v.begin(), v.end());
  const double mx = *top;
  if (!std::isfinite(mx)) return mx;
  // log1p over the non-max terms keeps precision when one term dominates
  double rest = 0.0;
  for (auto it = v.begin(); it != v.end(); ++it)
    if (it != top) rest += std::exp(*it - mx);
  return mx + std::log1p(rest);
}

// -log softmax(v)[y] without forming lse - v[y], which cancels when v[y] dominates.
inline double CrossEntropy(std::span<const double> v, std::size_t y) {
  const auto top = std::max_element(v.begin(), v.end());
  const double mx = *top;
  double rest = 0.0;
  for (auto it = v.begin(); it != v.end(); ++it)
    if (it != top) rest += std::exp(*it - mx);
  return (mx - v[y]) + std::log1p(rest);
}

inline double Softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

inline double Sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace detail

/// Batch-mean SphereFace loss
///   -log( e^{s cos(m theta_y)} / (e^{s cos(m theta_y)} + sum_{j!=y} e^{s cos theta_j}) )
/// with gradients w.r.t. the raw embeddings and class weights (row
/// normalization is part of the differentiated graph). The target cosine is
/// clamped to [-1+eps, 1-eps] before arccos; where the clamp is active the
/// target-logit derivative is zero.
inline LossAndGrad SphereFaceLoss(const LossBatch& batch, const SphereFaceConfig& cfg = {}) {
  batch.Validate();
  cfg.Validate();
  const std::size_t b = batch.embeddings.rows(), c = batch.class_weights.rows();
  const std::size_t d = batch.embeddings.cols();
  std::vector<double> xnorm, wnorm;
  const Matrix xu = NormalizeRows(batch.embeddings, &xnorm);
  const Matrix wu = NormalizeRows(batch.class_weights, &wnorm);

  Matrix gxu(b, d), gwu(c, d);
  std::vector<double> logits(c), dcos(c);
  double total = 0.0;
  const double inv_b = 1.0 / static_cast<double>(b);
  const double lo = -1.0 + cfg.cos_clamp_eps, hi = 1.0 - cfg.cos_clamp_eps;

  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t y = static_cast<std::size_t>(batch.labels[i]);
    for (std::size_t j = 0; j < c; ++j) {
      const double cosv = Dot(xu.row(i), wu.row(j));
      if (j != y) {
        logits[j] = cfg.scale * cosv;
        dcos[j] = cfg.scale;
        continue;
      }
      const double cc = std::clamp(cosv, lo, hi);
      const double theta = std::acos(cc);
      logits[j] = cfg.scale * std::cos(cfg.margin * theta);
      // d/dc s*cos(m*acos c) = s*m*sin(m*theta)/sin(theta)
      dcos[j] = (cosv < lo || cosv > hi)
                    ? 0.0
                    : cfg.scale * cfg.margin * std::sin(cfg.margin * theta) / std::sin(theta);
    }
    const double lse = detail::LogSumExp(logits);
    total += detail::CrossEntropy(logits, y);
    for (std::size_t j = 0; j < c; ++j) {
      const double p = std::exp(logits[j] - lse);
      const double g = (p - (j == y ? 1.0 : 0.0)) * inv_b * dcos[j];
      if (g == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) {
        gxu(i, k) += g * wu(j, k);
        gwu(j, k) += g * xu(i, k);
      }
    }
  }

  for (std::size_t i = 0; i < b; ++i) NormalizeBackward(xu.row(i), xnorm[i], gxu.row(i));
  for (std::size_t j = 0; j < c; ++j) NormalizeBackward(wu.row(j), wnorm[j], gwu.row(j));
  return {total * inv_b, std::move(gxu), std::move(gwu)};
}

/// Within-batch pair similarities. Index pairs (a < b) are listed row-major
/// and align with s_p / s_n.
struct PairSet {
  std::vector<double> s_p;
  std::vector<double> s_n;
  std::vector<std::pair<std::size_t, std::size_t>> pos_index;
  std::vector<std::pair<std::size_t, std::size_t>> neg_index;
};

/// Cosines of all unordered same-label (positive) and different-label
/// (negative) pairs of rows.
inline PairSet MinePairs(const Matrix& embeddings, std::span<const int> labels) {
  const std::size_t b = embeddings.rows();
  if (labels.size() != b) throw Error(ErrorKind::kInvalidBatch, "label count != batch size");
  const Matrix xu = NormalizeRows(embeddings, nullptr);
  PairSet out;
  for (std::size_t a = 0; a < b; ++a) {
    for (std::size_t c = a + 1; c < b; ++c) {
      const double s = std::clamp(Dot(xu.row(a), xu.row(c)), -1.0, 1.0);
      if (labels[a] == labels[c]) {
        out.s_p.push_back(s);
        out.pos_index.emplace_back(a, c);
      } else {
        out.s_n.push_back(s);
        out.neg_index.emplace_back(a, c);
      }
    }
  }
  return out;
}

/// Self-paced pair weights alpha_p, alpha_n.
struct CircleWeights {
  std::vector<double> alpha_p;
  std::vector<double> alpha_n;
};

inline CircleWeights ComputeCircleWeights(const PairSet& pairs, const CircleConfig& cfg = {}) {
  CircleWeights w;
  for (double s : pairs.s_p) w.alpha_p.push_back(std::max(0.0, cfg.optimum_p() - s));
  for (double s : pairs.s_n) w.alpha_n.push_back(std::max(0.0, s - cfg.optimum_n()));
  return w;
}

struct CircleResult {
  double loss = 0.0;
  std::vector<double> grad_sp;
  std::vector<double> grad_sn;
};

/// Circle loss for fixed pair weights:
///   log(1 + sum_p e^{-gamma a_p (s_p - Delta_p)} * sum_n e^{gamma a_n (s_n - Delta_n)})
/// Gradients treat the weights as constants.
inline CircleResult CircleLossWithWeights(const PairSet& pairs, const CircleWeights& w,
                                          const CircleConfig& cfg = {}) {
  cfg.Validate();
  auto check = [](std::span<const double> xs) {
    for (double s : xs)
      if (!(s >= -1.0 && s <= 1.0))
        throw Error(ErrorKind::kValueOutOfRange,
                    "pair similarity " + std::to_string(s) + " outside [-1, 1]");
  };
  check(pairs.s_p);
  check(pairs.s_n);
  if (w.alpha_p.size() != pairs.s_p.size() || w.alpha_n.size() != pairs.s_n.size())
    throw Error(ErrorKind::kInvalidBatch, "circle weight count != pair count");

  CircleResult out;
  out.grad_sp.assign(pairs.s_p.size(), 0.0);
  out.grad_sn.assign(pairs.s_n.size(), 0.0);
  if (pairs.s_p.empty() || pairs.s_n.empty()) return out;

  std::vector<double> ep(pairs.s_p.size()), en(pairs.s_n.size());
  for (std::size_t p = 0; p < ep.size(); ++p)
    ep[p] = -cfg.gamma * w.alpha_p[p] * (pairs.s_p[p] - cfg.delta_p());
  for (std::size_t n = 0; n < en.size(); ++n)
    en[n] = cfg.gamma * w.alpha_n[n] * (pairs.s_n[n] - cfg.delta_n());
  const double lse_p = detail::LogSumExp(ep), lse_n = detail::LogSumExp(en);
  const double t = lse_p + lse_n;
  out.loss = detail::Softplus(t);
  const double sig = detail::Sigmoid(t);
  for (std::size_t p = 0; p < ep.size(); ++p)
    out.grad_sp[p] = sig * std::exp(ep[p] - lse_p) * (-cfg.gamma * w.alpha_p[p]);
  for (std::size_t n = 0; n < en.size(); ++n)
    out.grad_sn[n] = sig * std::exp(en[n] - lse_n) * (cfg.gamma * w.alpha_n[n]);
  return out;
}

/// Circle loss with alpha computed from the pairs and detached.
inline CircleResult CircleLoss(const PairSet& pairs, const CircleConfig& cfg = {}) {
  return CircleLossWithWeights(pairs, ComputeCircleWeights(pairs, cfg), cfg);
}

/// SphereFace + weight * Circle over the batch's own pairs. Circle gradients
/// flow back through pair mining into the embeddings. Pass `frozen` to use
/// fixed circle weights instead of recomputing them from the batch.
inline LossAndGrad CombinedLoss(const LossBatch& batch, const SphereFaceConfig& sf = {},
                                const CircleConfig& cc = {},
                                const std::optional<CircleWeights>& frozen = std::nullopt) {
  cc.Validate();
  LossAndGrad out = SphereFaceLoss(batch, sf);
  if (cc.weight == 0.0) return out;

  const PairSet pairs = MinePairs(batch.embeddings, batch.labels);
  const CircleResult circle =
      frozen ? CircleLossWithWeights(pairs, *frozen, cc) : CircleLoss(pairs, cc);
  out.loss += cc.weight * circle.loss;
  if (pairs.s_p.empty() || pairs.s_n.empty()) return out;

  std::vector<double> xnorm;
  const Matrix xu = NormalizeRows(batch.embeddings, &xnorm);
  Matrix gxu(xu.rows(), xu.cols());
  auto accumulate = [&](std::size_t a, std::size_t b, double g) {
    for (std::size_t k = 0; k < xu.cols(); ++k) {
      gxu(a, k) += g * xu(b, k);
      gxu(b, k) += g * xu(a, k);
    }
  };
  for (std::size_t p = 0; p < pairs.s_p.size(); ++p)
    accumulate(pairs.pos_index[p].first, pairs.pos_index[p].second, cc.weight * circle.grad_sp[p]);
  for (std::size_t n = 0; n < pairs.s_n.size(); ++n)
    accumulate(pairs.neg_index[n].first, pairs.neg_index[n].second, cc.weight * circle.grad_sn[n]);
  for (std::size_t i = 0; i < xu.rows(); ++i) {
    NormalizeBackward(xu.row(i), xnorm[i], gxu.row(i));
    for (std::size_t k = 0; k < xu.cols(); ++k) out.grad_embeddings(i, k) += gxu(i, k);
  }
  return out;
}

/// Flat parameter vector [embeddings..., class_weights...] of a batch, for
/// finite-difference checks.
inline std::vector<double> FlattenParams(const LossBatch& batch) {
  std::vector<double> out(batch.embeddings.flat().begin(), batch.embeddings.flat().end());
  out.insert(out.end(), batch.class_weights.flat().begin(), batch.class_weights.flat().end());
  return out;
}

inline LossBatch WithParams(const LossBatch& batch, std::span<const double> params) {
  LossBatch out = batch;
  const std::size_t ne = out.embeddings.size();
  std::copy_n(params.begin(), ne, out.embeddings.flat().begin());
  std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(ne), out.class_weights.size(),
              out.class_weights.flat().begin());
  return out;
}

inline std::vector<double> FlattenGrad(const LossAndGrad& g) {
  std::vector<double> out(g.grad_embeddings.flat().begin(), g.grad_embeddings.flat().end());
  out.insert(out.end(), g.grad_weights.flat().begin(), g.grad_weights.flat().end());
  return out;
}

/// Flat indices (in FlattenParams order) of the embedding and class-weight
/// rows whose target cosine lies within `guard` of +/-1, where the arccos
/// clamp makes the loss non-differentiable.
inline std::vector<std::size_t> SphereFaceSingularCoordinates(const LossBatch& batch,
                                                              double guard = 1e-3) {
  const std::size_t d = batch.embeddings.cols();
  const std::size_t ne = batch.embeddings.size();
  const Matrix xu = NormalizeRows(batch.embeddings, nullptr);
  const Matrix wu = NormalizeRows(batch.class_weights, nullptr);
  std::vector<bool> flagged(ne + batch.class_weights.size(), false);
  for (std::size_t i = 0; i < xu.rows(); ++i) {
    const std::size_t y = static_cast<std::size_t>(batch.labels[i]);
    if (std::abs(Dot(xu.row(i), wu.row(y))) < 1.0 - guard) continue;
    for (std::size_t k = 0; k < d; ++k) {
      flagged[i * d + k] = true;
      flagged[ne + y * d + k] = true;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < flagged.size(); ++i)
    if (flagged[i]) out.push_back(i);
  return out;
}

}  // namespace sasv

#endif  // SASV_LOSSES_HPP_
