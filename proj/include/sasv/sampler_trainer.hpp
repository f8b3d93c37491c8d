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

#ifndef SASV_SAMPLER_TRAINER_HPP_
#define SASV_SAMPLER_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sasv/core_model.hpp"
#include "sasv/error.hpp"
#include "sasv/losses.hpp"
#include "sasv/matrix.hpp"
#include "sasv/random.hpp"
#include "sasv/scoring.hpp"

namespace sasv {

/// Speaker clusters on the unit hypersphere. Each utterance is
///   normalize(mean + noise * g + nuisance_scale * sum_k z_k u_k)
/// with g, z standard normal and u_k fixed random unit directions shared by
/// all speakers (a low-rank "session" subspace). nuisance_rank = 0 gives
/// plain isotropic clusters.
struct SyntheticConfig {
  std::size_t n_speakers = 20;
  std::size_t utts_per_speaker = 30;
  std::size_t dim = 32;
  double noise = 0.1;
  std::size_t nuisance_rank = 0;
  double nuisance_scale = 0.0;
  std::uint64_t seed = 0;
};

struct Speaker {
  std::string id;
  std::vector<double> mean;  // unit mean direction
  Matrix utterances;         // n_utts x dim, unit rows
};

struct SpeakerDataset {
  std::size_t dim = 0;
  std::vector<Speaker> speakers;

  std::size_t num_utterances() const {
    std::size_t n = 0;
    for (const auto& s : speakers) n += s.utterances.rows();
    return n;
  }

  static std::string UtteranceId(const Speaker& s, std::size_t u) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "-utt%04zu", u);
    return s.id + buf;
  }

  friend bool operator==(const SpeakerDataset& a, const SpeakerDataset& b) {
    if (a.dim != b.dim || a.speakers.size() != b.speakers.size()) return false;
    for (std::size_t i = 0; i < a.speakers.size(); ++i)
      if (a.speakers[i].id != b.speakers[i].id || a.speakers[i].mean != b.speakers[i].mean ||
          !(a.speakers[i].utterances == b.speakers[i].utterances))
        return false;
    return true;
  }
};

namespace detail {

inline void NormalizeInPlace(std::span<double> v) {
  const double n = Norm(v);
  for (double& x : v) x /= n;
}

inline std::vector<double> RandomUnit(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double n = 0.0;
  do {
    for (double& x : v) x = rng.normal();
    n = Norm(v);
  } while (!(n > 0.0));
  for (double& x : v) x /= n;
  return v;
}

}  // namespace detail

inline SpeakerDataset GenSynthetic(const SyntheticConfig& cfg) {
  if (cfg.n_speakers < 1) throw Error(ErrorKind::kBadParams, "need at least 1 speaker");
  if (cfg.utts_per_speaker < 1) throw Error(ErrorKind::kBadParams, "need at least 1 utterance per speaker");
  if (cfg.dim < 1) throw Error(ErrorKind::kBadParams, "dimension must be >= 1");
  if (!(cfg.noise >= 0.0) || !std::isfinite(cfg.noise))
    throw Error(ErrorKind::kBadParams, "noise must be finite and >= 0");
  if (!(cfg.nuisance_scale >= 0.0) || !std::isfinite(cfg.nuisance_scale))
    throw Error(ErrorKind::kBadParams, "nuisance scale must be finite and >= 0");

  Rng rng(cfg.seed);
  SpeakerDataset ds;
  ds.dim = cfg.dim;
  for (std::size_t s = 0; s < cfg.n_speakers; ++s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "spk%04zu", s);
    ds.speakers.push_back({buf, detail::RandomUnit(rng, cfg.dim), Matrix()});
  }
  std::vector<std::vector<double>> basis;
  for (std::size_t k = 0; k < cfg.nuisance_rank; ++k) basis.push_back(detail::RandomUnit(rng, cfg.dim));

  for (auto& spk : ds.speakers) {
    spk.utterances = Matrix(cfg.utts_per_speaker, cfg.dim);
    for (std::size_t u = 0; u < cfg.utts_per_speaker; ++u) {
      auto row = spk.utterances.row(u);
      std::copy(spk.mean.begin(), spk.mean.end(), row.begin());
      if (cfg.noise > 0.0)
        for (double& x : row) x += cfg.noise * rng.normal();
      if (cfg.nuisance_scale > 0.0) {
        for (const auto& b : basis) {
          const double z = cfg.nuisance_scale * rng.normal();
          for (std::size_t i = 0; i < cfg.dim; ++i) row[i] += z * b[i];
        }
      }
      detail::NormalizeInPlace(row);
    }
  }
  return ds;
}

/// Keeps the first `n_train` utterances of every speaker for training and the
/// rest as held-out data.
inline std::pair<SpeakerDataset, SpeakerDataset> SplitUtterances(const SpeakerDataset& ds,
                                                                 std::size_t n_train) {
  SpeakerDataset train{ds.dim, {}}, held{ds.dim, {}};
  for (const auto& spk : ds.speakers) {
    const std::size_t n = spk.utterances.rows();
    if (n_train >= n)
      throw Error(ErrorKind::kBadParams, "speaker " + spk.id + " has no utterances left to hold out");
    Matrix a(n_train, ds.dim), b(n - n_train, ds.dim);
    for (std::size_t u = 0; u < n; ++u) {
      auto dst = u < n_train ? a.row(u) : b.row(u - n_train);
      std::copy(spk.utterances.row(u).begin(), spk.utterances.row(u).end(), dst.begin());
    }
    train.speakers.push_back({spk.id, spk.mean, std::move(a)});
    held.speakers.push_back({spk.id, spk.mean, std::move(b)});
  }
  return {std::move(train), std::move(held)};
}

struct PkConfig {
  std::size_t p = 8;
  std::size_t k = 4;
  std::uint64_t seed = 0;
};

/// P speakers x K utterances. `labels` holds the dataset speaker index.
struct PkBatch {
  std::vector<std::size_t> speaker;
  std::vector<std::size_t> utterance;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

/// One epoch of PK batches. Each speaker's utterances are shuffled and dealt
/// K at a time (a short last hand is topped up with replacement). Every batch
/// takes one hand from each of the P speakers with the most hands left (ties
/// by a shuffled speaker order). When fewer than P speakers still hold hands,
/// the batch is completed with speakers drawn at random, each contributing K
/// utterances sampled with replacement.
inline std::vector<PkBatch> PkBatches(const SpeakerDataset& ds, const PkConfig& cfg) {
  const std::size_t ns = ds.speakers.size();
  if (cfg.p < 2) throw Error(ErrorKind::kBadParams, "P must be >= 2");
  if (cfg.k < 1) throw Error(ErrorKind::kBadParams, "K must be >= 1");
  if (cfg.p > ns)
    throw Error(ErrorKind::kTooFewSpeakers, "P=" + std::to_string(cfg.p) + " but only " +
                                                std::to_string(ns) + " speakers");
  for (const auto& s : ds.speakers)
    if (s.utterances.rows() == 0)
      throw Error(ErrorKind::kBadParams, "speaker " + s.id + " has no utterances");

  Rng rng(cfg.seed);
  std::vector<std::deque<std::vector<std::size_t>>> hands(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    const std::size_t n = ds.speakers[s].utterances.rows();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(std::span(idx));
    for (std::size_t start = 0; start < n; start += cfg.k) {
      std::vector<std::size_t> hand(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                    idx.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + cfg.k)));
      while (hand.size() < cfg.k) hand.push_back(static_cast<std::size_t>(rng.below(n)));
      hands[s].push_back(std::move(hand));
    }
  }
  std::vector<std::size_t> rank(ns);
  {
    std::vector<std::size_t> order(ns);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span(order));
    for (std::size_t i = 0; i < ns; ++i) rank[order[i]] = i;
  }

  std::vector<PkBatch> batches;
  for (;;) {
    std::vector<std::size_t> holders;
    for (std::size_t s = 0; s < ns; ++s)
      if (!hands[s].empty()) holders.push_back(s);
    if (holders.empty()) break;
    std::sort(holders.begin(), holders.end(), [&](std::size_t a, std::size_t b) {
      if (hands[a].size() != hands[b].size()) return hands[a].size() > hands[b].size();
      return rank[a] < rank[b];
    });
    if (holders.size() > cfg.p) holders.resize(cfg.p);

    PkBatch batch;
    auto deal = [&](std::size_t s, const std::vector<std::size_t>& hand) {
      for (std::size_t u : hand) {
        batch.speaker.push_back(s);
        batch.utterance.push_back(u);
        batch.labels.push_back(static_cast<int>(s));
      }
    };
    for (std::size_t s : holders) {
      deal(s, hands[s].front());
      hands[s].pop_front();
    }
    if (holders.size() < cfg.p) {
      std::vector<std::size_t> others;
      for (std::size_t s = 0; s < ns; ++s)
        if (std::find(holders.begin(), holders.end(), s) == holders.end()) others.push_back(s);
      rng.shuffle(std::span(others));
      for (std::size_t i = 0; holders.size() + i < cfg.p; ++i) {
        const std::size_t s = others[i];
        const std::size_t n = ds.speakers[s].utterances.rows();
        std::vector<std::size_t> hand(cfg.k);
        for (auto& u : hand) u = static_cast<std::size_t>(rng.below(n));
        deal(s, hand);
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

/// Linear projection followed by length normalization (inside the loss);
/// `class_weights` are the SphereFace class vectors.
struct ToyModel {
  Matrix projection;     // D_emb x D_in
  Matrix class_weights;  // C x D_emb

  friend bool operator==(const ToyModel&, const ToyModel&) = default;
};

inline ToyModel RandomToyModel(std::size_t d_in, std::size_t d_emb, std::size_t n_classes,
                               std::uint64_t seed) {
  Rng rng(seed);
  ToyModel m{Matrix(d_emb, d_in), Matrix(n_classes, d_emb)};
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_in));
  for (double& v : m.projection.flat()) v = scale * rng.normal();
  for (double& v : m.class_weights.flat()) v = rng.normal();
  return m;
}

inline std::vector<double> Embed(const ToyModel& m, std::span<const double> feature) {
  if (feature.size() != m.projection.cols())
    throw Error(ErrorKind::kDimensionMismatch, "feature dimension " + std::to_string(feature.size()) +
                                                   " != model input " +
                                                   std::to_string(m.projection.cols()));
  std::vector<double> out(m.projection.rows());
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = Dot(m.projection.row(r), feature);
  return out;
}

/// Loss batch for one PK batch under the current model.
inline LossBatch MakeLossBatch(const ToyModel& m, const SpeakerDataset& ds, const PkBatch& b) {
  LossBatch lb{Matrix(b.size(), m.projection.rows()), m.class_weights, b.labels};
  for (std::size_t i = 0; i < b.size(); ++i) {
    auto e = Embed(m, ds.speakers[b.speaker[i]].utterances.row(b.utterance[i]));
    std::copy(e.begin(), e.end(), lb.embeddings.row(i).begin());
  }
  return lb;
}

struct TrainConfig {
  std::size_t steps = 500;
  // plain SGD step size
  double learning_rate = 1e-3;
  SphereFaceConfig sphereface;
  CircleConfig circle;
};

struct TrainResult {
  ToyModel model;
  std::vector<double> history;
};

/// One SGD update on a batch; returns the loss before the update.
inline double SgdStep(ToyModel& m, const SpeakerDataset& ds, const PkBatch& b,
                      const TrainConfig& tc) {
  const LossBatch lb = MakeLossBatch(m, ds, b);
  const LossAndGrad lg = CombinedLoss(lb, tc.sphereface, tc.circle);
  if (!std::isfinite(lg.loss)) return lg.loss;
  // d loss / d projection = sum_i g_i f_i^T
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto f = ds.speakers[b.speaker[i]].utterances.row(b.utterance[i]);
    const auto g = lg.grad_embeddings.row(i);
    for (std::size_t r = 0; r < m.projection.rows(); ++r) {
      const double step = tc.learning_rate * g[r];
      auto prow = m.projection.row(r);
      for (std::size_t c = 0; c < f.size(); ++c) prow[c] -= step * f[c];
    }
  }
  auto w = m.class_weights.flat();
  const auto gw = lg.grad_weights.flat();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= tc.learning_rate * gw[i];
  return lg.loss;
}

/// Runs `tc.steps` SGD updates over consecutive PK epochs (epoch e uses seed
/// pk.seed + e). Throws DivergenceDetected with the step index when the loss
/// or parameters stop being finite.
inline TrainResult TrainToy(const SpeakerDataset& ds, const ToyModel& model0,
                            const TrainConfig& tc, const PkConfig& pk) {
  if (!(tc.learning_rate > 0.0)) throw Error(ErrorKind::kBadConfig, "learning rate must be > 0");
  if (model0.projection.cols() != ds.dim)
    throw Error(ErrorKind::kDimensionMismatch, "model input dimension != dataset dimension");
  if (model0.class_weights.rows() != ds.speakers.size())
    throw Error(ErrorKind::kDimensionMismatch, "model class count != number of speakers");
  if (model0.class_weights.cols() != model0.projection.rows())
    throw Error(ErrorKind::kDimensionMismatch, "class weight dimension != embedding dimension");

  TrainResult out{model0, {}};
  out.history.reserve(tc.steps);
  std::vector<PkBatch> epoch;
  std::size_t next = 0, epoch_index = 0;
  for (std::size_t step = 0; step < tc.steps; ++step) {
    if (next == epoch.size()) {
      epoch = PkBatches(ds, {pk.p, pk.k, pk.seed + epoch_index++});
      next = 0;
    }
    double loss;
    try {
      loss = SgdStep(out.model, ds, epoch[next++], tc);
    } catch (const Error& e) {
      // overflowing parameters surface as zero or non-finite embeddings
      if (e.kind() != ErrorKind::kInvalidBatch && e.kind() != ErrorKind::kNonFinite) throw;
      throw Error(ErrorKind::kDivergence, "degenerate embeddings at step " + std::to_string(step));
    }
    if (!std::isfinite(loss) || !out.model.projection.all_finite() ||
        !out.model.class_weights.all_finite())
      throw Error(ErrorKind::kDivergence, "non-finite loss or parameters at step " + std::to_string(step));
    out.history.push_back(loss);
  }
  return out;
}

/// Balanced target/nontarget trials over the utterances of `ds`, with ids
/// from SpeakerDataset::UtteranceId. Target trials pair two different
/// utterances of one speaker when any speaker has two; a single-speaker
/// dataset yields target trials only. Pairs are unique.
inline std::vector<Trial> BuildTrials(const SpeakerDataset& ds, std::size_t n_trials,
                                      std::uint64_t seed) {
  if (n_trials < 1) throw Error(ErrorKind::kBadParams, "n_trials must be >= 1");
  if (ds.speakers.empty()) throw Error(ErrorKind::kBadParams, "dataset has no speakers");
  for (const auto& s : ds.speakers)
    if (s.utterances.rows() == 0) throw Error(ErrorKind::kBadParams, "speaker " + s.id + " has no utterances");

  std::vector<std::size_t> multi;
  for (std::size_t s = 0; s < ds.speakers.size(); ++s)
    if (ds.speakers[s].utterances.rows() >= 2) multi.push_back(s);

  const bool single = ds.speakers.size() == 1;
  const std::size_t n_target = single ? n_trials : (n_trials + 1) / 2;
  Rng rng(seed);
  std::vector<Trial> out;
  std::set<TrialKey> seen;
  std::size_t attempts = 0;
  const std::size_t max_attempts = 100 * n_trials + 1000;
  auto add = [&](std::size_t s1, std::size_t u1, std::size_t s2, std::size_t u2, TrialLabel label) {
    Trial t(SpeakerDataset::UtteranceId(ds.speakers[s1], u1),
            SpeakerDataset::UtteranceId(ds.speakers[s2], u2), label);
    if (!seen.insert({t.enroll_id, t.test_id}).second) return;
    out.push_back(std::move(t));
  };
  while (out.size() < n_trials) {
    if (++attempts > max_attempts)
      throw Error(ErrorKind::kBadParams, "cannot build " + std::to_string(n_trials) + " distinct trials");
    if (out.size() < n_target) {
      std::size_t s, u1 = 0, u2 = 0;
      if (!multi.empty()) {
        s = multi[rng.below(multi.size())];
        const std::size_t n = ds.speakers[s].utterances.rows();
        u1 = rng.below(n);
        u2 = rng.below(n - 1);
        if (u2 >= u1) ++u2;
      } else {
        s = rng.below(ds.speakers.size());
      }
      add(s, u1, s, u2, TrialLabel::kTarget);
    } else {
      const std::size_t s1 = rng.below(ds.speakers.size());
      std::size_t s2 = rng.below(ds.speakers.size() - 1);
      if (s2 >= s1) ++s2;
      add(s1, rng.below(ds.speakers[s1].utterances.rows()), s2,
          rng.below(ds.speakers[s2].utterances.rows()), TrialLabel::kNontarget);
    }
  }
  return out;
}

/// Model embeddings of every utterance, keyed by SpeakerDataset::UtteranceId.
/// Passing nullptr stores the raw features instead.
inline EmbeddingSet EmbedDataset(const ToyModel* m, const SpeakerDataset& ds) {
  EmbeddingSet set;
  for (const auto& spk : ds.speakers) {
    for (std::size_t u = 0; u < spk.utterances.rows(); ++u) {
      const auto f = spk.utterances.row(u);
      std::vector<double> e = m ? Embed(*m, f) : std::vector<double>(f.begin(), f.end());
      set.add(Embedding(SpeakerDataset::UtteranceId(spk, u), std::vector<float>(e.begin(), e.end())));
    }
  }
  return set;
}

/// Cosine-scored BuildTrials() trials under the model. Scores are computed
/// from double-precision embeddings.
inline ScoreSet EvalToy(const ToyModel& m, const SpeakerDataset& ds, std::size_t n_trials,
                        std::uint64_t seed) {
  const auto trials = BuildTrials(ds, n_trials, seed);
  std::unordered_map<std::string, std::vector<double>> emb;
  for (const auto& spk : ds.speakers)
    for (std::size_t u = 0; u < spk.utterances.rows(); ++u)
      emb.emplace(SpeakerDataset::UtteranceId(spk, u), Embed(m, spk.utterances.row(u)));
  ScoreSet out;
  for (const auto& t : trials) out.add(t, Cosine(emb.at(t.enroll_id), emb.at(t.test_id)));
  return out;
}

}  // namespace sasv

#endif  // SASV_SAMPLER_TRAINER_HPP_
