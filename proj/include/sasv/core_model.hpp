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

#ifndef SASV_CORE_MODEL_HPP_
#define SASV_CORE_MODEL_HPP_

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sasv/error.hpp"

namespace sasv {

/// Audio framing used by the systems this toolkit scores. Metadata only: the
/// toolkit starts at embeddings.
inline constexpr int kSampleRateHz = 16000;
inline constexpr double kUtteranceSeconds = 4.0;
inline constexpr std::size_t kDefaultSpeakerEmbeddingDim = 192;

/// A fixed-dimension utterance embedding. Stored as 32-bit floats; all scoring
/// arithmetic is done in double.
class Embedding {
 public:
  Embedding(std::string id, std::vector<float> values)
      : id_(std::move(id)), values_(std::move(values)) {
    if (id_.empty()) throw Error(ErrorKind::kEmptyId, "embedding id is empty");
    if (values_.empty())
      throw Error(ErrorKind::kDimensionMismatch, "embedding '" + id_ + "' has dimension 0");
    double sq = 0.0;
    for (float v : values_) {
      if (!std::isfinite(v))
        throw Error(ErrorKind::kNonFinite, "embedding '" + id_ + "' has a non-finite component");
      sq += static_cast<double>(v) * v;
    }
    if (!(sq > 0.0)) throw Error(ErrorKind::kZeroNorm, "embedding '" + id_ + "' has zero norm");
  }

  const std::string& id() const { return id_; }
  std::span<const float> values() const { return values_; }
  std::size_t dim() const { return values_.size(); }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::string id_;
  std::vector<float> values_;
};

/// Insertion-ordered embeddings of one dimension, looked up by exact id.
class EmbeddingSet {
 public:
  explicit EmbeddingSet(std::size_t dim = 0) : dim_(dim) {}

  /// The first insert fixes the dimension when the set was built with dim 0.
  void add(Embedding e) {
    if (dim_ == 0) dim_ = e.dim();
    if (e.dim() != dim_)
      throw Error(ErrorKind::kDimensionMismatch,
                  "embedding '" + e.id() + "' has dimension " + std::to_string(e.dim()) +
                      ", set has " + std::to_string(dim_));
    if (index_.contains(e.id()))
      throw Error(ErrorKind::kDuplicateId, "duplicate embedding id '" + e.id() + "'");
    index_.emplace(e.id(), entries_.size());
    entries_.push_back(std::move(e));
  }

  const Embedding* find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

  const Embedding& at(std::string_view id) const {
    const Embedding* e = find(id);
    if (!e) throw Error(ErrorKind::kMissingEmbedding, std::string(id));
    return *e;
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Embedding>& entries() const { return entries_; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  friend bool operator==(const EmbeddingSet& a, const EmbeddingSet& b) {
    return a.dim_ == b.dim_ && a.entries_ == b.entries_;
  }

 private:
  std::size_t dim_;
  std::vector<Embedding> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class TrialLabel { kTarget, kNontarget, kSpoof, kUnlabeled };

/// Exact lowercase tokens only; anything else is nullopt.
inline std::optional<TrialLabel> ParseTrialLabel(std::string_view token) {
  if (token == "target") return TrialLabel::kTarget;
  if (token == "nontarget") return TrialLabel::kNontarget;
  if (token == "spoof") return TrialLabel::kSpoof;
  return std::nullopt;
}

inline std::string_view TrialLabelName(TrialLabel label) {
  switch (label) {
    case TrialLabel::kTarget: return "target";
    case TrialLabel::kNontarget: return "nontarget";
    case TrialLabel::kSpoof: return "spoof";
    case TrialLabel::kUnlabeled: return "";
  }
  return "";
}

struct Trial {
  std::string enroll_id;
  std::string test_id;
  TrialLabel label = TrialLabel::kUnlabeled;

  Trial() = default;
  Trial(std::string enroll, std::string test, TrialLabel l = TrialLabel::kUnlabeled)
      : enroll_id(std::move(enroll)), test_id(std::move(test)), label(l) {
    if (enroll_id.empty() || test_id.empty())
      throw Error(ErrorKind::kEmptyId, "trial with empty utterance id");
  }

  std::string Describe() const { return "(" + enroll_id + ", " + test_id + ")"; }

  friend bool operator==(const Trial&, const Trial&) = default;
};

struct ScoreRecord {
  Trial trial;
  double score = 0.0;

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

using TrialKey = std::pair<std::string, std::string>;

struct TrialKeyHash {
  std::size_t operator()(const TrialKey& k) const {
    std::size_t h = std::hash<std::string>{}(k.first);
    return h ^ (std::hash<std::string>{}(k.second) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  }
};

/// Ordered scored trials; (enroll, test) pairs are unique and scores finite.
class ScoreSet {
 public:
  ScoreSet() = default;

  void add(Trial trial, double score) {
    if (!std::isfinite(score))
      throw Error(ErrorKind::kNonFinite, "non-finite score for trial " + trial.Describe());
    TrialKey key{trial.enroll_id, trial.test_id};
    if (index_.contains(key))
      throw Error(ErrorKind::kDuplicateId, "duplicate trial " + trial.Describe());
    index_.emplace(std::move(key), records_.size());
    records_.push_back({std::move(trial), score});
  }

  std::optional<std::size_t> find(const std::string& enroll, const std::string& test) const {
    auto it = index_.find(TrialKey{enroll, test});
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<ScoreRecord>& records() const { return records_; }
  const ScoreRecord& operator[](std::size_t i) const { return records_[i]; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

  std::vector<double> scores() const {
    std::vector<double> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.score);
    return out;
  }

  friend bool operator==(const ScoreSet& a, const ScoreSet& b) {
    return a.records_ == b.records_;
  }

 private:
  std::vector<ScoreRecord> records_;
  std::unordered_map<TrialKey, std::size_t, TrialKeyHash> index_;
};

struct PartitionedScores {
  std::vector<double> target;
  std::vector<double> nontarget;
  std::vector<double> spoof;
};

/// Splits scores by label, keeping record order within each class.
inline PartitionedScores PartitionScores(const ScoreSet& scores) {
  PartitionedScores out;
  for (const auto& r : scores) {
    switch (r.trial.label) {
      case TrialLabel::kTarget: out.target.push_back(r.score); break;
      case TrialLabel::kNontarget: out.nontarget.push_back(r.score); break;
      case TrialLabel::kSpoof: out.spoof.push_back(r.score); break;
      case TrialLabel::kUnlabeled:
        throw Error(ErrorKind::kUnlabeledTrial, "trial " + r.trial.Describe() + " has no label");
    }
  }
  return out;
}

}  // namespace sasv

#endif  // SASV_CORE_MODEL_HPP_
