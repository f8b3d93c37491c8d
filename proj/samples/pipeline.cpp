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

// End-to-end use of the library on synthetic data: score trials with AS-Norm,
// gate the scores with a spoof detector, and report the metrics.
//
//   ./sasv_pipeline_sample [seed]

#include <cstdio>
#include <cstdlib>

#include "sasv/sasv.hpp"

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;

  sasv::SyntheticConfig data;
  data.n_speakers = 40;
  data.utts_per_speaker = 12;
  data.dim = 64;
  data.noise = 0.2;
  data.seed = seed;
  const auto ds = sasv::GenSynthetic(data);

  // First 8 utterances per speaker are scored, the rest form the cohort.
  const auto [eval_part, cohort_part] = sasv::SplitUtterances(ds, 8);
  const auto embeddings = sasv::EmbedDataset(nullptr, eval_part);
  sasv::EmbeddingSet cohort;
  for (const auto& e : sasv::EmbedDataset(nullptr, cohort_part))
    cohort.add(sasv::Embedding("cohort/" + e.id(), {e.values().begin(), e.values().end()}));

  // Relabel a third of the nontarget trials as spoofs and give them low
  // detector scores and inflated verifier scores.
  auto trials = sasv::BuildTrials(eval_part, 3000, seed + 1);
  sasv::Rng rng(seed + 2);
  sasv::ScoreSet sd;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    auto& t = trials[i];
    if (t.label == sasv::TrialLabel::kNontarget && i % 3 == 0) t.label = sasv::TrialLabel::kSpoof;
    const double mean = t.label == sasv::TrialLabel::kSpoof ? -1.5 : 1.5;
    sd.add(sasv::Trial(t.enroll_id, t.test_id), mean + rng.normal());
  }

  sasv::ScoreSet asv;
  for (const auto& r : sasv::ScoreTrials(trials, embeddings, &cohort, {100, 1e-8})) {
    const double boost = r.trial.label == sasv::TrialLabel::kSpoof ? 3.0 : 0.0;
    asv.add(r.trial, r.score + boost);
  }
  const auto sasv_scores = sasv::Cascade(sd, asv, {0.0, -5.0});

  for (const auto* name : {"asv-only", "cascade"}) {
    const auto& s = std::string(name) == "cascade" ? sasv_scores : asv;
    std::printf("%-9s sv_eer=%.4f spf_eer=%.4f min_a_dcf=%.4f\n", name, sasv::SvEer(s).eer,
                sasv::SpfEer(s).eer, sasv::MinADcf(s).min_a_dcf);
  }
}
