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

#ifndef SASV_CLI_HPP_
#define SASV_CLI_HPP_

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sasv/core_model.hpp"
#include "sasv/error.hpp"
#include "sasv/grad_verify.hpp"
#include "sasv/io.hpp"
#include "sasv/metrics.hpp"
#include "sasv/moe_fusion.hpp"
#include "sasv/sampler_trainer.hpp"
#include "sasv/scoring.hpp"

namespace sasv {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitDataError = 2, kExitNumericFailure = 3 };

inline int ExitCodeFor(ErrorKind kind) {
  return kind == ErrorKind::kDivergence ? kExitNumericFailure : kExitDataError;
}

namespace cli {

struct ScoreArgs {
  std::string trials, embeddings, cohort, out;
  std::size_t top_k = 300;
  double min_sigma = 1e-8;
};

struct CascadeArgs {
  std::string sd_scores, asv_scores, out;
  double threshold = 0.0;
  double reject_score = -5.0;
};

struct EnsembleArgs {
  std::vector<std::string> inputs;
  std::vector<double> weights;
  std::string out;
};

struct EvalArgs {
  std::string scores, trials, adcf_config;
  bool table = false;
};

struct MoeArgs {
  std::string layers, gate;
  std::size_t top_k = 3;
  bool unweighted = false;
};

struct SynthArgs {
  SyntheticConfig data;
  std::string out, format = "text", trials_out;
  std::size_t n_trials = 0;
  std::uint64_t trial_seed = 0;
};

struct TrainArgs {
  SyntheticConfig data{20, 30, 32, 0.1, 4, 2.0, 1};
  std::size_t holdout = 10;
  std::size_t emb_dim = 16;
  std::uint64_t init_seed = 2;
  TrainConfig train{500, 0.05, {}, {}};
  PkConfig pk{8, 4, 5};
  std::size_t eval_trials = 2000;
  std::uint64_t eval_seed = 3;
  std::string history, model_out;
};

struct GradArgs {
  std::size_t instances = 100;
  std::uint64_t seed = 0;
  std::string loss = "all";
  GradCheckOptions opts;
};

inline void Emit(std::ostream& out, const std::string& key, double v) {
  out << key << '=' << FormatMetric(v) << '\n';
}

inline int RunScore(const ScoreArgs& a, std::ostream&, std::ostream&) {
  const auto trials = ReadTrials(a.trials);
  const auto embeddings = ReadEmbeddings(a.embeddings);
  std::optional<EmbeddingSet> cohort;
  if (!a.cohort.empty()) cohort = ReadEmbeddings(a.cohort);
  const auto scores = ScoreTrials(trials, embeddings, cohort ? &*cohort : nullptr, {a.top_k, a.min_sigma});
  WriteScores(a.out, scores);
  return kExitOk;
}

inline int RunCascade(const CascadeArgs& a, std::ostream&, std::ostream&) {
  const auto sd = ReadScores(a.sd_scores);
  const auto asv = ReadScores(a.asv_scores);
  WriteScores(a.out, Cascade(sd, asv, {a.threshold, a.reject_score}));
  return kExitOk;
}

inline int RunEnsemble(const EnsembleArgs& a, std::ostream&, std::ostream&) {
  std::vector<ScoreSet> sets;
  for (const auto& path : a.inputs) sets.push_back(ReadScores(path));
  WriteScores(a.out, Ensemble(sets, a.weights));
  return kExitOk;
}

inline int RunEval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  ScoreSet scores = ReadScores(a.scores);
  if (!a.trials.empty()) scores = AttachLabels(scores, ReadTrials(a.trials));
  ADcfConfig cfg;
  if (!a.adcf_config.empty()) {
    auto in = detail::OpenIn(a.adcf_config);
    cfg = ParseADcfConfig(in, a.adcf_config);
  }
  const auto p = PartitionScores(scores);

  std::vector<std::pair<std::string, double>> rows;
  if (!p.target.empty() && !p.nontarget.empty()) {
    const auto r = ComputeEer(p.target, p.nontarget);
    rows.push_back({"sv_eer", r.eer});
    rows.push_back({"sv_eer_threshold", r.threshold});
  } else {
    err << "sv_eer skipped: needs target and nontarget trials\n";
  }
  if (!p.target.empty() && !p.spoof.empty()) {
    const auto r = ComputeEer(p.target, p.spoof);
    rows.push_back({"spf_eer", r.eer});
    rows.push_back({"spf_eer_threshold", r.threshold});
  } else {
    err << "spf_eer skipped: needs target and spoof trials\n";
  }
  if (!p.target.empty() && !p.nontarget.empty() && !p.spoof.empty()) {
    const auto r = MinADcf(p.target, p.nontarget, p.spoof, cfg);
    rows.push_back({"min_a_dcf", r.min_a_dcf});
    rows.push_back({"a_dcf_threshold", r.threshold});
    rows.push_back({"normalized_a_dcf", r.normalized});
  } else {
    err << "a-DCF skipped: needs target, nontarget and spoof trials\n";
  }
  if (rows.empty()) throw Error(ErrorKind::kEmptyClass, "no metric computable from " + a.scores);

  out << "# trials: target=" << p.target.size() << " nontarget=" << p.nontarget.size()
      << " spoof=" << p.spoof.size() << '\n'
      << "# sv_eer: target vs nontarget, spoof trials excluded; spf_eer: target vs spoof\n"
      << "# a-dcf: c_miss=" << cfg.c_miss << " c_fa_nontarget=" << cfg.c_fa_nontarget
      << " c_fa_spoof=" << cfg.c_fa_spoof << " pi_target=" << cfg.pi_target
      << " pi_nontarget=" << cfg.pi_nontarget << " pi_spoof=" << cfg.pi_spoof << '\n'
      << "# decision rule: accept iff score >= threshold\n";
  if (a.table) {
    out << "metric               value\n";
    for (const auto& [k, v] : rows) {
      std::string key = k;
      key.resize(20, ' ');
      out << key << ' ' << FormatMetric(v) << '\n';
    }
  } else {
    for (const auto& [k, v] : rows) Emit(out, k, v);
  }
  return kExitOk;
}

inline int RunMoe(const MoeArgs& a, std::ostream& out, std::ostream&) {
  const LayerStack stack = LayerStackFromRows(ReadNamedRows(a.layers));
  GateParams gate = GateFromRows(ReadNamedRows(a.gate), a.top_k);
  gate.unweighted = a.unweighted;
  const auto r = FuseDetailed(stack, gate);
  out << "layers=" << stack.num_layers() << "\ndim=" << stack.dim() << "\nselected=";
  bool first = true;
  for (std::size_t i = 0; i < r.mask.size(); ++i) {
    if (r.mask[i] == 0.0) continue;
    out << (first ? "" : ",") << i;
    first = false;
  }
  out << "\ngate_weights=";
  for (std::size_t i = 0; i < r.mask.size(); ++i) out << (i ? "," : "") << FormatMetric(r.mask[i]);
  out << '\n';
  Matrix fused(1, r.fused.size());
  std::copy(r.fused.begin(), r.fused.end(), fused.row(0).begin());
  const std::vector<std::string> ids{"fused"};
  WriteNamedRows(out, ids, fused);
  return kExitOk;
}

inline int RunSynth(const SynthArgs& a, std::ostream& out, std::ostream&) {
  const auto ds = GenSynthetic(a.data);
  const auto set = EmbedDataset(nullptr, ds);
  WriteEmbeddings(a.out, set, a.format == "binary" ? EmbeddingFormat::kBinary : EmbeddingFormat::kText);
  out << "speakers=" << ds.speakers.size() << "\nutterances=" << set.size() << "\ndim=" << ds.dim << '\n';
  if (!a.trials_out.empty()) {
    const auto trials = BuildTrials(ds, a.n_trials, a.trial_seed);
    WriteTrials(a.trials_out, trials);
    out << "trials=" << trials.size() << '\n';
  }
  return kExitOk;
}

inline int RunTrain(const TrainArgs& a, std::ostream& out, std::ostream&) {
  const auto ds = GenSynthetic(a.data);
  const auto [train, held] = SplitUtterances(ds, a.data.utts_per_speaker - a.holdout);
  const ToyModel m0 = RandomToyModel(ds.dim, a.emb_dim, ds.speakers.size(), a.init_seed);
  const double eer0 = SvEer(EvalToy(m0, held, a.eval_trials, a.eval_seed)).eer;
  const TrainResult r = TrainToy(train, m0, a.train, a.pk);
  const double eer1 = SvEer(EvalToy(r.model, held, a.eval_trials, a.eval_seed)).eer;
  out << "steps=" << r.history.size() << '\n';
  if (!r.history.empty()) {
    Emit(out, "initial_loss", r.history.front());
    Emit(out, "final_loss", r.history.back());
  }
  Emit(out, "initial_sv_eer", eer0);
  Emit(out, "final_sv_eer", eer1);
  if (!a.history.empty()) {
    auto h = detail::OpenOut(a.history);
    for (std::size_t i = 0; i < r.history.size(); ++i) h << i << ' ' << FormatScore(r.history[i]) << '\n';
  }
  if (!a.model_out.empty()) {
    auto write = [](const std::string& path, const Matrix& m, const char* prefix) {
      std::vector<std::string> ids;
      for (std::size_t i = 0; i < m.rows(); ++i) ids.push_back(prefix + std::to_string(i));
      auto f = detail::OpenOut(path);
      f << "# " << m.rows() << " x " << m.cols() << '\n';
      WriteNamedRows(f, ids, m);
    };
    write(a.model_out + ".projection.txt", r.model.projection, "proj");
    write(a.model_out + ".classes.txt", r.model.class_weights, "class");
  }
  return kExitOk;
}

inline int RunGradCheck(const GradArgs& a, std::ostream& out, std::ostream&) {
  Rng rng(a.seed);
  const SphereFaceConfig sf;
  const CircleConfig cc;
  double worst_sf = 0.0, worst_circle = 0.0, worst_combined = 0.0;
  std::size_t failed = 0;
  const bool all = a.loss == "all";
  for (std::size_t t = 0; t < a.instances; ++t) {
    const LossBatch batch = RandomLossBatch(rng, 8, 4, 8);
    if (all || a.loss == "sphereface") {
      const auto r = CheckSphereFaceGradients(batch, sf, a.opts);
      worst_sf = std::max(worst_sf, r.max_rel_error);
      failed += !r.passed();
    }
    if (all || a.loss == "circle") {
      const auto r = CheckCircleGradients(MinePairs(batch.embeddings, batch.labels), cc, a.opts);
      worst_circle = std::max(worst_circle, r.max_rel_error);
      failed += !r.passed();
    }
    if (all || a.loss == "combined") {
      const auto r = CheckCombinedGradients(batch, sf, cc, a.opts);
      worst_combined = std::max(worst_combined, r.max_rel_error);
      failed += !r.passed();
    }
  }
  out << "instances=" << a.instances << '\n';
  auto emit = [&](const char* key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3e", v);
    out << key << '=' << buf << '\n';
  };
  if (all || a.loss == "sphereface") emit("sphereface_max_rel_error", worst_sf);
  if (all || a.loss == "circle") emit("circle_max_rel_error", worst_circle);
  if (all || a.loss == "combined") emit("combined_max_rel_error", worst_combined);
  out << "failed=" << failed << '\n';
  return failed == 0 ? kExitOk : kExitNumericFailure;
}

}  // namespace cli

/// Entry point of the `sasv` tool. Exit codes: 0 success, 1 usage error,
/// 2 data error, 3 numeric failure.
inline int RunCli(int argc, const char* const* argv, std::ostream& out = std::cout,
                  std::ostream& err = std::cerr) {
  CLI::App app{
      "Spoofing-aware speaker verification scoring, losses and evaluation.\n"
      "Score files hold `<enroll_id> <test_id> <score> [label]` lines (the label column is\n"
      "optional); trial files hold `<enroll_id> <test_id> [label]`.",
      "sasv"};
  app.require_subcommand(1);

  cli::ScoreArgs score;
  auto* s_score = app.add_subcommand("score", "Cosine-score trials, optionally with top-K AS-Norm");
  s_score->add_option("--trials", score.trials, "Trial list")->required();
  s_score->add_option("--embeddings", score.embeddings, "Embeddings (text or binary)")->required();
  s_score->add_option("--cohort", score.cohort, "Imposter cohort embeddings; enables AS-Norm");
  s_score->add_option("--top-k", score.top_k, "Cohort size used per side")->check(CLI::PositiveNumber)->capture_default_str();
  s_score->add_option("--min-sigma", score.min_sigma, "Floor on cohort standard deviation")->capture_default_str();
  s_score->add_option("--out", score.out, "Output score file")->required();

  cli::CascadeArgs cascade;
  auto* s_cascade = app.add_subcommand("cascade", "Gate ASV scores with spoof-detector scores");
  s_cascade->add_option("--sd-scores", cascade.sd_scores, "Spoof-detector scores (higher = bona fide)")->required();
  s_cascade->add_option("--asv-scores", cascade.asv_scores, "Speaker-verification scores")->required();
  s_cascade->add_option("--threshold", cascade.threshold, "Reject when SD score < threshold")->required();
  s_cascade->add_option("--reject-score", cascade.reject_score, "Score assigned to rejected trials")->capture_default_str();
  s_cascade->add_option("--out", cascade.out, "Output score file")->required();

  cli::EnsembleArgs ensemble;
  auto* s_ens = app.add_subcommand("ensemble", "Weighted mean of several score files");
  s_ens->add_option("--in", ensemble.inputs, "Comma-separated score files")->required()->delimiter(',');
  s_ens->add_option("--weights", ensemble.weights, "Comma-separated weights (default equal)")->delimiter(',');
  s_ens->add_option("--out", ensemble.out, "Output score file")->required();

  cli::EvalArgs eval;
  auto* s_eval = app.add_subcommand("eval", "SV-EER, SPF-EER and minimum a-DCF of a labeled score file");
  s_eval->add_option("--scores", eval.scores, "Score file")->required();
  s_eval->add_option("--trials", eval.trials, "Trial list supplying labels for unlabeled scores");
  s_eval->add_option("--adcf-config", eval.adcf_config, "key=value a-DCF costs and priors");
  s_eval->add_flag("--table", eval.table, "Human-readable table instead of key=value lines");

  cli::MoeArgs moe;
  auto* s_moe = app.add_subcommand("moe-demo", "Top-k mixture-of-experts fusion of layer embeddings");
  s_moe->add_option("--layers", moe.layers, "One row per layer, final layer last")->required();
  s_moe->add_option("--gate", moe.gate, "One row per non-final layer: D weights then the bias")->required();
  s_moe->add_option("--top-k", moe.top_k, "Layers kept by the gate")->capture_default_str();
  s_moe->add_flag("--unweighted", moe.unweighted, "Sum selected layers without gate weights");

  cli::SynthArgs synth;
  auto* s_synth = app.add_subcommand("gen-synth", "Generate synthetic speaker clusters");
  s_synth->add_option("--speakers", synth.data.n_speakers)->capture_default_str();
  s_synth->add_option("--utts", synth.data.utts_per_speaker)->capture_default_str();
  s_synth->add_option("--dim", synth.data.dim)->capture_default_str();
  s_synth->add_option("--noise", synth.data.noise)->capture_default_str();
  s_synth->add_option("--nuisance-rank", synth.data.nuisance_rank)->capture_default_str();
  s_synth->add_option("--nuisance-scale", synth.data.nuisance_scale)->capture_default_str();
  s_synth->add_option("--seed", synth.data.seed)->capture_default_str();
  s_synth->add_option("--out", synth.out, "Output embedding file")->required();
  s_synth->add_option("--format", synth.format)->check(CLI::IsMember({"text", "binary"}))->capture_default_str();
  s_synth->add_option("--trials-out", synth.trials_out, "Also write a balanced labeled trial list");
  s_synth->add_option("--trials", synth.n_trials, "Number of trials for --trials-out")->capture_default_str();
  s_synth->add_option("--trial-seed", synth.trial_seed)->capture_default_str();

  cli::TrainArgs train;
  auto* s_train = app.add_subcommand("train-toy", "Train the linear toy model with SphereFace + Circle loss");
  s_train->add_option("--speakers", train.data.n_speakers)->capture_default_str();
  s_train->add_option("--utts", train.data.utts_per_speaker)->capture_default_str();
  s_train->add_option("--dim", train.data.dim)->capture_default_str();
  s_train->add_option("--noise", train.data.noise)->capture_default_str();
  s_train->add_option("--nuisance-rank", train.data.nuisance_rank)->capture_default_str();
  s_train->add_option("--nuisance-scale", train.data.nuisance_scale)->capture_default_str();
  s_train->add_option("--data-seed", train.data.seed)->capture_default_str();
  s_train->add_option("--holdout", train.holdout, "Held-out utterances per speaker")->capture_default_str();
  s_train->add_option("--emb-dim", train.emb_dim)->capture_default_str();
  s_train->add_option("--init-seed", train.init_seed)->capture_default_str();
  s_train->add_option("--steps", train.train.steps)->capture_default_str();
  s_train->add_option("--lr", train.train.learning_rate)->capture_default_str();
  s_train->add_option("--scale", train.train.sphereface.scale)->capture_default_str();
  s_train->add_option("--margin", train.train.sphereface.margin)->capture_default_str();
  s_train->add_option("--circle-weight", train.train.circle.weight)->capture_default_str();
  s_train->add_option("--circle-gamma", train.train.circle.gamma)->capture_default_str();
  s_train->add_option("--circle-margin", train.train.circle.margin)->capture_default_str();
  s_train->add_option("--P", train.pk.p, "Speakers per batch")->capture_default_str();
  s_train->add_option("--K", train.pk.k, "Utterances per speaker per batch")->capture_default_str();
  s_train->add_option("--pk-seed", train.pk.seed)->capture_default_str();
  s_train->add_option("--eval-trials", train.eval_trials)->capture_default_str();
  s_train->add_option("--eval-seed", train.eval_seed)->capture_default_str();
  s_train->add_option("--history", train.history, "Write `step loss` lines");
  s_train->add_option("--model-out", train.model_out, "Write <prefix>.projection.txt and <prefix>.classes.txt");

  cli::GradArgs grad;
  auto* s_grad = app.add_subcommand("grad-check", "Finite-difference check of the loss gradients");
  s_grad->add_option("--instances", grad.instances)->capture_default_str();
  s_grad->add_option("--seed", grad.seed)->capture_default_str();
  s_grad->add_option("--loss", grad.loss)->check(CLI::IsMember({"all", "sphereface", "circle", "combined"}))->capture_default_str();
  s_grad->add_option("--step", grad.opts.step)->capture_default_str();
  s_grad->add_option("--tol", grad.opts.tolerance)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (s_score->parsed()) return cli::RunScore(score, out, err);
    if (s_cascade->parsed()) return cli::RunCascade(cascade, out, err);
    if (s_ens->parsed()) return cli::RunEnsemble(ensemble, out, err);
    if (s_eval->parsed()) return cli::RunEval(eval, out, err);
    if (s_moe->parsed()) return cli::RunMoe(moe, out, err);
    if (s_synth->parsed()) return cli::RunSynth(synth, out, err);
    if (s_train->parsed()) return cli::RunTrain(train, out, err);
    if (s_grad->parsed()) return cli::RunGradCheck(grad, out, err);
  } catch (const Error& e) {
    err << "sasv: " << e.what() << '\n';
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    err << "sasv: " << e.what() << '\n';
    return kExitDataError;
  }
  return kExitUsage;
}

}  // namespace sasv

#endif  // SASV_CLI_HPP_
