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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gtest/gtest.h"
#include "sasv/cli.hpp"
#include "support/random_data.hpp"

namespace sasv {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sasv_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string Path(const std::string& name) const { return (dir_ / name).string(); }

  int Run(std::vector<std::string> args) {
    args.insert(args.begin(), "sasv");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return RunCli(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  static void WriteFile(const std::string& path, const std::string& text) {
    std::ofstream(path) << text;
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(CliTest, EvalPerfectSystem) {
  WriteFile(Path("s.txt"),
            "e t1 0.9 target\ne t2 0.8 target\ne n1 0.1 nontarget\ne n2 0.2 nontarget\n"
            "e s1 -0.5 spoof\ne s2 0.0 spoof\n");
  ASSERT_EQ(Run({"eval", "--scores", Path("s.txt")}), 0) << err_.str();
  const std::string out = out_.str();
  EXPECT_NE(out.find("\nmin_a_dcf=0.000000\n"), std::string::npos) << out;
  EXPECT_NE(out.find("\nsv_eer=0.000000\n"), std::string::npos);
  EXPECT_NE(out.find("\nspf_eer=0.000000\n"), std::string::npos);
  EXPECT_NE(out.find("\nnormalized_a_dcf=0.000000\n"), std::string::npos);
}

TEST_F(CliTest, EvalLabelsFromTrialFile) {
  WriteFile(Path("s.txt"), "e t1 0.9\ne n1 0.1\n");
  WriteFile(Path("t.txt"), "e t1 target\ne n1 nontarget\n");
  ASSERT_EQ(Run({"eval", "--scores", Path("s.txt"), "--trials", Path("t.txt")}), 0) << err_.str();
  EXPECT_NE(out_.str().find("sv_eer=0.000000"), std::string::npos);
  EXPECT_NE(err_.str().find("a-DCF skipped"), std::string::npos);
  EXPECT_EQ(Run({"eval", "--scores", Path("s.txt")}), kExitDataError);
}

TEST_F(CliTest, CascadeAllRejected) {
  WriteFile(Path("sd.txt"), "e t1 0.1\ne t2 -3\ne t3 0.49\n");
  WriteFile(Path("asv.txt"), "e t1 0.9 target\ne t2 0.3 nontarget\ne t3 0.7 spoof\n");
  ASSERT_EQ(Run({"cascade", "--sd-scores", Path("sd.txt"), "--asv-scores", Path("asv.txt"),
                 "--threshold", "0.5", "--out", Path("out.txt")}),
            0)
      << err_.str();
  const auto scores = ReadScores(Path("out.txt"));
  ASSERT_EQ(scores.size(), 3u);
  for (const auto& r : scores.records()) EXPECT_EQ(r.score, -5.0);
  EXPECT_EQ(scores[2].trial.label, TrialLabel::kSpoof);
}

TEST_F(CliTest, EnsembleWeights) {
  WriteFile(Path("a.txt"), "e t 1\n");
  WriteFile(Path("b.txt"), "e t 4\n");
  ASSERT_EQ(Run({"ensemble", "--in", Path("a.txt") + "," + Path("b.txt"), "--weights", "2,1", "--out",
                 Path("o.txt")}),
            0)
      << err_.str();
  EXPECT_EQ(ReadScores(Path("o.txt"))[0].score, 2.0);
  EXPECT_EQ(Run({"ensemble", "--in", Path("a.txt") + "," + Path("b.txt"), "--weights", "1", "--out",
                 Path("o.txt")}),
            kExitDataError);
}

// score -> cascade -> eval through files equals the same composition of
// library calls.
TEST_F(CliTest, PipelineMatchesLibrary) {
  SyntheticConfig cfg;
  cfg.n_speakers = 12;
  cfg.utts_per_speaker = 8;
  cfg.dim = 16;
  cfg.noise = 0.3;
  cfg.seed = 21;
  const auto ds = GenSynthetic(cfg);
  auto [enroll_part, cohort_part] = SplitUtterances(ds, 6);
  const auto embeddings = EmbedDataset(nullptr, enroll_part);
  const auto cohort_raw = EmbedDataset(nullptr, cohort_part);
  EmbeddingSet cohort;
  for (const auto& e : cohort_raw) cohort.add(Embedding("cohort-" + e.id(), {e.values().begin(), e.values().end()}));

  auto trials = BuildTrials(enroll_part, 300, 4);
  Rng rng(22);
  ScoreSet sd;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (trials[i].label == TrialLabel::kNontarget && i % 3 == 0) trials[i].label = TrialLabel::kSpoof;
    const double mean = trials[i].label == TrialLabel::kSpoof ? -1.0 : 1.0;
    sd.add(Trial(trials[i].enroll_id, trials[i].test_id), mean + rng.normal());
  }

  WriteEmbeddings(Path("emb.bin"), embeddings, EmbeddingFormat::kBinary);
  WriteEmbeddings(Path("cohort.txt"), cohort, EmbeddingFormat::kText);
  WriteTrials(Path("trials.txt"), trials);
  WriteScores(Path("sd.txt"), sd);

  ASSERT_EQ(Run({"score", "--trials", Path("trials.txt"), "--embeddings", Path("emb.bin"), "--cohort",
                 Path("cohort.txt"), "--top-k", "20", "--out", Path("asv.txt")}),
            0)
      << err_.str();
  ASSERT_EQ(Run({"cascade", "--sd-scores", Path("sd.txt"), "--asv-scores", Path("asv.txt"),
                 "--threshold", "0", "--out", Path("sasv.txt")}),
            0)
      << err_.str();
  ASSERT_EQ(Run({"eval", "--scores", Path("sasv.txt")}), 0) << err_.str();

  const auto asv = ScoreTrials(trials, embeddings, &cohort, {20, 1e-8});
  const auto sasv = Cascade(sd, asv, {0.0, -5.0});
  EXPECT_TRUE(testdata::SameScores(ReadScores(Path("sasv.txt")), sasv));
  const auto sv = SvEer(sasv);
  const auto spf = SpfEer(sasv);
  const auto adcf = MinADcf(sasv);
  std::ostringstream expect;
  for (auto [k, v] : std::vector<std::pair<std::string, double>>{
           {"sv_eer", sv.eer}, {"sv_eer_threshold", sv.threshold}, {"spf_eer", spf.eer},
           {"spf_eer_threshold", spf.threshold}, {"min_a_dcf", adcf.min_a_dcf},
           {"a_dcf_threshold", adcf.threshold}, {"normalized_a_dcf", adcf.normalized}})
    expect << k << '=' << FormatMetric(v) << '\n';
  const std::string out = out_.str();
  EXPECT_EQ(out.substr(out.find("sv_eer=")), expect.str());
}

TEST_F(CliTest, MoeDemo) {
  WriteFile(Path("layers.txt"), "l0 1 0\nl1 0 1\nl2 5 5\nfinal 1 1\n");
  WriteFile(Path("gate.txt"), "g0 0 0 3\ng1 0 0 2\ng2 0 0 -9\n");
  ASSERT_EQ(Run({"moe-demo", "--layers", Path("layers.txt"), "--gate", Path("gate.txt"), "--top-k", "2",
                 "--unweighted"}),
            0)
      << err_.str();
  EXPECT_NE(out_.str().find("selected=0,1\n"), std::string::npos) << out_.str();
  EXPECT_NE(out_.str().find("fused 2 2\n"), std::string::npos) << out_.str();
  EXPECT_EQ(Run({"moe-demo", "--layers", Path("layers.txt"), "--gate", Path("gate.txt"), "--top-k", "4"}),
            kExitDataError);
}

TEST_F(CliTest, GenSynthAndTrainAreDeterministic) {
  ASSERT_EQ(Run({"gen-synth", "--speakers", "4", "--utts", "5", "--out", Path("a.bin"), "--format",
                 "binary", "--trials-out", Path("t.txt"), "--trials", "20"}),
            0);
  ASSERT_EQ(Run({"gen-synth", "--speakers", "4", "--utts", "5", "--out", Path("b.bin"), "--format",
                 "binary"}),
            0);
  EXPECT_TRUE(testdata::SameBits(ReadEmbeddings(Path("a.bin")), ReadEmbeddings(Path("b.bin"))));
  EXPECT_EQ(ReadTrials(Path("t.txt")).size(), 20u);

  const std::vector<std::string> train{"train-toy", "--steps", "30", "--eval-trials", "200"};
  ASSERT_EQ(Run(train), 0) << err_.str();
  const std::string first = out_.str();
  ASSERT_EQ(Run(train), 0);
  EXPECT_EQ(out_.str(), first);
  EXPECT_NE(first.find("steps=30\n"), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(Run({}), kExitUsage);
  EXPECT_EQ(Run({"bogus"}), kExitUsage);
  EXPECT_EQ(Run({"eval"}), kExitUsage);
  EXPECT_EQ(Run({"--help"}), kExitOk);
  EXPECT_EQ(Run({"eval", "--scores", Path("missing.txt")}), kExitDataError);
  WriteFile(Path("bad.txt"), "e t 0.5\ne t2 oops\n");
  EXPECT_EQ(Run({"eval", "--scores", Path("bad.txt")}), kExitDataError);
  EXPECT_NE(err_.str().find(":2:"), std::string::npos) << err_.str();
  EXPECT_EQ(Run({"train-toy", "--steps", "20", "--lr", "1e300"}), kExitNumericFailure);
  EXPECT_EQ(Run({"grad-check", "--instances", "2", "--tol", "0"}), kExitNumericFailure);
  EXPECT_EQ(Run({"grad-check", "--instances", "2"}), kExitOk);
}

TEST_F(CliTest, ToolBinary) {
  WriteFile(Path("s.txt"), "e t1 0.9 target\ne n1 0.1 nontarget\ne s1 0.0 spoof\n");
  const std::string tool = SASV_TOOL_PATH;
  auto status = [](int raw) { return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1; };
  EXPECT_EQ(status(std::system((tool + " eval --scores " + Path("s.txt") + " > " + Path("o.txt")).c_str())), 0);
  std::ifstream in(Path("o.txt"));
  const std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_NE(out.find("min_a_dcf=0.000000"), std::string::npos);
  EXPECT_EQ(status(std::system((tool + " nope 2> /dev/null").c_str())), 1);
}

}  // namespace
}  // namespace sasv
