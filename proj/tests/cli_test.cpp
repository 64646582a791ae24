#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    dir = fs::path(testing::TempDir()) / (std::string("ssg_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  CliRun run(const std::string& args) {
    const auto err = dir / "stderr.txt";
    const std::string cmd = std::string(SSG_CLI) + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    return r;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  std::string p(const std::string& rel) const { return (dir / rel).string(); }

  std::string tiny_model_flags() const {
    return "--set d_model=8 --set n_heads=2 --set max_doc_len=120 --set max_prev_summ_len=120 --set max_decode_len=12";
  }

  void make_corpus() {
    ASSERT_EQ(run("corpus synth --episodes 6 --seed 3 --out " + p("raw")).code, 0);
    ASSERT_EQ(run("corpus build --in " + p("raw/episodes.jsonl") + " --out " + p("corpus")).code, 0);
  }
};

}  // namespace

TEST_F(CliTest, SynthAndBuildWriteOutputsAndConfig) {
  make_corpus();
  for (const char* f : {"raw/episodes.jsonl", "raw/truth.jsonl", "raw/config.txt", "corpus/streams.jsonl", "corpus/stats.csv",
                        "corpus/config.txt"})
    EXPECT_TRUE(fs::exists(p(f))) << f;
  EXPECT_NE(slurp(p("raw/config.txt")).find("synth_episodes = 6"), std::string::npos);
}

TEST_F(CliTest, SynthIsDeterministic) {
  ASSERT_EQ(run("corpus synth --episodes 5 --seed 11 --out " + p("a")).code, 0);
  ASSERT_EQ(run("corpus synth --episodes 5 --seed 11 --out " + p("b")).code, 0);
  EXPECT_EQ(slurp(p("a/episodes.jsonl")), slurp(p("b/episodes.jsonl")));
  ASSERT_EQ(run("corpus synth --episodes 5 --seed 12 --out " + p("c")).code, 0);
  EXPECT_NE(slurp(p("a/episodes.jsonl")), slurp(p("c/episodes.jsonl")));
}

TEST_F(CliTest, MalformedInputExitsTwoWithLine) {
  {
    std::ofstream f(p("bad.jsonl"));
    f << R"({"id": "a", "recap_paragraphs": ["x."], "summary": "x."})" << "\n{not json\n";
  }
  const auto r = run("corpus build --in " + p("bad.jsonl") + " --out " + p("o"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingFileAndBadFlagsExitTwo) {
  EXPECT_EQ(run("corpus stats --in " + p("nope.jsonl")).code, 2);
  EXPECT_EQ(run("train --corpus x").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("corpus synth --out " + p("s") + " --set no_such_key=1").code, 2);
}

TEST_F(CliTest, EmptyCorpusStatsWarns) {
  std::ofstream(p("empty.jsonl")).close();
  const auto r = run("corpus stats --in " + p("empty.jsonl") + " --out " + p("st"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  EXPECT_NE(slurp(p("st/stats.csv")).find("streams,0"), std::string::npos);
}

TEST_F(CliTest, TrainIsDeterministicAndEvalRuns) {
  make_corpus();
  const std::string train = "train --corpus " + p("corpus/streams.jsonl") + " --steps 5 --seed 4 " + tiny_model_flags();
  ASSERT_EQ(run(train + " --out " + p("m1")).code, 0);
  ASSERT_EQ(run(train + " --out " + p("m2")).code, 0);
  EXPECT_EQ(slurp(p("m1/model.ckpt")), slurp(p("m2/model.ckpt")));
  EXPECT_EQ(slurp(p("m1/train_log.csv")), slurp(p("m2/train_log.csv")));
  EXPECT_EQ(slurp(p("m1/train_log.csv")).rfind("step,L_s,L_d,L_g,D_pos,D_neg,grad_norm\n", 0), 0u);

  const auto eval = run("eval --mode split --analysis --corpus " + p("corpus/streams.jsonl") + " --model " + p("m1") + " --out " + p("e"));
  ASSERT_EQ(eval.code, 0) << eval.err;
  for (const char* f : {"e/pairs.csv", "e/streams.csv", "e/report.csv", "e/dsdp.csv", "e/accumulation.csv", "e/config.txt"})
    EXPECT_TRUE(fs::exists(p(f))) << f;
  EXPECT_NE(slurp(p("e/report.csv")).find("ssg,split,stream_rougeL"), std::string::npos);

  ASSERT_EQ(run("eval --mode lead3 --corpus " + p("corpus/streams.jsonl") + " --out " + p("l")).code, 0);
  ASSERT_EQ(run("report --eval " + p("e") + " " + p("l") + " --corpus " + p("corpus/streams.jsonl") + " --out " + p("r")).code, 0);
  EXPECT_EQ(slurp(p("r/report.txt")).rfind("PAPER-SCALE REFERENCE VALUES ARE NOT EXPECTED TO MATCH.", 0), 0u);
}

TEST_F(CliTest, CheckpointMismatchExitsFour) {
  make_corpus();
  const std::string base = "train --corpus " + p("corpus/streams.jsonl") + " --steps 0 --set max_doc_len=120 --set max_prev_summ_len=120";
  ASSERT_EQ(run(base + " --set d_model=8 --out " + p("a")).code, 0);
  ASSERT_EQ(run(base + " --set d_model=16 --out " + p("b")).code, 0);
  const auto r = run("eval --mode pair_level --corpus " + p("corpus/streams.jsonl") + " --model " + p("a") + " --checkpoint " +
                     p("b/model.ckpt") + " --out " + p("e"));
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("embed"), std::string::npos) << r.err;
}

TEST_F(CliTest, DivergenceExitsThreeAndKeepsCheckpoint) {
  make_corpus();
  const auto r = run("train --corpus " + p("corpus/streams.jsonl") + " --steps 50 --out " + p("m") + " " + tiny_model_flags() +
                     " --set lr_gen=1e300 --set clip_lo=-1e300 --set clip_hi=1e300");
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_TRUE(fs::exists(p("m/model.ckpt")));
}

TEST_F(CliTest, GradcheckPassesAndCatchesTamper) {
  EXPECT_EQ(run("gradcheck --loss all").code, 0);
  const auto r = run("gradcheck --loss ls --tamper out.wo");
  EXPECT_EQ(r.code, 5);
  EXPECT_NE(r.err.find("out.wo"), std::string::npos);
  EXPECT_EQ(run("gradcheck --set d_model=64").code, 2);
}

TEST_F(CliTest, InferPrintsASummary) {
  make_corpus();
  ASSERT_EQ(run("train --corpus " + p("corpus/streams.jsonl") + " --steps 2 --out " + p("m") + " " + tiny_model_flags()).code, 0);
  const auto r = run("infer --model " + p("m") + " --document \"the knight rides north.\"");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_FALSE(slurp(dir / "stdout.txt").empty());
}

TEST_F(CliTest, ZeroStepsWritesInitialCheckpointAndHeaderOnlyLog) {
  make_corpus();
  ASSERT_EQ(run("train --corpus " + p("corpus/streams.jsonl") + " --steps 0 --out " + p("m") + " " + tiny_model_flags()).code, 0);
  EXPECT_TRUE(fs::exists(p("m/model.ckpt")));
  EXPECT_EQ(slurp(p("m/train_log.csv")), "step,L_s,L_d,L_g,D_pos,D_neg,grad_norm\n");
}

TEST_F(CliTest, SinglePairSplitEqualsPairLevel) {
  make_corpus();
  ASSERT_EQ(run("corpus build --in " + p("raw/episodes.jsonl") + " --max-pairs 1 --out " + p("one")).code, 0);
  ASSERT_EQ(run("train --corpus " + p("corpus/streams.jsonl") + " --steps 3 --out " + p("m") + " " + tiny_model_flags()).code, 0);
  const std::string common = " --corpus " + p("one/streams.jsonl") + " --model " + p("m");
  ASSERT_EQ(run("eval --mode split" + common + " --out " + p("s")).code, 0);
  ASSERT_EQ(run("eval --mode pair_level" + common + " --out " + p("pl")).code, 0);
  auto split = slurp(p("s/pairs.csv"));
  const auto at = split.find(",split,");
  ASSERT_NE(at, std::string::npos);
  split.replace(at, 7, ",pair_level,");
  EXPECT_EQ(split, slurp(p("pl/pairs.csv")));
}

TEST_F(CliTest, OverfitRecipeMemorizesTenPairs) {
  ASSERT_EQ(run("corpus synth --seed 7 --episodes 6 --out " + p("raw")).code, 0);
  ASSERT_EQ(run("corpus build --in " + p("raw/episodes.jsonl") + " --max-pairs 10 --out " + p("corpus")).code, 0);
  const auto r = run("train --corpus " + p("corpus/streams.jsonl") +
                     " --seed 1 --steps 10000 --target-ls 0.1 --set d_model=32 --set n_heads=2 --set min_decode_len=1"
                     " --set max_decode_len=40 --set max_doc_len=120 --set max_prev_summ_len=120 --out " + p("model"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = slurp(dir / "stdout.txt");
  const auto at = out.find("exact greedy decodes ");
  ASSERT_NE(at, std::string::npos) << out;
  EXPECT_NE(out.find("reached)"), std::string::npos) << out;
  const int exact = std::stoi(out.substr(at + 21));
  EXPECT_GE(exact, 8) << out;
  EXPECT_NE(out.find("/10"), std::string::npos) << out;
}
