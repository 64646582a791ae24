#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "ssg/stream.hpp"

#include "oracles.hpp"

namespace ssg {
namespace {

/// Records its inputs and answers with a digest of them.
class Recorder : public Summarizer {
 public:
  TokenIds summarize(std::span<const int> document, std::span<const int> previous) override {
    docs.emplace_back(document.begin(), document.end());
    prevs.emplace_back(previous.begin(), previous.end());
    const int first = document.empty() ? Vocab::kNumSpecial : document.front();
    return {first, static_cast<int>(Vocab::kNumSpecial + previous.size() % 5)};
  }
  std::vector<TokenIds> docs, prevs;
};

struct Fixture {
  Vocab vocab;
  StreamRecord stream;
  Fixture() {
    stream = {"s1", {{"alpha beta .", "one", 0}, {"gamma delta .", "two three", 0}, {"epsilon .", "four", 0}}};
    std::vector<Tokens> texts{tokenize("alpha beta gamma delta epsilon one two three four .")};
    vocab = Vocab::build(texts, 1);
  }
  TokenIds ids(const std::string& s) const { return vocab.encode(tokenize(s)); }
};

TEST(EvalModes, NamesRoundTrip) {
  for (auto m : {EvalMode::PairLevel, EvalMode::Split, EvalMode::Together, EvalMode::Cps, EvalMode::Cpd, EvalMode::Lead3,
                 EvalMode::TextRank})
    EXPECT_EQ(parse_eval_mode(to_string(m)), m);
  EXPECT_THROW(parse_eval_mode("bogus"), std::invalid_argument);
  EXPECT_FALSE(needs_model(EvalMode::Lead3));
  EXPECT_TRUE(needs_model(EvalMode::Split));
  EXPECT_TRUE(single_input(EvalMode::Cpd));
  EXPECT_FALSE(single_input(EvalMode::PairLevel));
}

TEST(RunStream, PairLevelFeedsGoldHistory) {
  Fixture f;
  Recorder r;
  const auto out = run_stream(f.stream, EvalMode::PairLevel, &r, f.vocab);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_TRUE(r.prevs[0].empty());
  EXPECT_EQ(r.prevs[1], f.ids("one"));
  EXPECT_EQ(r.prevs[2], f.ids("one two three"));
  EXPECT_EQ(r.docs[1], f.ids("gamma delta ."));
}

TEST(RunStream, SplitFeedsGeneratedHistory) {
  Fixture f;
  Recorder r;
  const auto out = run_stream(f.stream, EvalMode::Split, &r, f.vocab);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_TRUE(r.prevs[0].empty());
  const TokenIds g0{f.ids("alpha").front(), Vocab::kNumSpecial};
  EXPECT_EQ(r.prevs[1], g0);
  EXPECT_EQ(r.prevs[2].size(), 4u);
  EXPECT_EQ(out[0], join_tokens(f.vocab.decode(g0)));
}

TEST(RunStream, TogetherMakesOneCall) {
  Fixture f;
  Recorder r;
  const auto out = run_stream(f.stream, EvalMode::Together, &r, f.vocab);
  EXPECT_EQ(out.size(), 1u);
  ASSERT_EQ(r.docs.size(), 1u);
  EXPECT_EQ(r.docs[0], f.ids("alpha beta . gamma delta . epsilon ."));
  EXPECT_TRUE(r.prevs[0].empty());
}

TEST(RunStream, ConcatenatedBaselinesBuildInputs) {
  Fixture f;
  Recorder cps, cpd;
  run_stream(f.stream, EvalMode::Cps, &cps, f.vocab);
  run_stream(f.stream, EvalMode::Cpd, &cpd, f.vocab);
  EXPECT_EQ(cps.docs[0], f.ids("alpha beta ."));
  EXPECT_EQ(cps.docs[2], f.ids("one two three epsilon ."));
  EXPECT_EQ(cpd.docs[2], f.ids("gamma delta . epsilon ."));
  for (const auto& p : cps.prevs) EXPECT_TRUE(p.empty());
  for (const auto& p : cpd.prevs) EXPECT_TRUE(p.empty());
}

TEST(RunStream, ModelModesNeedASummarizer) {
  Fixture f;
  EXPECT_THROW(run_stream(f.stream, EvalMode::Split, nullptr, f.vocab), std::invalid_argument);
  EXPECT_NO_THROW(run_stream(f.stream, EvalMode::Lead3, nullptr, f.vocab));
}

struct ModelFixture {
  Vocab vocab;
  std::unique_ptr<SsgModel> model;
  std::vector<StreamRecord> streams;
  ModelFixture() {
    std::mt19937_64 rng(9);
    std::vector<std::string> words;
    for (int i = 0; i < 20; ++i) words.push_back("w" + std::to_string(i));
    auto sentence = [&](std::size_t n) {
      std::string s;
      for (std::size_t i = 0; i < n; ++i) s += words[rng() % words.size()] + " ";
      return s + ".";
    };
    for (int s = 0; s < 4; ++s) {
      StreamRecord r{"s" + std::to_string(s), {}};
      for (int k = 0; k < 4; ++k) r.pairs.push_back({sentence(8) + " " + sentence(6), sentence(5), 0});
      streams.push_back(r);
    }
    std::vector<Tokens> texts{words};
    texts.push_back({"."});
    vocab = Vocab::build(texts, 1);
    ModelConfig mc;
    mc.d_model = 8;
    mc.n_heads = 2;
    mc.vocab_size = vocab.size();
    mc.max_doc_len = 64;
    mc.max_prev_summ_len = 16;
    mc.min_decode_len = 2;
    mc.max_decode_len = 6;
    model = std::make_unique<SsgModel>(mc, 5);
  }
};

TEST(ModeContracts, SinglePairStreamsAgreeAcrossPairLevelAndSplit) {
  ModelFixture f;
  ModelSummarizer sum(*f.model, DecodeOptions{2, 6, 1});
  for (const auto& s : f.streams) {
    StreamRecord one{s.id, {s.pairs.front()}};
    EXPECT_EQ(run_stream(one, EvalMode::PairLevel, &sum, f.vocab), run_stream(one, EvalMode::Split, &sum, f.vocab));
  }
}

TEST(ModeContracts, SplitOutputDependsOnlyOnPrefix) {
  ModelFixture f;
  ModelSummarizer sum(*f.model, DecodeOptions{2, 6, 1});
  for (const auto& s : f.streams) {
    const auto full = run_stream(s, EvalMode::Split, &sum, f.vocab);
    for (std::size_t k = 1; k < s.pairs.size(); ++k) {
      StreamRecord prefix{s.id, {s.pairs.begin(), s.pairs.begin() + static_cast<std::ptrdiff_t>(k)}};
      const auto part = run_stream(prefix, EvalMode::Split, &sum, f.vocab);
      EXPECT_EQ(part, std::vector<std::string>(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(k)));
    }
  }
}

TEST(ModelSummarizer, ClipsLongInputs) {
  ModelFixture f;
  ModelSummarizer sum(*f.model, DecodeOptions{2, 6, 1});
  const TokenIds doc(100, f.vocab.id("w1")), prev(40, f.vocab.id("w2"));
  const auto out = sum.summarize(doc, prev);
  EXPECT_GE(out.size(), 2u);
  EXPECT_LE(out.size(), 6u);
}

TEST(Lead3, FirstThreeSentences) {
  EXPECT_EQ(lead3("A b. C d! E f? G h."), "A b. C d! E f?");
  EXPECT_EQ(lead3("Only one."), "Only one.");
  EXPECT_EQ(lead3(""), "");
}

// Dense power iteration on the column-stochastic Google matrix.
TEST(PageRank, SumsToOneAndMatchesPowerIteration) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 12;
    const auto w = oracle::random_graph(rng, n);
    const auto p = pagerank(w, n, 0.85, 1e-12, 1000);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
    const auto q = oracle::pagerank_oracle(w, n, 0.85);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(p[i], q[i], 1e-9);
  }
}

TEST(PageRank, StarHubRanksFirst) {
  for (std::size_t n = 3; n <= 10; ++n) {
    std::vector<double> w(n * n, 0.0);
    for (std::size_t i = 1; i < n; ++i) w[i] = w[i * n] = 1.0;
    const auto p = pagerank(w, n);
    const auto q = oracle::pagerank_oracle(w, n, 0.85);
    EXPECT_EQ(std::max_element(p.begin(), p.end()) - p.begin(), 0);
    EXPECT_EQ(std::max_element(q.begin(), q.end()) - q.begin(), 0);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(p[i], q[i], 1e-5);
  }
}

TEST(PageRank, EmptyGraphIsUniform) {
  const std::vector<double> w(16, 0.0);
  for (double x : pagerank(w, 4)) EXPECT_DOUBLE_EQ(x, 0.25);
  EXPECT_THROW(pagerank(std::vector<double>(5, 0.0), 2), std::invalid_argument);
}

TEST(TextRank, PicksCentralSentencesInDocumentOrder) {
  const std::string doc =
      "Cats chase mice in the barn. The weather was cold. Cats and mice live in the barn. Mice hide from cats in the barn. "
      "A train left early.";
  const auto r = textrank_detail(doc, 2);
  ASSERT_EQ(r.sentences.size(), 5u);
  EXPECT_NEAR(std::accumulate(r.scores.begin(), r.scores.end(), 0.0), 1.0, 1e-9);
  ASSERT_EQ(r.selected.size(), 2u);
  EXPECT_TRUE(std::is_sorted(r.selected.begin(), r.selected.end()));
  for (auto i : r.selected) EXPECT_TRUE(i == 0 || i == 2 || i == 3);
  EXPECT_EQ(textrank("One sentence only.", 3), "One sentence only.");
}

TEST(Evaluate, PairAndStreamScores) {
  Fixture f;
  StreamRecord s{"x", {{"a b c. d e.", "a b c.", 0}, {"f g. h i.", "zzz", 0}}};
  const auto r = evaluate(std::vector<StreamRecord>{s}, EvalMode::Lead3, nullptr, f.vocab);
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.pairs[0].generated, "a b c. d e.");
  const auto want = rouge_all(tokenize("a b c. d e."), tokenize("a b c."));
  EXPECT_EQ(r.pairs[0].rouge.rouge1.f1, want.rouge1.f1);
  EXPECT_EQ(r.pairs[1].rouge.rouge1.f1, 0.0);
  ASSERT_EQ(r.streams.size(), 1u);
  const auto whole = rouge_all(tokenize("a b c. d e. f g. h i."), tokenize("a b c. zzz"));
  EXPECT_EQ(r.streams[0].rouge.rougeL.f1, whole.rougeL.f1);

  Recorder rec;
  const auto t = evaluate(std::vector<StreamRecord>{f.stream}, EvalMode::Together, &rec, f.vocab);
  EXPECT_TRUE(t.pairs.empty());
  EXPECT_EQ(t.streams.size(), 1u);
}

TEST(DsDp, UsesPreviousGoldSummariesAndSkipsFirstPair) {
  StreamRecord s{"x", {{"a b c d", "a b", 0}, {"c d e f", "c d", 0}, {"e f g h", "e f", 0}}};
  const std::vector<std::vector<std::string>> gen{{"a", "c d e f", "q"}};
  const auto r = ds_dp_analysis(std::vector<StreamRecord>{s}, gen);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].step, 1u);
  EXPECT_DOUBLE_EQ(r.rows[0].ds, 1.0);
  EXPECT_DOUBLE_EQ(r.rows[0].dp, mean_rouge(tokenize("a b"), tokenize("c d e f")));
  EXPECT_DOUBLE_EQ(r.rows[1].dp, mean_rouge(tokenize("a b c d"), tokenize("e f g h")));
  EXPECT_THROW(ds_dp_analysis(std::vector<StreamRecord>{s}, std::vector<std::vector<std::string>>{{"a"}}), std::invalid_argument);
}

TEST(ErrorAccumulation, GroupsByStreamLength) {
  std::vector<StreamRecord> streams{{"a", {{"d", "x y", 0}}}, {"b", {{"d", "x y", 0}, {"d", "z", 0}}}, {"c", {{"d", "q", 0}}}};
  std::map<std::string, std::vector<std::vector<std::string>>> by_mode{{"split", {{"x y"}, {"x y", "z"}, {"r"}}}};
  const auto rows = error_accumulation(streams, by_mode);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].length, 1u);
  EXPECT_EQ(rows[0].streams, 2u);
  EXPECT_DOUBLE_EQ(rows[0].rouge.rouge1.f1, 0.5);
  EXPECT_EQ(rows[1].length, 2u);
  EXPECT_DOUBLE_EQ(rows[1].rouge.rouge1.f1, 1.0);
}

TEST(Csv, HeadersAndQuoting) {
  EvalResult r;
  r.mode = EvalMode::Split;
  r.pairs.push_back({"s,1", 0, "say \"hi\"", "ref", {}});
  std::ostringstream out;
  write_pairs_csv(out, r);
  EXPECT_EQ(out.str(), "stream,step,mode,rouge1,rouge2,rougeL,generated,reference\n\"s,1\",0,split,0.000000,0.000000,0.000000,\"say \"\"hi\"\"\",ref\n");
  std::ostringstream d;
  write_dsdp_csv(d, DsDpResult{});
  EXPECT_EQ(d.str(), "stream,step,ds,dp\n# pearson,undefined\n");
}

}  // namespace
}  // namespace ssg
