#include "ssg/stream.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

namespace ssg {

std::string to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::PairLevel: return "pair_level";
    case EvalMode::Split: return "split";
    case EvalMode::Together: return "together";
    case EvalMode::Cps: return "cps";
    case EvalMode::Cpd: return "cpd";
    case EvalMode::Lead3: return "lead3";
    case EvalMode::TextRank: return "textrank";
  }
  return "?";
}

EvalMode parse_eval_mode(const std::string& s) {
  for (auto m : {EvalMode::PairLevel, EvalMode::Split, EvalMode::Together, EvalMode::Cps, EvalMode::Cpd, EvalMode::Lead3,
                 EvalMode::TextRank}) {
    if (to_string(m) == s) return m;
  }
  throw std::invalid_argument(fmt::format("unknown eval mode '{}'", s));
}

bool needs_model(EvalMode mode) { return mode != EvalMode::Lead3 && mode != EvalMode::TextRank; }
bool single_input(EvalMode mode) { return mode == EvalMode::Cps || mode == EvalMode::Cpd; }

TokenIds ModelSummarizer::summarize(std::span<const int> document, std::span<const int> previous) {
  Example ex{model_.clip_document(document), model_.clip_previous(previous), {}};
  ModelScorer scorer(model_, model_.prepare(ex));
  return decode(scorer, options_);
}

TokenIds concat_ids(std::span<const TokenIds> parts) {
  TokenIds out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

namespace {

std::string join_texts(std::span<const std::string> texts) {
  std::string out;
  for (const auto& t : texts) {
    if (t.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

std::string decode_text(const Vocab& vocab, std::span<const int> ids) { return join_tokens(vocab.decode(ids)); }

Summarizer& require(Summarizer* s, EvalMode mode) {
  if (s == nullptr) throw std::invalid_argument(fmt::format("mode {} needs a model", to_string(mode)));
  return *s;
}

}  // namespace

std::vector<std::string> run_stream(const StreamRecord& stream, EvalMode mode, Summarizer* summarizer, const Vocab& vocab) {
  std::vector<std::string> out;
  std::vector<TokenIds> docs, golds;
  for (const auto& p : stream.pairs) {
    docs.push_back(vocab.encode(tokenize(p.document)));
    golds.push_back(vocab.encode(tokenize(p.summary)));
  }
  const TokenIds none;
  switch (mode) {
    case EvalMode::Lead3:
      for (const auto& p : stream.pairs) out.push_back(lead3(p.document));
      break;
    case EvalMode::TextRank:
      for (const auto& p : stream.pairs) out.push_back(textrank(p.document));
      break;
    case EvalMode::Together:
      out.push_back(decode_text(vocab, require(summarizer, mode).summarize(concat_ids(docs), none)));
      break;
    case EvalMode::PairLevel:
      for (std::size_t k = 0; k < docs.size(); ++k) {
        const auto history = concat_ids(std::span(golds).first(k));
        out.push_back(decode_text(vocab, require(summarizer, mode).summarize(docs[k], history)));
      }
      break;
    case EvalMode::Split: {
      std::vector<TokenIds> generated;
      for (std::size_t k = 0; k < docs.size(); ++k) {
        generated.push_back(require(summarizer, mode).summarize(docs[k], concat_ids(generated)));
        out.push_back(decode_text(vocab, generated.back()));
      }
      break;
    }
    case EvalMode::Cps:
    case EvalMode::Cpd:
      for (std::size_t k = 0; k < docs.size(); ++k) {
        TokenIds input = k == 0 ? TokenIds{} : mode == EvalMode::Cps ? concat_ids(std::span(golds).first(k)) : docs[k - 1];
        input.insert(input.end(), docs[k].begin(), docs[k].end());
        out.push_back(decode_text(vocab, require(summarizer, mode).summarize(input, none)));
      }
      break;
  }
  return out;
}

std::string lead3(const std::string& document) {
  auto sentences = sentence_split(document);
  if (sentences.size() > 3) sentences.resize(3);
  return join_texts(sentences);
}

std::vector<double> pagerank(std::span<const double> weights, std::size_t n, double damping, double tol, std::size_t max_iter) {
  if (weights.size() != n * n) throw std::invalid_argument("pagerank: weight matrix is not n x n");
  if (n == 0) return {};
  std::vector<double> out_weight(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out_weight[i] += weights[i * n + j];
  const double nd = static_cast<double>(n);
  std::vector<double> score(n, 1.0 / nd), next(n);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    double dangling = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (out_weight[j] == 0.0) dangling += score[j];
    for (std::size_t i = 0; i < n; ++i) {
      double in = dangling / nd;
      for (std::size_t j = 0; j < n; ++j) {
        if (out_weight[j] > 0.0) in += weights[j * n + i] / out_weight[j] * score[j];
      }
      next[i] = (1.0 - damping) / nd + damping * in;
    }
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change += std::abs(next[i] - score[i]);
    score.swap(next);
    if (change < tol) break;
  }
  return score;
}

namespace {

std::unordered_map<std::string, double> word_counts(const std::string& sentence) {
  std::unordered_map<std::string, double> counts;
  for (auto& tok : tokenize(sentence)) {
    if (tok.size() == 1 && std::ispunct(static_cast<unsigned char>(tok[0]))) continue;
    counts[tok] += 1.0;
  }
  return counts;
}

double cosine(const std::unordered_map<std::string, double>& a, const std::unordered_map<std::string, double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [k, v] : a) {
    na += v * v;
    if (auto it = b.find(k); it != b.end()) dot += v * it->second;
  }
  for (const auto& [k, v] : b) nb += v * v;
  return na == 0.0 || nb == 0.0 ? 0.0 : dot / std::sqrt(na * nb);
}

}  // namespace

TextRankResult textrank_detail(const std::string& document, std::size_t k) {
  if (k == 0) throw std::invalid_argument("textrank: k must be at least 1");
  TextRankResult r;
  r.sentences = sentence_split(document);
  const std::size_t n = r.sentences.size();
  if (n == 0) return r;
  std::vector<std::unordered_map<std::string, double>> counts;
  for (const auto& s : r.sentences) counts.push_back(word_counts(s));
  std::vector<double> w(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) w[i * n + j] = cosine(counts[i], counts[j]);
  r.scores = pagerank(w, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r.scores[a] > r.scores[b]; });
  order.resize(std::min(k, n));
  std::sort(order.begin(), order.end());
  r.selected = order;
  std::vector<std::string> picked;
  for (auto i : order) picked.push_back(r.sentences[i]);
  r.summary = join_texts(picked);
  return r;
}

std::string textrank(const std::string& document, std::size_t k) { return textrank_detail(document, k).summary; }

EvalResult evaluate(std::span<const StreamRecord> streams, EvalMode mode, Summarizer* summarizer, const Vocab& vocab) {
  EvalResult result;
  result.mode = mode;
  for (const auto& s : streams) {
    auto generated = run_stream(s, mode, summarizer, vocab);
    std::vector<std::string> golds;
    for (const auto& p : s.pairs) golds.push_back(p.summary);
    if (mode != EvalMode::Together) {
      for (std::size_t k = 0; k < s.pairs.size(); ++k) {
        result.pairs.push_back({s.id, k, generated[k], golds[k], rouge_all(tokenize(generated[k]), tokenize(golds[k]))});
      }
    }
    result.streams.push_back({s.id, s.pairs.size(), rouge_all(tokenize(join_texts(generated)), tokenize(join_texts(golds)))});
    result.generated.push_back(std::move(generated));
  }
  return result;
}

DsDpResult ds_dp_analysis(std::span<const StreamRecord> streams, std::span<const std::vector<std::string>> generated) {
  if (streams.size() != generated.size()) throw std::invalid_argument("ds_dp_analysis: generated summaries do not match streams");
  DsDpResult result;
  for (std::size_t i = 0; i < streams.size(); ++i) {
    const auto& s = streams[i];
    if (generated[i].size() != s.pairs.size()) {
      throw std::invalid_argument(fmt::format("ds_dp_analysis: stream {} has {} pairs but {} summaries", s.id, s.pairs.size(),
                                              generated[i].size()));
    }
    std::vector<std::string> history;
    for (std::size_t k = 0; k < s.pairs.size(); ++k) {
      if (k > 0) {
        const auto doc = tokenize(s.pairs[k].document);
        result.rows.push_back({s.id, k, mean_rouge(tokenize(generated[i][k]), doc), mean_rouge(tokenize(join_texts(history)), doc)});
      }
      history.push_back(s.pairs[k].summary);
    }
  }
  std::vector<double> ds, dp;
  for (const auto& r : result.rows) {
    ds.push_back(r.ds);
    dp.push_back(r.dp);
  }
  result.correlation = pearson(ds, dp);
  return result;
}

std::vector<AccumulationRow> error_accumulation(std::span<const StreamRecord> streams,
                                                const std::map<std::string, std::vector<std::vector<std::string>>>& by_mode) {
  std::vector<AccumulationRow> rows;
  for (const auto& [mode, generated] : by_mode) {
    if (generated.size() != streams.size()) throw std::invalid_argument(fmt::format("error_accumulation: mode {} is misaligned", mode));
    std::map<std::size_t, std::vector<RougeSet>> groups;
    for (std::size_t i = 0; i < streams.size(); ++i) {
      std::vector<std::string> golds;
      for (const auto& p : streams[i].pairs) golds.push_back(p.summary);
      groups[streams[i].pairs.size()].push_back(rouge_all(tokenize(join_texts(generated[i])), tokenize(join_texts(golds))));
    }
    for (const auto& [length, sets] : groups) {
      AccumulationRow row{mode, length, sets.size(), {}};
      const double n = static_cast<double>(sets.size());
      for (const auto& s : sets) {
        for (auto [dst, src] : {std::pair{&row.rouge.rouge1, &s.rouge1}, std::pair{&row.rouge.rouge2, &s.rouge2},
                                std::pair{&row.rouge.rougeL, &s.rougeL}}) {
          dst->precision += src->precision / n;
          dst->recall += src->recall / n;
          dst->f1 += src->f1 / n;
        }
      }
      rows.push_back(row);
    }
  }
  return rows;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

void write_pairs_csv(std::ostream& out, const EvalResult& result) {
  out << "stream,step,mode,rouge1,rouge2,rougeL,generated,reference\n";
  for (const auto& p : result.pairs) {
    out << fmt::format("{},{},{},{:.6f},{:.6f},{:.6f},{},{}\n", csv_field(p.stream_id), p.step, to_string(result.mode), p.rouge.rouge1.f1,
                       p.rouge.rouge2.f1, p.rouge.rougeL.f1, csv_field(p.generated), csv_field(p.reference));
  }
}

void write_streams_csv(std::ostream& out, const EvalResult& result) {
  out << "stream,length,mode,rouge1,rouge2,rougeL\n";
  for (const auto& s : result.streams) {
    out << fmt::format("{},{},{},{:.6f},{:.6f},{:.6f}\n", csv_field(s.stream_id), s.length, to_string(result.mode), s.rouge.rouge1.f1,
                       s.rouge.rouge2.f1, s.rouge.rougeL.f1);
  }
}

void write_dsdp_csv(std::ostream& out, const DsDpResult& result) {
  out << "stream,step,ds,dp\n";
  for (const auto& r : result.rows) out << fmt::format("{},{},{:.6f},{:.6f}\n", csv_field(r.stream_id), r.step, r.ds, r.dp);
  if (result.correlation) {
    out << fmt::format("# pearson,{:.6f}\n", *result.correlation);
  } else {
    out << "# pearson,undefined\n";
  }
}

void write_accumulation_csv(std::ostream& out, std::span<const AccumulationRow> rows) {
  out << "mode,length,streams,rouge1,rouge2,rougeL\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{:.6f},{:.6f},{:.6f}\n", r.mode, r.length, r.streams, r.rouge.rouge1.f1, r.rouge.rouge2.f1,
                       r.rouge.rougeL.f1);
  }
}

}  // namespace ssg
