#include "ssg/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ssg/metrics.hpp"
#include "ssg/text.hpp"

namespace ssg {

namespace {

using Counts = std::unordered_map<std::string, double>;

Counts content_counts(std::span<const std::string> sentences) {
  Counts counts;
  for (const auto& s : sentences) {
    for (auto& tok : tokenize(s)) {
      if (tok.size() == 1 && std::ispunct(static_cast<unsigned char>(tok[0]))) continue;
      counts[tok] += 1.0;
    }
  }
  return counts;
}

double cosine(const Counts& a, const Counts& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [k, v] : a) {
    na += v * v;
    auto it = b.find(k);
    if (it != b.end()) dot += v * it->second;
  }
  for (const auto& [k, v] : b) nb += v * v;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

std::string join_sentences(std::span<const std::string> sentences) {
  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty()) out.push_back(' ');
    out += s;
  }
  return out;
}

}  // namespace

std::vector<std::string> segment_summary(std::string_view summary) {
  const auto sentences = sentence_split(summary);
  if (sentences.size() <= 1) return sentences;
  const std::size_t n = sentences.size();
  const std::span<const std::string> all(sentences);
  std::vector<double> sim(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t lb = i == 0 ? 0 : i - 1;
    const std::size_t re = std::min(n - 1, i + 2);
    sim[i] = cosine(content_counts(all.subspan(lb, i - lb + 1)), content_counts(all.subspan(i + 1, re - i)));
  }
  double mean = 0.0;
  for (double s : sim) mean += s;
  mean /= static_cast<double>(sim.size());
  double var = 0.0;
  for (double s : sim) var += (s - mean) * (s - mean);
  const double threshold = mean - 0.5 * std::sqrt(var / static_cast<double>(sim.size()));

  std::vector<std::string> segments;
  std::size_t start = 0;
  for (std::size_t i = 0; i < sim.size(); ++i) {
    const bool valley = (i == 0 || sim[i] <= sim[i - 1]) && (i + 1 == sim.size() || sim[i] <= sim[i + 1]);
    if (valley && sim[i] < threshold) {
      segments.push_back(join_sentences(all.subspan(start, i + 1 - start)));
      start = i + 1;
    }
  }
  segments.push_back(join_sentences(all.subspan(start)));
  return segments;
}

std::vector<Alignment> align(std::span<const std::string> segments, std::span<const std::string> paragraphs) {
  if (segments.empty() || paragraphs.empty()) return {};
  std::vector<Tokens> seg_tokens, par_tokens;
  for (const auto& s : segments) seg_tokens.push_back(tokenize(s));
  for (const auto& p : paragraphs) par_tokens.push_back(tokenize(p));
  const std::size_t ns = segments.size(), np = paragraphs.size();
  std::vector<double> score(ns * np);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t p = 0; p < np; ++p) score[s * np + p] = rouge_l(seg_tokens[s], par_tokens[p]).f1;

  std::vector<std::size_t> best_par(ns, 0), best_seg(np, 0);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t p = 1; p < np; ++p)
      if (score[s * np + p] > score[s * np + best_par[s]]) best_par[s] = p;
  for (std::size_t p = 0; p < np; ++p)
    for (std::size_t s = 1; s < ns; ++s)
      if (score[s * np + p] > score[best_seg[p] * np + p]) best_seg[p] = s;

  std::vector<Alignment> out;
  for (std::size_t p = 0; p < np; ++p) {
    const std::size_t s = best_seg[p];
    if (best_par[s] != p) continue;
    out.push_back({p, s, mean_rouge(seg_tokens[s], par_tokens[p])});
  }
  return out;
}

StreamRecord build_stream(const RawEpisode& episode) {
  StreamRecord record{episode.id, {}};
  const auto segments = segment_summary(episode.summary);
  for (const auto& a : align(segments, episode.recap_paragraphs)) {
    record.pairs.push_back({episode.recap_paragraphs[a.paragraph], segments[a.segment], a.confidence});
  }
  if (record.pairs.size() < 2) record.pairs.clear();
  return record;
}

BuildResult build_streams(std::span<const RawEpisode> episodes) {
  BuildResult result;
  for (const auto& ep : episodes) {
    const bool malformed = ep.recap_paragraphs.empty() || ep.summary.empty() ||
                           std::any_of(ep.recap_paragraphs.begin(), ep.recap_paragraphs.end(), [](const auto& p) { return p.empty(); });
    if (malformed) {
      ++result.malformed;
      continue;
    }
    auto record = build_stream(ep);
    if (record.pairs.empty()) {
      ++result.filtered;
      continue;
    }
    result.streams.push_back(std::move(record));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

constexpr std::array<std::string_view, 32> kFiller{
    "the",  "a",     "and",  "then",  "he",    "she",  "they",  "to",   "of",   "in",    "with",
    "but",  "later", "now",  "after", "about", "her",  "his",   "it",   "that", "when",  "while",
    "tells", "asks", "says", "goes",  "finds", "back", "again", "there", "soon", "still"};

constexpr std::array<std::string_view, 24> kSyllables{"ka", "lo", "mi", "ne", "ru", "ta", "vo", "shi", "pe", "da", "gu", "zo",
                                                      "ri", "fa", "mo", "ke", "la", "ni", "so", "tu", "be", "xa", "wi", "jo"};

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed) {}

  std::size_t uniform(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_); }
  double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  std::string pseudo_word() {
    std::string w;
    const std::size_t syllables = uniform(2, 3);
    for (std::size_t i = 0; i < syllables; ++i) w += kSyllables[uniform(0, kSyllables.size() - 1)];
    return w;
  }

  /// `count` distinct words not in `used`.
  std::vector<std::string> topic(std::size_t count, std::set<std::string>& used) {
    std::vector<std::string> words;
    while (words.size() < count) {
      auto w = pseudo_word();
      if (used.insert(w).second) words.push_back(std::move(w));
    }
    return words;
  }

  std::string sentence(const std::vector<std::string>& topic, std::size_t length, double filler_rate) {
    std::string s;
    for (std::size_t i = 0; i < length; ++i) {
      std::string w = unit() < filler_rate ? std::string(kFiller[uniform(0, kFiller.size() - 1)]) : topic[uniform(0, topic.size() - 1)];
      if (i == 0) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
      if (i > 0) s.push_back(' ');
      s += w;
    }
    s.push_back('.');
    return s;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

SynthCorpus synth_corpus(const SynthOptions& options) {
  if (options.min_pairs < 1 || options.min_pairs > options.max_pairs) throw std::invalid_argument("synth_corpus: invalid pair range");
  if (options.noise < 0.0 || options.noise > 1.0) throw std::invalid_argument("synth_corpus: noise must be in [0, 1]");
  Generator gen(options.seed);
  SynthCorpus corpus;
  for (std::size_t e = 0; e < options.episodes; ++e) {
    const std::string id = fmt::format("synth-{:05d}", e);
    const bool single = gen.unit() < options.single_paragraph_fraction;
    const std::size_t planted = single ? 1 : gen.uniform(options.min_pairs, options.max_pairs);
    const std::size_t distractors = single ? 0 : gen.uniform(0, options.max_distractors);

    // Slot order: planted paragraphs keep their relative order; distractors
    // are inserted at random positions.
    std::vector<bool> is_planted(planted, true);
    for (std::size_t d = 0; d < distractors; ++d) {
      is_planted.insert(is_planted.begin() + static_cast<std::ptrdiff_t>(gen.uniform(0, is_planted.size())), false);
    }

    std::set<std::string> used;
    RawEpisode episode{id, {}, {}};
    PlantedEpisode truth{id, single, {}};
    std::vector<std::string> summary_sentences;
    std::size_t segment_index = 0;
    for (bool planted_slot : is_planted) {
      const auto words = gen.topic(10, used);
      std::vector<std::string> par;
      const std::size_t n_sent = gen.uniform(3, 5);
      for (std::size_t s = 0; s < n_sent; ++s) par.push_back(gen.sentence(words, gen.uniform(8, 12), 0.2));
      episode.recap_paragraphs.push_back(join_sentences(par));
      if (!planted_slot) continue;
      std::vector<std::string> seg;
      const std::size_t seg_sent = gen.uniform(2, 3);
      const std::vector<std::string> key(words.begin(), words.begin() + 3);
      for (std::size_t s = 0; s < seg_sent; ++s) seg.push_back(gen.sentence(key, gen.uniform(6, 10), options.noise));
      truth.pairs.push_back({episode.recap_paragraphs.size() - 1, segment_index++, episode.recap_paragraphs.back(), join_sentences(seg)});
      summary_sentences.insert(summary_sentences.end(), seg.begin(), seg.end());
    }
    episode.summary = join_sentences(summary_sentences);
    corpus.episodes.push_back(std::move(episode));
    corpus.truth.push_back(std::move(truth));
  }
  return corpus;
}

RecoveryReport score_recovery(std::span<const PlantedEpisode> truth, std::span<const StreamRecord> streams) {
  std::unordered_map<std::string, const StreamRecord*> by_id;
  for (const auto& s : streams) by_id[s.id] = &s;
  RecoveryReport report;
  for (const auto& ep : truth) {
    auto it = by_id.find(ep.id);
    if (ep.single_paragraph) {
      ++report.single_paragraph_episodes;
      if (it == by_id.end()) ++report.single_paragraph_filtered;
      continue;
    }
    report.planted += ep.pairs.size();
    if (it == by_id.end()) continue;
    for (const auto& p : ep.pairs) {
      const auto& pairs = it->second->pairs;
      const bool found = std::any_of(pairs.begin(), pairs.end(), [&](const StreamPair& sp) {
        return sp.document == p.document && sp.summary == p.summary;
      });
      if (found) ++report.recovered;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Statistics

CorpusStats corpus_stats(std::span<const StreamRecord> streams) {
  CorpusStats stats;
  stats.streams = streams.size();
  if (streams.empty()) return stats;
  std::array<NovelCount, 4> novel{};
  double doc_words = 0.0, summ_words = 0.0;
  std::map<std::size_t, std::size_t> lengths;
  for (const auto& s : streams) {
    ++lengths[s.pairs.size()];
    for (const auto& p : s.pairs) {
      const auto doc = tokenize(p.document);
      const auto summ = tokenize(p.summary);
      doc_words += static_cast<double>(doc.size());
      summ_words += static_cast<double>(summ.size());
      for (std::size_t n = 1; n <= 4; ++n) {
        const auto c = novel_ngram_count(summ, doc, n);
        novel[n - 1].novel += c.novel;
        novel[n - 1].total += c.total;
      }
      ++stats.pairs;
    }
  }
  stats.empty = stats.pairs == 0;
  if (stats.pairs > 0) {
    stats.mean_document_words = doc_words / static_cast<double>(stats.pairs);
    stats.mean_summary_words = summ_words / static_cast<double>(stats.pairs);
  }
  for (const auto& [len, count] : lengths) stats.length_histogram[len] = static_cast<double>(count) / static_cast<double>(stats.streams);
  for (std::size_t n = 0; n < 4; ++n) {
    stats.novel_ngrams[n] = novel[n].total == 0 ? 0.0 : static_cast<double>(novel[n].novel) / static_cast<double>(novel[n].total);
  }
  return stats;
}

void write_stats_csv(std::ostream& out, const CorpusStats& stats) {
  out << "statistic,value\n";
  out << fmt::format("streams,{}\n", stats.streams);
  out << fmt::format("pairs,{}\n", stats.pairs);
  out << fmt::format("mean_document_words,{:.4f}\n", stats.mean_document_words);
  out << fmt::format("mean_summary_words,{:.4f}\n", stats.mean_summary_words);
  for (std::size_t n = 0; n < 4; ++n) out << fmt::format("novel_{}gram,{:.6f}\n", n + 1, stats.novel_ngrams[n]);
  for (const auto& [len, frac] : stats.length_histogram) out << fmt::format("streams_of_length_{},{:.6f}\n", len, frac);
}

// ---------------------------------------------------------------------------
// JSON Lines

namespace {

using nlohmann::json;

template <typename F>
void for_each_line(std::istream& in, F&& f) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InputError(fmt::format("line {}: invalid JSON ({})", number, e.what()), number);
    }
    try {
      f(j, number);
    } catch (const json::exception& e) {
      throw InputError(fmt::format("line {}: {}", number, e.what()), number);
    }
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open {}", path));
  return in;
}

}  // namespace

std::vector<RawEpisode> read_raw_episodes(std::istream& in) {
  std::vector<RawEpisode> out;
  for_each_line(in, [&](const json& j, std::size_t number) {
    if (!j.is_object() || !j.contains("id") || !j.contains("recap_paragraphs") || !j.contains("summary")) {
      throw InputError(fmt::format("line {}: expected fields id, recap_paragraphs, summary", number), number);
    }
    RawEpisode ep;
    ep.id = j.at("id").get<std::string>();
    ep.recap_paragraphs = j.at("recap_paragraphs").get<std::vector<std::string>>();
    ep.summary = j.at("summary").get<std::string>();
    out.push_back(std::move(ep));
  });
  return out;
}

void write_raw_episodes(std::ostream& out, std::span<const RawEpisode> episodes) {
  for (const auto& ep : episodes) {
    json j{{"id", ep.id}, {"recap_paragraphs", ep.recap_paragraphs}, {"summary", ep.summary}};
    out << j.dump() << '\n';
  }
}

std::vector<StreamRecord> read_streams(std::istream& in) {
  std::vector<StreamRecord> out;
  for_each_line(in, [&](const json& j, std::size_t number) {
    if (!j.is_object() || !j.contains("id") || !j.contains("documents") || !j.contains("summaries")) {
      throw InputError(fmt::format("line {}: expected fields id, documents, summaries", number), number);
    }
    StreamRecord rec;
    rec.id = j.at("id").get<std::string>();
    const auto docs = j.at("documents").get<std::vector<std::string>>();
    const auto summs = j.at("summaries").get<std::vector<std::string>>();
    if (docs.size() != summs.size()) {
      throw InputError(fmt::format("line {}: {} documents but {} summaries", number, docs.size(), summs.size()), number);
    }
    std::vector<double> conf(docs.size(), 0.0);
    if (j.contains("confidence")) {
      conf = j.at("confidence").get<std::vector<double>>();
      if (conf.size() != docs.size()) throw InputError(fmt::format("line {}: confidence length mismatch", number), number);
    }
    for (std::size_t i = 0; i < docs.size(); ++i) rec.pairs.push_back({docs[i], summs[i], conf[i]});
    out.push_back(std::move(rec));
  });
  return out;
}

void write_streams(std::ostream& out, std::span<const StreamRecord> streams) {
  for (const auto& s : streams) {
    json docs = json::array(), summs = json::array(), conf = json::array();
    for (const auto& p : s.pairs) {
      docs.push_back(p.document);
      summs.push_back(p.summary);
      conf.push_back(std::round(p.confidence * 1e6) / 1e6);
    }
    json j{{"id", s.id}, {"documents", docs}, {"summaries", summs}, {"confidence", conf}};
    out << j.dump() << '\n';
  }
}

void write_truth(std::ostream& out, std::span<const PlantedEpisode> truth) {
  for (const auto& ep : truth) {
    json pairs = json::array();
    for (const auto& p : ep.pairs) pairs.push_back({{"paragraph", p.paragraph}, {"segment", p.segment}});
    json j{{"id", ep.id}, {"single_paragraph", ep.single_paragraph}, {"pairs", pairs}};
    out << j.dump() << '\n';
  }
}

std::vector<RawEpisode> read_raw_episodes_file(const std::string& path) {
  auto in = open_input(path);
  return read_raw_episodes(in);
}

std::vector<StreamRecord> read_streams_file(const std::string& path) {
  auto in = open_input(path);
  return read_streams(in);
}

}  // namespace ssg
