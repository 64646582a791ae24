#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ssg {

/// Malformed input record; `line` is 1-based, 0 when not line-oriented.
class InputError : public std::runtime_error {
 public:
  InputError(const std::string& what, std::size_t line = 0) : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct RawEpisode {
  std::string id;
  std::vector<std::string> recap_paragraphs;
  std::string summary;
};

struct StreamPair {
  std::string document;
  std::string summary;
  /// Mean of ROUGE-1/2/L f1 between the two texts at alignment time.
  double confidence = 0.0;
};

/// An aligned document/summary stream in source order.
struct StreamRecord {
  std::string id;
  std::vector<StreamPair> pairs;
};

struct Alignment {
  std::size_t paragraph = 0;
  std::size_t segment = 0;
  double confidence = 0.0;
};

/// Splits a summary into contiguous sentence groups at similarity valleys.
///
/// Gap i sits between sentences i and i+1 and scores the unigram cosine of
/// the two-sentence windows on either side (punctuation ignored). A gap is
/// a boundary when it is a local minimum and lies strictly below
/// mean - 0.5 * stddev of all gap scores.
std::vector<std::string> segment_summary(std::string_view summary);

/// Keeps mutual-best (paragraph, segment) pairs under ROUGE-L f1, ties to
/// the smaller index. Sorted by paragraph.
std::vector<Alignment> align(std::span<const std::string> segments, std::span<const std::string> paragraphs);

struct BuildResult {
  std::vector<StreamRecord> streams;
  std::size_t malformed = 0;
  std::size_t filtered = 0;
};

/// Segment, align and filter each episode independently; records with fewer
/// than two aligned pairs are dropped.
BuildResult build_streams(std::span<const RawEpisode> episodes);
/// The same pipeline for one episode; empty pairs when filtered.
StreamRecord build_stream(const RawEpisode& episode);

struct SynthOptions {
  std::uint64_t seed = 7;
  std::size_t episodes = 50;
  std::size_t min_pairs = 2;
  std::size_t max_pairs = 5;
  /// Fraction of summary tokens drawn from the shared filler pool instead
  /// of the paragraph's topic words.
  double noise = 0.3;
  /// Fraction of episodes generated with a single paragraph.
  double single_paragraph_fraction = 0.1;
  /// Up to this many unaligned paragraphs are mixed into each episode.
  std::size_t max_distractors = 2;
};

struct PlantedPair {
  std::size_t paragraph = 0;
  std::size_t segment = 0;
  std::string document;
  std::string summary;
};

struct PlantedEpisode {
  std::string id;
  bool single_paragraph = false;
  std::vector<PlantedPair> pairs;
};

struct SynthCorpus {
  std::vector<RawEpisode> episodes;
  std::vector<PlantedEpisode> truth;
};

/// Episodes whose paragraphs use disjoint topic words and whose summary
/// segments reuse their paragraph's words. Deterministic per seed.
SynthCorpus synth_corpus(const SynthOptions& options);

struct RecoveryReport {
  std::size_t planted = 0;
  std::size_t recovered = 0;
  std::size_t single_paragraph_episodes = 0;
  std::size_t single_paragraph_filtered = 0;
  double recovery() const { return planted == 0 ? 0.0 : static_cast<double>(recovered) / static_cast<double>(planted); }
};

/// Compares built streams against planted pairs of multi-paragraph episodes
/// by exact (document, summary) text.
RecoveryReport score_recovery(std::span<const PlantedEpisode> truth, std::span<const StreamRecord> streams);

struct CorpusStats {
  std::size_t streams = 0;
  std::size_t pairs = 0;
  double mean_document_words = 0.0;
  double mean_summary_words = 0.0;
  /// Stream length (pair count) -> fraction of streams.
  std::map<std::size_t, double> length_histogram;
  /// Corpus-wide novel n-gram proportions for n = 1..4.
  std::array<double, 4> novel_ngrams{};
  bool empty = true;
};

CorpusStats corpus_stats(std::span<const StreamRecord> streams);
void write_stats_csv(std::ostream& out, const CorpusStats& stats);

// JSON Lines I/O. Raw: {"id", "recap_paragraphs", "summary"} per line.
// Aligned: {"id", "documents", "summaries", "confidence"} per line.

std::vector<RawEpisode> read_raw_episodes(std::istream& in);
void write_raw_episodes(std::ostream& out, std::span<const RawEpisode> episodes);
std::vector<StreamRecord> read_streams(std::istream& in);
void write_streams(std::ostream& out, std::span<const StreamRecord> streams);
void write_truth(std::ostream& out, std::span<const PlantedEpisode> truth);

std::vector<RawEpisode> read_raw_episodes_file(const std::string& path);
std::vector<StreamRecord> read_streams_file(const std::string& path);

}  // namespace ssg
