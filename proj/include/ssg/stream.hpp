#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ssg/corpus.hpp"
#include "ssg/decode.hpp"
#include "ssg/metrics.hpp"
#include "ssg/model.hpp"
#include "ssg/text.hpp"

namespace ssg {

enum class EvalMode { PairLevel, Split, Together, Cps, Cpd, Lead3, TextRank };

std::string to_string(EvalMode mode);
EvalMode parse_eval_mode(const std::string& s);
/// Modes that need a trained model.
bool needs_model(EvalMode mode);
/// cps and cpd run the single-input architecture.
bool single_input(EvalMode mode);

/// Produces a summary from a document and the stream history.
class Summarizer {
 public:
  virtual ~Summarizer() = default;
  virtual TokenIds summarize(std::span<const int> document, std::span<const int> previous) = 0;
};

/// Decodes with a model; inputs are clipped to the configured lengths.
class ModelSummarizer : public Summarizer {
 public:
  ModelSummarizer(SsgModel& model, DecodeOptions options) : model_(model), options_(options) {}
  TokenIds summarize(std::span<const int> document, std::span<const int> previous) override;

 private:
  SsgModel& model_;
  DecodeOptions options_;
};

TokenIds concat_ids(std::span<const TokenIds> parts);

/// Generated summary texts, one per pair (one per stream in together mode).
/// Extractive modes ignore `summarizer` and may pass nullptr.
std::vector<std::string> run_stream(const StreamRecord& stream, EvalMode mode, Summarizer* summarizer, const Vocab& vocab);

std::string lead3(const std::string& document);

/// PageRank over a symmetric non-negative weight matrix (row-major n x n).
/// Dangling nodes spread their mass uniformly. Stops when the L1 change
/// drops below `tol` or after `max_iter` iterations.
std::vector<double> pagerank(std::span<const double> weights, std::size_t n, double damping = 0.85, double tol = 1e-6,
                             std::size_t max_iter = 100);

struct TextRankResult {
  std::vector<std::string> sentences;
  std::vector<double> scores;
  /// Selected sentence indices in document order.
  std::vector<std::size_t> selected;
  std::string summary;
};

TextRankResult textrank_detail(const std::string& document, std::size_t k = 3);
std::string textrank(const std::string& document, std::size_t k = 3);

struct PairScore {
  std::string stream_id;
  std::size_t step = 0;
  std::string generated;
  std::string reference;
  RougeSet rouge;
};

struct StreamScore {
  std::string stream_id;
  std::size_t length = 0;
  RougeSet rouge;
};

struct EvalResult {
  EvalMode mode = EvalMode::PairLevel;
  /// Empty in together mode.
  std::vector<PairScore> pairs;
  std::vector<StreamScore> streams;
  std::vector<std::vector<std::string>> generated;
};

/// Runs `mode` over every stream and scores pair-level and stream-level
/// ROUGE. Stream-level compares the concatenated generated stream with the
/// concatenated gold stream.
EvalResult evaluate(std::span<const StreamRecord> streams, EvalMode mode, Summarizer* summarizer, const Vocab& vocab);

struct DsDpRow {
  std::string stream_id;
  std::size_t step = 0;
  double ds = 0.0;
  double dp = 0.0;
};

struct DsDpResult {
  std::vector<DsDpRow> rows;
  /// nullopt when fewer than two rows or a constant column.
  std::optional<double> correlation;
};

/// DS = mean ROUGE(document, generated), DP = mean ROUGE(document, previous
/// gold summary); first pairs of each stream are skipped.
DsDpResult ds_dp_analysis(std::span<const StreamRecord> streams, std::span<const std::vector<std::string>> generated);

struct AccumulationRow {
  std::string mode;
  std::size_t length = 0;
  std::size_t streams = 0;
  RougeSet rouge;
};

/// Stream-level ROUGE averaged per (mode, stream length).
std::vector<AccumulationRow> error_accumulation(std::span<const StreamRecord> streams,
                                                const std::map<std::string, std::vector<std::vector<std::string>>>& by_mode);

void write_pairs_csv(std::ostream& out, const EvalResult& result);
void write_streams_csv(std::ostream& out, const EvalResult& result);
void write_dsdp_csv(std::ostream& out, const DsDpResult& result);
void write_accumulation_csv(std::ostream& out, std::span<const AccumulationRow> rows);

}  // namespace ssg
