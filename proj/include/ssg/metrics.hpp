#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ssg/text.hpp"

namespace ssg {

// ROUGE here runs on tokenize() output with no stemming or stopword
// removal, so scores are comparable only with each other, not with the
// official perl script.

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  /// f1 = 2pr / (p + r), or 0 when p + r == 0.
  static RougeScore from(double precision, double recall);
};

struct RougeSet {
  RougeScore rouge1, rouge2, rougeL;
  double mean_f1() const { return (rouge1.f1 + rouge2.f1 + rougeL.f1) / 3.0; }
};

/// Clipped n-gram overlap; n must be 1 or 2.
RougeScore rouge_n(std::span<const Token> candidate, std::span<const Token> reference, std::size_t n);
RougeScore rouge_l(std::span<const Token> candidate, std::span<const Token> reference);
std::size_t lcs_length(std::span<const Token> a, std::span<const Token> b);
RougeSet rouge_all(std::span<const Token> candidate, std::span<const Token> reference);
/// Mean of the ROUGE-1, ROUGE-2 and ROUGE-L f1 values.
double mean_rouge(std::span<const Token> candidate, std::span<const Token> reference);

struct NovelCount {
  std::size_t novel = 0;
  std::size_t total = 0;
};

/// Summary n-gram occurrences whose type is absent from the document.
NovelCount novel_ngram_count(std::span<const Token> summary, std::span<const Token> document, std::size_t n);
double novel_ngram_proportion(std::span<const Token> summary, std::span<const Token> document, std::size_t n);

class UndefinedRatioError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Abstractive-over-Lead ROUGE-L ratio; above one means weak lead bias.
double lead_bias_ratio(double abstractive_rl, double lead_rl);
/// Ratio truncated (not rounded) to two decimals, e.g. "1.45x".
std::string format_ratio(double ratio);

struct NameConsistency {
  std::size_t good = 0;
  std::size_t bad = 0;
  double good_fraction = 0.0;
  double bad_fraction = 0.0;
  /// No name occurred in any summary; both fractions are 0.
  bool no_occurrences = true;
};

/// Case-sensitive whole-token name matching over (document, summary) pairs.
/// A (pair, name) event counts when the name occurs in the summary; it is
/// good when the name also occurs in the document.
NameConsistency name_consistency(std::span<const std::pair<std::string, std::string>> pairs, const std::set<std::string>& names);

struct MeanCI {
  double mean = 0.0;
  /// 95% normal-approximation half width, 1.96 * sd / sqrt(n).
  double half_width = 0.0;
  std::size_t n = 0;
};

MeanCI mean_ci95(std::span<const double> values);

/// Pearson correlation; nullopt with fewer than two points or zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct ReportRow {
  std::string system;
  std::string mode;
  std::string metric;
  MeanCI value;
};

/// CSV with header system,mode,metric,mean,ci95,n.
void write_report_csv(std::ostream& out, std::span<const ReportRow> rows);

}  // namespace ssg
