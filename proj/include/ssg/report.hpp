#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ssg/corpus.hpp"
#include "ssg/metrics.hpp"

namespace ssg {

/// One published number, in percent unless the metric says otherwise.
struct PaperValue {
  std::string table;
  std::string system;
  std::string metric;
  double value = 0.0;
};

/// Reference values from the original large-scale experiments.
std::span<const PaperValue> paper_reference();

/// Rows written by write_report_csv.
std::vector<ReportRow> read_report_csv(std::istream& in);

/// Published reference values next to the desk-scale results that exist.
/// Desk ROUGE values (f1 in [0, 1]) are printed in percent.
void write_comparison(std::ostream& out, std::span<const ReportRow> desk, const std::optional<CorpusStats>& stats);

}  // namespace ssg
