#include "ssg/report.hpp"

#include <array>
#include <map>
#include <sstream>

#include <fmt/format.h>

namespace ssg {

namespace {

const std::vector<PaperValue>& table() {
  static const std::vector<PaperValue> values = [] {
    std::vector<PaperValue> v;
    auto rouge = [&](const std::string& t, const std::string& sys, double r1, double r2, double rl) {
      v.push_back({t, sys, "rouge1", r1});
      v.push_back({t, sys, "rouge2", r2});
      v.push_back({t, sys, "rougeL", rl});
    };
    rouge("pair", "SSG", 34.92, 8.65, 31.68);
    rouge("pair", "Lead3", 26.31, 4.79, 23.56);
    rouge("pair", "TextRank", 32.71, 6.49, 29.06);
    rouge("pair", "CPD", 33.67, 7.89, 30.60);
    rouge("pair", "CPS", 33.97, 7.94, 30.75);
    rouge("stream", "SSG", 47.00, 12.46, 44.77);
    rouge("stream", "BART-Split", 45.94, 11.28, 43.96);
    rouge("stream", "BART-Together", 45.36, 11.15, 43.14);
    v.push_back({"dataset", "SSD", "novel_1gram", 38.31});
    v.push_back({"dataset", "SSD", "novel_2gram", 85.35});
    v.push_back({"dataset", "SSD", "novel_3gram", 97.20});
    v.push_back({"dataset", "SSD", "novel_4gram", 98.86});
    v.push_back({"dataset", "SSD", "pg_over_lead_rl", 1.45});
    v.push_back({"dataset", "SSD", "document_words", 610});
    v.push_back({"dataset", "SSD", "summary_words", 87});
    v.push_back({"dataset", "SSD", "streams_len2", 35});
    v.push_back({"dataset", "SSD", "streams_len3", 22});
    v.push_back({"dataset", "SSD", "streams_len4", 18});
    v.push_back({"dataset", "SSD", "streams_len5", 5});
    v.push_back({"dataset", "SSD", "good_name_cases", 89});
    return v;
  }();
  return values;
}

double paper(const std::string& t, const std::string& sys, const std::string& metric) {
  for (const auto& v : table())
    if (v.table == t && v.system == sys && v.metric == metric) return v.value;
  return 0.0;
}

using DeskKey = std::tuple<std::string, std::string, std::string>;

std::string cell(const std::map<DeskKey, ReportRow>& desk, const std::string& sys, const std::string& mode, const std::string& metric) {
  const auto it = desk.find({sys, mode, metric});
  if (it == desk.end()) return fmt::format("{:>16}", "n/a");
  return fmt::format("{:>9.2f} ±{:<5.2f}", 100.0 * it->second.value.mean, 100.0 * it->second.value.half_width);
}

}  // namespace

std::span<const PaperValue> paper_reference() { return table(); }

std::vector<ReportRow> read_report_csv(std::istream& in) {
  std::vector<ReportRow> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (n == 1) {
      if (line != "system,mode,metric,mean,ci95,n") throw InputError("report csv: unexpected header", 1);
      continue;
    }
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::array<std::string, 6> f;
    for (auto& x : f)
      if (!std::getline(ss, x, ',')) throw InputError("report csv: expected 6 fields", n);
    ReportRow r;
    r.system = f[0];
    r.mode = f[1];
    r.metric = f[2];
    try {
      r.value.mean = std::stod(f[3]);
      r.value.half_width = std::stod(f[4]);
      r.value.n = std::stoul(f[5]);
    } catch (const std::exception&) {
      throw InputError("report csv: bad number", n);
    }
    rows.push_back(r);
  }
  return rows;
}

void write_comparison(std::ostream& out, std::span<const ReportRow> desk_rows, const std::optional<CorpusStats>& stats) {
  std::map<DeskKey, ReportRow> desk;
  for (const auto& r : desk_rows) desk[{r.system, r.mode, r.metric}] = r;

  out << "PAPER-SCALE REFERENCE VALUES ARE NOT EXPECTED TO MATCH.\n"
         "Paper numbers come from the full SSD corpus with pretrained BART backbones;\n"
         "desk numbers come from small synthetic or local corpora and tiny models trained from scratch.\n\n";

  const std::array<const char*, 3> metrics{"rouge1", "rouge2", "rougeL"};
  out << "Pair-level ROUGE f1 (%), Table 3\n";
  out << fmt::format("{:<15}{:>8}{:>8}{:>8}   {:>16}{:>16}{:>16}\n", "system", "paper1", "paper2", "paperL", "desk1", "desk2", "deskL");
  const std::array<std::array<const char*, 3>, 5> pair_rows{{{"SSG", "ssg", "pair_level"},
                                                             {"Lead3", "lead3", "lead3"},
                                                             {"TextRank", "textrank", "textrank"},
                                                             {"CPD", "cpd", "cpd"},
                                                             {"CPS", "cps", "cps"}}};
  for (const auto& [name, sys, mode] : pair_rows) {
    out << fmt::format("{:<15}", name);
    for (const char* m : metrics) out << fmt::format("{:>8.2f}", paper("pair", name, m));
    out << "   ";
    for (const char* m : metrics) out << cell(desk, sys, mode, std::string("pair_") + m);
    out << "\n";
  }

  out << "\nStream-level ROUGE f1 (%), Table 4 (desk together mode runs the stepwise model)\n";
  out << fmt::format("{:<15}{:>8}{:>8}{:>8}   {:>16}{:>16}{:>16}\n", "system", "paper1", "paper2", "paperL", "desk1", "desk2", "deskL");
  const std::array<std::array<const char*, 3>, 3> stream_rows{
      {{"SSG", "ssg", "split"}, {"BART-Split", "", ""}, {"BART-Together", "ssg", "together"}}};
  for (const auto& [name, sys, mode] : stream_rows) {
    out << fmt::format("{:<15}", name);
    for (const char* m : metrics) out << fmt::format("{:>8.2f}", paper("stream", name, m));
    out << "   ";
    for (const char* m : metrics) out << cell(desk, sys, mode, std::string("stream_") + m);
    out << "\n";
  }

  out << "\nDataset statistics, Table 2 and corpus description\n";
  out << fmt::format("{:<26}{:>10}{:>12}\n", "statistic", "paper", "desk");
  auto stat_row = [&](const std::string& label, const std::string& metric, std::optional<double> value, const char* unit) {
    const std::string d = value ? fmt::format("{:.2f}{}", *value, unit) : "n/a";
    out << fmt::format("{:<26}{:>9.2f}{}{:>12}\n", label, paper("dataset", "SSD", metric), unit, d);
  };
  const bool have = stats && !stats->empty;
  for (std::size_t n = 0; n < 4; ++n) {
    stat_row(fmt::format("novel {}-grams", n + 1), fmt::format("novel_{}gram", n + 1),
             have ? std::optional(100.0 * stats->novel_ngrams[n]) : std::nullopt, "%");
  }
  stat_row("document words", "document_words", have ? std::optional(stats->mean_document_words) : std::nullopt, " ");
  stat_row("summary words", "summary_words", have ? std::optional(stats->mean_summary_words) : std::nullopt, " ");
  for (std::size_t len = 2; len <= 5; ++len) {
    std::optional<double> v;
    if (have) {
      const auto it = stats->length_histogram.find(len);
      v = it == stats->length_histogram.end() ? 0.0 : 100.0 * it->second;
    }
    stat_row(fmt::format("streams of length {}", len), fmt::format("streams_len{}", len), v, "%");
  }
  std::optional<double> ratio;
  const auto ssg = desk.find({"ssg", "pair_level", "pair_rougeL"});
  const auto lead = desk.find({"lead3", "lead3", "pair_rougeL"});
  if (ssg != desk.end() && lead != desk.end() && lead->second.value.mean > 0.0)
    ratio = lead_bias_ratio(ssg->second.value.mean, lead->second.value.mean);
  out << fmt::format("{:<26}{:>9.2f}x{:>12}\n", "abstractive/Lead RL", paper("dataset", "SSD", "pg_over_lead_rl"),
                     ratio ? format_ratio(*ratio) : "n/a");
  out << fmt::format("{:<26}{:>9.2f}%{:>12}\n", "good character names", paper("dataset", "SSD", "good_name_cases"), "n/a");
}

}  // namespace ssg
