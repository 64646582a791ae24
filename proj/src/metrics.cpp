#include "ssg/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <fmt/format.h>

namespace ssg {

RougeScore RougeScore::from(double precision, double recall) {
  RougeScore s{precision, recall, 0.0};
  if (precision + recall > 0.0) s.f1 = 2.0 * precision * recall / (precision + recall);
  return s;
}

RougeScore rouge_n(std::span<const Token> candidate, std::span<const Token> reference, std::size_t n) {
  if (n != 1 && n != 2) throw std::invalid_argument(fmt::format("rouge_n: n must be 1 or 2, got {}", n));
  const auto cand = ngrams(candidate, n);
  const auto ref = ngrams(reference, n);
  std::size_t overlap = 0;
  for (const auto& [g, c] : cand) {
    auto it = ref.find(g);
    if (it != ref.end()) overlap += std::min(c, it->second);
  }
  const auto nc = ngram_total(cand), nr = ngram_total(ref);
  const double p = nc == 0 ? 0.0 : static_cast<double>(overlap) / static_cast<double>(nc);
  const double r = nr == 0 ? 0.0 : static_cast<double>(overlap) / static_cast<double>(nr);
  return RougeScore::from(p, r);
}

std::size_t lcs_length(std::span<const Token> a, std::span<const Token> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeScore rouge_l(std::span<const Token> candidate, std::span<const Token> reference) {
  if (candidate.empty() || reference.empty()) return {};
  const auto l = static_cast<double>(lcs_length(candidate, reference));
  return RougeScore::from(l / static_cast<double>(candidate.size()), l / static_cast<double>(reference.size()));
}

RougeSet rouge_all(std::span<const Token> candidate, std::span<const Token> reference) {
  return {rouge_n(candidate, reference, 1), rouge_n(candidate, reference, 2), rouge_l(candidate, reference)};
}

double mean_rouge(std::span<const Token> candidate, std::span<const Token> reference) {
  return rouge_all(candidate, reference).mean_f1();
}

NovelCount novel_ngram_count(std::span<const Token> summary, std::span<const Token> document, std::size_t n) {
  const auto summ = ngrams(summary, n);
  const auto doc = ngrams(document, n);
  NovelCount out;
  for (const auto& [g, c] : summ) {
    out.total += c;
    if (!doc.contains(g)) out.novel += c;
  }
  return out;
}

double novel_ngram_proportion(std::span<const Token> summary, std::span<const Token> document, std::size_t n) {
  const auto c = novel_ngram_count(summary, document, n);
  return c.total == 0 ? 0.0 : static_cast<double>(c.novel) / static_cast<double>(c.total);
}

double lead_bias_ratio(double abstractive_rl, double lead_rl) {
  if (lead_rl == 0.0) throw UndefinedRatioError("lead_bias_ratio: Lead ROUGE-L is zero");
  return abstractive_rl / lead_rl;
}

std::string format_ratio(double ratio) {
  const double truncated = std::floor(ratio * 100.0 + 1e-9) / 100.0;
  return fmt::format("{:.2f}x", truncated);
}

namespace {

std::vector<std::string> raw_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c)) || std::ispunct(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool contains_run(const std::vector<std::string>& words, const std::vector<std::string>& run) {
  if (run.empty() || run.size() > words.size()) return false;
  return std::search(words.begin(), words.end(), run.begin(), run.end()) != words.end();
}

}  // namespace

NameConsistency name_consistency(std::span<const std::pair<std::string, std::string>> pairs, const std::set<std::string>& names) {
  if (names.empty()) throw std::invalid_argument("name_consistency: empty name set");
  std::vector<std::vector<std::string>> name_words;
  for (const auto& n : names) name_words.push_back(raw_words(n));
  NameConsistency out;
  for (const auto& [doc, summ] : pairs) {
    const auto dw = raw_words(doc);
    const auto sw = raw_words(summ);
    for (const auto& nw : name_words) {
      if (!contains_run(sw, nw)) continue;
      if (contains_run(dw, nw)) {
        ++out.good;
      } else {
        ++out.bad;
      }
    }
  }
  const auto total = out.good + out.bad;
  out.no_occurrences = total == 0;
  if (total > 0) {
    out.good_fraction = static_cast<double>(out.good) / static_cast<double>(total);
    out.bad_fraction = static_cast<double>(out.bad) / static_cast<double>(total);
  }
  return out;
}

MeanCI mean_ci95(std::span<const double> values) {
  MeanCI out;
  out.n = values.size();
  if (values.empty()) return out;
  double s = 0.0;
  for (double v : values) s += v;
  out.mean = s / static_cast<double>(values.size());
  if (values.size() > 1) {
    double var = 0.0;
    for (double v : values) var += (v - out.mean) * (v - out.mean);
    var /= static_cast<double>(values.size() - 1);
    out.half_width = 1.96 * std::sqrt(var / static_cast<double>(values.size()));
  }
  return out;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) return std::nullopt;
  const auto [xlo, xhi] = std::minmax_element(x.begin(), x.end());
  const auto [ylo, yhi] = std::minmax_element(y.begin(), y.end());
  if (*xlo == *xhi || *ylo == *yhi) return std::nullopt;
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

void write_report_csv(std::ostream& out, std::span<const ReportRow> rows) {
  out << "system,mode,metric,mean,ci95,n\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{:.6f},{:.6f},{}\n", r.system, r.mode, r.metric, r.value.mean, r.value.half_width, r.value.n);
  }
}

}  // namespace ssg
