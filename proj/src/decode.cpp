#include "ssg/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include <fmt/format.h>

namespace ssg {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Candidate {
  double score;
  double step;
  std::size_t beam;
  int token;
};

}  // namespace

std::vector<double> mask_log_probs(std::vector<double> lp, std::size_t prefix_len, const DecodeOptions& options) {
  if (lp.size() <= static_cast<std::size_t>(Vocab::kEos)) throw ContractError("mask_log_probs: vocabulary lacks special tokens");
  for (std::size_t i = 0; i < lp.size(); ++i)
    if (std::isnan(lp[i]) || lp[i] == std::numeric_limits<double>::infinity())
      throw NumericError(fmt::format("non-finite log-probability for token {}", i), "log_probs");
  lp[Vocab::kPad] = kNegInf;
  lp[Vocab::kBos] = kNegInf;
  if (prefix_len >= options.max_len) {
    for (std::size_t i = 0; i < lp.size(); ++i)
      if (static_cast<int>(i) != Vocab::kEos) lp[i] = kNegInf;
  } else if (prefix_len < options.min_len) {
    lp[Vocab::kEos] = kNegInf;
  }
  return lp;
}

TokenIds greedy_decode(StepScorer& scorer, const DecodeOptions& options) {
  TokenIds out;
  while (true) {
    const auto lp = mask_log_probs(scorer.next_log_probs(out), out.size(), options);
    const auto best = static_cast<int>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    if (lp[static_cast<std::size_t>(best)] == kNegInf) throw NumericError("no token can be emitted", "log_probs");
    if (best == Vocab::kEos) break;
    out.push_back(best);
  }
  return out;
}

double Hypothesis::normalized() const {
  const double len = static_cast<double>(tokens.size() + (finished ? 1 : 0));
  return len == 0.0 ? log_prob : log_prob / len;
}

Hypothesis beam_search(StepScorer& scorer, const DecodeOptions& options) {
  if (options.beam_width == 0) throw ContractError("beam_search: beam width must be at least 1");
  const std::size_t width = options.beam_width;
  if (width == 1) {
    Hypothesis h;
    while (true) {
      const auto lp = mask_log_probs(scorer.next_log_probs(h.tokens), h.tokens.size(), options);
      const auto best = static_cast<std::size_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());
      if (lp[best] == kNegInf) throw NumericError("no token can be emitted", "log_probs");
      h.log_prob += lp[best];
      if (static_cast<int>(best) == Vocab::kEos) break;
      h.tokens.push_back(static_cast<int>(best));
    }
    h.finished = true;
    return h;
  }
  // Adding a token never raises the cumulative score, so an active
  // hypothesis can at best keep it over the longest allowed length.
  const double longest = static_cast<double>(options.max_len + 1);
  std::vector<Hypothesis> active{Hypothesis{}};
  std::vector<Hypothesis> finished;
  auto best_finished = [&] {
    double best = kNegInf;
    for (const auto& h : finished) best = std::max(best, h.normalized());
    return best;
  };
  while (!active.empty()) {
    double reachable = kNegInf;
    for (const auto& h : active) reachable = std::max(reachable, h.log_prob / longest);
    if (!finished.empty() && best_finished() >= reachable) break;
    std::vector<Candidate> cands;
    for (std::size_t b = 0; b < active.size(); ++b) {
      const auto lp = mask_log_probs(scorer.next_log_probs(active[b].tokens), active[b].tokens.size(), options);
      for (std::size_t v = 0; v < lp.size(); ++v) {
        if (lp[v] == kNegInf) continue;
        if (static_cast<int>(v) == Vocab::kEos) {
          finished.push_back(Hypothesis{active[b].tokens, active[b].log_prob + lp[v], true});
          continue;
        }
        cands.push_back({active[b].log_prob + lp[v], lp[v], b, static_cast<int>(v)});
      }
    }
    if (cands.empty() && finished.empty()) throw NumericError("no token can be emitted", "log_probs");
    std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
      return std::tuple(-x.score, -x.step, x.beam, x.token) < std::tuple(-y.score, -y.step, y.beam, y.token);
    });
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < cands.size() && next.size() < width; ++i) {
      Hypothesis h{active[cands[i].beam].tokens, cands[i].score, false};
      h.tokens.push_back(cands[i].token);
      next.push_back(std::move(h));
    }
    active = std::move(next);
  }
  // Ties go to the earliest finished hypothesis.
  auto best = finished.begin();
  for (auto it = finished.begin(); it != finished.end(); ++it)
    if (it->normalized() > best->normalized()) best = it;
  return *best;
}

TokenIds decode(StepScorer& scorer, const DecodeOptions& options) {
  return beam_search(scorer, options).tokens;
}

}  // namespace ssg
