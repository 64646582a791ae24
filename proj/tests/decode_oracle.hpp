#pragma once

// Exhaustive length-normalized search over every finished sequence.

#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "ssg/decode.hpp"
#include "ssg/model.hpp"
#include "ssg/model_check.hpp"

namespace ssg::oracle {

struct Best {
  std::vector<int> tokens;
  double score = -std::numeric_limits<double>::infinity();
};

/// Every sequence of emittable ids with length in [min_len, max_len],
/// closed by EOS, scored as (sum of log-probs incl. EOS) / (length + 1).
inline Best exhaustive_best(const std::function<std::vector<double>(std::span<const int>)>& log_probs, std::size_t vocab,
                            std::size_t min_len, std::size_t max_len) {
  Best best;
  std::vector<int> prefix;
  std::function<void(double)> walk = [&](double lp) {
    const auto next = log_probs(prefix);
    if (prefix.size() >= min_len) {
      const double s = (lp + next[static_cast<std::size_t>(Vocab::kEos)]) / static_cast<double>(prefix.size() + 1);
      if (s > best.score) best = {prefix, s};
    }
    if (prefix.size() == max_len) return;
    for (std::size_t tok = 0; tok < vocab; ++tok) {
      const int t = static_cast<int>(tok);
      if (t == Vocab::kPad || t == Vocab::kBos || t == Vocab::kEos) continue;
      prefix.push_back(t);
      walk(lp + next[tok]);
      prefix.pop_back();
    }
  };
  walk(0.0);
  return best;
}

/// A freshly initialized small model and a random input to condition on.
struct TinyDecodeCase {
  std::unique_ptr<SsgModel> model;
  EncodedInput input;

  TinyDecodeCase(std::uint64_t seed, std::size_t vocab, std::size_t max_len, std::size_t d_model = 8) {
    ModelConfig cfg;
    cfg.d_model = d_model;
    cfg.n_heads = 2;
    cfg.vocab_size = vocab;
    cfg.max_doc_len = 20;
    cfg.max_prev_summ_len = 20;
    cfg.min_decode_len = 1;
    cfg.max_decode_len = max_len;
    model = std::make_unique<SsgModel>(cfg, seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const auto c = random_case(cfg, rng, 6, 3, 1, 1);
    input = model->prepare(c.example);
  }
};

}  // namespace ssg::oracle
