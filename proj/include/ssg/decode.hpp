#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ssg/model.hpp"
#include "ssg/text.hpp"

namespace ssg {

struct DecodeOptions {
  std::size_t min_len = 5;
  std::size_t max_len = 40;
  std::size_t beam_width = 1;
};

/// Next-token log-probabilities given the tokens generated so far.
class StepScorer {
 public:
  virtual ~StepScorer() = default;
  virtual std::vector<double> next_log_probs(std::span<const int> prefix) = 0;
};

class ModelScorer : public StepScorer {
 public:
  ModelScorer(SsgModel& model, EncodedInput input) : model_(model), input_(std::move(input)) {}
  std::vector<double> next_log_probs(std::span<const int> prefix) override {
    return model_.next_log_probs(input_, prefix);
  }

 private:
  SsgModel& model_;
  EncodedInput input_;
};

/// PAD and BOS are never emitted; EOS is removed while the prefix is shorter
/// than min_len and is the only choice once it reaches max_len. Removed
/// entries become -infinity; the rest keep their values. NaN or +infinity
/// throws NumericError.
std::vector<double> mask_log_probs(std::vector<double> log_probs, std::size_t prefix_len, const DecodeOptions& options);

/// Argmax at each step, lowest id on ties. The result excludes EOS.
TokenIds greedy_decode(StepScorer& scorer, const DecodeOptions& options);

struct Hypothesis {
  TokenIds tokens;
  double log_prob = 0.0;
  bool finished = false;
  /// log_prob divided by the number of scored tokens (EOS included).
  double normalized() const;
};

/// Length-normalized beam search. Width 1 is greedy decoding. Wider beams
/// keep the top `beam_width` non-EOS extensions by cumulative
/// log-probability, and every EOS extension of a kept hypothesis joins the
/// finished pool. Search stops when no active hypothesis can still beat the
/// best finished one; the best normalized finished hypothesis wins.
Hypothesis beam_search(StepScorer& scorer, const DecodeOptions& options);

TokenIds decode(StepScorer& scorer, const DecodeOptions& options);

}  // namespace ssg
