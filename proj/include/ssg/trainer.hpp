#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssg/corpus.hpp"
#include "ssg/decode.hpp"
#include "ssg/model.hpp"
#include "ssg/text.hpp"

namespace ssg {

struct TrainConfig {
  double lr_gen = 1e-3;
  double lr_disc = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_lo = -2.0;
  double clip_hi = 2.0;
  double lambda_gan = 1.0;
  std::size_t steps = 0;
  std::size_t disc_steps_per_gen_step = 1;
  std::uint64_t seed = 1;
  /// 0 writes only the final checkpoint.
  std::size_t checkpoint_interval = 0;

  void validate() const;
};

/// Adam with bias correction and element-wise gradient clipping applied
/// before the moment updates. Blocks without a gradient count as zero.
class Adam {
 public:
  Adam(std::vector<ParamBlock*> blocks, double lr, const TrainConfig& config);

  /// Updates every block and clears its gradient. Returns the L2 norm of
  /// the unclipped gradient. Throws NumericError before touching any block
  /// if a gradient element is not finite.
  double step();
  std::size_t steps() const { return t_; }

 private:
  std::vector<ParamBlock*> blocks_;
  double lr_;
  TrainConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

struct TrainRecord {
  std::size_t step = 0;
  double ls = 0.0;
  double ld = 0.0;
  double lg = 0.0;
  double d_pos = 0.0;
  double d_neg = 0.0;
  double grad_norm = 0.0;
  /// The greedy decode was empty and EOS stood in for it.
  bool empty_generation = false;
};

struct DiscRecord {
  double ld = 0.0;
  double lg = 0.0;
  double d_pos = 0.0;
  double d_neg = 0.0;
};

class Trainer {
 public:
  Trainer(SsgModel& model, const TrainConfig& config);

  /// Greedy decode, discriminator update(s) on L_d, then a generator update
  /// on L_s + lambda * L_g.
  TrainRecord step(const Example& ex);
  /// One discriminator update against a fixed generated summary. The
  /// returned values are from before the update.
  DiscRecord disc_step(const Example& ex, std::span<const int> generated);
  std::size_t steps_done() const { return step_; }

  DecodeOptions greedy_options() const;

 private:
  SsgModel& model_;
  TrainConfig config_;
  Adam gen_;
  Adam disc_;
  std::size_t step_ = 0;
};

/// L_s of one example without recording gradients.
double example_nll(SsgModel& model, const Example& ex);

enum class InputMode { Stepwise, Cps, Cpd };

std::string to_string(InputMode mode);
InputMode parse_input_mode(const std::string& s);

/// Training examples for every pair of every stream. Stepwise: the previous
/// summary is the concatenated earlier gold summaries. Cps / Cpd: the
/// earlier gold summaries / the previous document are prepended to the
/// document and the previous summary is empty. All parts are clipped to the
/// model's lengths.
std::vector<Example> build_examples(std::span<const StreamRecord> streams, const Vocab& vocab, const SsgModel& model, InputMode mode);

struct OverfitReport {
  std::size_t steps = 0;
  double final_ls = 0.0;
  std::size_t exact = 0;
  std::size_t total = 0;
  bool converged = false;
  double exact_fraction() const { return total == 0 ? 0.0 : static_cast<double>(exact) / static_cast<double>(total); }
};

/// Round-robin training until the mean L_s over `examples` drops below
/// `target_ls` (checked every `check_every` steps) or `max_steps` is spent.
/// Exactness compares the greedy decode with the target.
OverfitReport overfit(SsgModel& model, std::span<const Example> examples, const TrainConfig& config, std::size_t max_steps,
                      double target_ls = 0.1, std::size_t check_every = 50);

/// Number of examples whose greedy decode equals the target exactly.
std::size_t exact_matches(SsgModel& model, std::span<const Example> examples, const DecodeOptions& options);

void write_train_log_header(std::ostream& out);
void write_train_log_row(std::ostream& out, const TrainRecord& r);

}  // namespace ssg
