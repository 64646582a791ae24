#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ssg/autograd.hpp"
#include "ssg/tensor.hpp"
#include "ssg/text.hpp"

namespace ssg {

enum class ScoreMode { ReluAsPaper, Softmax };
/// Softmax across document positions (the SRU gate) or the plain GRU
/// sigmoid update gate.
enum class GateMode { PositionSoftmax, Sigmoid };

struct ModelConfig {
  std::size_t d_model = 32;
  std::size_t n_heads = 2;
  std::size_t n_enc_layers = 1;
  std::size_t n_dec_layers = 1;
  std::size_t vocab_size = 64;
  /// 0 means 2 * d_model.
  std::size_t ffn_dim = 0;
  std::size_t max_doc_len = 1000;
  std::size_t max_prev_summ_len = 300;
  std::size_t min_decode_len = 100;
  std::size_t max_decode_len = 300;
  std::vector<std::size_t> conv_widths{3, 4, 5};
  std::size_t n_filters_per_width = 8;
  ScoreMode attention_score_mode = ScoreMode::ReluAsPaper;
  GateMode gate_mode = GateMode::PositionSoftmax;
  /// false gives the single-input baseline: no SRU pass, no previous-summary
  /// attention.
  bool use_sru = true;

  std::size_t ffn() const { return ffn_dim == 0 ? 2 * d_model : ffn_dim; }
  std::size_t max_conv_width() const;
  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;
};

std::string to_string(ScoreMode mode);
std::string to_string(GateMode mode);
ScoreMode parse_score_mode(const std::string& s);
GateMode parse_gate_mode(const std::string& s);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint parameter disagrees with the model built from the config.
class CheckpointMismatch : public CheckpointError {
 public:
  CheckpointMismatch(const std::string& what, std::string param) : CheckpointError(what), param_(std::move(param)) {}
  const std::string& param() const { return param_; }

 private:
  std::string param_;
};

struct ParamBlock {
  std::string name;
  Tensor value;
  bool discriminator = false;
};

struct BlockSpec {
  enum class Init { Zeros, Ones, Uniform };
  std::string name;
  Shape shape;
  bool discriminator = false;
  Init init = Init::Uniform;
  double bound = 0.0;
};

/// Every parameter block, in checkpoint order, derived from the config.
std::vector<BlockSpec> model_layout(const ModelConfig& config);

/// Which parameter group receives gradient on a tape.
enum class Track { All, Generator, Discriminator, None };

struct AttentionWeights {
  Tensor* wq;
  Tensor* wk;
  Tensor* wv;
  Tensor* wo;
};

struct LayerWeights {
  AttentionWeights attn;
  Tensor *ln1_g, *ln1_b;
  Tensor *ff_w1, *ff_b1, *ff_w2, *ff_b2;
  Tensor *ln2_g, *ln2_b;
};

struct SruWeights {
  Tensor *w1, *u1, *b1;
  Tensor *w2, *u2, *b2;
  Tensor *w3, *u3, *b3;
  Tensor *w4, *b4;
  Tensor *w5, *b5;
};

struct DiscWeights {
  Tensor *wz, *bz;
  std::vector<Tensor*> conv_k;
  std::vector<Tensor*> conv_b;
  Tensor *wh, *bh;
};

class SsgModel;

/// Binds model parameters onto one tape, once each.
class Binder {
 public:
  Binder(Tape& tape, SsgModel& model, Track track);

  Tape& tape() { return tape_; }
  const SsgModel& model() const { return model_; }
  Var operator()(Tensor* param);

 private:
  Tape& tape_;
  SsgModel& model_;
  Track track_;
  std::unordered_map<const Tensor*, Var> bound_;
};

struct SruTrace {
  Var h_g;
  /// u' (or u in sigmoid mode), [T_d x d].
  Var gate;
  /// h~_t for every position, [T_d x d].
  Var candidate;
};

struct HeadOutput {
  Var logits;
  Var z_a;
  /// Invalid when there is no previous summary.
  Var z_b;
  Var c_a;
  Var c_b;
};

/// One training or evaluation unit: the document, the previous summary
/// (possibly empty) and the target summary, all without BOS/EOS.
struct Example {
  TokenIds document;
  TokenIds previous;
  TokenIds target;
};

/// Encoder outputs reused across decoding steps.
struct EncodedInput {
  Tensor h_g;
  std::optional<Tensor> h_s;
};

enum class Which { Document, PrevSummary, Summary };
enum class CandidateSource { EncodedGold, DecoderGenerated };

class SsgModel {
 public:
  SsgModel(ModelConfig config, std::uint64_t seed);
  SsgModel(const SsgModel&) = delete;
  SsgModel& operator=(const SsgModel&) = delete;

  const ModelConfig& config() const { return config_; }
  std::deque<ParamBlock>& blocks() { return blocks_; }
  const std::deque<ParamBlock>& blocks() const { return blocks_; }
  ParamBlock& block(const std::string& name);
  bool is_discriminator(const Tensor* t) const;
  std::size_t parameter_count() const;

  /// Every block shape recomputed from the config; returns mismatch messages.
  std::vector<std::string> shape_audit() const;

  // Forward pieces. All take a Binder bound to the tape being recorded.
  Var embed(Binder& b, std::span<const int> ids);
  Var encode(Binder& b, std::span<const int> ids, Which which);
  SruTrace sru_polish(Binder& b, Var h_d, std::optional<Var> q);
  /// Decoder stack over `inputs` (BOS-prefixed), causally masked: g~ [T x d].
  Var decoder_states(Binder& b, std::span<const int> inputs);
  HeadOutput head(Binder& b, Var g_tilde, Var h_g, std::optional<Var> h_s);
  /// h_s may be absent (first in stream); its rows are then all zero.
  Var discriminate(Binder& b, std::optional<Var> h_s, Var candidate, CandidateSource source);

  /// Encodes document and previous summary and runs the SRU pass.
  struct Encoded {
    Var h_g;
    std::optional<Var> h_s;
  };
  Encoded encode_inputs(Binder& b, const Example& ex);

  /// Teacher-forced L_s; logits optionally returned.
  Var nll(Binder& b, const Encoded& enc, std::span<const int> target, Var* logits = nullptr);

  struct GanTerms {
    Var d_pos;
    Var d_neg;
    Var l_d;
    Var l_g;
  };
  /// D on (h_s, encoded gold) and on (h_s, decoder states of `generated`).
  GanTerms gan(Binder& b, const Encoded& enc, std::span<const int> gold, std::span<const int> generated);
  Var positive_score(Binder& b, const Encoded& enc, std::span<const int> gold);
  Var negative_score(Binder& b, const Encoded& enc, std::span<const int> generated);

  /// Frozen encoder outputs for decoding.
  EncodedInput prepare(const Example& ex);
  /// Log-probabilities of the next token after BOS + prefix.
  std::vector<double> next_log_probs(const EncodedInput& input, std::span<const int> prefix);

  /// Document truncated to max_doc_len (keep the start).
  TokenIds clip_document(std::span<const int> ids) const;
  /// Previous summary truncated to max_prev_summ_len (keep the end).
  TokenIds clip_previous(std::span<const int> ids) const;
  /// Target truncated to max_decode_len (keep the start).
  TokenIds clip_target(std::span<const int> ids) const;

  void save(const std::string& path) const;
  /// Throws CheckpointMismatch on the first name or shape disagreement.
  void load(const std::string& path);

  const std::vector<LayerWeights>& encoder() const { return enc_; }
  const std::vector<LayerWeights>& decoder() const { return dec_; }
  const SruWeights& sru() const { return sru_; }
  const DiscWeights& disc() const { return disc_; }
  Tensor* embedding() const { return embed_; }
  Tensor* wa() const { return wa_; }
  Tensor* wb() const { return wb_; }
  Tensor* wc() const { return wc_; }
  Tensor* wd() const { return wd_; }
  Tensor* wo() const { return wo_; }

 private:
  Tensor* find(const std::string& name);
  LayerWeights layer_weights(const std::string& prefix);
  Var attention(Binder& b, const AttentionWeights& w, Var x, bool causal);
  Var layer(Binder& b, const LayerWeights& w, Var x, bool causal);
  Var positions(Tape& tape, std::size_t length) const;

  ModelConfig config_;
  std::deque<ParamBlock> blocks_;
  std::unordered_map<const Tensor*, bool> is_disc_;
  Tensor* embed_ = nullptr;
  std::vector<LayerWeights> enc_, dec_;
  SruWeights sru_{};
  Tensor *wa_ = nullptr, *wb_ = nullptr, *wc_ = nullptr, *wd_ = nullptr, *wo_ = nullptr;
  DiscWeights disc_{};
};

/// L_d = -(log D_pos + log(1 - D_neg)), D clamped to [1e-7, 1 - 1e-7].
Var discriminator_loss(Var d_pos, Var d_neg);
/// L_g = log(1 - D_neg), D clamped the same way.
Var generator_adv_loss(Var d_neg);

inline constexpr double kProbClamp = 1e-7;

}  // namespace ssg
