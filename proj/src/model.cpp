#include "ssg/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>

namespace ssg {

std::size_t ModelConfig::max_conv_width() const {
  return conv_widths.empty() ? 0 : *std::max_element(conv_widths.begin(), conv_widths.end());
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("model config: " + m); };
  if (d_model == 0) fail("d_model must be positive");
  if (n_heads == 0 || d_model % n_heads != 0) fail(fmt::format("d_model {} is not divisible by n_heads {}", d_model, n_heads));
  if (n_enc_layers == 0 || n_dec_layers == 0) fail("layer counts must be positive");
  if (vocab_size <= Vocab::kNumSpecial) fail(fmt::format("vocab_size {} leaves no room for ordinary tokens", vocab_size));
  if (max_doc_len == 0 || max_prev_summ_len == 0 || max_decode_len == 0) fail("lengths must be positive");
  if (min_decode_len > max_decode_len) {
    fail(fmt::format("min_decode_len {} exceeds max_decode_len {}", min_decode_len, max_decode_len));
  }
  if (conv_widths.empty() || n_filters_per_width == 0) fail("discriminator needs at least one conv width and filter");
  for (auto w : conv_widths)
    if (w == 0) fail("conv widths must be positive");
}

std::string to_string(ScoreMode mode) { return mode == ScoreMode::ReluAsPaper ? "relu_as_paper" : "softmax"; }
std::string to_string(GateMode mode) { return mode == GateMode::PositionSoftmax ? "position_softmax" : "sigmoid"; }

ScoreMode parse_score_mode(const std::string& s) {
  if (s == "relu_as_paper") return ScoreMode::ReluAsPaper;
  if (s == "softmax") return ScoreMode::Softmax;
  throw std::invalid_argument(fmt::format("unknown attention_score_mode '{}'", s));
}

GateMode parse_gate_mode(const std::string& s) {
  if (s == "position_softmax") return GateMode::PositionSoftmax;
  if (s == "sigmoid") return GateMode::Sigmoid;
  throw std::invalid_argument(fmt::format("unknown gate_mode '{}'", s));
}

std::vector<BlockSpec> model_layout(const ModelConfig& c) {
  using Init = BlockSpec::Init;
  const std::size_t d = c.d_model, f = c.ffn(), v = c.vocab_size;
  std::vector<BlockSpec> out;
  auto weight = [&](std::string name, std::size_t in, std::size_t o, bool disc = false) {
    out.push_back({std::move(name), {in, o}, disc, Init::Uniform, 1.0 / std::sqrt(static_cast<double>(in))});
  };
  auto zeros = [&](std::string name, std::size_t n, bool disc = false) { out.push_back({std::move(name), {1, n}, disc, Init::Zeros, 0.0}); };
  auto ones = [&](std::string name, std::size_t n) { out.push_back({std::move(name), {1, n}, false, Init::Ones, 0.0}); };
  auto layer = [&](const std::string& p) {
    for (const char* m : {"wq", "wk", "wv", "wo"}) weight(p + ".attn." + m, d, d);
    ones(p + ".ln1.g", d);
    zeros(p + ".ln1.b", d);
    weight(p + ".ffn.w1", d, f);
    zeros(p + ".ffn.b1", f);
    weight(p + ".ffn.w2", f, d);
    zeros(p + ".ffn.b2", d);
    ones(p + ".ln2.g", d);
    zeros(p + ".ln2.b", d);
  };

  out.push_back({"embed", {v, d}, false, Init::Uniform, 1.0 / std::sqrt(static_cast<double>(d))});
  for (std::size_t l = 0; l < c.n_enc_layers; ++l) layer(fmt::format("enc{}", l));
  for (std::size_t l = 0; l < c.n_dec_layers; ++l) layer(fmt::format("dec{}", l));
  for (int g = 1; g <= 3; ++g) {
    weight(fmt::format("sru.w{}", g), d, d);
    weight(fmt::format("sru.u{}", g), d, d);
    zeros(fmt::format("sru.b{}", g), d);
  }
  weight("sru.w4", d, d);
  zeros("sru.b4", d);
  weight("sru.w5", 3 * d, d);
  zeros("sru.b5", d);
  for (const char* m : {"wa", "wb", "wc", "wd"}) weight(std::string("cross.") + m, d, d);
  weight("out.wo", 3 * d, v);
  weight("disc.wz", d, d, true);
  zeros("disc.bz", d, true);
  for (auto w : c.conv_widths) {
    weight(fmt::format("disc.conv{}.k", w), w * 2 * d, c.n_filters_per_width, true);
    out.push_back({fmt::format("disc.conv{}.b", w), {1, c.n_filters_per_width}, true, Init::Uniform,
                   1.0 / std::sqrt(static_cast<double>(w * 2 * d))});
  }
  weight("disc.wh", c.conv_widths.size() * c.n_filters_per_width, 1, true);
  zeros("disc.bh", 1, true);
  return out;
}

// ---------------------------------------------------------------------------
// Binder

Binder::Binder(Tape& tape, SsgModel& model, Track track) : tape_(tape), model_(model), track_(track) {}

Var Binder::operator()(Tensor* param) {
  if (auto it = bound_.find(param); it != bound_.end()) return it->second;
  const bool disc = model_.is_discriminator(param);
  bool track = false;
  switch (track_) {
    case Track::All: track = true; break;
    case Track::Generator: track = !disc; break;
    case Track::Discriminator: track = disc; break;
    case Track::None: break;
  }
  Var v = tape_.parameter(*param, track);
  bound_.emplace(param, v);
  return v;
}

// ---------------------------------------------------------------------------
// Construction

SsgModel::SsgModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  for (const auto& spec : model_layout(config_)) {
    Tensor t(spec.shape, spec.init == BlockSpec::Init::Ones ? 1.0 : 0.0);
    if (spec.init == BlockSpec::Init::Uniform) {
      std::uniform_real_distribution<double> dist(-spec.bound, spec.bound);
      for (auto& x : t.values()) x = dist(rng);
    }
    t.set_requires_grad(true);
    blocks_.push_back({spec.name, std::move(t), spec.discriminator});
    is_disc_.emplace(&blocks_.back().value, spec.discriminator);
  }

  embed_ = find("embed");
  for (std::size_t l = 0; l < config_.n_enc_layers; ++l) enc_.push_back(layer_weights(fmt::format("enc{}", l)));
  for (std::size_t l = 0; l < config_.n_dec_layers; ++l) dec_.push_back(layer_weights(fmt::format("dec{}", l)));
  sru_ = {find("sru.w1"), find("sru.u1"), find("sru.b1"), find("sru.w2"), find("sru.u2"), find("sru.b2"), find("sru.w3"),
          find("sru.u3"), find("sru.b3"), find("sru.w4"), find("sru.b4"), find("sru.w5"), find("sru.b5")};
  wa_ = find("cross.wa");
  wb_ = find("cross.wb");
  wc_ = find("cross.wc");
  wd_ = find("cross.wd");
  wo_ = find("out.wo");
  disc_.wz = find("disc.wz");
  disc_.bz = find("disc.bz");
  for (auto w : config_.conv_widths) {
    disc_.conv_k.push_back(find(fmt::format("disc.conv{}.k", w)));
    disc_.conv_b.push_back(find(fmt::format("disc.conv{}.b", w)));
  }
  disc_.wh = find("disc.wh");
  disc_.bh = find("disc.bh");
}

Tensor* SsgModel::find(const std::string& name) { return &block(name).value; }

ParamBlock& SsgModel::block(const std::string& name) {
  for (auto& b : blocks_)
    if (b.name == name) return b;
  throw std::out_of_range(fmt::format("no parameter block named {}", name));
}

bool SsgModel::is_discriminator(const Tensor* t) const {
  auto it = is_disc_.find(t);
  if (it == is_disc_.end()) throw ContractError("tensor is not a parameter of this model");
  return it->second;
}

std::size_t SsgModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b.value.size();
  return n;
}

LayerWeights SsgModel::layer_weights(const std::string& p) {
  return {{find(p + ".attn.wq"), find(p + ".attn.wk"), find(p + ".attn.wv"), find(p + ".attn.wo")},
          find(p + ".ln1.g"),
          find(p + ".ln1.b"),
          find(p + ".ffn.w1"),
          find(p + ".ffn.b1"),
          find(p + ".ffn.w2"),
          find(p + ".ffn.b2"),
          find(p + ".ln2.g"),
          find(p + ".ln2.b")};
}

std::vector<std::string> SsgModel::shape_audit() const {
  std::vector<std::string> problems;
  const auto layout = model_layout(config_);
  if (layout.size() != blocks_.size()) {
    problems.push_back(fmt::format("expected {} parameter blocks, found {}", layout.size(), blocks_.size()));
  }
  for (std::size_t i = 0; i < std::min(layout.size(), blocks_.size()); ++i) {
    const auto& want = layout[i];
    const auto& got = blocks_[i];
    if (want.name != got.name || want.shape != got.value.shape()) {
      problems.push_back(fmt::format("{}: expected {} {}, found {} {}", want.name, want.name, shape_str(want.shape), got.name,
                                     shape_str(got.value.shape())));
    }
  }
  return problems;
}

// ---------------------------------------------------------------------------
// Forward

Var SsgModel::positions(Tape& tape, std::size_t length) const {
  const std::size_t d = config_.d_model;
  Tensor pe({length, d});
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t i = 0; i < d; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d));
      pe.at(t, i) = i % 2 == 0 ? std::sin(static_cast<double>(t) * rate) : std::cos(static_cast<double>(t) * rate);
    }
  }
  return tape.constant(std::move(pe));
}

Var SsgModel::embed(Binder& b, std::span<const int> ids) {
  Var e = scale(gather_rows(b(embed_), ids), std::sqrt(static_cast<double>(config_.d_model)));
  return add(e, positions(b.tape(), ids.size()));
}

Var SsgModel::attention(Binder& b, const AttentionWeights& w, Var x, bool causal) {
  const std::size_t heads = config_.n_heads, dh = config_.d_model / heads;
  Var q = matmul(x, b(w.wq)), k = matmul(x, b(w.wk)), v = matmul(x, b(w.wv));
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    Var scores = scale(matmul(slice_cols(q, h * dh, dh), transpose(slice_cols(k, h * dh, dh))), inv);
    if (causal) scores = causal_mask(scores);
    outs.push_back(matmul(softmax(scores, 1), slice_cols(v, h * dh, dh)));
  }
  Var joined = heads == 1 ? outs[0] : concat(outs, 1);
  return matmul(joined, b(w.wo));
}

Var SsgModel::layer(Binder& b, const LayerWeights& w, Var x, bool causal) {
  x = layer_norm(add(x, attention(b, w.attn, x, causal)), b(w.ln1_g), b(w.ln1_b));
  Var hidden = relu(add_bias(matmul(x, b(w.ff_w1)), b(w.ff_b1)));
  Var ff = add_bias(matmul(hidden, b(w.ff_w2)), b(w.ff_b2));
  return layer_norm(add(x, ff), b(w.ln2_g), b(w.ln2_b));
}

Var SsgModel::encode(Binder& b, std::span<const int> ids, Which which) {
  if (ids.empty()) throw ContractError("encode: empty input sequence");
  const std::size_t limit = which == Which::Document      ? config_.max_doc_len
                            : which == Which::PrevSummary ? config_.max_prev_summ_len
                                                          : config_.max_decode_len;
  if (ids.size() > limit) throw ContractError(fmt::format("encode: input of length {} exceeds the limit {}", ids.size(), limit));
  Var x = embed(b, ids);
  for (const auto& w : enc_) x = layer(b, w, x, false);
  return x;
}

SruTrace SsgModel::sru_polish(Binder& b, Var h_d, std::optional<Var> q) {
  Tape& tape = b.tape();
  const std::size_t steps = h_d.rows(), d = config_.d_model;
  if (h_d.cols() != d) throw ShapeError(fmt::format("sru_polish: hidden states {} do not have {} columns", shape_str(h_d.shape()), d));
  Var query = q ? *q : tape.constant(Tensor({1, d}, 0.0));

  Var gate;
  if (config_.gate_mode == GateMode::PositionSoftmax) {
    Var qs = repeat_rows(query, steps);
    Var f = concat({mul(h_d, qs), h_d, qs}, 1);
    Var inner = tanh(add_bias(matmul(f, b(sru_.w5)), b(sru_.b5)));
    Var big_f = add_bias(matmul(inner, b(sru_.w4)), b(sru_.b4));
    gate = softmax(big_f, 0);
  }
  Var xw1 = config_.gate_mode == GateMode::Sigmoid ? add_bias(matmul(h_d, b(sru_.w1)), b(sru_.b1)) : Var{};
  Var xw2 = add_bias(matmul(h_d, b(sru_.w2)), b(sru_.b2));
  Var xw3 = add_bias(matmul(h_d, b(sru_.w3)), b(sru_.b3));

  Var prev = tape.constant(Tensor({1, d}, 0.0));
  std::vector<Var> states, candidates, gates;
  for (std::size_t t = 0; t < steps; ++t) {
    Var r = sigmoid(add(slice_rows(xw2, t, 1), matmul(prev, b(sru_.u2))));
    Var cand = tanh(add(slice_rows(xw3, t, 1), mul(r, matmul(prev, b(sru_.u3)))));
    Var u = config_.gate_mode == GateMode::PositionSoftmax ? slice_rows(gate, t, 1)
                                                            : sigmoid(add(slice_rows(xw1, t, 1), matmul(prev, b(sru_.u1))));
    prev = add(mul(u, cand), mul(one_minus(u), prev));
    states.push_back(prev);
    candidates.push_back(cand);
    if (config_.gate_mode == GateMode::Sigmoid) gates.push_back(u);
  }
  if (config_.gate_mode == GateMode::Sigmoid) gate = concat(gates, 0);
  return {concat(states, 0), gate, concat(candidates, 0)};
}

Var SsgModel::decoder_states(Binder& b, std::span<const int> inputs) {
  if (inputs.empty()) throw ContractError("decoder_states: empty input sequence");
  Var x = embed(b, inputs);
  for (const auto& w : dec_) x = layer(b, w, x, true);
  return x;
}

HeadOutput SsgModel::head(Binder& b, Var g_tilde, Var h_g, std::optional<Var> h_s) {
  auto scores = [&](Var keys, Tensor* wq, Tensor* wk) {
    Var s = matmul(matmul(g_tilde, b(wq)), transpose(matmul(keys, b(wk))));
    return config_.attention_score_mode == ScoreMode::ReluAsPaper ? relu(s) : softmax(s, 1);
  };
  HeadOutput out;
  out.z_a = scores(h_g, wa_, wb_);
  out.c_a = matmul(out.z_a, h_g);
  if (config_.use_sru && h_s) {
    out.z_b = scores(*h_s, wc_, wd_);
    out.c_b = matmul(out.z_b, *h_s);
  } else {
    out.c_b = b.tape().constant(Tensor({g_tilde.rows(), config_.d_model}, 0.0));
  }
  out.logits = matmul(concat({g_tilde, out.c_a, out.c_b}, 1), b(wo_));
  return out;
}

Var SsgModel::discriminate(Binder& b, std::optional<Var> h_s, Var candidate, CandidateSource source) {
  Tape& tape = b.tape();
  const std::size_t d = config_.d_model;
  Var cand = candidate;
  if (source == CandidateSource::EncodedGold) cand = add_bias(matmul(candidate, b(disc_.wz)), b(disc_.bz));
  const std::size_t ts = h_s ? h_s->rows() : 0, tc = cand.rows();
  const std::size_t length = std::max(ts, tc) + config_.max_conv_width();
  auto pad = [&](std::optional<Var> x, std::size_t rows) {
    const std::size_t have = x ? x->rows() : 0;
    Var zeros = tape.constant(Tensor({rows - have, d}, 0.0));
    return x ? concat({*x, zeros}, 0) : zeros;
  };
  Var paired = concat({pad(h_s, length), pad(cand, length)}, 1);
  std::vector<Var> kernels, biases;
  for (auto* k : disc_.conv_k) kernels.push_back(b(k));
  for (auto* c : disc_.conv_b) biases.push_back(b(c));
  Var pooled = conv1d_maxpool(paired, kernels, biases);
  return sigmoid(add_bias(matmul(relu(pooled), b(disc_.wh)), b(disc_.bh)));
}

SsgModel::Encoded SsgModel::encode_inputs(Binder& b, const Example& ex) {
  Encoded enc;
  Var h_d = encode(b, ex.document, Which::Document);
  if (!config_.use_sru) {
    enc.h_g = h_d;
    return enc;
  }
  std::optional<Var> q;
  if (!ex.previous.empty()) {
    enc.h_s = encode(b, ex.previous, Which::PrevSummary);
    q = mean_rows(*enc.h_s);
  }
  enc.h_g = sru_polish(b, h_d, q).h_g;
  return enc;
}

namespace {

TokenIds with_bos(std::span<const int> ids, std::size_t keep) {
  TokenIds out{Vocab::kBos};
  out.insert(out.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep));
  return out;
}

}  // namespace

Var SsgModel::nll(Binder& b, const Encoded& enc, std::span<const int> target, Var* logits) {
  const TokenIds inputs = with_bos(target, target.size());
  TokenIds gold(target.begin(), target.end());
  gold.push_back(Vocab::kEos);
  Var g = decoder_states(b, inputs);
  HeadOutput h = head(b, g, enc.h_g, enc.h_s);
  if (logits) *logits = h.logits;
  return nll_from_logits(h.logits, gold, Vocab::kPad);
}

Var discriminator_loss(Var d_pos, Var d_neg) {
  Var pos = log(clamp(d_pos, kProbClamp, 1.0 - kProbClamp));
  Var neg = log(one_minus(clamp(d_neg, kProbClamp, 1.0 - kProbClamp)));
  return scale(add(pos, neg), -1.0);
}

Var generator_adv_loss(Var d_neg) { return log(one_minus(clamp(d_neg, kProbClamp, 1.0 - kProbClamp))); }

Var SsgModel::positive_score(Binder& b, const Encoded& enc, std::span<const int> gold) {
  const TokenIds eos_only{Vocab::kEos};
  if (gold.empty()) gold = eos_only;
  return discriminate(b, enc.h_s, encode(b, gold, Which::Summary), CandidateSource::EncodedGold);
}

Var SsgModel::negative_score(Binder& b, const Encoded& enc, std::span<const int> generated) {
  const TokenIds eos_only{Vocab::kEos};
  if (generated.empty()) generated = eos_only;
  Var g = decoder_states(b, with_bos(generated, generated.size() - 1));
  return discriminate(b, enc.h_s, g, CandidateSource::DecoderGenerated);
}

SsgModel::GanTerms SsgModel::gan(Binder& b, const Encoded& enc, std::span<const int> gold, std::span<const int> generated) {
  GanTerms out;
  out.d_pos = positive_score(b, enc, gold);
  out.d_neg = negative_score(b, enc, generated);
  out.l_d = discriminator_loss(out.d_pos, out.d_neg);
  out.l_g = generator_adv_loss(out.d_neg);
  return out;
}

EncodedInput SsgModel::prepare(const Example& ex) {
  Tape tape;
  Binder b(tape, *this, Track::None);
  Encoded enc = encode_inputs(b, ex);
  EncodedInput out{enc.h_g.value(), std::nullopt};
  if (enc.h_s) out.h_s = enc.h_s->value();
  return out;
}

std::vector<double> SsgModel::next_log_probs(const EncodedInput& input, std::span<const int> prefix) {
  Tape tape;
  Binder b(tape, *this, Track::None);
  Var g = decoder_states(b, with_bos(prefix, prefix.size()));
  Var last = slice_rows(g, g.rows() - 1, 1);
  std::optional<Var> h_s;
  if (input.h_s) h_s = tape.constant(*input.h_s);
  const auto& logits = head(b, last, tape.constant(input.h_g), h_s).logits.value();
  const double mx = *std::max_element(logits.values().begin(), logits.values().end());
  double total = 0.0;
  for (double z : logits.values()) total += std::exp(z - mx);
  const double lse = mx + std::log(total);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

TokenIds SsgModel::clip_document(std::span<const int> ids) const {
  return {ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(ids.size(), config_.max_doc_len))};
}

TokenIds SsgModel::clip_previous(std::span<const int> ids) const {
  const std::size_t keep = std::min(ids.size(), config_.max_prev_summ_len);
  return {ids.end() - static_cast<std::ptrdiff_t>(keep), ids.end()};
}

TokenIds SsgModel::clip_target(std::span<const int> ids) const {
  return {ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(ids.size(), config_.max_decode_len))};
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kMagic = "ssg-checkpoint v1";

}  // namespace

void SsgModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(fmt::format("cannot write checkpoint {}", path));
  out << kMagic << '\n' << "params " << blocks_.size() << '\n';
  std::size_t offset = 0;
  for (const auto& b : blocks_) {
    out << b.name << ' ' << b.value.rows() << 'x' << b.value.cols() << ' ' << offset << '\n';
    offset += b.value.size() * sizeof(double);
  }
  out << "end\n";
  for (const auto& b : blocks_) {
    for (double x : b.value.values()) {
      auto bits = std::bit_cast<std::uint64_t>(x);
      char bytes[8];
      for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
      out.write(bytes, 8);
    }
  }
  if (!out) throw CheckpointError(fmt::format("failed writing checkpoint {}", path));
}

void SsgModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(fmt::format("cannot open checkpoint {}", path));
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw CheckpointError(fmt::format("{} is not an ssg checkpoint", path));
  std::size_t count = 0;
  {
    std::getline(in, line);
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word >> count) || word != "params") throw CheckpointError(fmt::format("{}: bad parameter count line", path));
  }
  struct Entry {
    std::string name;
    std::size_t rows = 0, cols = 0, offset = 0;
  };
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw CheckpointError(fmt::format("{}: manifest ends early", path));
    std::istringstream ls(line);
    Entry e;
    std::string shape;
    char x = 0;
    if (!(ls >> e.name >> shape >> e.offset)) throw CheckpointError(fmt::format("{}: bad manifest line '{}'", path, line));
    std::istringstream ss(shape);
    if (!(ss >> e.rows >> x >> e.cols) || x != 'x') throw CheckpointError(fmt::format("{}: bad shape '{}'", path, shape));
    entries.push_back(std::move(e));
  }
  if (!std::getline(in, line) || line != "end") throw CheckpointError(fmt::format("{}: manifest not terminated", path));

  for (std::size_t i = 0; i < std::max(entries.size(), blocks_.size()); ++i) {
    if (i >= blocks_.size()) {
      throw CheckpointMismatch(fmt::format("checkpoint has extra parameter {}", entries[i].name), entries[i].name);
    }
    const auto& want = blocks_[i];
    if (i >= entries.size()) throw CheckpointMismatch(fmt::format("checkpoint lacks parameter {}", want.name), want.name);
    const auto& got = entries[i];
    if (got.name != want.name) {
      throw CheckpointMismatch(fmt::format("parameter {} expected, checkpoint has {}", want.name, got.name), want.name);
    }
    if (got.rows != want.value.rows() || got.cols != want.value.cols()) {
      throw CheckpointMismatch(fmt::format("parameter {}: config expects {}x{}, checkpoint has {}x{}", want.name, want.value.rows(),
                                           want.value.cols(), got.rows, got.cols),
                               want.name);
    }
  }
  std::vector<std::vector<double>> values;
  for (const auto& b : blocks_) {
    std::vector<double> v(b.value.size());
    for (auto& x : v) {
      unsigned char bytes[8];
      if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw CheckpointError(fmt::format("{}: data section truncated", path));
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
      x = std::bit_cast<double>(bits);
    }
    values.push_back(std::move(v));
  }
  for (std::size_t i = 0; i < blocks_.size(); ++i) std::copy(values[i].begin(), values[i].end(), blocks_[i].value.data().begin());
}

}  // namespace ssg
