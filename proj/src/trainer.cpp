#include "ssg/trainer.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace ssg {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("train config: " + m); };
  if (!(lr_gen > 0.0) || !(lr_disc > 0.0)) fail("learning rates must be positive");
  if (!(clip_lo < clip_hi)) fail(fmt::format("clip range [{}, {}] is empty", clip_lo, clip_hi));
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("adam betas must lie in [0, 1)");
  if (!(eps > 0.0)) fail("adam eps must be positive");
  if (disc_steps_per_gen_step == 0) fail("disc_steps_per_gen_step must be at least 1");
}

Adam::Adam(std::vector<ParamBlock*> blocks, double lr, const TrainConfig& config) : blocks_(std::move(blocks)), lr_(lr), config_(config) {
  for (auto* b : blocks_) {
    m_.emplace_back(b->value.size(), 0.0);
    v_.emplace_back(b->value.size(), 0.0);
  }
}

double Adam::step() {
  double norm_sq = 0.0;
  for (auto* b : blocks_) {
    if (!b->value.has_grad()) continue;
    for (double g : b->value.grad()) {
      if (!std::isfinite(g)) throw NumericError(fmt::format("non-finite gradient in {}", b->name), b->name);
      norm_sq += g * g;
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    auto& p = blocks_[i]->value;
    const bool has = p.has_grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double g = has ? std::clamp(p.grad()[k], config_.clip_lo, config_.clip_hi) : 0.0;
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g;
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g * g;
      p[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + config_.eps);
    }
    if (!p.all_finite()) throw NumericError(fmt::format("parameter {} became non-finite", blocks_[i]->name), blocks_[i]->name);
    p.clear_grad();
  }
  return std::sqrt(norm_sq);
}

namespace {

std::vector<ParamBlock*> group(SsgModel& model, bool disc) {
  std::vector<ParamBlock*> out;
  for (auto& b : model.blocks())
    if (b.discriminator == disc) out.push_back(&b);
  return out;
}

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw NumericError(fmt::format("{} is not finite", what), what);
}

}  // namespace

Trainer::Trainer(SsgModel& model, const TrainConfig& config)
    : model_(model),
      config_((config.validate(), config)),
      gen_(group(model, false), config.lr_gen, config),
      disc_(group(model, true), config.lr_disc, config) {
  for (auto& b : model_.blocks()) b.value.clear_grad();
}

DecodeOptions Trainer::greedy_options() const {
  return {model_.config().min_decode_len, model_.config().max_decode_len, 1};
}

DiscRecord Trainer::disc_step(const Example& ex, std::span<const int> generated) {
  Tape tape;
  Binder b(tape, model_, Track::Discriminator);
  const auto enc = model_.encode_inputs(b, ex);
  const auto terms = model_.gan(b, enc, ex.target, generated);
  DiscRecord r{terms.l_d.value().item(), terms.l_g.value().item(), terms.d_pos.value().item(), terms.d_neg.value().item()};
  require_finite(r.ld, "L_d");
  tape.backward(terms.l_d);
  disc_.step();
  return r;
}

TrainRecord Trainer::step(const Example& ex) {
  TrainRecord rec;
  rec.step = ++step_;

  ModelScorer scorer(model_, model_.prepare(ex));
  TokenIds generated = greedy_decode(scorer, greedy_options());
  if (generated.empty()) {
    rec.empty_generation = true;
    generated = {Vocab::kEos};
  }

  DiscRecord d;
  for (std::size_t i = 0; i < config_.disc_steps_per_gen_step; ++i) d = disc_step(ex, generated);
  rec.ld = d.ld;
  rec.lg = d.lg;
  rec.d_pos = d.d_pos;
  rec.d_neg = d.d_neg;

  Tape tape;
  Binder b(tape, model_, Track::Generator);
  const auto enc = model_.encode_inputs(b, ex);
  Var loss = model_.nll(b, enc, ex.target);
  rec.ls = loss.value().item();
  require_finite(rec.ls, "L_s");
  if (config_.lambda_gan != 0.0) {
    Var lg = generator_adv_loss(model_.negative_score(b, enc, generated));
    loss = add(loss, sum(scale(lg, config_.lambda_gan)));
  }
  tape.backward(loss);
  rec.grad_norm = gen_.step();
  return rec;
}

double example_nll(SsgModel& model, const Example& ex) {
  Tape tape;
  Binder b(tape, model, Track::None);
  return model.nll(b, model.encode_inputs(b, ex), ex.target).value().item();
}

std::string to_string(InputMode mode) {
  switch (mode) {
    case InputMode::Stepwise: return "stepwise";
    case InputMode::Cps: return "cps";
    case InputMode::Cpd: return "cpd";
  }
  return "?";
}

InputMode parse_input_mode(const std::string& s) {
  for (auto m : {InputMode::Stepwise, InputMode::Cps, InputMode::Cpd})
    if (to_string(m) == s) return m;
  throw std::invalid_argument(fmt::format("unknown input_mode '{}'", s));
}

std::vector<Example> build_examples(std::span<const StreamRecord> streams, const Vocab& vocab, const SsgModel& model, InputMode mode) {
  std::vector<Example> out;
  for (const auto& s : streams) {
    std::vector<TokenIds> docs, golds;
    for (const auto& p : s.pairs) {
      docs.push_back(vocab.encode(tokenize(p.document)));
      golds.push_back(vocab.encode(tokenize(p.summary)));
    }
    for (std::size_t k = 0; k < docs.size(); ++k) {
      TokenIds history;
      for (std::size_t j = 0; j < k; ++j) history.insert(history.end(), golds[j].begin(), golds[j].end());
      Example ex;
      ex.target = model.clip_target(golds[k]);
      if (mode == InputMode::Stepwise) {
        ex.document = model.clip_document(docs[k]);
        ex.previous = model.clip_previous(history);
      } else {
        TokenIds input = mode == InputMode::Cps ? history : k == 0 ? TokenIds{} : docs[k - 1];
        input.insert(input.end(), docs[k].begin(), docs[k].end());
        ex.document = model.clip_document(input);
      }
      if (ex.document.empty()) continue;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

std::size_t exact_matches(SsgModel& model, std::span<const Example> examples, const DecodeOptions& options) {
  std::size_t exact = 0;
  for (const auto& ex : examples) {
    ModelScorer scorer(model, model.prepare(ex));
    if (greedy_decode(scorer, options) == ex.target) ++exact;
  }
  return exact;
}

OverfitReport overfit(SsgModel& model, std::span<const Example> examples, const TrainConfig& config, std::size_t max_steps,
                      double target_ls, std::size_t check_every) {
  if (examples.empty()) throw std::invalid_argument("overfit: no examples");
  if (check_every == 0) throw std::invalid_argument("overfit: check interval must be positive");
  Trainer trainer(model, config);
  OverfitReport report;
  report.total = examples.size();
  auto mean_ls = [&] {
    double total = 0.0;
    for (const auto& ex : examples) total += example_nll(model, ex);
    return total / static_cast<double>(examples.size());
  };
  report.final_ls = mean_ls();
  while (report.steps < max_steps && !(report.final_ls < target_ls)) {
    trainer.step(examples[report.steps % examples.size()]);
    ++report.steps;
    if (report.steps % check_every == 0 || report.steps == max_steps) report.final_ls = mean_ls();
  }
  report.converged = report.final_ls < target_ls;
  report.exact = exact_matches(model, examples, trainer.greedy_options());
  return report;
}

void write_train_log_header(std::ostream& out) { out << "step,L_s,L_d,L_g,D_pos,D_neg,grad_norm\n"; }

void write_train_log_row(std::ostream& out, const TrainRecord& r) {
  out << fmt::format("{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n", r.step, r.ls, r.ld, r.lg, r.d_pos, r.d_neg, r.grad_norm);
}

}  // namespace ssg
