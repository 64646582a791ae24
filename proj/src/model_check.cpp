#include "ssg/model_check.hpp"

#include <cmath>

#include <fmt/format.h>

namespace ssg {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Ls: return "ls";
    case LossKind::Ld: return "ld";
    case LossKind::Lg: return "lg";
  }
  return "?";
}

CheckCase random_case(const ModelConfig& config, std::mt19937_64& rng, std::size_t doc_len, std::size_t prev_len,
                      std::size_t generated_len, std::size_t target_len) {
  std::uniform_int_distribution<int> tok(Vocab::kNumSpecial, static_cast<int>(config.vocab_size) - 1);
  auto draw = [&](std::size_t n) {
    TokenIds ids(n);
    for (auto& t : ids) t = tok(rng);
    return ids;
  };
  CheckCase c;
  c.example.document = draw(doc_len);
  c.example.previous = draw(prev_len);
  c.example.target = draw(target_len);
  c.generated = draw(generated_len);
  return c;
}

double evaluate_loss(SsgModel& model, const CheckCase& c, LossKind kind, bool backward) {
  Tape tape;
  Binder b(tape, model, backward ? Track::All : Track::None);
  const auto enc = model.encode_inputs(b, c.example);
  Var loss;
  if (kind == LossKind::Ls) {
    loss = model.nll(b, enc, c.example.target);
  } else {
    const auto terms = model.gan(b, enc, c.example.target, c.generated);
    loss = kind == LossKind::Ld ? terms.l_d : terms.l_g;
  }
  const double value = loss.value().item();
  if (backward) tape.backward(loss);
  return value;
}

GradCheckReport check_model_gradients(SsgModel& model, const CheckCase& c, LossKind kind, const ModelCheckOptions& options) {
  for (auto& b : model.blocks()) b.value.clear_grad();
  evaluate_loss(model, c, kind, true);
  if (options.tamper_block) {
    auto& t = model.block(*options.tamper_block).value;
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += 0.05 * (1.0 + std::abs(t[i]));
  }
  std::vector<NamedTensor> params;
  for (auto& b : model.blocks()) params.push_back({b.name, &b.value});
  auto report = finite_diff_check([&] { return evaluate_loss(model, c, kind, false); }, params, options.step);
  for (auto& b : model.blocks()) b.value.clear_grad();
  return report;
}

}  // namespace ssg
