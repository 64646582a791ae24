#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "ssg/gradcheck.hpp"
#include "ssg/model.hpp"

namespace ssg {

enum class LossKind { Ls, Ld, Lg };

std::string to_string(LossKind kind);

/// Fixed inputs for a gradient check: an example plus a generated summary
/// standing in for the greedy decode.
struct CheckCase {
  Example example;
  TokenIds generated;
};

/// Random ordinary tokens (never special ids) of the given lengths.
CheckCase random_case(const ModelConfig& config, std::mt19937_64& rng, std::size_t doc_len, std::size_t prev_len,
                      std::size_t generated_len, std::size_t target_len);

/// Value of one loss with every parameter bound; gradients are accumulated
/// into the parameters when `backward` is set.
double evaluate_loss(SsgModel& model, const CheckCase& c, LossKind kind, bool backward);

struct ModelCheckOptions {
  double step = 1e-5;
  /// Shifts every element of this block after the analytic pass.
  std::optional<std::string> tamper_block;
};

GradCheckReport check_model_gradients(SsgModel& model, const CheckCase& c, LossKind kind, const ModelCheckOptions& options = {});

}  // namespace ssg
