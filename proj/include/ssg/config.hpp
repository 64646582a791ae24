#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssg/model.hpp"
#include "ssg/trainer.hpp"

namespace ssg {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` lines; `#` starts a comment. Later keys win.
std::map<std::string, std::string> parse_kv(std::istream& in, const std::string& source);

/// Everything a command can be configured with.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  InputMode input_mode = InputMode::Stepwise;
  std::size_t beam_width = 1;
  std::size_t vocab_min_count = 1;
  std::size_t synth_episodes = 50;
  double synth_noise = 0.3;

  RunConfig();

  /// Throws ConfigError for an unknown key or an unparsable value.
  void set(const std::string& key, const std::string& value);
  void set_all(const std::map<std::string, std::string>& kv);
  /// Effective configuration as sorted `key = value` lines.
  std::string echo() const;
  std::vector<std::string> keys() const;
};

/// Defaults, then the file (when given), then `overrides`.
RunConfig load_run_config(const std::string& path, const std::map<std::string, std::string>& overrides);

}  // namespace ssg
