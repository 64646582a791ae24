#include "ssg/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>

namespace ssg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(fmt::format("{}: '{}' is not a valid number", key, value));
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(fmt::format("{}: '{}' is not true or false", key, value));
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<std::size_t>(key, trim(item)));
  if (out.empty()) throw ConfigError(fmt::format("{}: empty list", key));
  return out;
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

template <class T>
Field number(T RunConfig::*outer) {
  return {[outer](const RunConfig& c) { return fmt::format("{}", c.*outer); },
          [outer](RunConfig& c, const std::string& k, const std::string& v) { c.*outer = parse_number<T>(k, v); }};
}

template <class T>
Field model_number(T ModelConfig::*m) {
  return {[m](const RunConfig& c) { return fmt::format("{}", c.model.*m); },
          [m](RunConfig& c, const std::string& k, const std::string& v) { c.model.*m = parse_number<T>(k, v); }};
}

template <class T>
Field train_number(T TrainConfig::*m) {
  return {[m](const RunConfig& c) { return fmt::format("{}", c.train.*m); },
          [m](RunConfig& c, const std::string& k, const std::string& v) { c.train.*m = parse_number<T>(k, v); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["d_model"] = model_number(&ModelConfig::d_model);
    t["vocab_size"] = model_number(&ModelConfig::vocab_size);
    t["n_heads"] = model_number(&ModelConfig::n_heads);
    t["n_enc_layers"] = model_number(&ModelConfig::n_enc_layers);
    t["n_dec_layers"] = model_number(&ModelConfig::n_dec_layers);
    t["ffn_dim"] = model_number(&ModelConfig::ffn_dim);
    t["max_doc_len"] = model_number(&ModelConfig::max_doc_len);
    t["max_prev_summ_len"] = model_number(&ModelConfig::max_prev_summ_len);
    t["min_decode_len"] = model_number(&ModelConfig::min_decode_len);
    t["max_decode_len"] = model_number(&ModelConfig::max_decode_len);
    t["n_filters_per_width"] = model_number(&ModelConfig::n_filters_per_width);
    t["conv_widths"] = {[](const RunConfig& c) { return fmt::format("{}", fmt::join(c.model.conv_widths, ",")); },
                        [](RunConfig& c, const std::string& k, const std::string& v) { c.model.conv_widths = parse_list(k, v); }};
    t["attention_score_mode"] = {[](const RunConfig& c) { return to_string(c.model.attention_score_mode); },
                                 [](RunConfig& c, const std::string&, const std::string& v) {
                                   try {
                                     c.model.attention_score_mode = parse_score_mode(v);
                                   } catch (const std::invalid_argument& e) {
                                     throw ConfigError(e.what());
                                   }
                                 }};
    t["gate_mode"] = {[](const RunConfig& c) { return to_string(c.model.gate_mode); },
                      [](RunConfig& c, const std::string&, const std::string& v) {
                        try {
                          c.model.gate_mode = parse_gate_mode(v);
                        } catch (const std::invalid_argument& e) {
                          throw ConfigError(e.what());
                        }
                      }};
    t["use_sru"] = {[](const RunConfig& c) { return std::string(c.model.use_sru ? "true" : "false"); },
                    [](RunConfig& c, const std::string& k, const std::string& v) { c.model.use_sru = parse_bool(k, v); }};
    t["lr_gen"] = train_number(&TrainConfig::lr_gen);
    t["lr_disc"] = train_number(&TrainConfig::lr_disc);
    t["beta1"] = train_number(&TrainConfig::beta1);
    t["beta2"] = train_number(&TrainConfig::beta2);
    t["eps"] = train_number(&TrainConfig::eps);
    t["clip_lo"] = train_number(&TrainConfig::clip_lo);
    t["clip_hi"] = train_number(&TrainConfig::clip_hi);
    t["lambda_gan"] = train_number(&TrainConfig::lambda_gan);
    t["steps"] = train_number(&TrainConfig::steps);
    t["disc_steps_per_gen_step"] = train_number(&TrainConfig::disc_steps_per_gen_step);
    t["seed"] = train_number(&TrainConfig::seed);
    t["checkpoint_interval"] = train_number(&TrainConfig::checkpoint_interval);
    t["input_mode"] = {[](const RunConfig& c) { return to_string(c.input_mode); },
                       [](RunConfig& c, const std::string&, const std::string& v) {
                         try {
                           c.input_mode = parse_input_mode(v);
                         } catch (const std::invalid_argument& e) {
                           throw ConfigError(e.what());
                         }
                       }};
    t["beam_width"] = number(&RunConfig::beam_width);
    t["vocab_min_count"] = number(&RunConfig::vocab_min_count);
    t["synth_episodes"] = number(&RunConfig::synth_episodes);
    t["synth_noise"] = number(&RunConfig::synth_noise);
    return t;
  }();
  return table;
}

}  // namespace

std::map<std::string, std::string> parse_kv(std::istream& in, const std::string& source) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("{}:{}: expected key = value", source, n));
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(fmt::format("{}:{}: empty key", source, n));
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

RunConfig::RunConfig() {
  model.min_decode_len = 5;
  model.max_decode_len = 40;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError(fmt::format("unknown config key '{}'", key));
  it->second.set(*this, key, value);
}

void RunConfig::set_all(const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) set(k, v);
}

std::string RunConfig::echo() const {
  std::string out;
  for (const auto& [k, f] : fields()) out += fmt::format("{} = {}\n", k, f.get(*this));
  return out;
}

std::vector<std::string> RunConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, f] : fields()) out.push_back(k);
  return out;
}

RunConfig load_run_config(const std::string& path, const std::map<std::string, std::string>& overrides) {
  RunConfig c;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config file {}", path));
    c.set_all(parse_kv(in, path));
  }
  c.set_all(overrides);
  return c;
}

}  // namespace ssg
