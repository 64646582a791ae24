#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ssg/config.hpp"
#include "ssg/corpus.hpp"
#include "ssg/model_check.hpp"
#include "ssg/report.hpp"
#include "ssg/stream.hpp"
#include "ssg/trainer.hpp"

namespace fs = std::filesystem;
using namespace ssg;

namespace {

constexpr int kOk = 0;
constexpr int kInput = 2;
constexpr int kNumeric = 3;
constexpr int kMismatch = 4;
constexpr int kGradFail = 5;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--config", c.config, "key = value configuration file");
  cmd->add_option("--seed", c.seed, "random seed");
  auto* out = cmd->add_option("--out", c.out, "output directory");
  if (out_required) out->required();
  cmd->add_option("--set", c.sets, "override a config key (key=value)");
}

std::map<std::string, std::string> overrides(const Common& c) {
  std::map<std::string, std::string> kv;
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("--set expects key=value, got '{}'", s));
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (c.seed) kv["seed"] = std::to_string(*c.seed);
  return kv;
}

RunConfig resolve(const Common& c, const std::string& base = "") {
  RunConfig cfg;
  if (!base.empty() && fs::exists(base)) {
    std::ifstream in(base);
    cfg.set_all(parse_kv(in, base));
  }
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) throw InputError(fmt::format("cannot open config file {}", c.config));
    cfg.set_all(parse_kv(in, c.config));
  }
  cfg.set_all(overrides(c));
  return cfg;
}

void prepare_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
  std::ofstream f(fs::path(dir) / name, std::ios::binary);
  if (!f) throw InputError(fmt::format("cannot write {}", (fs::path(dir) / name).string()));
  return f;
}

void echo_config(const std::string& dir, const RunConfig& cfg) {
  if (dir.empty()) return;
  open_out(dir, "config.txt") << cfg.echo();
}

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw InputError(fmt::format("missing file {}", path));
}

Vocab load_vocab(const std::string& path) {
  require_file(path);
  return Vocab::load(path);
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  Common common;
  std::optional<std::size_t> episodes;
  std::optional<double> noise;
};

int cmd_synth(const SynthArgs& a) {
  auto cfg = resolve(a.common);
  SynthOptions o;
  o.seed = a.common.seed ? *a.common.seed : cfg.train.seed;
  o.episodes = a.episodes ? *a.episodes : cfg.synth_episodes;
  o.noise = a.noise ? *a.noise : cfg.synth_noise;
  cfg.train.seed = o.seed;
  cfg.synth_episodes = o.episodes;
  cfg.synth_noise = o.noise;
  const auto corpus = synth_corpus(o);
  prepare_dir(a.common.out);
  auto ep = open_out(a.common.out, "episodes.jsonl");
  write_raw_episodes(ep, corpus.episodes);
  auto tr = open_out(a.common.out, "truth.jsonl");
  write_truth(tr, corpus.truth);
  echo_config(a.common.out, cfg);
  std::cout << fmt::format("wrote {} episodes to {}\n", corpus.episodes.size(), a.common.out);
  return kOk;
}

struct InArgs {
  Common common;
  std::string in;
  std::optional<std::size_t> max_pairs;
};

void print_stats(const CorpusStats& s) {
  std::ostringstream csv;
  write_stats_csv(csv, s);
  std::cout << csv.str();
}

int cmd_build(const InArgs& a) {
  const auto cfg = resolve(a.common);
  require_file(a.in);
  const auto episodes = read_raw_episodes_file(a.in);
  auto built = build_streams(episodes);
  if (a.max_pairs) {
    std::size_t kept = 0;
    std::vector<StreamRecord> trimmed;
    for (auto& s : built.streams) {
      if (kept + s.pairs.size() > *a.max_pairs) s.pairs.resize(*a.max_pairs - kept);
      kept += s.pairs.size();
      if (!s.pairs.empty()) trimmed.push_back(std::move(s));
    }
    built.streams = std::move(trimmed);
  }
  prepare_dir(a.common.out);
  auto out = open_out(a.common.out, "streams.jsonl");
  write_streams(out, built.streams);
  const auto stats = corpus_stats(built.streams);
  auto sc = open_out(a.common.out, "stats.csv");
  write_stats_csv(sc, stats);
  echo_config(a.common.out, cfg);
  std::cout << fmt::format("episodes {} streams {} filtered {} malformed {}\n", episodes.size(), built.streams.size(), built.filtered,
                           built.malformed);
  return kOk;
}

int cmd_stats(const InArgs& a) {
  const auto cfg = resolve(a.common);
  require_file(a.in);
  const auto streams = read_streams_file(a.in);
  const auto stats = corpus_stats(streams);
  if (stats.empty) std::cerr << "warning: corpus is empty; statistics are zero\n";
  print_stats(stats);
  if (!a.common.out.empty()) {
    prepare_dir(a.common.out);
    auto sc = open_out(a.common.out, "stats.csv");
    write_stats_csv(sc, stats);
    echo_config(a.common.out, cfg);
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string corpus;
  std::optional<std::size_t> steps;
  std::optional<double> target_ls;
};

int cmd_train(const TrainArgs& a) {
  auto cfg = resolve(a.common);
  if (a.steps) cfg.train.steps = *a.steps;
  require_file(a.corpus);
  const auto streams = read_streams_file(a.corpus);
  std::vector<Tokens> texts;
  for (const auto& s : streams)
    for (const auto& p : s.pairs) {
      texts.push_back(tokenize(p.document));
      texts.push_back(tokenize(p.summary));
    }
  const auto vocab = Vocab::build(texts, cfg.vocab_min_count);
  cfg.model.vocab_size = vocab.size();
  if (cfg.input_mode != InputMode::Stepwise) cfg.model.use_sru = false;
  cfg.model.validate();
  cfg.train.validate();

  prepare_dir(a.common.out);
  echo_config(a.common.out, cfg);
  vocab.save((fs::path(a.common.out) / "vocab.txt").string());
  const auto ckpt = (fs::path(a.common.out) / "model.ckpt").string();

  SsgModel model(cfg.model, cfg.train.seed);
  const auto examples = build_examples(streams, vocab, model, cfg.input_mode);
  if (cfg.train.steps > 0 && examples.empty()) throw InputError("corpus yields no training examples");
  model.save(ckpt);

  auto log = open_out(a.common.out, "train_log.csv");
  write_train_log_header(log);
  Trainer trainer(model, cfg.train);
  std::mt19937_64 rng(cfg.train.seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  auto mean_ls = [&] {
    double total = 0.0;
    for (const auto& ex : examples) total += example_nll(model, ex);
    return total / static_cast<double>(examples.size());
  };
  double ls = a.target_ls ? mean_ls() : 0.0;
  std::size_t done = 0;
  for (std::size_t s = 0; s < cfg.train.steps; ++s) {
    if (a.target_ls && ls < *a.target_ls) break;
    if (cursor == order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const auto rec = trainer.step(examples[order[cursor++]]);
    write_train_log_row(log, rec);
    ++done;
    if (cfg.train.checkpoint_interval > 0 && rec.step % cfg.train.checkpoint_interval == 0) model.save(ckpt);
    if (a.target_ls && (done % 50 == 0 || done == cfg.train.steps)) ls = mean_ls();
  }
  log.flush();
  model.save(ckpt);
  std::cout << fmt::format("trained {} steps on {} examples; checkpoint {}\n", done, examples.size(), ckpt);
  if (a.target_ls) {
    const auto exact = exact_matches(model, examples, trainer.greedy_options());
    std::cout << fmt::format("mean L_s {:.4f} (target {}, {}); exact greedy decodes {}/{}\n", ls, *a.target_ls,
                             ls < *a.target_ls ? "reached" : "not reached", exact, examples.size());
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string mode;
  std::string corpus;
  std::string model_dir;
  std::string checkpoint;
  bool analysis = false;
};

struct LoadedModel {
  RunConfig cfg;
  Vocab vocab;
  std::unique_ptr<SsgModel> model;
};

LoadedModel load_model(const Common& common, const std::string& dir, const std::string& checkpoint) {
  LoadedModel m;
  const auto base = (fs::path(dir) / "config.txt").string();
  require_file(base);
  m.cfg = resolve(common, base);
  m.vocab = load_vocab((fs::path(dir) / "vocab.txt").string());
  m.cfg.model.validate();
  const auto ckpt = checkpoint.empty() ? (fs::path(dir) / "model.ckpt").string() : checkpoint;
  require_file(ckpt);
  m.model = std::make_unique<SsgModel>(m.cfg.model, m.cfg.train.seed);
  m.model->load(ckpt);
  return m;
}

std::string system_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::Lead3:
    case EvalMode::TextRank:
    case EvalMode::Cps:
    case EvalMode::Cpd: return to_string(mode);
    default: return "ssg";
  }
}

std::vector<ReportRow> report_rows(const EvalResult& r) {
  std::vector<ReportRow> rows;
  const std::string sys = system_name(r.mode), mode = to_string(r.mode);
  auto add = [&](const std::string& level, auto pick, const auto& items) {
    for (const char* m : {"rouge1", "rouge2", "rougeL"}) {
      std::vector<double> v;
      for (const auto& it : items) v.push_back(pick(it.rouge, std::string(m)));
      rows.push_back({sys, mode, level + "_" + m, mean_ci95(v)});
    }
  };
  auto f1 = [](const RougeSet& s, const std::string& m) { return m == "rouge1" ? s.rouge1.f1 : m == "rouge2" ? s.rouge2.f1 : s.rougeL.f1; };
  if (!r.pairs.empty()) add("pair", f1, r.pairs);
  add("stream", f1, r.streams);
  return rows;
}

int cmd_eval(const EvalArgs& a) {
  EvalMode mode;
  try {
    mode = parse_eval_mode(a.mode);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  require_file(a.corpus);
  const auto streams = read_streams_file(a.corpus);
  RunConfig cfg;
  Vocab vocab;
  std::unique_ptr<SsgModel> model;
  std::unique_ptr<Summarizer> summarizer;
  if (needs_model(mode)) {
    if (a.model_dir.empty()) throw InputError(fmt::format("mode {} needs --model", a.mode));
    auto loaded = load_model(a.common, a.model_dir, a.checkpoint);
    cfg = std::move(loaded.cfg);
    vocab = std::move(loaded.vocab);
    model = std::move(loaded.model);
    summarizer = std::make_unique<ModelSummarizer>(
        *model, DecodeOptions{cfg.model.min_decode_len, cfg.model.max_decode_len, cfg.beam_width});
  } else {
    cfg = resolve(a.common);
  }
  const auto result = evaluate(streams, mode, summarizer.get(), vocab);
  prepare_dir(a.common.out);
  echo_config(a.common.out, cfg);
  if (!result.pairs.empty()) {
    auto f = open_out(a.common.out, "pairs.csv");
    write_pairs_csv(f, result);
  }
  {
    auto f = open_out(a.common.out, "streams.csv");
    write_streams_csv(f, result);
  }
  const auto rows = report_rows(result);
  {
    auto f = open_out(a.common.out, "report.csv");
    write_report_csv(f, rows);
  }
  if (a.analysis) {
    if (mode != EvalMode::Together) {
      auto f = open_out(a.common.out, "dsdp.csv");
      write_dsdp_csv(f, ds_dp_analysis(streams, result.generated));
    }
    const std::map<std::string, std::vector<std::vector<std::string>>> by_mode{{to_string(mode), result.generated}};
    auto f = open_out(a.common.out, "accumulation.csv");
    const auto acc = error_accumulation(streams, by_mode);
    write_accumulation_csv(f, acc);
  }
  std::ostringstream table;
  write_report_csv(table, rows);
  std::cout << table.str();
  return kOk;
}

// ---------------------------------------------------------------------------

struct InferArgs {
  Common common;
  std::string model_dir;
  std::string checkpoint;
  std::string document;
  std::string previous;
};

int cmd_infer(const InferArgs& a) {
  auto m = load_model(a.common, a.model_dir, a.checkpoint);
  const auto doc = m.vocab.encode(tokenize(a.document));
  const auto prev = m.vocab.encode(tokenize(a.previous));
  if (doc.empty()) throw InputError("empty document");
  ModelSummarizer s(*m.model, DecodeOptions{m.cfg.model.min_decode_len, m.cfg.model.max_decode_len, m.cfg.beam_width});
  std::cout << join_tokens(m.vocab.decode(s.summarize(doc, prev))) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct GradArgs {
  Common common;
  std::string loss = "all";
  std::string tamper;
};

int cmd_gradcheck(const GradArgs& a) {
  RunConfig base;
  base.model.d_model = 8;
  base.model.n_heads = 2;
  base.model.vocab_size = 30;
  base.model.max_doc_len = 50;
  base.model.max_prev_summ_len = 50;
  base.model.min_decode_len = 1;
  base.model.max_decode_len = 20;
  RunConfig cfg = base;
  if (!a.common.config.empty()) {
    std::ifstream in(a.common.config);
    if (!in) throw InputError(fmt::format("cannot open config file {}", a.common.config));
    cfg.set_all(parse_kv(in, a.common.config));
  }
  cfg.set_all(overrides(a.common));
  if (cfg.model.d_model > 32) throw InputError(fmt::format("gradcheck refuses d_model {} > 32", cfg.model.d_model));
  cfg.model.validate();
  std::vector<LossKind> kinds;
  if (a.loss == "all") {
    kinds = {LossKind::Ls, LossKind::Ld, LossKind::Lg};
  } else if (a.loss == "ls" || a.loss == "ld" || a.loss == "lg") {
    kinds = {a.loss == "ls" ? LossKind::Ls : a.loss == "ld" ? LossKind::Ld : LossKind::Lg};
  } else {
    throw InputError(fmt::format("unknown loss '{}'", a.loss));
  }
  SsgModel model(cfg.model, cfg.train.seed);
  if (!a.tamper.empty()) (void)model.block(a.tamper);
  std::mt19937_64 rng(cfg.train.seed);
  const auto c = random_case(cfg.model, rng, 6, 4, 5, 5);
  ModelCheckOptions opt;
  if (!a.tamper.empty()) opt.tamper_block = a.tamper;
  std::ostringstream csv;
  csv << "loss,block,rel_error,max_element_error\n";
  std::size_t failures = 0;
  for (auto k : kinds) {
    const auto report = check_model_gradients(model, c, k, opt);
    for (const auto& b : report.blocks) {
      csv << fmt::format("{},{},{:.3e},{:.3e}\n", to_string(k), b.name, b.rel_error, b.max_element_error);
      if (!(b.rel_error < 1e-3)) {
        ++failures;
        std::cerr << fmt::format("FAIL {} {} relative error {:.3e}\n", to_string(k), b.name, b.rel_error);
      }
    }
    std::cout << fmt::format("{} max relative error {:.3e}\n", to_string(k), report.max_rel_error());
  }
  if (!a.common.out.empty()) {
    prepare_dir(a.common.out);
    open_out(a.common.out, "gradcheck.csv") << csv.str();
    echo_config(a.common.out, cfg);
  }
  return failures == 0 ? kOk : kGradFail;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  Common common;
  std::vector<std::string> evals;
  std::string corpus;
};

int cmd_report(const ReportArgs& a) {
  std::vector<ReportRow> rows;
  for (const auto& dir : a.evals) {
    const auto path = (fs::path(dir) / "report.csv").string();
    require_file(path);
    std::ifstream in(path);
    const auto part = read_report_csv(in);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  std::optional<CorpusStats> stats;
  if (!a.corpus.empty()) {
    require_file(a.corpus);
    stats = corpus_stats(read_streams_file(a.corpus));
  }
  std::ostringstream text;
  write_comparison(text, rows, stats);
  std::cout << text.str();
  if (!a.common.out.empty()) {
    prepare_dir(a.common.out);
    open_out(a.common.out, "report.txt") << text.str();
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stepwise summarization toolkit"};
  app.require_subcommand(1);

  auto* corpus = app.add_subcommand("corpus", "build, synthesize or describe corpora");
  corpus->require_subcommand(1);
  SynthArgs synth;
  auto* synth_cmd = corpus->add_subcommand("synth", "write a seeded synthetic corpus and its planted truth");
  add_common(synth_cmd, synth.common, true);
  synth_cmd->add_option("--episodes", synth.episodes, "number of episodes");
  synth_cmd->add_option("--noise", synth.noise, "fraction of filler tokens in summaries");
  InArgs build;
  auto* build_cmd = corpus->add_subcommand("build", "segment, align and filter raw episodes");
  add_common(build_cmd, build.common, true);
  build_cmd->add_option("--in", build.in, "raw episodes (JSON lines)")->required();
  build_cmd->add_option("--max-pairs", build.max_pairs, "keep only the first N aligned pairs");
  InArgs stats;
  auto* stats_cmd = corpus->add_subcommand("stats", "statistics of an aligned corpus");
  add_common(stats_cmd, stats.common, false);
  stats_cmd->add_option("--in", stats.in, "aligned streams (JSON lines)")->required();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "adversarial training");
  add_common(train_cmd, train.common, true);
  train_cmd->add_option("--corpus", train.corpus, "aligned streams (JSON lines)")->required();
  train_cmd->add_option("--steps", train.steps, "generator steps");
  train_cmd->add_option("--target-ls", train.target_ls, "stop once the corpus mean L_s drops below this (checked every 50 steps)");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a mode over a corpus");
  add_common(eval_cmd, eval.common, true);
  eval_cmd->add_option("--mode", eval.mode, "pair_level, split, together, cps, cpd, lead3 or textrank")->required();
  eval_cmd->add_option("--corpus", eval.corpus, "aligned streams (JSON lines)")->required();
  eval_cmd->add_option("--model", eval.model_dir, "training output directory");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint overriding the one in --model");
  eval_cmd->add_flag("--analysis", eval.analysis, "also write DS/DP and error accumulation tables");

  InferArgs infer;
  auto* infer_cmd = app.add_subcommand("infer", "summarize one document");
  add_common(infer_cmd, infer.common, false);
  infer_cmd->add_option("--model", infer.model_dir, "training output directory")->required();
  infer_cmd->add_option("--checkpoint", infer.checkpoint, "checkpoint overriding the one in --model");
  infer_cmd->add_option("--document", infer.document, "document text")->required();
  infer_cmd->add_option("--previous", infer.previous, "previous summary text");

  GradArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check on a tiny model");
  add_common(grad_cmd, grad.common, false);
  grad_cmd->add_option("--loss", grad.loss, "ls, ld, lg or all");
  grad_cmd->add_option("--tamper", grad.tamper, "perturb this block between the analytic and numeric passes");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "paper reference values next to desk results");
  add_common(report_cmd, report.common, false);
  report_cmd->add_option("--eval", report.evals, "eval output directory (repeatable)");
  report_cmd->add_option("--corpus", report.corpus, "aligned streams for dataset statistics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInput;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth);
    if (*build_cmd) return cmd_build(build);
    if (*stats_cmd) return cmd_stats(stats);
    if (*train_cmd) return cmd_train(train);
    if (*eval_cmd) return cmd_eval(eval);
    if (*infer_cmd) return cmd_infer(infer);
    if (*grad_cmd) return cmd_gradcheck(grad);
    if (*report_cmd) return cmd_report(report);
  } catch (const CheckpointMismatch& e) {
    std::cerr << "checkpoint mismatch at parameter " << e.param() << ": " << e.what() << "\n";
    return kMismatch;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure in " << e.param() << ": " << e.what() << "\n";
    return kNumeric;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kInput;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kInput;
  } catch (const std::logic_error& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kInput;
  }
  return kInput;
}
