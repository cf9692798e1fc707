// Copyright 2026 The DEER Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: every subcommand reads a JSON config, writes its
// artifacts under --out, and is bit-reproducible for a fixed seed.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "deer/engine.hpp"
#include "deer/experiments.hpp"
#include "deer/io_util.hpp"
#include "deer/metrics.hpp"
#include "deer/model_io.hpp"
#include "deer/oracle.hpp"
#include "deer/trace_io.hpp"
#include "deer/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace deer;

namespace {

struct CliError : std::runtime_error {
  CliError(std::string code_in, const std::string& message, int exit_code_in = 3)
      : std::runtime_error(message), code(std::move(code_in)), exit_code(exit_code_in) {}
  std::string code;
  int exit_code;
};

void emit_error(const std::string& code, const std::string& message) {
  json err;
  err["schema_version"] = 1;
  err["error"]["code"] = code;
  err["error"]["message"] = message;
  std::cerr << err.dump() << "\n";
}

json load_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw CliError("bad_config", e.what(), 2);
  }
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw CliError("bad_config", std::string("config is not valid JSON: ") + e.what(), 2);
  }
}

template <typename T>
T require(const json& doc, const std::string& key) {
  if (!doc.contains(key)) {
    throw CliError("bad_config", "missing config field \"" + key + "\"", 2);
  }
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw CliError("bad_config", "bad config field \"" + key + "\": " + e.what(), 2);
  }
}

template <typename T>
T value_or(const json& doc, const std::string& key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw CliError("bad_config", "bad config field \"" + key + "\": " + e.what(), 2);
  }
}

// A model source is either a path (resolved like any CLI path, against the
// working directory) or an inline {"generate": {...}} recipe.
fs::path resolve(const fs::path& /*config_dir*/, const std::string& path) {
  return fs::path(path);
}

TargetParams load_target_source(const json& source, const fs::path& config_dir);

TargetParams generate_target(const json& gen, const fs::path& config_dir) {
  const auto kind = require<std::string>(gen, "kind");
  if (kind == "target") {
    return make_random_target(require<int>(gen, "vocab_size"), require<int>(gen, "order"),
                              require<double>(gen, "logit_scale"),
                              require<double>(gen, "eos_bias"),
                              require<std::uint64_t>(gen, "seed"));
  }
  if (kind == "near_deterministic_target") {
    return make_near_deterministic_target(
        require<int>(gen, "vocab_size"), require<int>(gen, "order"),
        require<double>(gen, "margin"), require<double>(gen, "noise_scale"),
        require<double>(gen, "eos_bias"), require<std::uint64_t>(gen, "seed"));
  }
  if (kind == "perturbed_target") {
    if (!gen.contains("of")) {
      throw CliError("bad_config", "perturbed_target needs an \"of\" source", 2);
    }
    return perturb_mix_uniform(load_target_source(gen.at("of"), config_dir),
                               require<double>(gen, "epsilon"));
  }
  throw CliError("bad_config", "unknown target generator kind \"" + kind + "\"", 2);
}

TargetParams load_target_source(const json& source, const fs::path& config_dir) {
  if (source.is_string()) {
    const fs::path path = resolve(config_dir, source.get<std::string>());
    if (!fs::exists(path)) {
      throw CliError("missing_model", "model file not found: " + path.string());
    }
    try {
      return load_target(path.string());
    } catch (const std::exception& e) {
      throw CliError("bad_model", e.what());
    }
  }
  if (source.is_object() && source.contains("generate")) {
    return generate_target(source.at("generate"), config_dir);
  }
  throw CliError("bad_config", "model source must be a path or a {\"generate\": ...} recipe", 2);
}

DrafterParams load_drafter_source(const json& source, const fs::path& config_dir) {
  if (source.is_string()) {
    const fs::path path = resolve(config_dir, source.get<std::string>());
    if (!fs::exists(path)) {
      throw CliError("missing_model", "model file not found: " + path.string());
    }
    try {
      return load_drafter(path.string());
    } catch (const std::exception& e) {
      throw CliError("bad_model", e.what());
    }
  }
  if (source.is_object() && source.contains("generate")) {
    const json& gen = source.at("generate");
    const auto kind = require<std::string>(gen, "kind");
    if (kind == "uniform_drafter") {
      return DrafterParams::uniform_init(
          Vocab::of_size(require<int>(gen, "vocab_size")), require<int>(gen, "order"),
          require<int>(gen, "max_offset"));
    }
    throw CliError("bad_config", "unknown drafter generator kind \"" + kind + "\"", 2);
  }
  throw CliError("bad_config", "model source must be a path or a {\"generate\": ...} recipe", 2);
}

StageConfig stage_config_from(const json& doc) {
  StageConfig c;
  c.stage = require<int>(doc, "stage");
  c.epochs = require<int>(doc, "epochs");
  c.lr = require<double>(doc, "lr");
  c.alpha = value_or<double>(doc, "alpha", 1.0);
  c.r_max = value_or<int>(doc, "r_max", 8);
  const auto mode = value_or<std::string>(doc, "t_mode", "one");
  if (mode == "one") {
    c.t_mode = TMode::one;
  } else if (mode == "uniform") {
    c.t_mode = TMode::uniform;
  } else {
    throw CliError("bad_config", "t_mode must be \"one\" or \"uniform\"", 2);
  }
  c.seed = require<std::uint64_t>(doc, "seed");
  return c;
}

EvalConfig eval_config_from(const json& doc) {
  EvalConfig c;
  c.n_runs = require<std::int64_t>(doc, "n_runs");
  if (c.n_runs < 1) {
    throw CliError("bad_config", "n_runs must be >= 1", 2);
  }
  c.max_new = require<int>(doc, "max_new");
  c.temperature = value_or<double>(doc, "temperature", 1.0);
  c.prompt_len = value_or<int>(doc, "prompt_len", 1);
  c.n_prompts = value_or<int>(doc, "n_prompts", 64);
  c.prompt_seed = value_or<std::uint64_t>(doc, "prompt_seed", 23);
  c.decode_seed = value_or<std::uint64_t>(doc, "decode_seed", 17);
  c.long_threshold = value_or<int>(doc, "long_threshold", 8);
  c.drafter_cost = value_or<double>(doc, "drafter_cost", 0.1);
  return c;
}

std::vector<TokenSeq> make_corpus(const TargetParams& target, const json& doc) {
  const int n = require<int>(doc, "n");
  const int max_len = require<int>(doc, "max_len");
  RngStream rng(require<std::uint64_t>(doc, "seed"), 0);
  return synthesize_teacher_corpus(target, n, max_len, rng);
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw CliError("bad_out_dir", "cannot create output directory: " + dir.string());
  }
  return dir;
}

void write_json_file(const fs::path& path, const json& doc) {
  write_text_file(path.string(), doc.dump(2) + "\n");
}

void check_same_vocab(const Vocab& target, const Vocab& drafter) {
  if (target.size != drafter.size) {
    throw CliError("bad_config", "target and drafter vocabularies differ", 2);
  }
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed_override;
};

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_train(const CommonArgs& args) {
  const json config = load_config(args.config_path);
  const fs::path config_dir = fs::path(args.config_path).parent_path();
  const fs::path out = prepare_out_dir(args.out_dir);

  const TargetParams target = load_target_source(config.at("target_model"), config_dir);
  const DrafterParams init = load_drafter_source(config.at("drafter_model"), config_dir);
  if (init.vocab.size != target.vocab.size) {
    throw CliError("bad_config", "target and drafter vocabularies differ", 2);
  }
  const auto corpus = make_corpus(target, config.at("corpus"));

  StageConfig stage = stage_config_from(config.at("training"));
  if (args.seed_override) stage.seed = *args.seed_override;

  const TrainResult result = train(init, corpus, stage);

  save_model(result.params, (out / "drafter.json").string());
  write_text_file((out / "loss_curve.csv").string(),
                  loss_curve_to_csv(result.epoch_mean_loss));

  json report;
  report["schema_version"] = 1;
  report["stage"] = stage.stage;
  report["epochs_run"] = result.epoch_mean_loss.size();
  report["skipped_examples"] = result.skipped_examples;
  report["diverged"] = result.diverged;
  report["diagnostic"] = result.diagnostic;
  report["drafter_hash"] = model_hash(result.params);
  report["target_hash"] = model_hash(target);
  if (!result.epoch_mean_loss.empty()) {
    report["first_epoch_loss"] = result.epoch_mean_loss.front();
    report["final_epoch_loss"] = result.epoch_mean_loss.back();
  }
  write_json_file(out / "train_report.json", report);

  if (result.diverged) {
    throw CliError("training_diverged", result.diagnostic, 4);
  }
  return 0;
}

int cmd_decode(const CommonArgs& args) {
  const json config = load_config(args.config_path);
  const fs::path config_dir = fs::path(args.config_path).parent_path();
  const fs::path out = prepare_out_dir(args.out_dir);

  const TargetParams target = load_target_source(config.at("target_model"), config_dir);
  const auto kind = value_or<std::string>(config, "drafter_kind", "factorized");
  const TokenSeq prompt = require<TokenSeq>(config, "prompt");
  DecodeConfig decode_config;
  decode_config.k = require<int>(config, "k");
  decode_config.max_new = require<int>(config, "max_new");
  decode_config.temperature = value_or<double>(config, "temperature", 1.0);
  const std::uint64_t seed =
      args.seed_override ? *args.seed_override : require<std::uint64_t>(config, "seed");
  const std::uint64_t stream = value_or<std::uint64_t>(config, "stream", 0);

  DecodeTrace trace;
  std::string drafter_hash;
  if (kind == "factorized") {
    const DrafterParams drafter = load_drafter_source(config.at("drafter_model"), config_dir);
    check_same_vocab(target.vocab, drafter.vocab);
    const FactorizedProposer proposer(drafter, decode_config.temperature);
    trace = decode(target, proposer, prompt, decode_config, seed, stream);
    drafter_hash = model_hash(drafter);
  } else if (kind == "sequential") {
    const TargetParams drafter = load_target_source(config.at("drafter_model"), config_dir);
    check_same_vocab(target.vocab, drafter.vocab);
    const SequentialProposer proposer(drafter, decode_config.temperature);
    trace = decode(target, proposer, prompt, decode_config, seed, stream);
    drafter_hash = model_hash(drafter);
  } else {
    throw CliError("bad_config", "drafter_kind must be \"factorized\" or \"sequential\"", 2);
  }

  save_traces(std::vector<DecodeTrace>{trace}, (out / "trace.jsonl").string(),
              model_hash(target), drafter_hash);

  json output;
  output["schema_version"] = 1;
  output["tokens"] = trace.output;
  output["n_cycles"] = trace.cycles.size();
  write_json_file(out / "output.json", output);
  return 0;
}

int cmd_bench(const CommonArgs& args) {
  const json config = load_config(args.config_path);
  const fs::path config_dir = fs::path(args.config_path).parent_path();
  const fs::path out = prepare_out_dir(args.out_dir);

  const TargetParams target = load_target_source(config.at("target_model"), config_dir);
  const int k = require<int>(config, "k");
  EvalConfig eval = eval_config_from(config.at("eval"));
  if (args.seed_override) eval.decode_seed = *args.seed_override;

  const auto kind = value_or<std::string>(config, "drafter_kind", "factorized");
  std::vector<DecodeTrace> traces;
  std::string drafter_hash;
  if (kind == "factorized") {
    const DrafterParams drafter = load_drafter_source(config.at("drafter_model"), config_dir);
    check_same_vocab(target.vocab, drafter.vocab);
    const FactorizedProposer proposer(drafter, eval.temperature);
    traces = run_decodes(target, proposer, k, eval);
    drafter_hash = model_hash(drafter);
  } else if (kind == "sequential") {
    const TargetParams drafter = load_target_source(config.at("drafter_model"), config_dir);
    check_same_vocab(target.vocab, drafter.vocab);
    const SequentialProposer proposer(drafter, eval.temperature);
    traces = run_decodes(target, proposer, k, eval);
    drafter_hash = model_hash(drafter);
  } else {
    throw CliError("bad_config", "drafter_kind must be \"factorized\" or \"sequential\"", 2);
  }

  const MetricsReport report = compute_metrics(traces, eval.long_threshold, eval.drafter_cost);
  write_text_file((out / "metrics.json").string(), metrics_to_json(report));

  std::string hist = "accepted_len,cycles\n";
  for (const auto& [len, count] : report.accept_len_hist) {
    hist += csv_join({std::to_string(len), std::to_string(count)});
  }
  write_text_file((out / "accept_hist.csv").string(), hist);

  if (value_or<bool>(config, "write_traces", false)) {
    save_traces(traces, (out / "traces.jsonl").string(), model_hash(target), drafter_hash);
  }
  return 0;
}

int cmd_verify_lossless(const CommonArgs& args) {
  const json config = load_config(args.config_path);
  const fs::path config_dir = fs::path(args.config_path).parent_path();
  const fs::path out = prepare_out_dir(args.out_dir);

  const TargetParams target = load_target_source(config.at("target_model"), config_dir);
  const DrafterParams drafter = load_drafter_source(config.at("drafter_model"), config_dir);
  check_same_vocab(target.vocab, drafter.vocab);
  const TokenSeq prompt = value_or<TokenSeq>(config, "prompt", {});
  const auto k_list = require<std::vector<int>>(config, "k_list");
  const int l_max = require<int>(config, "l_max");
  const auto n_samples = require<std::int64_t>(config, "n_samples");
  const double temperature = value_or<double>(config, "temperature", 1.0);
  const double tv_threshold = require<double>(config, "tv_threshold");
  const double cross_threshold = require<double>(config, "cross_threshold");
  const std::uint64_t seed =
      args.seed_override ? *args.seed_override : require<std::uint64_t>(config, "seed");

  SeqLaw exact;
  try {
    exact = exact_joint_law_ar(target, prompt, l_max, temperature);
  } catch (const std::runtime_error& e) {
    throw CliError("budget_exceeded", e.what());
  }

  const FactorizedProposer proposer(drafter, temperature);
  std::vector<SeqLaw> laws;
  json per_k = json::array();
  bool pass = true;
  for (std::size_t i = 0; i < k_list.size(); ++i) {
    laws.push_back(empirical_joint_law_deer(target, proposer, prompt, k_list[i], l_max,
                                            n_samples, seed + i, temperature));
    const double tv = tv_distance(laws.back(), exact);
    pass = pass && tv < tv_threshold;
    per_k.push_back({{"k", k_list[i]}, {"tv", tv}});
  }
  json cross = json::array();
  for (std::size_t a = 0; a < laws.size(); ++a) {
    for (std::size_t b = a + 1; b < laws.size(); ++b) {
      const double tv = tv_distance(laws[a], laws[b]);
      pass = pass && tv < cross_threshold;
      cross.push_back({{"k_a", k_list[a]}, {"k_b", k_list[b]}, {"tv", tv}});
    }
  }

  json report;
  report["schema_version"] = 1;
  report["n_samples"] = n_samples;
  report["seed"] = seed;
  report["l_max"] = l_max;
  report["tv_threshold"] = tv_threshold;
  report["cross_threshold"] = cross_threshold;
  report["instance_hash"] = fnv1a_hex(model_hash(target) + model_hash(drafter));
  report["per_k"] = std::move(per_k);
  report["cross"] = std::move(cross);
  report["pass"] = pass;
  write_json_file(out / "lossless_report.json", report);

  if (!pass) {
    throw CliError("losslessness_violated",
                   "empirical joint law deviates from the autoregressive law", 5);
  }
  return 0;
}

int cmd_sweep_k(const CommonArgs& args) {
  const json config = load_config(args.config_path);
  const fs::path config_dir = fs::path(args.config_path).parent_path();
  const fs::path out = prepare_out_dir(args.out_dir);

  const TargetParams target = load_target_source(config.at("target_model"), config_dir);
  const DrafterParams drafter = load_drafter_source(config.at("drafter_model"), config_dir);
  check_same_vocab(target.vocab, drafter.vocab);
  const auto k_list = require<std::vector<int>>(config, "k_list");
  EvalConfig eval = eval_config_from(config.at("eval"));
  if (args.seed_override) eval.decode_seed = *args.seed_override;

  const auto rows = run_blocksize_sweep(target, drafter, k_list, eval);
  write_text_file((out / "sweep_k.csv").string(), sweep_to_csv(rows));
  return 0;
}

int cmd_sweep_alpha(const CommonArgs& args) {
  const json config = load_config(args.config_path);
  const fs::path config_dir = fs::path(args.config_path).parent_path();
  const fs::path out = prepare_out_dir(args.out_dir);

  const TargetParams target = load_target_source(config.at("target_model"), config_dir);
  const DrafterParams init = load_drafter_source(config.at("drafter_init"), config_dir);
  const auto corpus = make_corpus(target, config.at("corpus"));
  const auto alphas = require<std::vector<double>>(config, "alphas");
  StageConfig base = stage_config_from(config.at("training"));
  if (args.seed_override) base.seed = *args.seed_override;

  const auto verdicts = run_alpha_sweep(init, corpus, base, alphas);

  json verdicts_doc;
  verdicts_doc["schema_version"] = 1;
  json rows = json::array();
  for (const auto& v : verdicts) {
    std::string label = format_double(v.alpha);
    write_text_file((out / ("alpha_" + label + "_loss.csv")).string(),
                    loss_curve_to_csv(v.epoch_mean_loss));
    rows.push_back({{"alpha", v.alpha},
                    {"diverged", v.diverged},
                    {"diagnostic", v.diagnostic}});
  }
  verdicts_doc["verdicts"] = std::move(rows);
  write_json_file(out / "alpha_verdicts.json", verdicts_doc);
  return 0;
}

int cmd_uncertainty(const CommonArgs& args) {
  const json config = load_config(args.config_path);
  const fs::path config_dir = fs::path(args.config_path).parent_path();
  const fs::path out = prepare_out_dir(args.out_dir);

  ReferenceConfig ref;
  if (config.contains("reference_config_path")) {
    const fs::path path =
        resolve(config_dir, require<std::string>(config, "reference_config_path"));
    if (!fs::exists(path)) {
      throw CliError("bad_config", "reference config not found: " + path.string(), 2);
    }
    ref = ReferenceConfig::from_json(read_text_file(path.string()));
  } else if (config.contains("reference")) {
    ref = ReferenceConfig::from_json(config.at("reference").dump());
  } else {
    throw CliError("bad_config",
                   "uncertainty needs \"reference\" or \"reference_config_path\"", 2);
  }
  if (args.seed_override) ref.eval.decode_seed = *args.seed_override;

  const ReferenceInstance instance = build_reference_instance(ref);
  const UncertaintyReport report = run_uncertainty_experiment(instance);

  write_text_file((out / "kl_factorized.csv").string(),
                  kl_profile_to_csv(report.kl_factorized));
  write_text_file((out / "kl_sequential.csv").string(),
                  kl_profile_to_csv(report.kl_sequential));
  write_text_file((out / "metrics_factorized.json").string(),
                  metrics_to_json(report.metrics_factorized));
  write_text_file((out / "metrics_sequential.json").string(),
                  metrics_to_json(report.metrics_sequential));
  write_text_file((out / "stage1_loss.csv").string(),
                  loss_curve_to_csv(instance.stage1_losses));
  write_text_file((out / "stage2_loss.csv").string(),
                  loss_curve_to_csv(instance.stage2_losses));

  json summary;
  summary["schema_version"] = 1;
  summary["tau_factorized"] = report.metrics_factorized.tau;
  summary["tau_sequential"] = report.metrics_sequential.tau;
  summary["kl_offset1_factorized"] = report.kl_offset1_factorized;
  summary["kl_offset1_sequential"] = report.kl_offset1_sequential;
  summary["kl_offset1_init"] = instance.kl_offset1_init;
  summary["kl_offset1_after_stage1"] = instance.kl_offset1_after_stage1;
  summary["ce_offset1_after_stage1"] = instance.ce_offset1_after_stage1;
  summary["ce_offset1_after_stage2"] = instance.ce_offset1_after_stage2;
  summary["kl_by_depth_factorized"] = report.kl_factorized.mean;
  summary["kl_by_depth_sequential"] = report.kl_sequential.mean;
  summary["target_hash"] = model_hash(instance.target);
  summary["sequential_drafter_hash"] = model_hash(instance.sequential_drafter);
  summary["factorized_drafter_hash"] = model_hash(instance.factorized_drafter);
  write_json_file(out / "uncertainty_report.json", summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deer: lossless block-speculative decoding engine (factorized "
               "drafter, autoregressive verifier) with training and analysis tools"};
  app.require_subcommand(1);

  CommonArgs args;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "JSON config file")->required();
    sub->add_option("--out", args.out_dir, "output directory (default .)");
    sub->add_option("--seed", args.seed_override, "override the config seed");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "two-stage drafter alignment");
  CLI::App* decode_cmd = app.add_subcommand("decode", "single speculative decode, traced");
  CLI::App* bench_cmd = app.add_subcommand("bench", "decode metrics over many runs");
  CLI::App* verify_cmd =
      app.add_subcommand("verify-lossless", "empirical joint law vs the exact one");
  CLI::App* sweep_k_cmd = app.add_subcommand("sweep-k", "block-size sweep");
  CLI::App* sweep_alpha_cmd = app.add_subcommand("sweep-alpha", "stage-II weighting sweep");
  CLI::App* uncertainty_cmd =
      app.add_subcommand("uncertainty", "factorized-vs-sequential drafter contrast");
  for (CLI::App* sub : {train_cmd, decode_cmd, bench_cmd, verify_cmd, sweep_k_cmd,
                        sweep_alpha_cmd, uncertainty_cmd}) {
    add_common(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(args);
    if (decode_cmd->parsed()) return cmd_decode(args);
    if (bench_cmd->parsed()) return cmd_bench(args);
    if (verify_cmd->parsed()) return cmd_verify_lossless(args);
    if (sweep_k_cmd->parsed()) return cmd_sweep_k(args);
    if (sweep_alpha_cmd->parsed()) return cmd_sweep_alpha(args);
    if (uncertainty_cmd->parsed()) return cmd_uncertainty(args);
  } catch (const CliError& e) {
    emit_error(e.code, e.what());
    return e.exit_code;
  } catch (const std::exception& e) {
    emit_error("internal_error", e.what());
    return 3;
  }
  return 2;
}
