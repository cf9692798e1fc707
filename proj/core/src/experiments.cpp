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

#include "deer/experiments.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "deer/io_util.hpp"
#include "deer/parallel.hpp"

namespace deer {

namespace {

using nlohmann::json;

void enumerate_contexts(int vocab_size, int order, std::vector<Context>& out) {
  // pad^(order-j) ++ w for every j-tuple w of ordinary tokens, j = 0..order.
  for (int n_real = 0; n_real <= order; ++n_real) {
    Context ctx(static_cast<std::size_t>(order), kPadToken);
    std::vector<int> idx(static_cast<std::size_t>(n_real), 0);
    for (;;) {
      for (int i = 0; i < n_real; ++i) {
        ctx[static_cast<std::size_t>(order - n_real + i)] =
            static_cast<TokenId>(idx[static_cast<std::size_t>(i)]);
      }
      out.push_back(ctx);
      int pos = n_real - 1;
      while (pos >= 0 && ++idx[static_cast<std::size_t>(pos)] == vocab_size) {
        idx[static_cast<std::size_t>(pos)] = 0;
        --pos;
      }
      if (pos < 0) break;
    }
    if (n_real == 0 && order == 0) break;
  }
}

}  // namespace

TargetParams make_random_target(int vocab_size, int order, double logit_scale,
                                double eos_bias, std::uint64_t seed) {
  TargetParams params;
  params.vocab = Vocab::of_size(vocab_size);
  params.order = order;
  params.default_logits.assign(static_cast<std::size_t>(params.vocab.dist_size()), 0.0);

  std::vector<Context> contexts;
  enumerate_contexts(vocab_size, order, contexts);

  RngStream rng(seed, 0);
  for (const Context& ctx : contexts) {
    LogitRow row(static_cast<std::size_t>(params.vocab.dist_size()));
    for (double& l : row) {
      l = logit_scale * (2.0 * rng.next_uniform() - 1.0);
    }
    row[static_cast<std::size_t>(params.vocab.eos_id)] += eos_bias;
    params.table.emplace(ctx, std::move(row));
  }
  params.validate();
  return params;
}

TargetParams make_near_deterministic_target(int vocab_size, int order,
                                            double margin, double noise_scale,
                                            double eos_bias, std::uint64_t seed) {
  TargetParams params;
  params.vocab = Vocab::of_size(vocab_size);
  params.order = order;
  params.default_logits.assign(static_cast<std::size_t>(params.vocab.dist_size()), 0.0);

  std::vector<Context> contexts;
  enumerate_contexts(vocab_size, order, contexts);

  RngStream rng(seed, 0);
  for (const Context& ctx : contexts) {
    LogitRow row(static_cast<std::size_t>(params.vocab.dist_size()));
    for (double& l : row) {
      l = noise_scale * (2.0 * rng.next_uniform() - 1.0);
    }
    const auto preferred = static_cast<std::size_t>(rng.next_below(
        static_cast<std::uint64_t>(vocab_size)));
    row[preferred] += margin;
    row[static_cast<std::size_t>(params.vocab.eos_id)] += eos_bias;
    params.table.emplace(ctx, std::move(row));
  }
  params.validate();
  return params;
}

TargetParams perturb_mix_uniform(const TargetParams& target, double epsilon) {
  if (epsilon < 0.0 || epsilon >= 1.0) {
    throw std::invalid_argument("perturb_mix_uniform: epsilon must lie in [0, 1)");
  }
  auto mix_row = [&](const LogitRow& row) {
    const Dist p = softmax(row);
    const double u = 1.0 / static_cast<double>(p.size());
    LogitRow out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double mixed = (1.0 - epsilon) * p.probs[i] + epsilon * u;
      // Entries with zero mass (possible only at epsilon = 0) keep a logit so
      // low that the softmax underflows back to exactly zero.
      out[i] = mixed > 0.0 ? std::log(mixed) : -1e9;
    }
    return out;
  };

  TargetParams out = target;
  for (auto& [ctx, row] : out.table) {
    row = mix_row(row);
  }
  out.default_logits = mix_row(target.default_logits);
  out.validate();
  return out;
}

TokenSeq sample_prompt(const TargetParams& target, int len, RngStream& rng) {
  TokenSeq prompt;
  for (int i = 0; i < len; ++i) {
    Dist d = target_next_dist(target, prompt);
    d.probs[static_cast<std::size_t>(target.vocab.eos_id)] = 0.0;
    double sum = 0.0;
    for (double p : d.probs) sum += p;
    if (sum <= 0.0) {
      throw std::runtime_error("sample_prompt: no ordinary-token mass");
    }
    for (double& p : d.probs) p /= sum;
    prompt.push_back(static_cast<TokenId>(sample_categorical(d, rng)));
  }
  return prompt;
}

namespace {

std::vector<TokenSeq> make_prompt_set(const TargetParams& target,
                                      const EvalConfig& config) {
  std::vector<TokenSeq> prompts;
  const int n = std::max(1, config.n_prompts);
  prompts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    RngStream rng(config.prompt_seed, static_cast<std::uint64_t>(i));
    prompts.push_back(sample_prompt(target, config.prompt_len, rng));
  }
  return prompts;
}

}  // namespace

std::vector<DecodeTrace> run_decodes(const TargetParams& target,
                                     const Proposer& drafter, int k,
                                     const EvalConfig& config) {
  const std::vector<TokenSeq> prompts = make_prompt_set(target, config);
  const DecodeConfig decode_config{k, config.max_new, config.temperature};

  auto chunk_fn = [&](std::int64_t begin, std::int64_t end, int) {
    std::vector<DecodeTrace> part;
    part.reserve(static_cast<std::size_t>(end - begin));
    for (std::int64_t run = begin; run < end; ++run) {
      const TokenSeq& prompt = prompts[static_cast<std::size_t>(
          run % static_cast<std::int64_t>(prompts.size()))];
      part.push_back(decode(target, drafter, prompt, decode_config,
                            config.decode_seed, static_cast<std::uint64_t>(run)));
    }
    return part;
  };
  const auto partials = parallel_map_chunks<std::vector<DecodeTrace>>(config.n_runs, chunk_fn);

  std::vector<DecodeTrace> traces;
  traces.reserve(static_cast<std::size_t>(config.n_runs));
  for (auto& part : partials) {
    for (auto& t : part) {
      traces.push_back(std::move(t));
    }
  }
  return traces;
}

std::vector<SweepRow> run_blocksize_sweep(const TargetParams& target,
                                          const DrafterParams& drafter,
                                          std::span<const int> k_list,
                                          const EvalConfig& config) {
  std::vector<SweepRow> rows;
  rows.reserve(k_list.size());
  const FactorizedProposer proposer(drafter, config.temperature);
  for (int k : k_list) {
    const auto traces = run_decodes(target, proposer, k, config);
    const MetricsReport m =
        compute_metrics(traces, config.long_threshold, config.drafter_cost);
    rows.push_back({k, m.tau, m.speedup_proxy});
  }
  return rows;
}

std::string sweep_to_csv(std::span<const SweepRow> rows) {
  std::string out = "k,tau,speedup_proxy\n";
  for (const SweepRow& row : rows) {
    out += csv_join({std::to_string(row.k), format_double(row.tau),
                     format_double(row.speedup_proxy)});
  }
  return out;
}

std::vector<SweepRow> sweep_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || csv_split(line) !=
      std::vector<std::string>{"k", "tau", "speedup_proxy"}) {
    throw std::runtime_error("sweep CSV: bad header");
  }
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = csv_split(line);
    if (fields.size() != 3) {
      throw std::runtime_error("sweep CSV: bad row");
    }
    rows.push_back({std::stoi(fields[0]), parse_double(fields[1]), parse_double(fields[2])});
  }
  return rows;
}

std::vector<AlphaVerdict> run_alpha_sweep(const DrafterParams& init,
                                          std::span<const TokenSeq> corpus,
                                          const StageConfig& base,
                                          std::span<const double> alphas) {
  std::vector<AlphaVerdict> verdicts;
  verdicts.reserve(alphas.size());
  for (double alpha : alphas) {
    StageConfig config = base;
    config.stage = 2;
    config.alpha = alpha;
    const TrainResult result = train(init, corpus, config);

    AlphaVerdict v;
    v.alpha = alpha;
    v.epoch_mean_loss = result.epoch_mean_loss;
    v.diagnostic = result.diagnostic;
    const bool rose = !result.epoch_mean_loss.empty() &&
                      result.epoch_mean_loss.back() > result.epoch_mean_loss.front();
    v.diverged = result.diverged || rose;
    if (v.diverged && v.diagnostic.empty()) {
      v.diagnostic = "final epoch mean loss above first epoch";
    }
    verdicts.push_back(std::move(v));
  }
  return verdicts;
}

std::string loss_curve_to_csv(std::span<const double> losses) {
  std::string out = "epoch,mean_loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) {
    out += csv_join({std::to_string(i), format_double(losses[i])});
  }
  return out;
}

std::vector<double> loss_curve_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      csv_split(line) != std::vector<std::string>{"epoch", "mean_loss"}) {
    throw std::runtime_error("loss CSV: bad header");
  }
  std::vector<double> losses;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = csv_split(line);
    if (fields.size() != 2) {
      throw std::runtime_error("loss CSV: bad row");
    }
    losses.push_back(parse_double(fields[1]));
  }
  return losses;
}

std::string kl_profile_to_csv(const KlProfile& profile) {
  std::string out = "depth,mean_kl,stderr\n";
  for (std::size_t i = 0; i < profile.mean.size(); ++i) {
    out += csv_join({std::to_string(i + 1), format_double(profile.mean[i]),
                     format_double(profile.stderr_[i])});
  }
  return out;
}

KlProfile kl_profile_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      csv_split(line) != std::vector<std::string>{"depth", "mean_kl", "stderr"}) {
    throw std::runtime_error("kl CSV: bad header");
  }
  KlProfile profile;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = csv_split(line);
    if (fields.size() != 3) {
      throw std::runtime_error("kl CSV: bad row");
    }
    profile.mean.push_back(parse_double(fields[1]));
    profile.stderr_.push_back(parse_double(fields[2]));
    profile.count.push_back(0);
  }
  return profile;
}

namespace {

json stage_to_json(const StageConfig& c) {
  json j;
  j["stage"] = c.stage;
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["alpha"] = c.alpha;
  j["r_max"] = c.r_max;
  j["t_mode"] = c.t_mode == TMode::one ? "one" : "uniform";
  j["seed"] = c.seed;
  return j;
}

StageConfig stage_from_json(const json& j) {
  StageConfig c;
  c.stage = j.at("stage").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.lr = j.at("lr").get<double>();
  c.alpha = j.at("alpha").get<double>();
  c.r_max = j.at("r_max").get<int>();
  const std::string mode = j.at("t_mode").get<std::string>();
  if (mode == "one") {
    c.t_mode = TMode::one;
  } else if (mode == "uniform") {
    c.t_mode = TMode::uniform;
  } else {
    throw std::runtime_error("config: t_mode must be \"one\" or \"uniform\"");
  }
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json eval_to_json(const EvalConfig& c) {
  json j;
  j["n_runs"] = c.n_runs;
  j["max_new"] = c.max_new;
  j["temperature"] = c.temperature;
  j["prompt_len"] = c.prompt_len;
  j["n_prompts"] = c.n_prompts;
  j["prompt_seed"] = c.prompt_seed;
  j["decode_seed"] = c.decode_seed;
  j["long_threshold"] = c.long_threshold;
  j["drafter_cost"] = c.drafter_cost;
  return j;
}

EvalConfig eval_from_json(const json& j) {
  EvalConfig c;
  c.n_runs = j.at("n_runs").get<std::int64_t>();
  c.max_new = j.at("max_new").get<int>();
  c.temperature = j.at("temperature").get<double>();
  c.prompt_len = j.at("prompt_len").get<int>();
  c.n_prompts = j.at("n_prompts").get<int>();
  c.prompt_seed = j.at("prompt_seed").get<std::uint64_t>();
  c.decode_seed = j.at("decode_seed").get<std::uint64_t>();
  c.long_threshold = j.at("long_threshold").get<int>();
  c.drafter_cost = j.at("drafter_cost").get<double>();
  return c;
}

}  // namespace

std::string ReferenceConfig::to_json() const {
  json doc;
  doc["schema_version"] = 1;
  doc["vocab_size"] = vocab_size;
  doc["order"] = order;
  doc["k"] = k;
  doc["epsilon"] = epsilon;
  doc["target_margin"] = target_margin;
  doc["logit_scale"] = logit_scale;
  doc["eos_bias"] = eos_bias;
  doc["target_seed"] = target_seed;
  doc["corpus_n"] = corpus_n;
  doc["corpus_max_len"] = corpus_max_len;
  doc["corpus_seed"] = corpus_seed;
  doc["stage1"] = stage_to_json(stage1);
  doc["stage2"] = stage_to_json(stage2);
  doc["eval"] = eval_to_json(eval);
  return doc.dump(2) + "\n";
}

ReferenceConfig ReferenceConfig::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("reference config: malformed JSON: ") + e.what());
  }
  ReferenceConfig c;
  try {
    c.vocab_size = doc.at("vocab_size").get<int>();
    c.order = doc.at("order").get<int>();
    c.k = doc.at("k").get<int>();
    c.epsilon = doc.at("epsilon").get<double>();
    c.target_margin = doc.at("target_margin").get<double>();
    c.logit_scale = doc.at("logit_scale").get<double>();
    c.eos_bias = doc.at("eos_bias").get<double>();
    c.target_seed = doc.at("target_seed").get<std::uint64_t>();
    c.corpus_n = doc.at("corpus_n").get<int>();
    c.corpus_max_len = doc.at("corpus_max_len").get<int>();
    c.corpus_seed = doc.at("corpus_seed").get<std::uint64_t>();
    c.stage1 = stage_from_json(doc.at("stage1"));
    c.stage2 = stage_from_json(doc.at("stage2"));
    c.eval = eval_from_json(doc.at("eval"));
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("reference config: missing field: ") + e.what());
  }
  return c;
}

ReferenceInstance build_reference_instance(const ReferenceConfig& config) {
  ReferenceInstance inst;
  inst.config = config;
  inst.target = make_near_deterministic_target(
      config.vocab_size, config.order, config.target_margin, config.logit_scale,
      config.eos_bias, config.target_seed);
  inst.sequential_drafter = perturb_mix_uniform(inst.target, config.epsilon);

  RngStream corpus_rng(config.corpus_seed, 0);
  inst.corpus = synthesize_teacher_corpus(inst.target, config.corpus_n,
                                          config.corpus_max_len, corpus_rng);

  const DrafterParams init =
      DrafterParams::uniform_init(inst.target.vocab, config.order, config.k);
  inst.kl_offset1_init = mean_kl_offset1(inst.target, init, inst.corpus);

  const TrainResult r1 = train(init, inst.corpus, config.stage1);
  if (r1.diverged) {
    throw std::runtime_error("reference instance: stage I diverged: " + r1.diagnostic);
  }
  inst.stage1_losses = r1.epoch_mean_loss;
  inst.kl_offset1_after_stage1 = mean_kl_offset1(inst.target, r1.params, inst.corpus);
  inst.ce_offset1_after_stage1 = mean_ce_offset1(inst.target, r1.params, inst.corpus);

  const TrainResult r2 = train(r1.params, inst.corpus, config.stage2);
  if (r2.diverged) {
    throw std::runtime_error("reference instance: stage II diverged: " + r2.diagnostic);
  }
  inst.stage2_losses = r2.epoch_mean_loss;
  inst.factorized_drafter = r2.params;
  inst.ce_offset1_after_stage2 =
      mean_ce_offset1(inst.target, inst.factorized_drafter, inst.corpus);
  return inst;
}

UncertaintyReport run_uncertainty_experiment(const ReferenceInstance& inst) {
  const EvalConfig& eval = inst.config.eval;
  const int k = inst.config.k;

  const std::vector<TokenSeq> prompts = make_prompt_set(inst.target, eval);
  const FactorizedProposer factorized(inst.factorized_drafter, eval.temperature);
  const SequentialProposer sequential(inst.sequential_drafter, eval.temperature);

  UncertaintyReport report;
  report.kl_factorized =
      kl_by_depth(inst.target, factorized, prompts, k, eval.max_new,
                  eval.n_runs, eval.decode_seed, eval.temperature);
  report.kl_sequential =
      kl_by_depth(inst.target, sequential, prompts, k, eval.max_new,
                  eval.n_runs, eval.decode_seed, eval.temperature);

  const auto traces_fact = run_decodes(inst.target, factorized, k, eval);
  const auto traces_seq = run_decodes(inst.target, sequential, k, eval);
  report.metrics_factorized =
      compute_metrics(traces_fact, eval.long_threshold, eval.drafter_cost);
  report.metrics_sequential =
      compute_metrics(traces_seq, eval.long_threshold, eval.drafter_cost);

  report.kl_offset1_factorized =
      mean_kl_offset1(inst.target, inst.factorized_drafter, inst.corpus);

  // The sequential baseline's depth-1 quality, same corpus weighting.
  double sum = 0.0;
  std::int64_t count = 0;
  TokenSeq prefix;
  for (const TokenSeq& seq : inst.corpus) {
    for (std::size_t p = 1; p < seq.size(); ++p) {
      prefix.assign(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(p));
      sum += kl_divergence(target_next_dist(inst.target, prefix),
                           target_next_dist(inst.sequential_drafter, prefix));
      ++count;
    }
  }
  report.kl_offset1_sequential = count > 0 ? sum / static_cast<double>(count) : 0.0;
  return report;
}

}  // namespace deer
