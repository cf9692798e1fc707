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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deer/metrics.hpp"
#include "deer/models.hpp"
#include "deer/oracle.hpp"
#include "deer/training.hpp"

namespace deer {

// Random tabular model with one logit row per reachable context window
// (left-pad prefixes included): logits ~ logit_scale * Uniform(-1, 1), plus
// eos_bias on the EOS slot. Deterministic in the seed.
TargetParams make_random_target(int vocab_size, int order, double logit_scale,
                                double eos_bias, std::uint64_t seed);

// Mostly-deterministic chain: every context row is noise_scale * Uniform(-1,1)
// with `margin` added on one uniformly chosen preferred token, plus eos_bias
// on EOS. Sharp conditionals keep multi-step marginals informative, the
// regime where block drafting pays off.
TargetParams make_near_deterministic_target(int vocab_size, int order,
                                            double margin, double noise_scale,
                                            double eos_bias, std::uint64_t seed);

// Row-wise contamination: softmax of every row is mixed with the uniform
// distribution, q = (1 - epsilon) * p + epsilon * u, and mapped back to
// logits. epsilon = 0 returns an exact copy.
TargetParams perturb_mix_uniform(const TargetParams& target, double epsilon);

// Prompt of `len` ordinary tokens sampled from the target with EOS excluded
// and renormalized away.
TokenSeq sample_prompt(const TargetParams& target, int len, RngStream& rng);

struct EvalConfig {
  std::int64_t n_runs = 2000;
  int max_new = 24;
  double temperature = 1.0;
  int prompt_len = 1;
  int n_prompts = 64;
  std::uint64_t prompt_seed = 23;
  std::uint64_t decode_seed = 17;
  int long_threshold = 8;
  double drafter_cost = 0.1;
};

// n_runs decodes over a fixed prompt set, deterministic and parallel-safe.
std::vector<DecodeTrace> run_decodes(const TargetParams& target,
                                     const Proposer& drafter, int k,
                                     const EvalConfig& config);

struct SweepRow {
  int k = 0;
  double tau = 0.0;
  double speedup_proxy = 0.0;
};

std::vector<SweepRow> run_blocksize_sweep(const TargetParams& target,
                                          const DrafterParams& drafter,
                                          std::span<const int> k_list,
                                          const EvalConfig& config);

std::string sweep_to_csv(std::span<const SweepRow> rows);
std::vector<SweepRow> sweep_from_csv(const std::string& text);

struct AlphaVerdict {
  double alpha = 1.0;
  std::vector<double> epoch_mean_loss;
  bool diverged = false;  // non-finite loss or final epoch above the first
  std::string diagnostic;
};

// Stage II training at each alpha from the same initial drafter; records the
// loss curve and a stability verdict per alpha. Nothing is asserted here —
// verdicts are data.
std::vector<AlphaVerdict> run_alpha_sweep(const DrafterParams& init,
                                          std::span<const TokenSeq> corpus,
                                          const StageConfig& base,
                                          std::span<const double> alphas);

std::string loss_curve_to_csv(std::span<const double> losses);
std::vector<double> loss_curve_from_csv(const std::string& text);

std::string kl_profile_to_csv(const KlProfile& profile);
KlProfile kl_profile_from_csv(const std::string& text);

/**
 * The reference instance: a random target, the epsilon-contaminated copy as
 * the sequential baseline drafter, and a factorized drafter trained with
 * stage I then stage II on a synthesized teacher corpus. All constants live
 * in a versioned config.
 */
struct ReferenceConfig {
  int vocab_size = 6;
  int order = 1;
  int k = 8;
  double epsilon = 0.2;
  double target_margin = 6.0;  // preferred-token logit bump
  double logit_scale = 0.8;    // background noise amplitude
  double eos_bias = -2.0;
  std::uint64_t target_seed = 101;
  int corpus_n = 4000;
  int corpus_max_len = 24;
  std::uint64_t corpus_seed = 7;
  // Stage I is deliberately short: two epochs already collapse the offset-1
  // KL by far more than half, and the remaining headroom is what stage II's
  // boundary-weighted refinement then visibly improves.
  StageConfig stage1{1, 2, 0.03, 1.0, 8, TMode::one, 11};
  StageConfig stage2{2, 12, 0.02, 1.01, 8, TMode::one, 13};
  EvalConfig eval;

  static ReferenceConfig from_json(const std::string& text);
  std::string to_json() const;
};

struct ReferenceInstance {
  ReferenceConfig config;
  TargetParams target;
  TargetParams sequential_drafter;  // epsilon-perturbed target
  DrafterParams factorized_drafter; // after stage I + II
  std::vector<TokenSeq> corpus;
  std::vector<double> stage1_losses;
  std::vector<double> stage2_losses;
  double kl_offset1_init = 0.0;         // untrained drafter vs target
  double kl_offset1_after_stage1 = 0.0;
  double ce_offset1_after_stage1 = 0.0;
  double ce_offset1_after_stage2 = 0.0;
};

ReferenceInstance build_reference_instance(const ReferenceConfig& config);

struct UncertaintyReport {
  KlProfile kl_factorized;
  KlProfile kl_sequential;
  MetricsReport metrics_factorized;
  MetricsReport metrics_sequential;
  double kl_offset1_factorized = 0.0;  // corpus-weighted depth-1 quality
  double kl_offset1_sequential = 0.0;
};

// The uncertainty-accumulation contrast: KL-by-depth profiles and decoding
// metrics for the factorized drafter vs the sequential baseline on the same
// instance and prompt set.
UncertaintyReport run_uncertainty_experiment(const ReferenceInstance& instance);

}  // namespace deer
