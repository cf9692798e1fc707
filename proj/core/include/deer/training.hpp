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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "deer/models.hpp"

namespace deer {

enum class TMode { one, uniform };

/**
 * Stage-one training example: an answer truncated at a random boundary, a SEP
 * marker at the boundary, and each suffix position independently replaced by
 * MASK with probability t. Positions before the boundary are never masked.
 */
struct TrainingExample {
  TokenSeq full;       // original answer (possibly suffix-capped)
  int prefix_len = 0;  // boundary l_q, 1 <= l_q < full length at draw time
  TokenSeq noised;     // full[0..l_q) ++ SEP ++ masked suffix
  double t = 1.0;      // masking probability used to generate noised
  bool sep_inserted = true;
};

// Stage-two example: exactly the last r tokens masked, weight alpha^(r-i) on
// the i-th masked token (so the token nearest the boundary weighs most and
// the final one weighs exactly 1).
struct RefineExample {
  TokenSeq full;
  int r = 1;
  std::vector<double> weights;  // weights[i-1] = alpha^(r-i)
};

// n sequences sampled autoregressively from the target until EOS or max_len.
std::vector<TokenSeq> synthesize_teacher_corpus(const TargetParams& target,
                                                int n, int max_len,
                                                RngStream& rng);

/**
 * Draws l_q ~ Uniform{1..L-1}, inserts SEP, masks the suffix. t is 1 under
 * TMode::one and Uniform(0,1] under TMode::uniform. When max_suffix > 0 the
 * example keeps at most that many suffix tokens past the boundary, so every
 * masked position stays within a drafter's offset range.
 * Throws on answers shorter than 2 tokens.
 */
TrainingExample make_stage1_example(const TokenSeq& answer, const Vocab& vocab,
                                    RngStream& rng, TMode t_mode = TMode::one,
                                    int max_suffix = 0);

// weights[i-1] = alpha^(r-i) by backward recurrence from w_r = 1, so the
// ratio of consecutive weights is exactly alpha.
std::vector<double> refine_weights(int r, double alpha);

// Draws r ~ Uniform{1..min(r_max, L-1)} and attaches the weight vector.
RefineExample make_refine_example(const TokenSeq& answer, int r_max,
                                  double alpha, RngStream& rng);

/**
 * (1/t) * sum over masked positions of -log q(true token | window at the
 * boundary, offset), offsets counted from 1 at the first suffix position.
 * Throws std::invalid_argument when a masked position lies deeper than the
 * drafter's max_offset (an r_max/k misconfiguration).
 */
double stage1_loss(const DrafterParams& drafter, const TrainingExample& ex);

// sum_i w_i * -log q(true token | window at the boundary, offset i), t = 1.
double stage2_loss(const DrafterParams& drafter, const RefineExample& ex);

struct RowKey {
  Context context;
  int offset = 1;
  bool operator<(const RowKey& other) const {
    if (context != other.context) return context < other.context;
    return offset < other.offset;
  }
};

// Sparse gradient: only rows touched by the example appear.
using Gradient = std::map<RowKey, LogitRow>;

Gradient loss_gradient(const DrafterParams& drafter, const TrainingExample& ex);
Gradient loss_gradient(const DrafterParams& drafter, const RefineExample& ex);

struct StageConfig {
  int stage = 1;
  int epochs = 1;
  double lr = 0.1;
  double alpha = 1.0;         // stage 2 weighting factor
  int r_max = 8;              // stage 2 mask-span bound
  TMode t_mode = TMode::one;  // stage 1 mask level law
  std::uint64_t seed = 0;
};

struct TrainResult {
  DrafterParams params;
  std::vector<double> epoch_mean_loss;
  std::int64_t skipped_examples = 0;
  bool diverged = false;
  std::string diagnostic;
};

/**
 * Plain SGD on the staged loss, one fresh example per corpus answer per
 * epoch. Deterministic given the config seed. A non-finite loss aborts the
 * run with `diverged` set and a diagnostic instead of throwing, so sweeps can
 * record instability verdicts.
 */
TrainResult train(const DrafterParams& init,
                  std::span<const TokenSeq> corpus, const StageConfig& config);

// Corpus-weighted mean KL(target conditional || drafter offset-1 row) over
// all positions with a non-empty prefix. The drafter-quality yardstick.
double mean_kl_offset1(const TargetParams& target, const DrafterParams& drafter,
                       std::span<const TokenSeq> corpus);

// Same weighting, cross-entropy -sum p log q instead of KL.
double mean_ce_offset1(const TargetParams& target, const DrafterParams& drafter,
                       std::span<const TokenSeq> corpus);

}  // namespace deer
