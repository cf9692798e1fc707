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

#include <map>
#include <vector>

#include "deer/dist.hpp"
#include "deer/rng.hpp"
#include "deer/vocab.hpp"

namespace deer {

// Conditioning window: exactly `order` token ids, left-padded with kPadToken
// when the prefix is shorter than the order.
using Context = std::vector<TokenId>;

// One logit row over the sampleable symbols (vocab.size ordinary + EOS).
using LogitRow = std::vector<double>;

Context context_window(const TokenSeq& prefix, int order);

/**
 * Tabular autoregressive model: a logit row per m-token context window,
 * with a shared default row for contexts absent from the table.
 * Immutable after construction; concurrent readers are safe.
 */
struct TargetParams {
  Vocab vocab;
  int order = 1;
  std::map<Context, LogitRow> table;
  LogitRow default_logits;

  const LogitRow& row(const Context& ctx) const;
  void validate() const;
};

/**
 * Tabular block drafter: a logit row per (context window, offset) pair,
 * offsets 1..max_offset. Every context present in the table carries rows for
 * all offsets; unseen contexts fall back to the shared default row.
 */
struct DrafterParams {
  Vocab vocab;
  int order = 1;
  int max_offset = 1;
  std::map<Context, std::vector<LogitRow>> table;  // [offset-1]
  LogitRow default_logits;

  const LogitRow& row(const Context& ctx, int offset) const;
  void validate() const;

  // All-zero logits everywhere: the uniform drafter.
  static DrafterParams uniform_init(const Vocab& vocab, int order, int max_offset);
};

// Softmax of the logit row addressed by the last `order` tokens of `prefix`.
Dist target_next_dist(const TargetParams& params, const TokenSeq& prefix,
                      double temperature = 1.0);

/**
 * A k-token block proposal: per-offset proposal distributions plus the
 * sampled draft tokens. For the factorized drafter every dists[d] depends
 * only on the prefix and the offset, never on tokens[0..d-1]; for the
 * sequential baseline dists[d] records the conditional actually used, i.e.
 * the one grown on the drafter's own earlier draft tokens.
 */
struct BlockProposal {
  std::vector<Dist> dists;
  std::vector<TokenId> tokens;
  int prefix_len = 0;
};

// Block proposal with per-offset rows conditioned only on the prefix window.
// A different rng changes tokens but never dists.
BlockProposal draft_block_factorized(const DrafterParams& params,
                                     const TokenSeq& prefix, int k,
                                     RngStream& rng, double temperature = 1.0);

// Left-to-right baseline: dists[d] conditions on prefix ++ tokens[0..d-1].
// Drafting continues past a drafted EOS; verification handles termination.
BlockProposal draft_block_sequential(const TargetParams& drafter,
                                     const TokenSeq& prefix, int k,
                                     RngStream& rng, double temperature = 1.0);

// Common drafting interface the decode loop runs against.
class Proposer {
 public:
  virtual ~Proposer() = default;
  virtual BlockProposal propose(const TokenSeq& prefix, int k, RngStream& rng) const = 0;
  virtual const char* kind() const = 0;
};

class FactorizedProposer final : public Proposer {
 public:
  FactorizedProposer(const DrafterParams& params, double temperature = 1.0)
      : params_(&params), temperature_(temperature) {}
  BlockProposal propose(const TokenSeq& prefix, int k, RngStream& rng) const override {
    return draft_block_factorized(*params_, prefix, k, rng, temperature_);
  }
  const char* kind() const override { return "factorized"; }

 private:
  const DrafterParams* params_;
  double temperature_;
};

class SequentialProposer final : public Proposer {
 public:
  SequentialProposer(const TargetParams& params, double temperature = 1.0)
      : params_(&params), temperature_(temperature) {}
  BlockProposal propose(const TokenSeq& prefix, int k, RngStream& rng) const override {
    return draft_block_sequential(*params_, prefix, k, rng, temperature_);
  }
  const char* kind() const override { return "sequential"; }

 private:
  const TargetParams* params_;
  double temperature_;
};

}  // namespace deer
