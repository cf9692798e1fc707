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
#include <string>
#include <vector>

#include "deer/models.hpp"

namespace deer {

/**
 * One drafting-verification cycle. A rejection never terminates the block:
 * the corrected token is appended and verification proceeds to the next
 * offset, so accepted flags may contain true entries after a false one.
 */
struct CycleRecord {
  int prefix_len_before = 0;
  int k = 0;
  std::vector<bool> accepted;          // k flags; entries past emitted.size() stay false
  std::vector<int> resample_positions; // 1-based offsets where rejection occurred
  TokenSeq emitted;                    // tokens appended this cycle
  bool ended_with_eos = false;
  bool truncated = false;              // max_new reached mid-block

  int accepted_count() const {
    int n = 0;
    for (std::size_t i = 0; i < emitted.size() && i < accepted.size(); ++i) {
      if (accepted[i]) ++n;
    }
    return n;
  }
};

struct DecodeTrace {
  std::vector<CycleRecord> cycles;
  TokenSeq output;  // prompt ++ concatenation of emitted tokens
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  int k = 0;
  double temperature = 1.0;
  std::string drafter_kind;
};

// min(1, p_tok/q_tok). Throws SupportError when q_tok is 0 (support
// condition) and std::invalid_argument on negative or non-finite inputs.
double accept_prob(double p_tok, double q_tok);

/**
 * Residual distribution (p - min(p, q)) / (1 - gamma) with
 * gamma = sum min(p, q): the law of replacement tokens after a rejection.
 * Zero wherever q >= p. gamma = 1 means rejection has probability zero, so a
 * caller reaching for the residual there is broken; that path throws
 * std::logic_error.
 */
Dist residual_dist(const Dist& p, const Dist& q);

struct VerifyResult {
  int token = 0;
  bool accepted = false;
};

/**
 * One draft-then-verify step: accepts draft_token with probability
 * min(1, p/q), otherwise samples the replacement from residual_dist(p, q).
 * The output marginal is exactly p.
 */
VerifyResult verify_position(const Dist& p, const Dist& proposal_dist,
                             int draft_token, RngStream& rng);

struct DecodeConfig {
  int k = 1;
  int max_new = 1;
  double temperature = 1.0;
};

/**
 * Block speculative decoding loop: draft a k-block, verify token by token
 * against the target conditional at the current corrected prefix, continue
 * past rejections, break on EOS or when max_new tokens have been emitted
 * (truncating mid-block if necessary). A fresh block is drafted every cycle.
 */
DecodeTrace decode(const TargetParams& target, const Proposer& drafter,
                   const TokenSeq& prompt, const DecodeConfig& config,
                   std::uint64_t seed, std::uint64_t stream = 0);

// Plain autoregressive sampling from the target; the reference both for the
// losslessness comparison and for the speedup proxy.
TokenSeq decode_baseline_ar(const TargetParams& target, const TokenSeq& prompt,
                            int max_new, std::uint64_t seed,
                            std::uint64_t stream = 0, double temperature = 1.0);

}  // namespace deer
