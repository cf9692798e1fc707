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
#include <vector>

#include "deer/engine.hpp"
#include "deer/models.hpp"

namespace deer {

// Exact or empirical law over full output sequences (prompt included).
// A sequence is terminal when it ends with EOS or reaches the length budget,
// so truncation is a distinct terminal event shared by both laws.
struct SeqLaw {
  std::map<TokenSeq, double> prob;

  double total() const;
  void validate(double tol = 1e-10) const;
};

double tv_distance(const SeqLaw& a, const SeqLaw& b);

/**
 * Composes the one-step draft-then-verify output law analytically:
 * out(a) = min(p(a), q(a)) + (1 - gamma) * residual(a). The whole point is to
 * return the composed value rather than p itself: agreement with p is the
 * one-step losslessness statement, and this function is the independent side
 * of that check. Requires support(p) within support(q).
 */
Dist exact_onestep_output_dist(const Dist& p, const Dist& q);

/**
 * Exhaustive autoregressive law over all continuations of `prompt` up to
 * l_max new tokens, EOS absorbing. Throws when (V+1)^l_max exceeds the 10^6
 * enumeration budget.
 */
SeqLaw exact_joint_law_ar(const TargetParams& target, const TokenSeq& prompt,
                          int l_max, double temperature = 1.0);

// Frequency table over n independent decodes with stream ids 0..n-1.
SeqLaw empirical_joint_law_deer(const TargetParams& target, const Proposer& drafter,
                                const TokenSeq& prompt, int k, int l_max,
                                std::int64_t n, std::uint64_t seed,
                                double temperature = 1.0);

struct KlProfile {
  std::vector<double> mean;      // [depth-1], depth = 1..k
  std::vector<double> stderr_;   // standard error of the mean per depth
  std::vector<std::int64_t> count;
};

/**
 * Mean KL, per block depth, between the target conditional at the true
 * (corrected) prefix and the drafter conditional actually used at that depth:
 * the prefix-only row for the factorized drafter, the self-conditioned row
 * for the sequential baseline. Prefixes are sampled by running n_decodes
 * decoding runs over the prompt set.
 */
KlProfile kl_by_depth(const TargetParams& target, const Proposer& drafter,
                      std::span<const TokenSeq> prompts, int k, int max_new,
                      std::int64_t n_decodes, std::uint64_t seed,
                      double temperature = 1.0);

}  // namespace deer
