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

#include "deer/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace deer {

double accept_prob(double p_tok, double q_tok) {
  if (!std::isfinite(p_tok) || !std::isfinite(q_tok) || p_tok < 0.0 || q_tok < 0.0) {
    throw std::invalid_argument("accept_prob: probabilities must be finite and >= 0");
  }
  if (q_tok == 0.0) {
    throw SupportError("accept_prob: proposal assigns zero probability to the draft token");
  }
  return std::min(1.0, p_tok / q_tok);
}

Dist residual_dist(const Dist& p, const Dist& q) {
  p.validate();
  q.validate();
  if (p.size() != q.size()) {
    throw std::invalid_argument("residual_dist: support sizes differ");
  }

  double gamma = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    gamma += std::min(p.probs[i], q.probs[i]);
  }
  if (gamma >= 1.0 - 1e-12) {
    // Rejection probability is 1 - gamma = 0: this branch is never taken by a
    // correct caller.
    throw std::logic_error("residual_dist: gamma = 1, residual is undefined and unused");
  }

  Dist res;
  res.probs.assign(p.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double num = p.probs[i] - std::min(p.probs[i], q.probs[i]);
    res.probs[i] = num;
    total += num;
  }
  for (double& x : res.probs) {
    x /= total;
  }
  return res;
}

VerifyResult verify_position(const Dist& p, const Dist& proposal_dist,
                             int draft_token, RngStream& rng) {
  p.validate();
  proposal_dist.validate();
  if (p.size() != proposal_dist.size()) {
    throw std::invalid_argument("verify_position: support sizes differ");
  }
  if (draft_token < 0 || static_cast<std::size_t>(draft_token) >= p.size()) {
    throw std::invalid_argument("verify_position: draft token out of range");
  }

  const double alpha = accept_prob(p.probs[static_cast<std::size_t>(draft_token)],
                                   proposal_dist.probs[static_cast<std::size_t>(draft_token)]);
  const double u = rng.next_uniform();
  if (u < alpha) {
    return {draft_token, true};
  }
  const Dist res = residual_dist(p, proposal_dist);
  return {sample_categorical(res, rng), false};
}

DecodeTrace decode(const TargetParams& target, const Proposer& drafter,
                   const TokenSeq& prompt, const DecodeConfig& config,
                   std::uint64_t seed, std::uint64_t stream) {
  target.validate();
  if (config.k < 1) {
    throw std::invalid_argument("decode: k must be >= 1");
  }
  if (config.max_new < 1) {
    throw std::invalid_argument("decode: max_new must be >= 1");
  }
  if (contains_eos(prompt, target.vocab) ||
      !token_seq_valid(prompt, target.vocab)) {
    throw std::invalid_argument("decode: prompt must not contain EOS");
  }

  RngStream rng(seed, stream);
  DecodeTrace trace;
  trace.seed = seed;
  trace.stream = stream;
  trace.k = config.k;
  trace.temperature = config.temperature;
  trace.drafter_kind = drafter.kind();
  trace.output = prompt;

  int emitted_total = 0;
  bool done = false;
  while (!done) {
    const BlockProposal proposal = drafter.propose(trace.output, config.k, rng);

    CycleRecord rec;
    rec.prefix_len_before = static_cast<int>(trace.output.size());
    rec.k = config.k;
    rec.accepted.assign(static_cast<std::size_t>(config.k), false);

    for (int i = 0; i < config.k; ++i) {
      const Dist p = target_next_dist(target, trace.output, config.temperature);
      const auto [token, accepted] =
          verify_position(p, proposal.dists[static_cast<std::size_t>(i)],
                          proposal.tokens[static_cast<std::size_t>(i)], rng);

      trace.output.push_back(static_cast<TokenId>(token));
      rec.emitted.push_back(static_cast<TokenId>(token));
      rec.accepted[static_cast<std::size_t>(i)] = accepted;
      if (!accepted) {
        rec.resample_positions.push_back(i + 1);
      }
      ++emitted_total;

      if (token == target.vocab.eos_id) {
        rec.ended_with_eos = true;
        done = true;
        break;
      }
      if (emitted_total >= config.max_new) {
        rec.truncated = i + 1 < config.k;
        done = true;
        break;
      }
    }
    trace.cycles.push_back(std::move(rec));
  }
  return trace;
}

TokenSeq decode_baseline_ar(const TargetParams& target, const TokenSeq& prompt,
                            int max_new, std::uint64_t seed,
                            std::uint64_t stream, double temperature) {
  target.validate();
  if (contains_eos(prompt, target.vocab) ||
      !token_seq_valid(prompt, target.vocab)) {
    throw std::invalid_argument("decode_baseline_ar: prompt must not contain EOS");
  }

  RngStream rng(seed, stream);
  TokenSeq out = prompt;
  for (int i = 0; i < max_new; ++i) {
    const Dist p = target_next_dist(target, out, temperature);
    const TokenId tok = static_cast<TokenId>(sample_categorical(p, rng));
    out.push_back(tok);
    if (tok == target.vocab.eos_id) {
      break;
    }
  }
  return out;
}

}  // namespace deer
