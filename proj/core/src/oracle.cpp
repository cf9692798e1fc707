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

#include "deer/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "deer/parallel.hpp"

namespace deer {

double SeqLaw::total() const {
  double sum = 0.0;
  for (const auto& [seq, p] : prob) {
    sum += p;
  }
  return sum;
}

void SeqLaw::validate(double tol) const {
  for (const auto& [seq, p] : prob) {
    if (!(p >= 0.0)) {
      throw std::invalid_argument("SeqLaw: negative probability");
    }
  }
  if (std::abs(total() - 1.0) > tol) {
    throw std::invalid_argument("SeqLaw: probabilities do not sum to 1");
  }
}

double tv_distance(const SeqLaw& a, const SeqLaw& b) {
  double acc = 0.0;
  auto ia = a.prob.begin();
  auto ib = b.prob.begin();
  while (ia != a.prob.end() && ib != b.prob.end()) {
    if (ia->first < ib->first) {
      acc += ia->second;
      ++ia;
    } else if (ib->first < ia->first) {
      acc += ib->second;
      ++ib;
    } else {
      acc += std::abs(ia->second - ib->second);
      ++ia;
      ++ib;
    }
  }
  for (; ia != a.prob.end(); ++ia) acc += ia->second;
  for (; ib != b.prob.end(); ++ib) acc += ib->second;
  return 0.5 * acc;
}

Dist exact_onestep_output_dist(const Dist& p, const Dist& q) {
  p.validate();
  q.validate();
  if (p.size() != q.size()) {
    throw std::invalid_argument("exact_onestep_output_dist: support sizes differ");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.probs[i] > 0.0 && q.probs[i] == 0.0) {
      throw SupportError("exact_onestep_output_dist: support condition violated");
    }
  }

  std::vector<double> overlap(p.size());
  double gamma = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    overlap[i] = std::min(p.probs[i], q.probs[i]);
    gamma += overlap[i];
  }

  Dist out;
  out.probs.assign(p.size(), 0.0);
  if (gamma >= 1.0 - 1e-12) {
    // Pure-accept branch: the residual is never used.
    out.probs = p.probs;
    return out;
  }
  const Dist res = residual_dist(p, q);
  const double reject_mass = 1.0 - gamma;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.probs[i] = overlap[i] + reject_mass * res.probs[i];
  }
  return out;
}

namespace {

void enumerate_continuations(const TargetParams& target, double temperature,
                             TokenSeq& seq, double prob, int remaining,
                             SeqLaw& law) {
  if (remaining == 0) {
    law.prob[seq] += prob;
    return;
  }
  const Dist next = target_next_dist(target, seq, temperature);
  for (std::size_t tok = 0; tok < next.size(); ++tok) {
    const double p = next.probs[tok];
    if (p == 0.0) continue;
    seq.push_back(static_cast<TokenId>(tok));
    if (static_cast<TokenId>(tok) == target.vocab.eos_id) {
      law.prob[seq] += prob * p;  // EOS is absorbing
    } else {
      enumerate_continuations(target, temperature, seq, prob * p, remaining - 1, law);
    }
    seq.pop_back();
  }
}

}  // namespace

SeqLaw exact_joint_law_ar(const TargetParams& target, const TokenSeq& prompt,
                          int l_max, double temperature) {
  target.validate();
  if (l_max < 1) {
    throw std::invalid_argument("exact_joint_law_ar: l_max must be >= 1");
  }
  const double states = std::pow(static_cast<double>(target.vocab.dist_size()),
                                 static_cast<double>(l_max));
  if (states > 1e6) {
    throw std::runtime_error("exact_joint_law_ar: enumeration budget exceeded");
  }

  SeqLaw law;
  TokenSeq seq = prompt;
  enumerate_continuations(target, temperature, seq, 1.0, l_max, law);
  return law;
}

SeqLaw empirical_joint_law_deer(const TargetParams& target, const Proposer& drafter,
                                const TokenSeq& prompt, int k, int l_max,
                                std::int64_t n, std::uint64_t seed,
                                double temperature) {
  if (n < 1) {
    throw std::invalid_argument("empirical_joint_law_deer: n must be >= 1");
  }
  DecodeConfig config{k, l_max, temperature};

  auto chunk_fn = [&](std::int64_t begin, std::int64_t end, int) {
    std::map<TokenSeq, std::int64_t> counts;
    for (std::int64_t i = begin; i < end; ++i) {
      const DecodeTrace trace =
          decode(target, drafter, prompt, config, seed, static_cast<std::uint64_t>(i));
      ++counts[trace.output];
    }
    return counts;
  };
  const auto partials = parallel_map_chunks<std::map<TokenSeq, std::int64_t>>(n, chunk_fn);

  SeqLaw law;
  const double inv_n = 1.0 / static_cast<double>(n);
  std::map<TokenSeq, std::int64_t> merged;
  for (const auto& part : partials) {
    for (const auto& [seq, c] : part) {
      merged[seq] += c;
    }
  }
  for (const auto& [seq, c] : merged) {
    law.prob[seq] = static_cast<double>(c) * inv_n;
  }
  return law;
}

KlProfile kl_by_depth(const TargetParams& target, const Proposer& drafter,
                      std::span<const TokenSeq> prompts, int k, int max_new,
                      std::int64_t n_decodes, std::uint64_t seed,
                      double temperature) {
  if (prompts.empty()) {
    throw std::invalid_argument("kl_by_depth: prompt set is empty");
  }
  if (k < 1) {
    throw std::invalid_argument("kl_by_depth: k must be >= 1");
  }

  struct Accum {
    std::vector<double> sum;
    std::vector<double> sum_sq;
    std::vector<std::int64_t> count;
  };

  auto chunk_fn = [&](std::int64_t begin, std::int64_t end, int) {
    Accum acc;
    acc.sum.assign(static_cast<std::size_t>(k), 0.0);
    acc.sum_sq.assign(static_cast<std::size_t>(k), 0.0);
    acc.count.assign(static_cast<std::size_t>(k), 0);

    for (std::int64_t run = begin; run < end; ++run) {
      const TokenSeq& prompt = prompts[static_cast<std::size_t>(
          run % static_cast<std::int64_t>(prompts.size()))];
      RngStream rng(seed, static_cast<std::uint64_t>(run));

      // Mirrors the decode loop, additionally scoring each drafter
      // conditional against the target conditional at the corrected prefix.
      TokenSeq out = prompt;
      int emitted_total = 0;
      bool done = false;
      while (!done) {
        const BlockProposal proposal = drafter.propose(out, k, rng);
        for (int i = 0; i < k; ++i) {
          const Dist p = target_next_dist(target, out, temperature);
          const double kl = kl_divergence(p, proposal.dists[static_cast<std::size_t>(i)]);
          acc.sum[static_cast<std::size_t>(i)] += kl;
          acc.sum_sq[static_cast<std::size_t>(i)] += kl * kl;
          ++acc.count[static_cast<std::size_t>(i)];

          const auto [token, accepted] =
              verify_position(p, proposal.dists[static_cast<std::size_t>(i)],
                              proposal.tokens[static_cast<std::size_t>(i)], rng);
          out.push_back(static_cast<TokenId>(token));
          ++emitted_total;
          if (token == target.vocab.eos_id || emitted_total >= max_new) {
            done = true;
            break;
          }
        }
      }
    }
    return acc;
  };

  const auto partials = parallel_map_chunks<Accum>(n_decodes, chunk_fn);

  KlProfile profile;
  profile.mean.assign(static_cast<std::size_t>(k), 0.0);
  profile.stderr_.assign(static_cast<std::size_t>(k), 0.0);
  profile.count.assign(static_cast<std::size_t>(k), 0);

  std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
  std::vector<double> sum_sq(static_cast<std::size_t>(k), 0.0);
  for (const auto& part : partials) {
    if (part.sum.empty()) continue;
    for (int i = 0; i < k; ++i) {
      sum[static_cast<std::size_t>(i)] += part.sum[static_cast<std::size_t>(i)];
      sum_sq[static_cast<std::size_t>(i)] += part.sum_sq[static_cast<std::size_t>(i)];
      profile.count[static_cast<std::size_t>(i)] += part.count[static_cast<std::size_t>(i)];
    }
  }
  for (int i = 0; i < k; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const auto n = profile.count[idx];
    if (n > 0) {
      const double mean = sum[idx] / static_cast<double>(n);
      profile.mean[idx] = mean;
      if (n > 1) {
        const double var =
            std::max(0.0, sum_sq[idx] / static_cast<double>(n) - mean * mean);
        profile.stderr_[idx] = std::sqrt(var / static_cast<double>(n));
      }
    }
  }
  return profile;
}

}  // namespace deer
