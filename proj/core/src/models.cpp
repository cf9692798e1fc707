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

#include "deer/models.hpp"

#include <cmath>
#include <stdexcept>

namespace deer {

namespace {

void validate_row(const LogitRow& row, std::size_t expected, const char* what) {
  if (row.size() != expected) {
    throw std::invalid_argument(std::string(what) + ": logit row has wrong dimension");
  }
  for (double l : row) {
    if (!std::isfinite(l)) {
      throw std::invalid_argument(std::string(what) + ": non-finite logit");
    }
  }
}

}  // namespace

Context context_window(const TokenSeq& prefix, int order) {
  if (order < 1) {
    throw std::invalid_argument("context_window: order must be >= 1");
  }
  Context ctx(static_cast<std::size_t>(order), kPadToken);
  const std::size_t n = prefix.size();
  const std::size_t take = std::min<std::size_t>(n, static_cast<std::size_t>(order));
  for (std::size_t i = 0; i < take; ++i) {
    ctx[order - 1 - i] = prefix[n - 1 - i];
  }
  return ctx;
}

const LogitRow& TargetParams::row(const Context& ctx) const {
  auto it = table.find(ctx);
  return it != table.end() ? it->second : default_logits;
}

void TargetParams::validate() const {
  vocab.validate();
  if (order < 1) {
    throw std::invalid_argument("TargetParams: order must be >= 1");
  }
  const auto expected = static_cast<std::size_t>(vocab.dist_size());
  validate_row(default_logits, expected, "TargetParams");
  for (const auto& [ctx, logits] : table) {
    if (ctx.size() != static_cast<std::size_t>(order)) {
      throw std::invalid_argument("TargetParams: context has wrong length");
    }
    validate_row(logits, expected, "TargetParams");
  }
}

const LogitRow& DrafterParams::row(const Context& ctx, int offset) const {
  if (offset < 1 || offset > max_offset) {
    throw std::invalid_argument("DrafterParams: offset out of range");
  }
  auto it = table.find(ctx);
  if (it == table.end()) {
    return default_logits;
  }
  return it->second[static_cast<std::size_t>(offset - 1)];
}

void DrafterParams::validate() const {
  vocab.validate();
  if (order < 1) {
    throw std::invalid_argument("DrafterParams: order must be >= 1");
  }
  if (max_offset < 1) {
    throw std::invalid_argument("DrafterParams: max_offset must be >= 1");
  }
  const auto expected = static_cast<std::size_t>(vocab.dist_size());
  validate_row(default_logits, expected, "DrafterParams");
  for (const auto& [ctx, rows] : table) {
    if (ctx.size() != static_cast<std::size_t>(order)) {
      throw std::invalid_argument("DrafterParams: context has wrong length");
    }
    if (rows.size() != static_cast<std::size_t>(max_offset)) {
      throw std::invalid_argument("DrafterParams: context is missing offset rows");
    }
    for (const auto& r : rows) {
      validate_row(r, expected, "DrafterParams");
    }
  }
}

DrafterParams DrafterParams::uniform_init(const Vocab& vocab, int order, int max_offset) {
  DrafterParams p;
  p.vocab = vocab;
  p.order = order;
  p.max_offset = max_offset;
  p.default_logits.assign(static_cast<std::size_t>(vocab.dist_size()), 0.0);
  p.validate();
  return p;
}

Dist target_next_dist(const TargetParams& params, const TokenSeq& prefix,
                      double temperature) {
  const Context ctx = context_window(prefix, params.order);
  return softmax(params.row(ctx), temperature);
}

BlockProposal draft_block_factorized(const DrafterParams& params,
                                     const TokenSeq& prefix, int k,
                                     RngStream& rng, double temperature) {
  if (k < 1 || k > params.max_offset) {
    throw std::invalid_argument("draft_block_factorized: k must be in [1, max_offset]");
  }
  const Context ctx = context_window(prefix, params.order);

  BlockProposal out;
  out.prefix_len = static_cast<int>(prefix.size());
  out.dists.reserve(static_cast<std::size_t>(k));
  out.tokens.reserve(static_cast<std::size_t>(k));
  for (int d = 1; d <= k; ++d) {
    out.dists.push_back(softmax(params.row(ctx, d), temperature));
  }
  for (int d = 0; d < k; ++d) {
    out.tokens.push_back(static_cast<TokenId>(sample_categorical(out.dists[d], rng)));
  }
  return out;
}

BlockProposal draft_block_sequential(const TargetParams& drafter,
                                     const TokenSeq& prefix, int k,
                                     RngStream& rng, double temperature) {
  if (k < 1) {
    throw std::invalid_argument("draft_block_sequential: k must be >= 1");
  }
  BlockProposal out;
  out.prefix_len = static_cast<int>(prefix.size());
  out.dists.reserve(static_cast<std::size_t>(k));
  out.tokens.reserve(static_cast<std::size_t>(k));

  TokenSeq grown = prefix;
  for (int d = 0; d < k; ++d) {
    Dist dist = target_next_dist(drafter, grown, temperature);
    const TokenId tok = static_cast<TokenId>(sample_categorical(dist, rng));
    out.dists.push_back(std::move(dist));
    out.tokens.push_back(tok);
    grown.push_back(tok);
  }
  return out;
}

}  // namespace deer
