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

#include "deer/training.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "deer/engine.hpp"

namespace deer {

namespace {

// Shared traversal for losses and gradients over one masked position.
struct MaskedPosition {
  int offset = 1;       // 1-based distance past the boundary
  TokenId true_token = 0;
};

// Collects masked positions of a stage-1 example, validating its invariants.
std::vector<MaskedPosition> stage1_positions(const DrafterParams& drafter,
                                             const TrainingExample& ex) {
  const Vocab& vocab = drafter.vocab;
  const auto L = static_cast<int>(ex.full.size());
  if (ex.prefix_len < 1 || ex.prefix_len >= L) {
    throw std::invalid_argument("stage1: prefix_len out of range");
  }
  if (!(ex.t > 0.0 && ex.t <= 1.0)) {
    throw std::invalid_argument("stage1: t must lie in (0, 1]");
  }
  const int sep_shift = ex.sep_inserted ? 1 : 0;
  if (ex.noised.size() != ex.full.size() + static_cast<std::size_t>(sep_shift)) {
    throw std::invalid_argument("stage1: noised length mismatch");
  }
  if (ex.sep_inserted && ex.noised[static_cast<std::size_t>(ex.prefix_len)] != vocab.sep_id) {
    throw std::invalid_argument("stage1: SEP missing at the boundary");
  }
  std::vector<MaskedPosition> out;
  for (int p = 0; p < L; ++p) {
    const auto noised_idx = static_cast<std::size_t>(p + (p >= ex.prefix_len ? sep_shift : 0));
    const bool masked = ex.noised[noised_idx] == vocab.mask_id;
    if (masked && p < ex.prefix_len) {
      throw std::invalid_argument("stage1: masked position inside the prefix");
    }
    if (!masked) continue;
    const int offset = p - ex.prefix_len + 1;
    if (offset > drafter.max_offset) {
      throw std::invalid_argument(
          "stage1: masked position deeper than max_offset (r_max/k misconfiguration)");
    }
    out.push_back({offset, ex.full[static_cast<std::size_t>(p)]});
  }
  return out;
}

std::vector<MaskedPosition> stage2_positions(const DrafterParams& drafter,
                                             const RefineExample& ex) {
  const auto L = static_cast<int>(ex.full.size());
  if (ex.r < 1 || ex.r >= L) {
    throw std::invalid_argument("stage2: r out of range");
  }
  if (ex.r > drafter.max_offset) {
    throw std::invalid_argument(
        "stage2: r exceeds max_offset (r_max/k misconfiguration)");
  }
  if (ex.weights.size() != static_cast<std::size_t>(ex.r)) {
    throw std::invalid_argument("stage2: weight vector length mismatch");
  }
  if (ex.weights[static_cast<std::size_t>(ex.r - 1)] != 1.0) {
    throw std::invalid_argument("stage2: final weight must be 1");
  }
  const int boundary = L - ex.r;
  std::vector<MaskedPosition> out;
  out.reserve(static_cast<std::size_t>(ex.r));
  for (int i = 1; i <= ex.r; ++i) {
    out.push_back({i, ex.full[static_cast<std::size_t>(boundary + i - 1)]});
  }
  return out;
}

double neg_log_prob(const DrafterParams& drafter, const Context& ctx,
                    const MaskedPosition& pos) {
  const Dist d = softmax(drafter.row(ctx, pos.offset));
  if (pos.true_token < 0 || pos.true_token >= static_cast<TokenId>(d.size())) {
    throw std::invalid_argument("loss: true token is not a sampleable symbol");
  }
  return -std::log(d.probs[static_cast<std::size_t>(pos.true_token)]);
}

void add_ce_gradient(Gradient& grad, const DrafterParams& drafter,
                     const Context& ctx, const MaskedPosition& pos, double scale) {
  const Dist d = softmax(drafter.row(ctx, pos.offset));
  auto [it, inserted] = grad.try_emplace(RowKey{ctx, pos.offset});
  if (inserted) {
    it->second.assign(d.size(), 0.0);
  }
  for (std::size_t j = 0; j < d.size(); ++j) {
    it->second[j] += scale * d.probs[j];
  }
  it->second[static_cast<std::size_t>(pos.true_token)] -= scale;
}

}  // namespace

std::vector<TokenSeq> synthesize_teacher_corpus(const TargetParams& target,
                                                int n, int max_len,
                                                RngStream& rng) {
  target.validate();
  if (n < 1 || max_len < 1) {
    throw std::invalid_argument("synthesize_teacher_corpus: n and max_len must be >= 1");
  }
  std::vector<TokenSeq> corpus;
  corpus.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    TokenSeq seq;
    for (int j = 0; j < max_len; ++j) {
      const Dist d = target_next_dist(target, seq);
      const TokenId tok = static_cast<TokenId>(sample_categorical(d, rng));
      seq.push_back(tok);
      if (tok == target.vocab.eos_id) break;
    }
    corpus.push_back(std::move(seq));
  }
  return corpus;
}

TrainingExample make_stage1_example(const TokenSeq& answer, const Vocab& vocab,
                                    RngStream& rng, TMode t_mode, int max_suffix) {
  if (answer.size() < 2) {
    throw std::invalid_argument("make_stage1_example: answer must have at least 2 tokens");
  }
  const auto L = static_cast<int>(answer.size());
  const int l_q = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(L - 1)));
  const double t = t_mode == TMode::one ? 1.0 : rng.next_uniform_open_closed();

  TrainingExample ex;
  ex.prefix_len = l_q;
  ex.t = t;
  ex.sep_inserted = true;
  ex.full = answer;
  if (max_suffix > 0 && L - l_q > max_suffix) {
    ex.full.resize(static_cast<std::size_t>(l_q + max_suffix));
  }

  ex.noised.reserve(ex.full.size() + 1);
  ex.noised.assign(ex.full.begin(), ex.full.begin() + l_q);
  ex.noised.push_back(vocab.sep_id);
  for (std::size_t p = static_cast<std::size_t>(l_q); p < ex.full.size(); ++p) {
    const bool masked = t >= 1.0 || rng.next_uniform() < t;
    ex.noised.push_back(masked ? vocab.mask_id : ex.full[p]);
  }
  return ex;
}

std::vector<double> refine_weights(int r, double alpha) {
  if (r < 1) {
    throw std::invalid_argument("refine_weights: r must be >= 1");
  }
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("refine_weights: alpha must be > 0");
  }
  std::vector<double> w(static_cast<std::size_t>(r));
  w[static_cast<std::size_t>(r - 1)] = 1.0;
  for (int i = r - 2; i >= 0; --i) {
    w[static_cast<std::size_t>(i)] = alpha * w[static_cast<std::size_t>(i + 1)];
  }
  return w;
}

RefineExample make_refine_example(const TokenSeq& answer, int r_max,
                                  double alpha, RngStream& rng) {
  if (answer.size() < 2) {
    throw std::invalid_argument("make_refine_example: answer must have at least 2 tokens");
  }
  if (r_max < 1) {
    throw std::invalid_argument("make_refine_example: r_max must be >= 1");
  }
  const auto L = static_cast<int>(answer.size());
  const int bound = std::min(r_max, L - 1);
  const int r = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(bound)));
  return RefineExample{answer, r, refine_weights(r, alpha)};
}

double stage1_loss(const DrafterParams& drafter, const TrainingExample& ex) {
  const Context ctx = context_window(
      TokenSeq(ex.full.begin(), ex.full.begin() + ex.prefix_len), drafter.order);
  double loss = 0.0;
  for (const auto& pos : stage1_positions(drafter, ex)) {
    loss += neg_log_prob(drafter, ctx, pos);
  }
  return loss / ex.t;
}

double stage2_loss(const DrafterParams& drafter, const RefineExample& ex) {
  const auto positions = stage2_positions(drafter, ex);
  const int boundary = static_cast<int>(ex.full.size()) - ex.r;
  const Context ctx = context_window(
      TokenSeq(ex.full.begin(), ex.full.begin() + boundary), drafter.order);
  double loss = 0.0;
  for (const auto& pos : positions) {
    loss += ex.weights[static_cast<std::size_t>(pos.offset - 1)] *
            neg_log_prob(drafter, ctx, pos);
  }
  return loss;
}

Gradient loss_gradient(const DrafterParams& drafter, const TrainingExample& ex) {
  const Context ctx = context_window(
      TokenSeq(ex.full.begin(), ex.full.begin() + ex.prefix_len), drafter.order);
  Gradient grad;
  const double scale = 1.0 / ex.t;
  for (const auto& pos : stage1_positions(drafter, ex)) {
    add_ce_gradient(grad, drafter, ctx, pos, scale);
  }
  return grad;
}

Gradient loss_gradient(const DrafterParams& drafter, const RefineExample& ex) {
  const auto positions = stage2_positions(drafter, ex);
  const int boundary = static_cast<int>(ex.full.size()) - ex.r;
  const Context ctx = context_window(
      TokenSeq(ex.full.begin(), ex.full.begin() + boundary), drafter.order);
  Gradient grad;
  for (const auto& pos : positions) {
    add_ce_gradient(grad, drafter, ctx, pos,
                    ex.weights[static_cast<std::size_t>(pos.offset - 1)]);
  }
  return grad;
}

namespace {

void apply_update(DrafterParams& params, const Gradient& grad, double lr) {
  for (const auto& [key, g] : grad) {
    auto it = params.table.find(key.context);
    if (it == params.table.end()) {
      // Materialize the whole offset family from the default row so the
      // "all offsets present" invariant survives the update.
      it = params.table
               .emplace(key.context,
                        std::vector<LogitRow>(
                            static_cast<std::size_t>(params.max_offset),
                            params.default_logits))
               .first;
    }
    LogitRow& row = it->second[static_cast<std::size_t>(key.offset - 1)];
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] -= lr * g[j];
    }
  }
}

}  // namespace

TrainResult train(const DrafterParams& init,
                  std::span<const TokenSeq> corpus, const StageConfig& config) {
  init.validate();
  if (config.stage != 1 && config.stage != 2) {
    throw std::invalid_argument("train: stage must be 1 or 2");
  }
  if (config.epochs < 1) {
    throw std::invalid_argument("train: epochs must be >= 1");
  }
  if (config.stage == 2 && config.r_max < 1) {
    throw std::invalid_argument("train: r_max must be >= 1");
  }

  TrainResult result;
  result.params = init;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    RngStream rng(config.seed, static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    std::int64_t n_examples = 0;

    for (const TokenSeq& answer : corpus) {
      if (answer.size() < 2) {
        ++result.skipped_examples;
        continue;
      }
      double loss = 0.0;
      Gradient grad;
      if (config.stage == 1) {
        const TrainingExample ex = make_stage1_example(
            answer, result.params.vocab, rng, config.t_mode, result.params.max_offset);
        const auto positions = stage1_positions(result.params, ex);
        if (positions.empty()) {
          ++result.skipped_examples;  // nothing masked at small t
          continue;
        }
        loss = stage1_loss(result.params, ex);
        grad = loss_gradient(result.params, ex);
      } else {
        const RefineExample ex = make_refine_example(
            answer, std::min(config.r_max, result.params.max_offset), config.alpha, rng);
        loss = stage2_loss(result.params, ex);
        grad = loss_gradient(result.params, ex);
      }

      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << " after "
            << n_examples << " examples (alpha=" << config.alpha
            << ", lr=" << config.lr << ")";
        result.diverged = true;
        result.diagnostic = msg.str();
        return result;
      }

      loss_sum += loss;
      ++n_examples;
      apply_update(result.params, grad, config.lr);
    }

    result.epoch_mean_loss.push_back(
        n_examples > 0 ? loss_sum / static_cast<double>(n_examples) : 0.0);
  }
  return result;
}

namespace {

template <typename PerPosition>
double mean_over_positions(std::span<const TokenSeq> corpus, PerPosition fn) {
  double sum = 0.0;
  std::int64_t count = 0;
  TokenSeq prefix;
  for (const TokenSeq& seq : corpus) {
    for (std::size_t p = 1; p < seq.size(); ++p) {
      prefix.assign(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(p));
      sum += fn(prefix);
      ++count;
    }
  }
  if (count == 0) {
    throw std::invalid_argument("offset-1 evaluation: corpus has no scorable positions");
  }
  return sum / static_cast<double>(count);
}

}  // namespace

double mean_kl_offset1(const TargetParams& target, const DrafterParams& drafter,
                       std::span<const TokenSeq> corpus) {
  return mean_over_positions(corpus, [&](const TokenSeq& prefix) {
    const Dist p = target_next_dist(target, prefix);
    const Dist q = softmax(drafter.row(context_window(prefix, drafter.order), 1));
    return kl_divergence(p, q);
  });
}

double mean_ce_offset1(const TargetParams& target, const DrafterParams& drafter,
                       std::span<const TokenSeq> corpus) {
  return mean_over_positions(corpus, [&](const TokenSeq& prefix) {
    const Dist p = target_next_dist(target, prefix);
    const Dist q = softmax(drafter.row(context_window(prefix, drafter.order), 1));
    double ce = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p.probs[i] > 0.0) {
        ce -= p.probs[i] * std::log(q.probs[i]);
      }
    }
    return ce;
  });
}

}  // namespace deer
