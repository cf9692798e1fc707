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

#include <doctest.h>

#include <cmath>

#include "deer/engine.hpp"
#include "deer/experiments.hpp"
#include "deer/oracle.hpp"

using namespace deer;

namespace {

Dist random_dist(int n, RngStream& rng) {
  std::vector<double> p(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (double& x : p) {
    x = -std::log(1.0 - rng.next_uniform());
    sum += x;
  }
  for (double& x : p) x /= sum;
  return Dist::from_probs(std::move(p));
}

// Unigram target with no EOS mass: exact blocks, termination by max_new only.
TargetParams unigram_no_eos(int vocab_size, std::uint64_t seed) {
  TargetParams t;
  t.vocab = Vocab::of_size(vocab_size);
  t.order = 1;
  RngStream rng(seed, 0);
  t.default_logits.assign(static_cast<std::size_t>(t.vocab.dist_size()), 0.0);
  for (int i = 0; i < vocab_size; ++i) {
    t.default_logits[static_cast<std::size_t>(i)] = 2.0 * rng.next_uniform() - 1.0;
  }
  t.default_logits[static_cast<std::size_t>(t.vocab.eos_id)] = -1e9;
  return t;
}

// Drafter whose every (context, offset) row equals the target's unigram row.
DrafterParams per_offset_copy(const TargetParams& target, int max_offset) {
  DrafterParams d;
  d.vocab = target.vocab;
  d.order = target.order;
  d.max_offset = max_offset;
  d.default_logits = target.default_logits;
  return d;
}

}  // namespace

TEST_CASE("accept_prob") {
  CHECK(accept_prob(0.3, 0.3) == 1.0);
  CHECK(accept_prob(0.2, 0.5) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(accept_prob(0.9, 0.1) == 1.0);
  CHECK_THROWS_AS(accept_prob(0.5, 0.0), SupportError);
  CHECK_THROWS_AS(accept_prob(-0.1, 0.5), std::invalid_argument);
}

TEST_CASE("residual_dist") {
  SUBCASE("hand case: p=(0.7,0.3), q=(0.4,0.6) gives gamma=0.7, residual=(1,0)") {
    const Dist r = residual_dist(Dist::from_probs({0.7, 0.3}),
                                 Dist::from_probs({0.4, 0.6}));
    CHECK(r.probs[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.probs[1] == 0.0);
  }
  SUBCASE("p = q is the never-used branch and signals a logic error") {
    const Dist p = Dist::from_probs({0.25, 0.75});
    CHECK_THROWS_AS(residual_dist(p, p), std::logic_error);
  }
  SUBCASE("near-disjoint supports: residual approaches one-hot") {
    const double eps = 1e-6;
    const Dist p = Dist::from_probs({1.0, 0.0, 0.0});
    const Dist q = Dist::from_probs({eps, (1.0 - eps) / 2.0, (1.0 - eps) / 2.0});
    const Dist r = residual_dist(p, q);
    CHECK(std::abs(r.probs[0] - 1.0) < 1e-5);
    CHECK(r.probs[1] == 0.0);
    CHECK(r.probs[2] == 0.0);
  }
  SUBCASE("valid, non-negative, zero where q >= p, on random pairs") {
    RngStream rng(61, 0);
    for (int trial = 0; trial < 500; ++trial) {
      const Dist p = random_dist(6, rng);
      const Dist q = random_dist(6, rng);
      const Dist r = residual_dist(p, q);
      double sum = 0.0;
      for (std::size_t i = 0; i < r.size(); ++i) {
        CHECK(r.probs[i] >= 0.0);
        if (q.probs[i] >= p.probs[i]) {
          CHECK(r.probs[i] == 0.0);
        }
        sum += r.probs[i];
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("verify_position") {
  SUBCASE("p equal to the proposal always accepts") {
    const Dist p = Dist::from_probs({0.2, 0.5, 0.3});
    RngStream rng(3, 0);
    for (int i = 0; i < 200; ++i) {
      const auto [tok, accepted] = verify_position(p, p, 1, rng);
      CHECK(accepted);
      CHECK(tok == 1);
    }
  }
  SUBCASE("a draft with p(draft) = 0 is always rejected and resampled from the residual") {
    // q concentrates on token 0 where p has no mass.
    const Dist p = Dist::from_probs({0.0, 0.6, 0.4});
    const Dist q = Dist::from_probs({0.98, 0.01, 0.01});
    RngStream rng(4, 0);
    int counts[3] = {0, 0, 0};
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const auto [tok, accepted] = verify_position(p, q, 0, rng);
      CHECK_FALSE(accepted);
      ++counts[tok];
    }
    CHECK(counts[0] == 0);
    // Replacement law is the residual, which here equals p itself.
    CHECK(std::abs(static_cast<double>(counts[1]) / n - 0.6) < 0.005);
    CHECK(std::abs(static_cast<double>(counts[2]) / n - 0.4) < 0.005);
  }
  SUBCASE("empirical output law matches the analytic one-step oracle") {
    RngStream pair_rng(5, 0);
    for (int pair = 0; pair < 3; ++pair) {
      const Dist p = random_dist(3, pair_rng);
      const Dist q = random_dist(3, pair_rng);
      const Dist expected = exact_onestep_output_dist(p, q);

      RngStream rng(6, static_cast<std::uint64_t>(pair));
      const int n = 1000000;
      std::vector<double> freq(3, 0.0);
      for (int i = 0; i < n; ++i) {
        const int draft = sample_categorical(q, rng);
        freq[static_cast<std::size_t>(verify_position(p, q, draft, rng).token)] += 1.0;
      }
      for (double& f : freq) f /= n;
      CHECK(tv_distance(Dist{freq}, expected) < 0.003);
    }
  }
}

TEST_CASE("decode") {
  SUBCASE("per-offset copy of a unigram target accepts every token: tau = k") {
    const TargetParams target = unigram_no_eos(5, 71);
    const DrafterParams drafter = per_offset_copy(target, 4);
    const FactorizedProposer proposer(drafter);
    const DecodeTrace trace = decode(target, proposer, {0}, {4, 12, 1.0}, 9, 0);
    REQUIRE(trace.cycles.size() == 3);
    for (const CycleRecord& c : trace.cycles) {
      CHECK(c.accepted_count() == 4);
      CHECK(c.resample_positions.empty());
      CHECK_FALSE(c.truncated);
    }
    CHECK(trace.output.size() == 13);
  }
  SUBCASE("k = 1 degenerates to one-token speculation") {
    const TargetParams target = make_random_target(4, 1, 1.5, -0.7, 72);
    const DrafterParams drafter = DrafterParams::uniform_init(target.vocab, 1, 1);
    const FactorizedProposer proposer(drafter);
    const DecodeTrace trace = decode(target, proposer, {}, {1, 8, 1.0}, 10, 0);
    for (const CycleRecord& c : trace.cycles) {
      CHECK(c.emitted.size() == 1);
      CHECK(c.accepted_count() <= 1);
    }
  }
  SUBCASE("EOS inside a block stops the decode and discards the tail") {
    // Deterministic chain 0 -> 1 -> EOS.
    TargetParams target;
    target.vocab = Vocab::of_size(3);
    target.order = 1;
    target.default_logits = {1000.0, 0.0, 0.0, 0.0};
    target.table.emplace(Context{0}, LogitRow{0.0, 1000.0, 0.0, 0.0});
    target.table.emplace(Context{1}, LogitRow{0.0, 0.0, 0.0, 1000.0});
    const DrafterParams drafter = DrafterParams::uniform_init(target.vocab, 1, 8);
    const FactorizedProposer proposer(drafter);
    const DecodeTrace trace = decode(target, proposer, {}, {8, 50, 1.0}, 11, 0);
    REQUIRE(trace.cycles.size() == 1);
    const CycleRecord& c = trace.cycles[0];
    CHECK(c.ended_with_eos);
    CHECK(c.emitted == TokenSeq{0, 1, target.vocab.eos_id});
    CHECK_FALSE(c.truncated);
    CHECK(trace.output == TokenSeq{0, 1, target.vocab.eos_id});
  }
  SUBCASE("max_new reached mid-block truncates and marks the cycle") {
    const TargetParams target = unigram_no_eos(5, 73);
    const DrafterParams drafter = per_offset_copy(target, 4);
    const FactorizedProposer proposer(drafter);
    const DecodeTrace trace = decode(target, proposer, {}, {4, 5, 1.0}, 12, 0);
    REQUIRE(trace.cycles.size() == 2);
    CHECK_FALSE(trace.cycles[0].truncated);
    CHECK(trace.cycles[1].truncated);
    CHECK(trace.cycles[1].emitted.size() == 1);
    CHECK(trace.output.size() == 5);
  }
  SUBCASE("rejection does not terminate the block: accepts occur after rejects") {
    const TargetParams target = make_random_target(5, 1, 3.0, -3.0, 74);
    const DrafterParams drafter = DrafterParams::uniform_init(target.vocab, 1, 6);
    const FactorizedProposer proposer(drafter);
    bool saw_accept_after_reject = false;
    for (std::uint64_t stream = 0; stream < 20 && !saw_accept_after_reject; ++stream) {
      const DecodeTrace trace = decode(target, proposer, {1}, {6, 18, 1.0}, 13, stream);
      for (const CycleRecord& c : trace.cycles) {
        bool rejected_before = false;
        for (std::size_t i = 0; i < c.emitted.size(); ++i) {
          if (!c.accepted[i]) rejected_before = true;
          else if (rejected_before) saw_accept_after_reject = true;
        }
      }
    }
    CHECK(saw_accept_after_reject);
  }
  SUBCASE("same seed gives an identical trace; output equals prompt ++ emitted") {
    const TargetParams target = make_random_target(4, 2, 1.5, -1.0, 75);
    const DrafterParams drafter = DrafterParams::uniform_init(target.vocab, 2, 4);
    const FactorizedProposer proposer(drafter);
    const DecodeTrace a = decode(target, proposer, {2, 0}, {4, 16, 1.0}, 14, 3);
    const DecodeTrace b = decode(target, proposer, {2, 0}, {4, 16, 1.0}, 14, 3);
    CHECK(a.output == b.output);
    REQUIRE(a.cycles.size() == b.cycles.size());
    TokenSeq rebuilt = {2, 0};
    for (std::size_t i = 0; i < a.cycles.size(); ++i) {
      CHECK(a.cycles[i].emitted == b.cycles[i].emitted);
      CHECK(a.cycles[i].accepted == b.cycles[i].accepted);
      rebuilt.insert(rebuilt.end(), a.cycles[i].emitted.begin(), a.cycles[i].emitted.end());
    }
    CHECK(rebuilt == a.output);
  }
  SUBCASE("prompts containing EOS are rejected") {
    const TargetParams target = make_random_target(4, 1, 1.0, 0.0, 76);
    const DrafterParams drafter = DrafterParams::uniform_init(target.vocab, 1, 2);
    const FactorizedProposer proposer(drafter);
    CHECK_THROWS_AS(decode(target, proposer, {0, target.vocab.eos_id}, {2, 4, 1.0}, 1, 0),
                    std::invalid_argument);
  }
}

namespace {

// Factorized drafting with the intra-block sampling order reversed: dists are
// untouched, only which rng draw lands on which offset changes.
class ReversedOrderProposer final : public Proposer {
 public:
  ReversedOrderProposer(const DrafterParams& params) : params_(&params) {}
  BlockProposal propose(const TokenSeq& prefix, int k, RngStream& rng) const override {
    BlockProposal out;
    out.prefix_len = static_cast<int>(prefix.size());
    const Context ctx = context_window(prefix, params_->order);
    for (int d = 1; d <= k; ++d) {
      out.dists.push_back(softmax(params_->row(ctx, d)));
    }
    out.tokens.assign(static_cast<std::size_t>(k), 0);
    for (int d = k - 1; d >= 0; --d) {
      out.tokens[static_cast<std::size_t>(d)] = static_cast<TokenId>(
          sample_categorical(out.dists[static_cast<std::size_t>(d)], rng));
    }
    return out;
  }
  const char* kind() const override { return "factorized"; }

 private:
  const DrafterParams* params_;
};

}  // namespace

TEST_CASE("permuting the intra-block sampling order leaves the output law unchanged") {
  const TargetParams target = make_random_target(3, 1, 1.2, -0.4, 77);
  DrafterParams drafter = DrafterParams::uniform_init(target.vocab, 1, 3);
  RngStream init_rng(78, 0);
  for (double& l : drafter.default_logits) {
    l = 2.0 * init_rng.next_uniform() - 1.0;
  }
  const FactorizedProposer forward(drafter);
  const ReversedOrderProposer reversed(drafter);

  const SeqLaw law_forward =
      empirical_joint_law_deer(target, forward, {}, 3, 3, 40000, 79);
  const SeqLaw law_reversed =
      empirical_joint_law_deer(target, reversed, {}, 3, 3, 40000, 80);
  CHECK(tv_distance(law_forward, law_reversed) < 0.03);
}

TEST_CASE("greedy verification at temperature zero") {
  // At T = 0 both sides are one-hot; a draft is accepted exactly when it
  // equals the target argmax, and a rejection resamples that argmax.
  TargetParams target;
  target.vocab = Vocab::of_size(3);
  target.order = 1;
  target.default_logits = {3.0, 1.0, 0.0, -1.0};                    // argmax 0
  target.table.emplace(Context{0}, LogitRow{0.0, 2.5, 1.0, -1.0});  // after 0: argmax 1

  TargetParams drafter_model = target;
  drafter_model.table[Context{0}] = {2.5, 0.0, 1.0, -1.0};  // disagrees after 0
  const SequentialProposer proposer(drafter_model, 0.0);

  const DecodeTrace trace = decode(target, proposer, {}, {2, 2, 0.0}, 21, 0);
  REQUIRE(trace.cycles.size() == 1);
  const CycleRecord& c = trace.cycles[0];
  CHECK(c.emitted == TokenSeq{0, 1});
  CHECK(c.accepted[0]);        // both argmax 0
  CHECK_FALSE(c.accepted[1]);  // drafter says 0, target says 1
}

TEST_CASE("decode_baseline_ar") {
  SUBCASE("a deterministic target yields its unique greedy path") {
    TargetParams det;
    det.vocab = Vocab::of_size(3);
    det.order = 1;
    det.default_logits = {1000.0, 0.0, 0.0, 0.0};
    det.table.emplace(Context{0}, LogitRow{0.0, 0.0, 1000.0, 0.0});
    det.table.emplace(Context{2}, LogitRow{0.0, 0.0, 0.0, 1000.0});
    const TokenSeq out = decode_baseline_ar(det, {}, 10, 5, 0);
    CHECK(out == TokenSeq{0, 2, det.vocab.eos_id});
  }
  SUBCASE("same seed, same sequence") {
    const TargetParams target = make_random_target(5, 1, 1.0, -0.5, 81);
    CHECK(decode_baseline_ar(target, {1}, 20, 6, 2) ==
          decode_baseline_ar(target, {1}, 20, 6, 2));
  }
  SUBCASE("next-token frequencies pass a chi-square test against the target") {
    const TargetParams target = make_random_target(4, 1, 1.2, -0.6, 82);
    const TokenSeq prompt = {2};
    const Dist expected = target_next_dist(target, prompt);
    const int n = 100000;
    std::vector<double> counts(expected.size(), 0.0);
    for (int i = 0; i < n; ++i) {
      const TokenSeq out =
          decode_baseline_ar(target, prompt, 1, 7, static_cast<std::uint64_t>(i));
      counts[static_cast<std::size_t>(out.back())] += 1.0;
    }
    double chi2 = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const double e = expected.probs[i] * n;
      chi2 += (counts[i] - e) * (counts[i] - e) / e;
    }
    // Upper 1e-4 quantile of chi-square with df = 4.
    CHECK(chi2 < 23.512742444991076);
  }
}
