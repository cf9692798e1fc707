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

#include "deer/experiments.hpp"
#include "deer/model_io.hpp"
#include "deer/models.hpp"

using namespace deer;

namespace {

TargetParams tiny_target() {
  return make_random_target(4, 2, 1.5, -0.5, 31);
}

DrafterParams tiny_drafter() {
  DrafterParams d = DrafterParams::uniform_init(Vocab::of_size(4), 2, 4);
  RngStream rng(5, 0);
  const Context ctx = {kPadToken, 0};
  std::vector<LogitRow> rows;
  for (int off = 0; off < 4; ++off) {
    LogitRow row(5);
    for (double& l : row) l = 2.0 * rng.next_uniform() - 1.0;
    rows.push_back(std::move(row));
  }
  d.table.emplace(ctx, std::move(rows));
  d.validate();
  return d;
}

}  // namespace

TEST_CASE("Vocab layout and validation") {
  const Vocab v = Vocab::of_size(6);
  CHECK(v.eos_id == 6);
  CHECK(v.mask_id == 7);
  CHECK(v.sep_id == 8);
  CHECK(v.dist_size() == 7);
  CHECK_THROWS_AS(Vocab::of_size(1), std::invalid_argument);

  Vocab bad = v;
  bad.mask_id = 3;  // collides with an ordinary token
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  CHECK(token_seq_valid({0, 1, 2, v.eos_id}, v));
  CHECK_FALSE(token_seq_valid({0, v.eos_id, 2}, v));
}

TEST_CASE("context_window left-pads short prefixes") {
  CHECK(context_window({}, 3) == Context{kPadToken, kPadToken, kPadToken});
  CHECK(context_window({7}, 3) == Context{kPadToken, kPadToken, 7});
  CHECK(context_window({1, 2, 3, 4}, 3) == Context{2, 3, 4});
}

TEST_CASE("target_next_dist") {
  SUBCASE("equal logits give uniform over ordinary tokens and EOS") {
    TargetParams params;
    params.vocab = Vocab::of_size(4);
    params.order = 1;
    params.default_logits.assign(5, 1.7);
    params.validate();
    const Dist d = target_next_dist(params, {0, 1});
    for (double p : d.probs) {
      CHECK(p == doctest::Approx(0.2).epsilon(1e-12));
    }
  }
  SUBCASE("softmax closed form") {
    TargetParams params;
    params.vocab = Vocab::of_size(4);
    params.order = 1;
    params.default_logits = {std::log(2.0), 0, 0, 0, 0};
    const Dist d = target_next_dist(params, {});
    CHECK(d.probs[0] == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
    CHECK(d.probs[4] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  }
  SUBCASE("prefixes sharing the last m tokens get identical dists") {
    const TargetParams params = tiny_target();
    const Dist a = target_next_dist(params, {3, 0, 1, 2});
    const Dist b = target_next_dist(params, {0, 2, 3, 1, 2});
    CHECK(a.probs == b.probs);
  }
}

TEST_CASE("draft_block_factorized") {
  const DrafterParams drafter = tiny_drafter();
  const TokenSeq prefix = {0};

  SUBCASE("k out of range is rejected") {
    RngStream rng(1, 0);
    CHECK_THROWS_AS(draft_block_factorized(drafter, prefix, 5, rng), std::invalid_argument);
    CHECK_THROWS_AS(draft_block_factorized(drafter, prefix, 0, rng), std::invalid_argument);
  }
  SUBCASE("a different rng changes tokens but never dists") {
    RngStream r1(1, 0);
    RngStream r2(999, 3);
    const BlockProposal a = draft_block_factorized(drafter, prefix, 4, r1);
    const BlockProposal b = draft_block_factorized(drafter, prefix, 4, r2);
    REQUIRE(a.dists.size() == 4);
    for (int d = 0; d < 4; ++d) {
      CHECK(a.dists[static_cast<std::size_t>(d)].probs ==
            b.dists[static_cast<std::size_t>(d)].probs);
    }
    CHECK(a.prefix_len == 1);
  }
  SUBCASE("dists are a pure function of (params, window, offset)") {
    // Same last-m window reached through different prefixes.
    RngStream r1(1, 0);
    const BlockProposal a = draft_block_factorized(drafter, {3, 2, 0}, 3, r1);
    RngStream r2(2, 0);
    const BlockProposal b = draft_block_factorized(drafter, {1, 2, 0}, 3, r2);
    for (int d = 0; d < 3; ++d) {
      CHECK(a.dists[static_cast<std::size_t>(d)].probs ==
            b.dists[static_cast<std::size_t>(d)].probs);
    }
  }
  SUBCASE("support condition: proposal probabilities are strictly positive") {
    RngStream rng(8, 0);
    const BlockProposal p = draft_block_factorized(tiny_drafter(), {2, 1}, 4, rng);
    for (const Dist& d : p.dists) {
      for (double x : d.probs) {
        CHECK(x > 0.0);
      }
    }
  }
  SUBCASE("tokens are samples from the per-offset dists") {
    RngStream rng(33, 0);
    const BlockProposal p = draft_block_factorized(drafter, prefix, 4, rng);
    for (std::size_t d = 0; d < 4; ++d) {
      CHECK(p.tokens[d] >= 0);
      CHECK(p.tokens[d] < static_cast<TokenId>(p.dists[d].size()));
    }
  }
}

TEST_CASE("draft_block_sequential") {
  const TargetParams target = tiny_target();

  SUBCASE("k = 1 matches the factorized law when the rows match") {
    // A drafter whose offset-1 row equals the target row proposes the same
    // depth-1 conditional.
    DrafterParams drafter = DrafterParams::uniform_init(target.vocab, target.order, 1);
    drafter.default_logits = target.default_logits;
    for (const auto& [ctx, row] : target.table) {
      drafter.table.emplace(ctx, std::vector<LogitRow>{row});
    }
    RngStream r1(5, 1);
    RngStream r2(5, 1);
    const BlockProposal seq = draft_block_sequential(target, {1, 2}, 1, r1);
    const BlockProposal fac = draft_block_factorized(drafter, {1, 2}, 1, r2);
    CHECK(seq.dists[0].probs == fac.dists[0].probs);
    CHECK(seq.tokens[0] == fac.tokens[0]);
  }
  SUBCASE("a one-hot drafter drafts its greedy path") {
    TargetParams det;
    det.vocab = Vocab::of_size(3);
    det.order = 1;
    det.default_logits = {50.0, 0.0, 0.0, 0.0};  // always token 0
    LogitRow after0 = {0.0, 50.0, 0.0, 0.0};     // after 0 comes 1
    det.table.emplace(Context{0}, after0);
    RngStream rng(3, 0);
    const BlockProposal p = draft_block_sequential(det, {}, 3, rng);
    CHECK(p.tokens == TokenSeq{0, 1, 0});
  }
  SUBCASE("an exact copy reproduces target_next_dist along its own path") {
    RngStream rng(17, 2);
    const TokenSeq prefix = {2, 0};
    const BlockProposal p = draft_block_sequential(target, prefix, 4, rng);
    TokenSeq grown = prefix;
    for (std::size_t d = 0; d < 4; ++d) {
      CHECK(p.dists[d].probs == target_next_dist(target, grown).probs);
      grown.push_back(p.tokens[d]);
    }
  }
}

TEST_CASE("model serialization") {
  SUBCASE("round-trip is the identity, bit-exact on logits") {
    const TargetParams target = tiny_target();
    const TargetParams back = deserialize_target(serialize_model(target));
    CHECK(back.order == target.order);
    CHECK(back.vocab.size == target.vocab.size);
    CHECK(back.default_logits == target.default_logits);
    CHECK(back.table == target.table);
    CHECK(model_hash(back) == model_hash(target));

    const DrafterParams drafter = tiny_drafter();
    const DrafterParams dback = deserialize_drafter(serialize_model(drafter));
    CHECK(dback.max_offset == drafter.max_offset);
    CHECK(dback.table == drafter.table);
  }
  SUBCASE("dimension mismatch is rejected") {
    const TargetParams target = tiny_target();
    std::string text = serialize_model(target);
    // Claim a smaller vocabulary than the rows carry.
    const auto pos = text.find("\"vocab_size\": 4");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 15, "\"vocab_size\": 3");
    CHECK_THROWS_AS(deserialize_target(text), std::runtime_error);
  }
  SUBCASE("empty table is a valid model using only the default row") {
    TargetParams params;
    params.vocab = Vocab::of_size(2);
    params.order = 1;
    params.default_logits = {0.1, 0.2, 0.3};
    const TargetParams back = deserialize_target(serialize_model(params));
    CHECK(back.table.empty());
    CHECK(back.default_logits == params.default_logits);
  }
  SUBCASE("malformed input and wrong kinds are rejected") {
    CHECK_THROWS_AS(deserialize_target("{ not json"), std::runtime_error);
    CHECK_THROWS_AS(deserialize_target("{}"), std::runtime_error);
    CHECK_THROWS_AS(deserialize_drafter(serialize_model(tiny_target())), std::runtime_error);
  }
  SUBCASE("non-finite logits are rejected") {
    const std::string text =
        "{\"kind\":\"target\",\"vocab_size\":2,\"order\":1,"
        "\"rows\":[],\"default_logits\":[1.0,2.0,1e999]}";
    CHECK_THROWS_AS(deserialize_target(text), std::runtime_error);
  }
}
