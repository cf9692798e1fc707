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

#include <benchmark/benchmark.h>

#include "deer/engine.hpp"
#include "deer/experiments.hpp"
#include "deer/training.hpp"

using namespace deer;

namespace {

const TargetParams& bench_target() {
  static const TargetParams target =
      make_near_deterministic_target(6, 1, 6.0, 0.8, -2.0, 101);
  return target;
}

const DrafterParams& bench_drafter() {
  // Offset rows copy the target conditionals: high-acceptance regime.
  static const DrafterParams drafter = [] {
    DrafterParams d = DrafterParams::uniform_init(bench_target().vocab, 1, 8);
    for (const auto& [ctx, row] : bench_target().table) {
      d.table.emplace(ctx, std::vector<LogitRow>(8, row));
    }
    d.default_logits = bench_target().default_logits;
    return d;
  }();
  return drafter;
}

void BM_SampleCategorical(benchmark::State& state) {
  const Dist d = softmax(bench_target().default_logits);
  RngStream rng(1, 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_categorical(d, rng));
  }
  state.SetItemsProcessed(state.iterations());
}

void BM_VerifyPositionAccept(benchmark::State& state) {
  const Dist p = softmax(bench_target().table.begin()->second);
  RngStream rng(2, 0);
  for (auto _ : state) {
    const int draft = sample_categorical(p, rng);
    benchmark::DoNotOptimize(verify_position(p, p, draft, rng));
  }
  state.SetItemsProcessed(state.iterations());
}

void BM_VerifyPositionReject(benchmark::State& state) {
  const Dist p = softmax(bench_target().table.begin()->second);
  const Dist q = softmax(std::vector<double>(p.size(), 0.0));  // uniform proposal
  RngStream rng(3, 0);
  for (auto _ : state) {
    const int draft = sample_categorical(q, rng);
    benchmark::DoNotOptimize(verify_position(p, q, draft, rng));
  }
  state.SetItemsProcessed(state.iterations());
}

void BM_Decode(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const FactorizedProposer proposer(bench_drafter());
  std::uint64_t stream = 0;
  std::int64_t tokens = 0;
  for (auto _ : state) {
    const DecodeTrace trace =
        decode(bench_target(), proposer, {0}, {k, 24, 1.0}, 5, stream++);
    tokens += static_cast<std::int64_t>(trace.output.size()) - 1;
    benchmark::DoNotOptimize(trace);
  }
  state.SetItemsProcessed(tokens);
}

void BM_DecodeBaselineAr(benchmark::State& state) {
  std::uint64_t stream = 0;
  std::int64_t tokens = 0;
  for (auto _ : state) {
    const TokenSeq out = decode_baseline_ar(bench_target(), {0}, 24, 6, stream++);
    tokens += static_cast<std::int64_t>(out.size()) - 1;
    benchmark::DoNotOptimize(out);
  }
  state.SetItemsProcessed(tokens);
}

void BM_Stage1LossAndGradient(benchmark::State& state) {
  RngStream corpus_rng(7, 0);
  const auto corpus = synthesize_teacher_corpus(bench_target(), 64, 24, corpus_rng);
  RngStream rng(8, 0);
  std::size_t i = 0;
  for (auto _ : state) {
    const TokenSeq& answer = corpus[i++ % corpus.size()];
    if (answer.size() < 2) continue;
    const TrainingExample ex =
        make_stage1_example(answer, bench_target().vocab, rng, TMode::one, 8);
    benchmark::DoNotOptimize(stage1_loss(bench_drafter(), ex));
    benchmark::DoNotOptimize(loss_gradient(bench_drafter(), ex));
  }
  state.SetItemsProcessed(state.iterations());
}

}  // namespace

BENCHMARK(BM_SampleCategorical);
BENCHMARK(BM_VerifyPositionAccept);
BENCHMARK(BM_VerifyPositionReject);
BENCHMARK(BM_Decode)->Arg(1)->Arg(4)->Arg(8);
BENCHMARK(BM_DecodeBaselineAr);
BENCHMARK(BM_Stage1LossAndGradient);
BENCHMARK_MAIN();
