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
#include <string>

#include "deer/engine.hpp"

namespace deer {

/**
 * Aggregate decoding metrics over a set of traces.
 *
 * tau is the mean number of accepted draft tokens per drafting-verification
 * cycle. The speedup proxy models cost as scoring passes: one verifier pass
 * per cycle plus one more for every rejection that occurs before the cycle's
 * last verified position (a rejection invalidates the teacher-forced scores
 * of the remaining positions), plus `drafter_cost` per block proposal.
 * Truncated cycles count toward tau and the histogram but are excluded from
 * max_accepted.
 */
struct MetricsReport {
  double tau = 0.0;
  double speedup_proxy = 0.0;
  std::map<int, std::int64_t> accept_len_hist;  // accepted count -> cycles
  int max_accepted = 0;
  double long_block_fraction = 0.0;

  std::int64_t n_traces = 0;
  std::int64_t n_cycles = 0;
  std::int64_t n_truncated_cycles = 0;
  std::int64_t total_emitted = 0;
  std::int64_t total_accepted = 0;
  std::int64_t verifier_calls = 0;
  std::int64_t drafter_calls = 0;
  int long_threshold = 8;
  double drafter_cost = 0.1;
};

MetricsReport compute_metrics(std::span<const DecodeTrace> traces,
                              int long_threshold = 8, double drafter_cost = 0.1);

// Canonical JSON round-trip for reports (schema_version header included).
std::string metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const std::string& text);

}  // namespace deer
