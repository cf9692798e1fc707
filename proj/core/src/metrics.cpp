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

#include "deer/metrics.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

namespace deer {

MetricsReport compute_metrics(std::span<const DecodeTrace> traces,
                              int long_threshold, double drafter_cost) {
  if (traces.empty()) {
    throw std::invalid_argument("compute_metrics: no traces");
  }
  MetricsReport r;
  r.long_threshold = long_threshold;
  r.drafter_cost = drafter_cost;
  r.n_traces = static_cast<std::int64_t>(traces.size());

  std::int64_t long_cycles = 0;
  for (const DecodeTrace& trace : traces) {
    for (const CycleRecord& cycle : trace.cycles) {
      const int accepted = cycle.accepted_count();
      const auto emitted = static_cast<int>(cycle.emitted.size());
      if (emitted < 1 || emitted > cycle.k) {
        throw std::invalid_argument("compute_metrics: cycle emitted count out of range");
      }

      ++r.n_cycles;
      r.total_emitted += emitted;
      r.total_accepted += accepted;
      ++r.accept_len_hist[accepted];
      if (accepted >= long_threshold) ++long_cycles;
      if (cycle.truncated) {
        ++r.n_truncated_cycles;
      } else {
        r.max_accepted = std::max(r.max_accepted, accepted);
      }

      // One scoring pass per cycle, plus one per rejection that still has
      // verified positions after it.
      std::int64_t extra = 0;
      for (int pos : cycle.resample_positions) {
        if (pos < emitted) ++extra;
      }
      r.verifier_calls += 1 + extra;
      ++r.drafter_calls;
    }
  }

  r.tau = static_cast<double>(r.total_accepted) / static_cast<double>(r.n_cycles);
  r.speedup_proxy = static_cast<double>(r.total_emitted) /
                    (static_cast<double>(r.verifier_calls) +
                     drafter_cost * static_cast<double>(r.drafter_calls));
  r.long_block_fraction =
      static_cast<double>(long_cycles) / static_cast<double>(r.n_cycles);
  return r;
}

std::string metrics_to_json(const MetricsReport& report) {
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["tau"] = report.tau;
  doc["speedup_proxy"] = report.speedup_proxy;
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& [len, count] : report.accept_len_hist) {
    hist.push_back({len, count});
  }
  doc["accept_len_hist"] = std::move(hist);
  doc["max_accepted"] = report.max_accepted;
  doc["long_block_fraction"] = report.long_block_fraction;
  doc["n_traces"] = report.n_traces;
  doc["n_cycles"] = report.n_cycles;
  doc["n_truncated_cycles"] = report.n_truncated_cycles;
  doc["total_emitted"] = report.total_emitted;
  doc["total_accepted"] = report.total_accepted;
  doc["verifier_calls"] = report.verifier_calls;
  doc["drafter_calls"] = report.drafter_calls;
  doc["long_threshold"] = report.long_threshold;
  doc["drafter_cost"] = report.drafter_cost;
  return doc.dump(2) + "\n";
}

MetricsReport metrics_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("metrics: malformed JSON: ") + e.what());
  }
  MetricsReport r;
  try {
    r.tau = doc.at("tau").get<double>();
    r.speedup_proxy = doc.at("speedup_proxy").get<double>();
    for (const auto& pair : doc.at("accept_len_hist")) {
      r.accept_len_hist[pair.at(0).get<int>()] = pair.at(1).get<std::int64_t>();
    }
    r.max_accepted = doc.at("max_accepted").get<int>();
    r.long_block_fraction = doc.at("long_block_fraction").get<double>();
    r.n_traces = doc.at("n_traces").get<std::int64_t>();
    r.n_cycles = doc.at("n_cycles").get<std::int64_t>();
    r.n_truncated_cycles = doc.at("n_truncated_cycles").get<std::int64_t>();
    r.total_emitted = doc.at("total_emitted").get<std::int64_t>();
    r.total_accepted = doc.at("total_accepted").get<std::int64_t>();
    r.verifier_calls = doc.at("verifier_calls").get<std::int64_t>();
    r.drafter_calls = doc.at("drafter_calls").get<std::int64_t>();
    r.long_threshold = doc.at("long_threshold").get<int>();
    r.drafter_cost = doc.at("drafter_cost").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("metrics: missing field: ") + e.what());
  }
  return r;
}

}  // namespace deer
