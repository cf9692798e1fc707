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

#include <span>
#include <string>
#include <vector>

#include "deer/engine.hpp"

namespace deer {

/**
 * JSONL trace format: per trace one header record (schema version, seed,
 * stream, k, temperature, drafter kind, model hashes, prompt), one record per
 * cycle, and one output record. Multiple traces may be concatenated in one
 * file; the reader splits on header records.
 */
std::string traces_to_jsonl(std::span<const DecodeTrace> traces,
                            const std::string& target_hash,
                            const std::string& drafter_hash);

std::vector<DecodeTrace> traces_from_jsonl(const std::string& text);

void save_traces(std::span<const DecodeTrace> traces, const std::string& path,
                 const std::string& target_hash, const std::string& drafter_hash);
std::vector<DecodeTrace> load_traces(const std::string& path);

}  // namespace deer
