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

#include <string>

#include "deer/models.hpp"

namespace deer {

// Canonical JSON document for a model. Keys are emitted in sorted order and
// doubles round-trip bit-exactly, so equal params serialize to equal bytes.
std::string serialize_model(const TargetParams& params);
std::string serialize_model(const DrafterParams& params);

// Parse a model document. Throws std::runtime_error on malformed input,
// dimension mismatches, non-finite logits, or a "kind" that does not match.
TargetParams deserialize_target(const std::string& text);
DrafterParams deserialize_drafter(const std::string& text);

void save_model(const TargetParams& params, const std::string& path);
void save_model(const DrafterParams& params, const std::string& path);
TargetParams load_target(const std::string& path);
DrafterParams load_drafter(const std::string& path);

// FNV-1a over the canonical serialization, as a 16-hex-digit string. Used to
// stamp trace headers and oracle reports with the exact model identity.
std::string model_hash(const TargetParams& params);
std::string model_hash(const DrafterParams& params);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace deer
