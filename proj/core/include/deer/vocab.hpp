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
#include <stdexcept>
#include <vector>

namespace deer {

using TokenId = std::int32_t;

// Left-padding symbol for context windows shorter than the model order.
// Deliberately outside every vocabulary (ordinary ids are >= 0).
inline constexpr TokenId kPadToken = -1;

/**
 * Token alphabet: `size` ordinary tokens with ids 0..size-1 plus the three
 * special tokens. The canonical layout places EOS at id `size` so that a
 * probability vector of size+1 entries covers exactly the sampleable symbols
 * (ordinary tokens and EOS); MASK and SEP live above that range and are never
 * sampleable at decode time.
 */
struct Vocab {
  std::int32_t size = 0;
  TokenId mask_id = 0;
  TokenId sep_id = 0;
  TokenId eos_id = 0;

  static Vocab of_size(std::int32_t n_ordinary) {
    Vocab v;
    v.size = n_ordinary;
    v.eos_id = n_ordinary;
    v.mask_id = n_ordinary + 1;
    v.sep_id = n_ordinary + 2;
    v.validate();
    return v;
  }

  // Number of sampleable symbols (ordinary tokens + EOS).
  std::int32_t dist_size() const { return size + 1; }

  bool is_ordinary(TokenId t) const { return t >= 0 && t < size; }
  bool is_sampleable(TokenId t) const { return is_ordinary(t) || t == eos_id; }

  void validate() const {
    if (size < 2) {
      throw std::invalid_argument("Vocab: size must be >= 2");
    }
    if (mask_id < size || sep_id < size || eos_id < size) {
      throw std::invalid_argument("Vocab: special token ids must not collide with ordinary tokens");
    }
    if (mask_id == sep_id || mask_id == eos_id || sep_id == eos_id) {
      throw std::invalid_argument("Vocab: special token ids must be pairwise distinct");
    }
  }
};

using TokenSeq = std::vector<TokenId>;

// At most one EOS, and only as the final element.
inline bool token_seq_valid(const TokenSeq& seq, const Vocab& vocab) {
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq[i] == vocab.eos_id && i + 1 != seq.size()) {
      return false;
    }
  }
  return true;
}

inline bool contains_eos(const TokenSeq& seq, const Vocab& vocab) {
  return !seq.empty() && seq.back() == vocab.eos_id;
}

}  // namespace deer
