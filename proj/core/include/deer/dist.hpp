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

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "deer/rng.hpp"

namespace deer {

// Normalization tolerance for probability vectors. Everything downstream
// assumes distributions are exact to ~10 significant digits.
inline constexpr double kDistSumTolerance = 1e-9;

// Thrown when an operation requires support(p) to be contained in support(q)
// and it is not (e.g. a proposal assigning zero probability where the target
// is positive).
class SupportError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/**
 * Probability vector over the sampleable symbols of a vocabulary
 * (ordinary tokens plus EOS in the final slot). Non-negative entries summing
 * to 1 within kDistSumTolerance.
 */
struct Dist {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }

  bool is_valid() const {
    if (probs.empty()) return false;
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) return false;  // also rejects NaN
      sum += p;
    }
    return sum > 1.0 - kDistSumTolerance && sum < 1.0 + kDistSumTolerance;
  }

  void validate() const {
    if (!is_valid()) {
      throw std::invalid_argument("Dist: entries must be non-negative and sum to 1");
    }
  }

  static Dist from_probs(std::vector<double> probs) {
    Dist d{std::move(probs)};
    d.validate();
    return d;
  }
};

/**
 * Tempered softmax. temperature > 0 divides the logits before normalizing;
 * temperature == 0 degenerates to a one-hot on the argmax (lowest index wins
 * ties, keeping traces bit-reproducible).
 */
Dist softmax(std::span<const double> logits, double temperature = 1.0);

/**
 * Inverse-CDF categorical draw over ascending index order: returns i with
 * probability d.probs[i]. Deterministic given the rng state.
 * Throws std::invalid_argument if d violates the Dist invariants.
 */
int sample_categorical(const Dist& d, RngStream& rng);

// Total variation distance (1/2)*sum|a-b| between two distributions over the
// same support. Throws on mismatched sizes.
double tv_distance(const Dist& a, const Dist& b);

// KL(p || q) = sum_x p(x) log(p(x)/q(x)), with 0*log(0/.) = 0.
// Throws SupportError when p(x) > 0 but q(x) = 0.
double kl_divergence(const Dist& p, const Dist& q);

}  // namespace deer
