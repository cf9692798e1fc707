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

#include "deer/dist.hpp"

#include <algorithm>
#include <cmath>

namespace deer {

Dist softmax(std::span<const double> logits, double temperature) {
  if (logits.empty()) {
    throw std::invalid_argument("softmax: empty logit vector");
  }
  if (!(temperature >= 0.0)) {
    throw std::invalid_argument("softmax: temperature must be >= 0");
  }
  for (double l : logits) {
    if (!std::isfinite(l)) {
      throw std::invalid_argument("softmax: non-finite logit");
    }
  }

  Dist d;
  d.probs.assign(logits.size(), 0.0);

  std::size_t arg_max = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[arg_max]) arg_max = i;
  }

  if (temperature == 0.0) {
    d.probs[arg_max] = 1.0;
    return d;
  }

  const double max_logit = logits[arg_max];
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double e = std::exp((logits[i] - max_logit) / temperature);
    d.probs[i] = e;
    sum += e;
  }
  for (double& p : d.probs) {
    p /= sum;
  }
  return d;
}

int sample_categorical(const Dist& d, RngStream& rng) {
  d.validate();
  const double u = rng.next_uniform();
  double cum = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < d.probs.size(); ++i) {
    if (d.probs[i] > 0.0) last_positive = static_cast<int>(i);
    cum += d.probs[i];
    if (u < cum) {
      return static_cast<int>(i);
    }
  }
  // Rounding can leave cum marginally below 1; fall back to the last index
  // with positive mass.
  return last_positive;
}

double tv_distance(const Dist& a, const Dist& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("tv_distance: support sizes differ");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += std::abs(a.probs[i] - b.probs[i]);
  }
  return 0.5 * acc;
}

double kl_divergence(const Dist& p, const Dist& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("kl_divergence: support sizes differ");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p.probs[i];
    if (pi == 0.0) continue;
    const double qi = q.probs[i];
    if (qi == 0.0) {
      throw SupportError("kl_divergence: q assigns zero probability inside support(p)");
    }
    acc += pi * std::log(pi / qi);
  }
  // Tiny negative values can appear from rounding when p ~ q.
  return acc < 0.0 && acc > -1e-15 ? 0.0 : acc;
}

}  // namespace deer
