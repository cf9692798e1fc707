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
#include <vector>

#include "deer/dist.hpp"
#include "deer/rng.hpp"

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

}  // namespace

TEST_CASE("Dist validation") {
  CHECK_NOTHROW(Dist::from_probs({0.5, 0.5}));
  CHECK_THROWS_AS(Dist::from_probs({0.6, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(Dist::from_probs({1.5, -0.5}), std::invalid_argument);
  CHECK_THROWS_AS(Dist::from_probs({}), std::invalid_argument);
}

TEST_CASE("softmax basics") {
  SUBCASE("equal logits give the uniform distribution") {
    const Dist d = softmax(std::vector<double>{0.3, 0.3, 0.3, 0.3, 0.3});
    for (double p : d.probs) {
      CHECK(p == doctest::Approx(0.2).epsilon(1e-12));
    }
  }
  SUBCASE("closed form for (ln 2, 0, 0, 0, 0)") {
    const Dist d = softmax(std::vector<double>{std::log(2.0), 0, 0, 0, 0});
    CHECK(d.probs[0] == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
    for (int i = 1; i < 5; ++i) {
      CHECK(d.probs[static_cast<std::size_t>(i)] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    }
  }
  SUBCASE("temperature zero is a one-hot argmax, lowest index on ties") {
    const Dist d = softmax(std::vector<double>{1.0, 3.0, 3.0, 0.0}, 0.0);
    CHECK(d.probs == std::vector<double>{0.0, 1.0, 0.0, 0.0});
  }
  SUBCASE("output is a valid Dist") {
    RngStream rng(4, 0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> logits(6);
      for (double& l : logits) l = 10.0 * (2.0 * rng.next_uniform() - 1.0);
      CHECK(softmax(logits).is_valid());
      CHECK(softmax(logits, 0.37).is_valid());
    }
  }
  SUBCASE("rejects non-finite logits and negative temperature") {
    CHECK_THROWS_AS(softmax(std::vector<double>{1.0, std::nan("")}), std::invalid_argument);
    CHECK_THROWS_AS(softmax(std::vector<double>{1.0, 2.0}, -1.0), std::invalid_argument);
  }
}

TEST_CASE("sample_categorical") {
  SUBCASE("one-hot always returns its token") {
    const Dist d = Dist::from_probs({0, 0, 0, 1.0});
    RngStream rng(1, 2);
    for (int i = 0; i < 100; ++i) {
      CHECK(sample_categorical(d, rng) == 3);
    }
  }
  SUBCASE("identical (seed, stream) gives identical draws") {
    const Dist d = Dist::from_probs({0.1, 0.2, 0.3, 0.4});
    RngStream a(42, 7);
    RngStream b(42, 7);
    for (int i = 0; i < 1000; ++i) {
      CHECK(sample_categorical(d, a) == sample_categorical(d, b));
    }
  }
  SUBCASE("rejects an invalid distribution") {
    RngStream rng(0, 0);
    Dist bad;
    bad.probs = {0.2, 0.2};
    CHECK_THROWS_AS(sample_categorical(bad, rng), std::invalid_argument);
  }
  SUBCASE("uniform frequencies over 1e6 draws stay within 0.25 +/- 0.005") {
    const Dist d = Dist::from_probs({0.25, 0.25, 0.25, 0.25});
    RngStream rng(2026, 0);
    const int n = 1'000'000;
    std::vector<int> counts(4, 0);
    for (int i = 0; i < n; ++i) {
      ++counts[static_cast<std::size_t>(sample_categorical(d, rng))];
    }
    for (int c : counts) {
      CHECK(std::abs(static_cast<double>(c) / n - 0.25) < 0.005);
    }
  }
  SUBCASE("empirical TV converges at the DKW-style rate") {
    // TV(empirical, d) <= sqrt(V ln(2/delta) / (2N)) at delta = 1e-4.
    const int n = 1'000'000;
    for (int v : {2, 7, 16}) {
      RngStream seed_rng(7 * v, 1);
      const Dist d = random_dist(v, seed_rng);
      RngStream rng(99, static_cast<std::uint64_t>(v));
      std::vector<double> freq(static_cast<std::size_t>(v), 0.0);
      for (int i = 0; i < n; ++i) {
        freq[static_cast<std::size_t>(sample_categorical(d, rng))] += 1.0;
      }
      for (double& f : freq) f /= n;
      const double bound = std::sqrt(v * std::log(2.0 / 1e-4) / (2.0 * n));
      CHECK(tv_distance(Dist{freq}, d) <= bound);
    }
  }
}

TEST_CASE("tv_distance") {
  const Dist a = Dist::from_probs({0.7, 0.3});
  const Dist b = Dist::from_probs({0.4, 0.6});
  CHECK(tv_distance(a, a) == 0.0);
  CHECK(tv_distance(Dist::from_probs({1, 0}), Dist::from_probs({0, 1})) == 1.0);
  CHECK(tv_distance(a, b) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK_THROWS_AS(tv_distance(a, Dist::from_probs({1.0, 0.0, 0.0})), std::invalid_argument);
}

TEST_CASE("kl_divergence") {
  const Dist p = Dist::from_probs({0.5, 0.5});
  CHECK(kl_divergence(p, p) == 0.0);
  CHECK(kl_divergence(Dist::from_probs({1, 0}), p) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(kl_divergence(p, Dist::from_probs({1, 0})), SupportError);

  SUBCASE("non-negative, zero iff equal, on random pairs") {
    RngStream rng(11, 0);
    for (int trial = 0; trial < 200; ++trial) {
      const Dist a = random_dist(5, rng);
      const Dist b = random_dist(5, rng);
      CHECK(kl_divergence(a, b) >= 0.0);
      CHECK(kl_divergence(a, a) == 0.0);
      if (tv_distance(a, b) > 1e-6) {
        CHECK(kl_divergence(a, b) > 0.0);
      }
    }
  }
}

TEST_CASE("RngStream determinism and stream separation") {
  RngStream a(123, 5);
  RngStream b(123, 5);
  RngStream c(123, 6);
  bool streams_differ = false;
  for (int i = 0; i < 64; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    if (x != c.next_u64()) streams_differ = true;
  }
  CHECK(streams_differ);

  RngStream u(9, 9);
  for (int i = 0; i < 10000; ++i) {
    const double x = u.next_uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    const double y = u.next_uniform_open_closed();
    CHECK(y > 0.0);
    CHECK(y <= 1.0);
  }
}
