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

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace deer {

// Worker count: hardware concurrency capped by the DEER_THREADS env var.
int max_workers();

/**
 * Splits [0, n) into a fixed number of chunks and maps fn over them on a
 * small thread pool. Results are returned indexed by chunk, so callers can
 * merge in chunk order and get bit-identical output regardless of how many
 * workers actually ran (the chunk boundaries depend only on n).
 */
template <typename R, typename Fn>
std::vector<R> parallel_map_chunks(std::int64_t n, Fn fn, int n_chunks = 64) {
  if (n <= 0) {
    return {};
  }
  if (n_chunks > n) {
    n_chunks = static_cast<int>(n);
  }
  std::vector<R> results(static_cast<std::size_t>(n_chunks));

  const int workers = std::min(max_workers(), n_chunks);
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto run = [&] {
    for (;;) {
      const int c = next.fetch_add(1);
      if (c >= n_chunks) return;
      const std::int64_t begin = n * c / n_chunks;
      const std::int64_t end = n * (c + 1) / n_chunks;
      try {
        results[static_cast<std::size_t>(c)] = fn(begin, end, c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  if (workers <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back(run);
    }
    for (auto& t : pool) {
      t.join();
    }
  }
  if (first_error) {
    std::rethrow_exception(first_error);
  }
  return results;
}

}  // namespace deer
