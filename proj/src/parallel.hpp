// Copyright 2026 The lungseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace lungseg::detail {

// OpenMP loop over [0, n). The exception thrown by the lowest index is
// rethrown after the loop; the remaining iterations still run.
template <typename Fn>
void parallel_for(std::ptrdiff_t n, Fn&& fn, bool parallel = true) {
  std::exception_ptr first;
  std::ptrdiff_t first_index = n;
  std::mutex mu;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::ptrdiff_t idx = 0; idx < n; ++idx) {
    try {
      fn(idx);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (idx < first_index) {
        first_index = idx;
        first = std::current_exception();
      }
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace lungseg::detail
