// Copyright 2026 The koopman_rb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Exact binomial coefficients for the Leibniz-rule ladder recursions.
#pragma once

#include <array>
#include <cstdint>

#include "koopman_rb/types.hpp"

namespace koopman_rb {

/// Largest ladder order for which binomial coefficients fit in uint64.
inline constexpr int kMaxLadderOrder = 64;

namespace detail {

struct BinomialTable {
  std::array<std::array<std::uint64_t, kMaxLadderOrder + 1>, kMaxLadderOrder + 1>
      c{};
  constexpr BinomialTable() {
    for (int k = 0; k <= kMaxLadderOrder; ++k) {
      c[k][0] = 1;
      for (int n = 1; n <= k; ++n) c[k][n] = c[k - 1][n - 1] + (n < k ? c[k - 1][n] : 0);
    }
  }
};

inline constexpr BinomialTable kBinomials{};

}  // namespace detail

/// C(k, n) as an exact integer; throws for k outside [0, 64] or n outside [0, k].
inline std::uint64_t binomial(int k, int n) {
  if (k < 0 || k > kMaxLadderOrder) throw OverflowError("binomial order out of range");
  if (n < 0 || n > k) throw DomainError("binomial index out of range");
  return detail::kBinomials.c[k][n];
}

inline void check_ladder_length(int n) {
  if (n < 1) throw DomainError("ladder length must be at least 1");
  if (n > kMaxLadderOrder) throw OverflowError("ladder length exceeds 64");
}

}  // namespace koopman_rb
