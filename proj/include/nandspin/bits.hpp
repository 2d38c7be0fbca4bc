/*
 * Copyright 2026 The nandspin-sim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace nandspin {

// One bit per element, values restricted to {0, 1}. A row of a subarray, a
// buffer row and a counter LSB vector all share this representation.
using BitRow = std::vector<std::uint8_t>;

inline BitRow zeros(std::size_t width) { return BitRow(width, 0); }
inline BitRow ones(std::size_t width) { return BitRow(width, 1); }

inline std::size_t popcount(std::span<const std::uint8_t> bits) {
  std::size_t n = 0;
  for (auto b : bits) n += b;
  return n;
}

inline bool any(std::span<const std::uint8_t> bits) {
  for (auto b : bits)
    if (b) return true;
  return false;
}

inline BitRow bitwise_and(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  BitRow out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] & b[i];
  return out;
}

inline BitRow bitwise_not(std::span<const std::uint8_t> a) {
  BitRow out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] ^ 1u;
  return out;
}

// Number of bits needed to hold v (0 -> 0).
constexpr int bit_length(std::uint64_t v) {
  int n = 0;
  while (v) {
    ++n;
    v >>= 1;
  }
  return n;
}

}  // namespace nandspin
