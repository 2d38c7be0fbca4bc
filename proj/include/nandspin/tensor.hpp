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

#include <cstdint>
#include <vector>

#include "nandspin/bits.hpp"

namespace nandspin {

enum class Signedness { Unsigned, TwosComplement };

/// Dense row-major integer tensor with a declared fixed-point width.
struct FixedPointTensor {
  std::vector<int> dims;
  int bit_width = 8;
  Signedness signedness = Signedness::Unsigned;
  std::vector<std::int64_t> values;

  FixedPointTensor() = default;
  FixedPointTensor(std::vector<int> dims, int bit_width, Signedness s = Signedness::Unsigned);

  std::size_t size() const { return values.size(); }
  std::int64_t& at(std::size_t i) { return values[i]; }
  std::int64_t at(std::size_t i) const { return values[i]; }
  /// [C, H, W] view; rank 2 is promoted to C = 1, rank 1 to [L, 1, 1].
  std::vector<int> chw() const;

  /// Throws DimMismatch / InvalidParameter when the values do not fit.
  void validate() const;

  friend bool operator==(const FixedPointTensor&, const FixedPointTensor&) = default;
};

/// One bit-significance slice of an unsigned 2-D tensor.
struct BitPlaneTensor {
  int plane_index = 0;
  int rows = 0;
  int cols = 0;
  BitRow bits;  // row-major

  std::uint8_t at(int r, int c) const { return bits[static_cast<std::size_t>(r) * cols + c]; }
};

/// Decomposes an unsigned [rows, cols] tensor into bit_width planes, LSB first.
std::vector<BitPlaneTensor> decompose(const FixedPointTensor& t);
/// Inverse of decompose: sum of 2^n * plane_n.
FixedPointTensor reconstruct(const std::vector<BitPlaneTensor>& planes);

}  // namespace nandspin
