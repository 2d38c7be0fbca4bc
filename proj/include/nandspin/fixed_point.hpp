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
#include <span>
#include <vector>

namespace nandspin {

constexpr std::int64_t floor_div_pow2(std::int64_t v, int shift) {
  // Arithmetic shift floors for negative values on every supported target.
  return v >> shift;
}

/// y = floor((x * scale + offset) / 2^shift), the integer form of
/// floor(x * s + o). Scale may be negative.
struct FixedPointAffine {
  std::int64_t scale = 0;
  std::int64_t offset = 0;
  int shift = 0;

  std::int64_t apply(std::int64_t x) const { return floor_div_pow2(x * scale + offset, shift); }
  friend bool operator==(const FixedPointAffine&, const FixedPointAffine&) = default;
};

inline constexpr int kAffinePrecisionBits = 20;

/// Converts real (scale, offset) pairs to fixed point with one shared shift,
/// chosen so the largest |scale| keeps kAffinePrecisionBits significant bits.
/// Constants round up, so inputs must be non-negative for the result to be
/// at or above the real value.
std::vector<FixedPointAffine> make_affine_group(std::span<const double> scales, std::span<const double> offsets);

/// Quantization to k bits over [q_min, q_max] with round-half-up; an optional
/// additive bias on the input is folded into the offset.
FixedPointAffine quantize_affine(double q_min, double q_max, int k, double input_bias = 0.0);
/// Per-channel biases with one shared scale and shift.
std::vector<FixedPointAffine> quantize_affine_group(double q_min, double q_max, int k,
                                                    std::span<const double> input_biases);

struct BatchNormParams {
  double mu = 0, sigma = 1, gamma = 1, beta = 0, eps = 1e-5;
};

/// Batch normalization on the integer code grid, rounded half-up.
std::vector<FixedPointAffine> batch_norm_affine(std::span<const BatchNormParams> per_channel);

/// clamp(affine(x), 0, 2^k - 1)
std::int64_t affine_clamp(const FixedPointAffine& a, std::int64_t x, int k);

/// Host-side quantize and batch norm with the same integer semantics the
/// in-memory path implements.
std::vector<std::int64_t> quantize(std::span<const std::int64_t> values, double q_min, double q_max, int k);
std::vector<std::int64_t> batch_norm(std::span<const std::int64_t> values, const BatchNormParams& bn, int k);

/// Reciprocal multiplier for round-half-up division by `divisor` of values up
/// to `max_dividend`: floor((x * scale + 2^(shift-1)) >> shift) == floor(x / d + 1/2).
FixedPointAffine reciprocal_affine(std::int64_t divisor, std::int64_t max_dividend);

}  // namespace nandspin
