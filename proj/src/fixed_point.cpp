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

#include "nandspin/fixed_point.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nandspin/bits.hpp"
#include "nandspin/errors.hpp"

namespace nandspin {

namespace {

constexpr int kMaxShift = 40;
constexpr double kMaxMagnitude = 4503599627370496.0;  // 2^52

// Rounds toward +infinity: for x >= 0 the fixed-point affine never lands
// below the real one, so exact half-way points still round up.
std::int64_t to_fixed(double v, int shift) {
  const double scaled = std::ceil(std::ldexp(v, shift));
  if (!std::isfinite(scaled) || std::fabs(scaled) >= kMaxMagnitude)
    fail(ErrorCode::InvalidParameter, "fixed-point constant " + std::to_string(v) + " out of range");
  return static_cast<std::int64_t>(scaled);
}

}  // namespace

std::vector<FixedPointAffine> make_affine_group(std::span<const double> scales, std::span<const double> offsets) {
  if (scales.size() != offsets.size()) fail(ErrorCode::DimMismatch, "scale/offset count mismatch");
  double largest = 0;
  for (double s : scales) {
    if (!std::isfinite(s)) fail(ErrorCode::InvalidParameter, "non-finite scale");
    largest = std::max(largest, std::fabs(s));
  }
  int shift = kAffinePrecisionBits;
  if (largest > 0) {
    int exp = 0;
    std::frexp(largest, &exp);  // largest in [2^(exp-1), 2^exp)
    shift = kAffinePrecisionBits - exp;
  }
  shift = std::clamp(shift, 1, kMaxShift);
  std::vector<FixedPointAffine> out;
  out.reserve(scales.size());
  for (std::size_t i = 0; i < scales.size(); ++i)
    out.push_back({to_fixed(scales[i], shift), to_fixed(offsets[i], shift), shift});
  return out;
}

std::vector<FixedPointAffine> quantize_affine_group(double q_min, double q_max, int k,
                                                    std::span<const double> input_biases) {
  if (k < 1 || k > 16) fail(ErrorCode::InvalidParameter, "quantization bits must be in [1, 16]");
  if (q_max == q_min) fail(ErrorCode::DegenerateRange, "q_max equals q_min");
  if (!(q_max > q_min)) fail(ErrorCode::InvalidParameter, "q_max must exceed q_min");
  const double s = static_cast<double>((std::int64_t{1} << k) - 1) / (q_max - q_min);
  const std::vector<double> sv(input_biases.size(), s);
  std::vector<double> ov;
  for (double b : input_biases) ov.push_back((b - q_min) * s + 0.5);
  return make_affine_group(sv, ov);
}

FixedPointAffine quantize_affine(double q_min, double q_max, int k, double input_bias) {
  const double b[] = {input_bias};
  return quantize_affine_group(q_min, q_max, k, b).front();
}

std::vector<FixedPointAffine> batch_norm_affine(std::span<const BatchNormParams> per_channel) {
  std::vector<double> scales, offsets;
  for (const auto& p : per_channel) {
    const double var = p.sigma * p.sigma + p.eps;
    if (!(var > 0)) fail(ErrorCode::InvalidParameter, "batch norm needs sigma^2 + eps > 0");
    const double s = p.gamma / std::sqrt(var);
    scales.push_back(s);
    offsets.push_back(p.beta - p.mu * s + 0.5);
  }
  return make_affine_group(scales, offsets);
}

std::int64_t affine_clamp(const FixedPointAffine& a, std::int64_t x, int k) {
  return std::clamp<std::int64_t>(a.apply(x), 0, (std::int64_t{1} << k) - 1);
}

std::vector<std::int64_t> quantize(std::span<const std::int64_t> values, double q_min, double q_max, int k) {
  const auto a = quantize_affine(q_min, q_max, k);
  std::vector<std::int64_t> out;
  out.reserve(values.size());
  for (auto v : values) out.push_back(affine_clamp(a, v, k));
  return out;
}

std::vector<std::int64_t> batch_norm(std::span<const std::int64_t> values, const BatchNormParams& bn, int k) {
  const BatchNormParams one[] = {bn};
  const auto a = batch_norm_affine(one).front();
  std::vector<std::int64_t> out;
  out.reserve(values.size());
  for (auto v : values) out.push_back(affine_clamp(a, v, k));
  return out;
}

FixedPointAffine reciprocal_affine(std::int64_t divisor, std::int64_t max_dividend) {
  if (divisor < 1) fail(ErrorCode::InvalidParameter, "divisor must be positive");
  const int shift = bit_length(static_cast<std::uint64_t>(2 * divisor * std::max<std::int64_t>(max_dividend, 1))) + 1;
  const std::int64_t one = std::int64_t{1} << shift;
  return {(one + divisor - 1) / divisor, one >> 1, shift};
}

}  // namespace nandspin
