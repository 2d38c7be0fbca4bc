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

#include "nandspin/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <string>

#include "nandspin/errors.hpp"

namespace nandspin {

FixedPointTensor::FixedPointTensor(std::vector<int> d, int bits, Signedness s)
    : dims(std::move(d)), bit_width(bits), signedness(s) {
  std::size_t n = 1;
  for (int v : dims) n *= static_cast<std::size_t>(std::max(v, 0));
  values.assign(n, 0);
}

std::vector<int> FixedPointTensor::chw() const {
  switch (dims.size()) {
    case 1: return {dims[0], 1, 1};
    case 2: return {1, dims[0], dims[1]};
    case 3: return dims;
    default: fail(ErrorCode::DimMismatch, "tensor rank " + std::to_string(dims.size()) + " not in [1, 3]");
  }
}

void FixedPointTensor::validate() const {
  if (dims.empty()) fail(ErrorCode::DimMismatch, "tensor has no dims");
  std::size_t n = 1;
  for (int v : dims) {
    if (v <= 0) fail(ErrorCode::DimMismatch, "tensor dims must be positive");
    n *= static_cast<std::size_t>(v);
  }
  if (n != values.size())
    fail(ErrorCode::DimMismatch,
         "dims hold " + std::to_string(n) + " elements, got " + std::to_string(values.size()) + " values");
  if (bit_width < 1 || bit_width > 32) fail(ErrorCode::InvalidParameter, "bit width must be in [1, 32]");
  const std::int64_t lo = signedness == Signedness::Unsigned ? 0 : -(std::int64_t{1} << (bit_width - 1));
  const std::int64_t hi = signedness == Signedness::Unsigned ? (std::int64_t{1} << bit_width) - 1
                                                             : (std::int64_t{1} << (bit_width - 1)) - 1;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] < lo || values[i] > hi)
      fail(ErrorCode::InvalidParameter, "value " + std::to_string(values[i]) + " at index " + std::to_string(i) +
                                            " not representable in " + std::to_string(bit_width) + " bits");
}

std::vector<BitPlaneTensor> decompose(const FixedPointTensor& t) {
  if (t.signedness != Signedness::Unsigned) fail(ErrorCode::InvalidParameter, "bit planes need unsigned data");
  t.validate();
  const auto chw = t.chw();
  const int rows = chw[0] * chw[1];
  const int cols = chw[2];
  std::vector<BitPlaneTensor> planes;
  for (int n = 0; n < t.bit_width; ++n) {
    BitPlaneTensor p{n, rows, cols, BitRow(t.values.size())};
    for (std::size_t i = 0; i < t.values.size(); ++i) p.bits[i] = (t.values[i] >> n) & 1;
    planes.push_back(std::move(p));
  }
  return planes;
}

FixedPointTensor reconstruct(const std::vector<BitPlaneTensor>& planes) {
  if (planes.empty()) fail(ErrorCode::DimMismatch, "no planes to reconstruct");
  FixedPointTensor t({planes[0].rows, planes[0].cols}, static_cast<int>(planes.size()));
  for (const auto& p : planes) {
    if (p.rows != planes[0].rows || p.cols != planes[0].cols)
      fail(ErrorCode::DimMismatch, "planes differ in shape");
    for (std::size_t i = 0; i < p.bits.size(); ++i) t.values[i] += std::int64_t{p.bits[i]} << p.plane_index;
  }
  return t;
}

}  // namespace nandspin
