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

#include "nandspin/model.hpp"
#include "nandspin/tensor.hpp"

namespace nandspin {

// Pure-integer model semantics with no simulation. Ground truth for the
// simulator.

/// Direct sliding-window dot products: input [C, H, W], weights [O][C][kh][kw];
/// returns [O][OH][OW] flattened.
std::vector<std::int64_t> conv2d_direct(const FixedPointTensor& input, const std::vector<std::int64_t>& weights,
                                        int out_channels, int kernel_h, int kernel_w, int stride);

/// One layer applied to `input` (already checked against the model).
FixedPointTensor reference_layer(const LayerSpec& layer, const FixedPointTensor& input, const TensorShape& out);

FixedPointTensor run_reference(const ModelSpec& model, const FixedPointTensor& input);

/// Index of the first maximum of a rank-1 tensor.
int argmax(const FixedPointTensor& t);

}  // namespace nandspin
