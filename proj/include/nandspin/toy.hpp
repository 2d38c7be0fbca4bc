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

#include "nandspin/model.hpp"
#include "nandspin/tensor.hpp"

namespace nandspin {

/// Random toy CNN on a 1x8x8 input: conv3x3 + BN, conv3x3 + BN, 2x2 max
/// pool, fully connected. Quantization ranges are drawn around the expected
/// accumulator magnitude so outputs are not saturated. Same seed, same model.
ModelSpec make_toy_model(std::uint64_t seed);

/// Uniform random input matching the model's declared input.
FixedPointTensor make_toy_input(const ModelSpec& model, std::uint64_t seed);

}  // namespace nandspin
