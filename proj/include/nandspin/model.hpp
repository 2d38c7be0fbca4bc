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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nandspin/fixed_point.hpp"
#include "nandspin/primitives.hpp"

namespace nandspin {

enum class LayerKind { Conv, FullyConnected, MaxPool, MinPool, AvgPool };

std::string_view to_string(LayerKind k);
std::optional<LayerKind> layer_kind_from_string(std::string_view name);

inline constexpr int kMaxLayerBits = 8;

/// One quantized layer. Conv/FC layers produce
///   clamp(BN(clamp(quantize(acc + bias))))  with ReLU folded into the clamps;
/// pooling layers keep the input width.
struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  std::string name;

  // conv: [O, C, kh, kw]; fc: [out, in]; pools: [kh, kw]
  std::vector<int> dims;
  int stride = 1;
  int k_w = 1;  // weight bits (conv / fc)
  int k_i = 0;  // input bits; 0 = inherit from the producer
  int k = 0;    // output bits; 0 = same as k_i

  double qmin = 0;
  double qmax = 1;
  std::vector<double> bias;                     // per output channel, may be empty
  std::optional<std::vector<BatchNormParams>> bn;  // per output channel
  std::vector<std::int64_t> weights;            // flat, row-major over dims

  bool has_weights() const { return kind == LayerKind::Conv || kind == LayerKind::FullyConnected; }
  int out_channels() const { return dims.empty() ? 0 : dims[0]; }
};

/// Shape of the tensor flowing between layers.
struct TensorShape {
  std::vector<int> dims;  // [C, H, W] or [L]
  int bits = 1;

  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

struct ModelSpec {
  std::optional<TensorShape> input;
  std::vector<LayerSpec> layers;

  /// Checks every layer against its producer and returns the shape after each
  /// layer (front() is the model input). Throws DimMismatch / InvalidParameter
  /// naming the layer.
  std::vector<TensorShape> infer_shapes(const TensorShape& input_shape) const;

  /// Input shape declared by the model; otherwise the tensor's dims with the
  /// first layer's input bits, falling back to the tensor's own width.
  TensorShape input_shape_for(const std::vector<int>& tensor_dims, int tensor_bits) const;
};

/// Parses the model document. Throws ParseError naming the offending path.
ModelSpec model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const ModelSpec& m);

/// Conv geometry of a weighted layer for the given input shape. FC layers
/// become 1x1 convolutions over L = C*H*W channels.
ConvShape conv_shape_of(const LayerSpec& layer, const TensorShape& input);

/// Per-output-channel quantization (to `out_bits`) and batch-norm constants.
std::vector<FixedPointAffine> quantize_constants(const LayerSpec& layer, int out_bits);
std::vector<FixedPointAffine> batch_norm_constants(const LayerSpec& layer);

}  // namespace nandspin
