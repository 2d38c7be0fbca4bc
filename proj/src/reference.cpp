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

#include "nandspin/reference.hpp"

#include <algorithm>

#include "nandspin/errors.hpp"

namespace nandspin {

std::vector<std::int64_t> conv2d_direct(const FixedPointTensor& input, const std::vector<std::int64_t>& weights,
                                        int O, int kh, int kw, int stride) {
  const auto chw = input.chw();
  const int C = chw[0], H = chw[1], W = chw[2];
  const int OH = (H - kh) / stride + 1, OW = (W - kw) / stride + 1;
  if (weights.size() != static_cast<std::size_t>(O) * C * kh * kw)
    fail(ErrorCode::DimMismatch, "weights do not match [O][C][kh][kw]");
  std::vector<std::int64_t> out(static_cast<std::size_t>(O) * OH * OW, 0);
  for (int o = 0; o < O; ++o)
    for (int oy = 0; oy < OH; ++oy)
      for (int ox = 0; ox < OW; ++ox) {
        std::int64_t acc = 0;
        for (int c = 0; c < C; ++c)
          for (int r = 0; r < kh; ++r)
            for (int j = 0; j < kw; ++j)
              acc += input.values[(static_cast<std::size_t>(c) * H + oy * stride + r) * W + ox * stride + j] *
                     weights[((static_cast<std::size_t>(o) * C + c) * kh + r) * kw + j];
        out[(static_cast<std::size_t>(o) * OH + oy) * OW + ox] = acc;
      }
  return out;
}

FixedPointTensor reference_layer(const LayerSpec& l, const FixedPointTensor& input, const TensorShape& shape) {
  FixedPointTensor out(shape.dims, shape.bits);
  const int k = shape.bits;
  if (l.has_weights()) {
    std::vector<std::int64_t> acc;
    if (l.kind == LayerKind::Conv) {
      acc = conv2d_direct(input, l.weights, l.dims[0], l.dims[2], l.dims[3], l.stride);
    } else {
      FixedPointTensor flat({static_cast<int>(input.values.size())}, input.bit_width);
      flat.values = input.values;
      acc = conv2d_direct(flat, l.weights, l.dims[0], 1, 1, 1);
    }
    const auto q = quantize_constants(l, k);
    const auto bn = batch_norm_constants(l);
    const std::size_t per_channel = acc.size() / static_cast<std::size_t>(l.dims[0]);
    for (std::size_t i = 0; i < acc.size(); ++i) {
      const std::size_t o = i / per_channel;
      std::int64_t v = affine_clamp(q[o], acc[i], k);
      if (!bn.empty()) v = affine_clamp(bn[o], v, k);
      out.values[i] = v;
    }
    return out;
  }
  const auto chw = input.chw();
  const int H = chw[1], W = chw[2];
  const int kh = l.dims[0], kw = l.dims[1];
  const int OH = shape.dims[1], OW = shape.dims[2];
  const std::int64_t d = static_cast<std::int64_t>(kh) * kw;
  for (int c = 0; c < chw[0]; ++c)
    for (int oy = 0; oy < OH; ++oy)
      for (int ox = 0; ox < OW; ++ox) {
        std::int64_t mx = INT64_MIN, mn = INT64_MAX, sum = 0;
        for (int r = 0; r < kh; ++r)
          for (int j = 0; j < kw; ++j) {
            const auto v = input.values[(static_cast<std::size_t>(c) * H + oy * l.stride + r) * W + ox * l.stride + j];
            mx = std::max(mx, v);
            mn = std::min(mn, v);
            sum += v;
          }
        std::int64_t v = 0;
        switch (l.kind) {
          case LayerKind::MaxPool: v = mx; break;
          case LayerKind::MinPool: v = mn; break;
          default: v = (2 * sum + d) / (2 * d); break;  // round half up
        }
        out.values[(static_cast<std::size_t>(c) * OH + oy) * OW + ox] = v;
      }
  return out;
}

FixedPointTensor run_reference(const ModelSpec& model, const FixedPointTensor& input) {
  input.validate();
  const TensorShape in_shape = model.input_shape_for(input.dims, input.bit_width);
  const auto shapes = model.infer_shapes(in_shape);
  FixedPointTensor cur = input;
  cur.bit_width = in_shape.bits;
  cur.validate();
  for (std::size_t i = 0; i < model.layers.size(); ++i) cur = reference_layer(model.layers[i], cur, shapes[i + 1]);
  return cur;
}

int argmax(const FixedPointTensor& t) {
  if (t.values.empty()) fail(ErrorCode::DimMismatch, "argmax of an empty tensor");
  return static_cast<int>(std::max_element(t.values.begin(), t.values.end()) - t.values.begin());
}

}  // namespace nandspin
