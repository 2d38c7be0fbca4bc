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

#include "nandspin/model.hpp"

#include <functional>
#include <numeric>

#include "nandspin/errors.hpp"

namespace nandspin {

using nlohmann::json;

std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::FullyConnected: return "fc";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::MinPool: return "minpool";
    case LayerKind::AvgPool: return "avgpool";
  }
  return "?";
}

std::optional<LayerKind> layer_kind_from_string(std::string_view name) {
  for (auto k : {LayerKind::Conv, LayerKind::FullyConnected, LayerKind::MaxPool, LayerKind::MinPool,
                 LayerKind::AvgPool})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  fail(ErrorCode::ParseError, path + ": " + what);
}

const json& need(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) bad(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) bad(path, std::string("missing field '") + key + "'");
  return *it;
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) bad(path, "expected an integer");
  const auto x = v.get<std::int64_t>();
  if (x < INT32_MIN || x > INT32_MAX) bad(path, "integer out of range");
  return static_cast<int>(x);
}

double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) bad(path, "expected a number");
  return v.get<double>();
}

std::vector<int> int_list(const json& v, const std::string& path) {
  if (!v.is_array()) bad(path, "expected an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_int(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

// Scalar broadcast to n channels, or an array of exactly n numbers.
std::vector<double> per_channel(const json& v, int n, const std::string& path) {
  if (v.is_number()) return std::vector<double>(static_cast<std::size_t>(n), v.get<double>());
  if (!v.is_array()) bad(path, "expected a number or an array");
  if (static_cast<int>(v.size()) != n)
    bad(path, "expected " + std::to_string(n) + " values, got " + std::to_string(v.size()));
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_double(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

void flatten_ints(const json& v, const std::string& path, std::vector<std::int64_t>& out) {
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) flatten_ints(v[i], path + "[" + std::to_string(i) + "]", out);
    return;
  }
  if (!v.is_number_integer()) bad(path, "expected an integer");
  out.push_back(v.get<std::int64_t>());
}

std::size_t product(const std::vector<int>& d) {
  return std::accumulate(d.begin(), d.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * static_cast<std::size_t>(std::max(b, 0)); });
}

std::string layer_label(const LayerSpec& l, std::size_t index) {
  return "layer " + std::to_string(index) + (l.name.empty() ? "" : " '" + l.name + "'") + " (" +
         std::string(to_string(l.kind)) + ")";
}

[[noreturn]] void layer_error(ErrorCode code, const LayerSpec& l, std::size_t i, const std::string& what) {
  fail(code, layer_label(l, i) + ": " + what);
}

std::string dims_str(const std::vector<int>& d) {
  std::string s = "[";
  for (std::size_t i = 0; i < d.size(); ++i) s += (i ? ", " : "") + std::to_string(d[i]);
  return s + "]";
}

}  // namespace

ModelSpec model_from_json(const json& j) {
  if (!j.is_object()) bad("$", "model must be an object");
  ModelSpec m;
  if (auto it = j.find("input"); it != j.end()) {
    TensorShape in;
    in.dims = int_list(need(*it, "dims", "$.input"), "$.input.dims");
    in.bits = as_int(need(*it, "bits", "$.input"), "$.input.bits");
    m.input = in;
  }
  const json& layers = need(j, "layers", "$");
  if (!layers.is_array()) bad("$.layers", "expected an array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string p = "$.layers[" + std::to_string(i) + "]";
    const json& lj = layers[i];
    LayerSpec l;
    const json& kind = need(lj, "kind", p);
    if (!kind.is_string()) bad(p + ".kind", "expected a string");
    auto k = layer_kind_from_string(kind.get<std::string>());
    if (!k) bad(p + ".kind", "unknown layer kind '" + kind.get<std::string>() + "'");
    l.kind = *k;
    if (auto it = lj.find("name"); it != lj.end()) {
      if (!it->is_string()) bad(p + ".name", "expected a string");
      l.name = it->get<std::string>();
    }
    l.dims = int_list(need(lj, "dims", p), p + ".dims");
    const bool pool = !l.has_weights();
    l.stride = pool && l.dims.size() == 2 ? l.dims[0] : 1;
    if (auto it = lj.find("stride"); it != lj.end()) l.stride = as_int(*it, p + ".stride");
    if (auto it = lj.find("k_i"); it != lj.end()) l.k_i = as_int(*it, p + ".k_i");
    if (auto it = lj.find("k"); it != lj.end()) l.k = as_int(*it, p + ".k");
    if (!pool) {
      l.k_w = as_int(need(lj, "k_w", p), p + ".k_w");
      l.qmin = as_double(need(lj, "qmin", p), p + ".qmin");
      l.qmax = as_double(need(lj, "qmax", p), p + ".qmax");
      const int o = l.dims.empty() ? 0 : l.dims[0];
      if (auto it = lj.find("bias"); it != lj.end()) l.bias = per_channel(*it, o, p + ".bias");
      if (auto it = lj.find("bn"); it != lj.end() && !it->is_null()) {
        const std::string bp = p + ".bn";
        const auto mu = per_channel(need(*it, "mu", bp), o, bp + ".mu");
        const auto sigma = per_channel(need(*it, "sigma", bp), o, bp + ".sigma");
        const auto gamma = per_channel(need(*it, "gamma", bp), o, bp + ".gamma");
        const auto beta = per_channel(need(*it, "beta", bp), o, bp + ".beta");
        std::vector<double> eps(static_cast<std::size_t>(o), 1e-5);
        if (auto e = it->find("eps"); e != it->end()) eps = per_channel(*e, o, bp + ".eps");
        std::vector<BatchNormParams> bn;
        for (int c = 0; c < o; ++c) bn.push_back({mu[c], sigma[c], gamma[c], beta[c], eps[c]});
        l.bn = std::move(bn);
      }
      flatten_ints(need(lj, "weights", p), p + ".weights", l.weights);
      if (l.weights.size() != product(l.dims))
        bad(p + ".weights", "expected " + std::to_string(product(l.dims)) + " weights for dims " + dims_str(l.dims) +
                                ", got " + std::to_string(l.weights.size()));
    }
    m.layers.push_back(std::move(l));
  }
  return m;
}

json model_to_json(const ModelSpec& m) {
  json j;
  if (m.input) j["input"] = {{"dims", m.input->dims}, {"bits", m.input->bits}};
  j["layers"] = json::array();
  for (const auto& l : m.layers) {
    json lj;
    lj["kind"] = std::string(to_string(l.kind));
    if (!l.name.empty()) lj["name"] = l.name;
    lj["dims"] = l.dims;
    lj["stride"] = l.stride;
    if (l.k_i) lj["k_i"] = l.k_i;
    if (l.k) lj["k"] = l.k;
    if (l.has_weights()) {
      lj["k_w"] = l.k_w;
      lj["qmin"] = l.qmin;
      lj["qmax"] = l.qmax;
      if (!l.bias.empty()) lj["bias"] = l.bias;
      if (l.bn) {
        json bn = {{"mu", json::array()}, {"sigma", json::array()}, {"gamma", json::array()},
                   {"beta", json::array()}, {"eps", json::array()}};
        for (const auto& b : *l.bn) {
          bn["mu"].push_back(b.mu);
          bn["sigma"].push_back(b.sigma);
          bn["gamma"].push_back(b.gamma);
          bn["beta"].push_back(b.beta);
          bn["eps"].push_back(b.eps);
        }
        lj["bn"] = bn;
      }
      lj["weights"] = l.weights;
    }
    j["layers"].push_back(lj);
  }
  return j;
}

TensorShape ModelSpec::input_shape_for(const std::vector<int>& tensor_dims, int tensor_bits) const {
  if (input) {
    if (input->dims != tensor_dims)
      fail(ErrorCode::DimMismatch,
           "input tensor dims " + dims_str(tensor_dims) + " differ from the model's " + dims_str(input->dims));
    return *input;
  }
  int bits = tensor_bits;
  if (!layers.empty() && layers.front().k_i > 0) bits = layers.front().k_i;
  return {tensor_dims, bits};
}

ConvShape conv_shape_of(const LayerSpec& l, const TensorShape& in) {
  ConvShape s;
  if (l.kind == LayerKind::Conv) {
    s.out_channels = l.dims[0];
    s.channels = l.dims[1];
    s.kernel_h = l.dims[2];
    s.kernel_w = l.dims[3];
    s.height = in.dims.size() == 3 ? in.dims[1] : 1;
    s.width = in.dims.size() == 3 ? in.dims[2] : 1;
  } else {
    s.out_channels = l.dims[0];
    s.channels = l.dims[1];
  }
  s.stride = l.stride;
  s.input_bits = in.bits;
  s.weight_bits = l.k_w;
  return s;
}

std::vector<TensorShape> ModelSpec::infer_shapes(const TensorShape& input_shape) const {
  std::vector<TensorShape> shapes{input_shape};
  if (input_shape.dims.empty() || input_shape.dims.size() > 3)
    fail(ErrorCode::DimMismatch, "model input must have rank 1 to 3");
  for (int d : input_shape.dims)
    if (d < 1) fail(ErrorCode::DimMismatch, "model input dims must be positive");
  if (input_shape.bits < 1 || input_shape.bits > kMaxLayerBits)
    fail(ErrorCode::InvalidParameter, "input bits must be in [1, 8]");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    TensorShape in = shapes.back();
    if (in.dims.size() == 2) in.dims.insert(in.dims.begin(), 1);
    if (l.k_i != 0 && l.k_i != in.bits)
      layer_error(ErrorCode::DimMismatch, l, i,
                  "expects " + std::to_string(l.k_i) + "-bit input, producer gives " + std::to_string(in.bits));
    const int out_bits = l.k ? l.k : in.bits;
    if (out_bits < 1 || out_bits > kMaxLayerBits) layer_error(ErrorCode::InvalidParameter, l, i, "k must be in [1, 8]");
    if (l.stride < 1) layer_error(ErrorCode::StrideInvalid, l, i, "stride must be >= 1");
    TensorShape out{{}, out_bits};
    switch (l.kind) {
      case LayerKind::Conv: {
        if (l.dims.size() != 4) layer_error(ErrorCode::DimMismatch, l, i, "conv dims must be [O, C, kh, kw]");
        if (in.dims.size() != 3) layer_error(ErrorCode::DimMismatch, l, i, "conv needs a [C, H, W] input");
        if (l.dims[1] != in.dims[0])
          layer_error(ErrorCode::DimMismatch, l, i,
                      "has " + std::to_string(l.dims[1]) + " input channels, producer gives " + dims_str(in.dims));
        for (int d : l.dims)
          if (d < 1) layer_error(ErrorCode::DimMismatch, l, i, "dims must be positive");
        if (l.dims[2] > in.dims[1] || l.dims[3] > in.dims[2])
          layer_error(ErrorCode::DimMismatch, l, i, "kernel larger than input " + dims_str(in.dims));
        out.dims = {l.dims[0], (in.dims[1] - l.dims[2]) / l.stride + 1, (in.dims[2] - l.dims[3]) / l.stride + 1};
        break;
      }
      case LayerKind::FullyConnected: {
        if (l.dims.size() != 2) layer_error(ErrorCode::DimMismatch, l, i, "fc dims must be [out, in]");
        const int flat = static_cast<int>(product(in.dims));
        if (l.dims[1] != flat)
          layer_error(ErrorCode::DimMismatch, l, i,
                      "has " + std::to_string(l.dims[1]) + " inputs, producer gives " + std::to_string(flat));
        if (l.dims[0] < 1) layer_error(ErrorCode::DimMismatch, l, i, "dims must be positive");
        if (l.stride != 1) layer_error(ErrorCode::StrideInvalid, l, i, "fc stride must be 1");
        out.dims = {l.dims[0]};
        break;
      }
      case LayerKind::MaxPool:
      case LayerKind::MinPool:
      case LayerKind::AvgPool: {
        if (l.dims.size() != 2) layer_error(ErrorCode::DimMismatch, l, i, "pool dims must be [kh, kw]");
        if (in.dims.size() != 3) layer_error(ErrorCode::DimMismatch, l, i, "pooling needs a [C, H, W] input");
        if (l.dims[0] < 1 || l.dims[1] < 1 || l.dims[0] > in.dims[1] || l.dims[1] > in.dims[2])
          layer_error(ErrorCode::DimMismatch, l, i, "window does not fit input " + dims_str(in.dims));
        if (out_bits != in.bits) layer_error(ErrorCode::InvalidParameter, l, i, "pooling keeps the input width");
        out.dims = {in.dims[0], (in.dims[1] - l.dims[0]) / l.stride + 1, (in.dims[2] - l.dims[1]) / l.stride + 1};
        break;
      }
    }
    if (l.has_weights()) {
      if (l.k_w < 1 || l.k_w > kMaxLayerBits) layer_error(ErrorCode::InvalidParameter, l, i, "k_w must be in [1, 8]");
      if (l.weights.size() != product(l.dims))
        layer_error(ErrorCode::DimMismatch, l, i, "weight count does not match dims");
      for (auto w : l.weights)
        if (w < 0 || w >= (std::int64_t{1} << l.k_w))
          layer_error(ErrorCode::InvalidParameter, l, i,
                      "weight " + std::to_string(w) + " is not an unsigned " + std::to_string(l.k_w) + "-bit value");
      if (l.qmax == l.qmin) layer_error(ErrorCode::DegenerateRange, l, i, "qmax equals qmin");
      if (!(l.qmax > l.qmin)) layer_error(ErrorCode::InvalidParameter, l, i, "qmax must exceed qmin");
      if (!l.bias.empty() && static_cast<int>(l.bias.size()) != l.dims[0])
        layer_error(ErrorCode::DimMismatch, l, i, "one bias per output channel");
      if (l.bn && static_cast<int>(l.bn->size()) != l.dims[0])
        layer_error(ErrorCode::DimMismatch, l, i, "one batch-norm entry per output channel");
    }
    shapes.push_back(std::move(out));
  }
  return shapes;
}

std::vector<FixedPointAffine> quantize_constants(const LayerSpec& l, int out_bits) {
  std::vector<double> bias = l.bias;
  bias.resize(static_cast<std::size_t>(l.out_channels()), 0.0);
  return quantize_affine_group(l.qmin, l.qmax, out_bits, bias);
}

std::vector<FixedPointAffine> batch_norm_constants(const LayerSpec& l) {
  if (!l.bn) return {};
  return batch_norm_affine(*l.bn);
}

}  // namespace nandspin
