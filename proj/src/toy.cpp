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

#include "nandspin/toy.hpp"

#include <random>

#include "nandspin/errors.hpp"

namespace nandspin {

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }

 private:
  std::mt19937_64 gen_;
};

LayerSpec weighted(Rng& rng, LayerKind kind, std::vector<int> dims, int k_i, int k, bool with_bn) {
  LayerSpec l;
  l.kind = kind;
  l.dims = std::move(dims);
  l.k_i = k_i;
  l.k = k;
  l.k_w = rng.integer(2, 4);
  std::size_t n = 1;
  for (int d : l.dims) n *= static_cast<std::size_t>(d);
  for (std::size_t i = 0; i < n; ++i) l.weights.push_back(rng.integer(0, (1 << l.k_w) - 1));
  const int out = l.dims[0];
  const double fan_in = static_cast<double>(n) / out;
  const double mean = fan_in * ((1 << k_i) - 1) / 2.0 * ((1 << l.k_w) - 1) / 2.0;
  l.qmin = mean * rng.real(0.0, 0.6);
  l.qmax = mean * rng.real(1.4, 2.2);
  for (int o = 0; o < out; ++o) l.bias.push_back(mean * rng.real(-0.1, 0.1));
  if (with_bn) {
    const double top = (1 << k) - 1;
    std::vector<BatchNormParams> bn;
    for (int o = 0; o < out; ++o)
      bn.push_back({rng.real(0.25, 0.75) * top, rng.real(0.5, 3.0), rng.real(-0.5, 2.0), rng.real(0.25, 0.75) * top,
                    1e-5});
    l.bn = std::move(bn);
  }
  return l;
}

}  // namespace

ModelSpec make_toy_model(std::uint64_t seed) {
  Rng rng(seed);
  ModelSpec m;
  const int k_in = rng.integer(2, 4);
  m.input = TensorShape{{1, 8, 8}, k_in};
  const int o1 = rng.integer(2, 4), o2 = rng.integer(2, 4);
  const int k1 = rng.integer(3, 4), k2 = rng.integer(3, 4);

  LayerSpec c1 = weighted(rng, LayerKind::Conv, {o1, 1, 3, 3}, k_in, k1, true);
  c1.name = "conv1";
  LayerSpec c2 = weighted(rng, LayerKind::Conv, {o2, o1, 3, 3}, k1, k2, true);
  c2.name = "conv2";
  LayerSpec pool;
  pool.kind = LayerKind::MaxPool;
  pool.name = "pool";
  pool.dims = {2, 2};
  pool.stride = 2;
  LayerSpec fc = weighted(rng, LayerKind::FullyConnected, {10, o2 * 2 * 2}, k2, 4, false);
  fc.name = "fc";
  m.layers = {c1, c2, pool, fc};
  return m;
}

FixedPointTensor make_toy_input(const ModelSpec& model, std::uint64_t seed) {
  if (!model.input) fail(ErrorCode::InvalidParameter, "model declares no input shape");
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  FixedPointTensor t(model.input->dims, model.input->bits);
  for (auto& v : t.values) v = rng.integer(0, (1 << t.bit_width) - 1);
  return t;
}

}  // namespace nandspin
