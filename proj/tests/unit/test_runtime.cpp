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

#include <doctest.h>

#include <random>
#include <string>

#include "nandspin/errors.hpp"
#include "nandspin/reference.hpp"
#include "nandspin/runtime.hpp"
#include "nandspin/toy.hpp"
#include "oracles.hpp"

using namespace nandspin;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

LayerSpec random_weighted(std::mt19937_64& rng, LayerKind kind, std::vector<int> dims, int k_in, int k_out,
                          bool bn) {
  LayerSpec l;
  l.kind = kind;
  l.name = "rand";
  l.dims = std::move(dims);
  l.k_w = 1 + static_cast<int>(rng() % 8);
  l.k = k_out;
  std::size_t n = 1;
  for (int d : l.dims) n *= static_cast<std::size_t>(d);
  for (std::size_t i = 0; i < n; ++i) l.weights.push_back(static_cast<std::int64_t>(oracle::random_bits(rng, l.k_w)));
  const double fan = static_cast<double>(n) / l.dims[0];
  const double mean = fan * ((1 << k_in) - 1) / 2.0 * ((1 << l.k_w) - 1) / 2.0;
  l.qmin = mean * uniform(rng, 0.0, 0.8);
  l.qmax = mean * uniform(rng, 1.2, 2.0) + 1;
  for (int o = 0; o < l.dims[0]; ++o) l.bias.push_back(mean * uniform(rng, -0.2, 0.2));
  if (bn) {
    std::vector<BatchNormParams> p;
    const double top = (1 << k_out) - 1;
    for (int o = 0; o < l.dims[0]; ++o)
      p.push_back({uniform(rng, 0, top), uniform(rng, 0.3, 4), uniform(rng, -2, 3), uniform(rng, 0, top), 1e-5});
    l.bn = p;
  }
  return l;
}

FixedPointTensor random_input(std::mt19937_64& rng, std::vector<int> dims, int bits) {
  FixedPointTensor t(std::move(dims), bits);
  for (auto& v : t.values) v = static_cast<std::int64_t>(oracle::random_bits(rng, bits));
  return t;
}

void check_against_reference(const ModelSpec& m, const FixedPointTensor& in, const RunOptions& opt = {}) {
  const auto sim = run_model(m, in, opt);
  const auto ref = run_reference(m, in);
  CHECK(sim.output.dims == ref.dims);
  CHECK(sim.output.values == ref.values);
}

}  // namespace

TEST_SUITE("runtime") {

TEST_CASE("affine stage matches the host formula") {
  std::mt19937_64 rng(1);
  const CostParams params;
  for (int trial = 0; trial < 40; ++trial) {
    SubarrayGeometry g;
    g.columns = 32;
    Subarray sub(g, 0, &params);
    RowAllocator alloc(g.device_rows, g.group_size);
    const int xbits = 1 + static_cast<int>(rng() % 10), k = 1 + static_cast<int>(rng() % 8);
    const auto xs = random_input(rng, {32}, xbits).values;
    std::vector<double> scales, offsets;
    for (int c = 0; c < 32; ++c) {
      scales.push_back(uniform(rng, -3, 3) * ((1 << k) / std::ldexp(1.0, xbits)));
      offsets.push_back(uniform(rng, -4, (1 << k) + 4));
    }
    if (trial % 4 == 0) std::fill(scales.begin(), scales.end(), scales[0]);
    const auto aff = make_affine_group(scales, offsets);
    const VerticalOperand x = alloc.allocate(sub, xbits);
    std::vector<std::uint64_t> ux(xs.begin(), xs.end());
    write_vertical(sub, x, ux, Category::Quantization);
    const auto out = affine_stage(sub, alloc, x, (std::uint64_t{1} << xbits) - 1, aff, k, Category::Quantization);
    CHECK(out.width <= k);
    const auto got = peek_vertical(sub, out);
    for (int c = 0; c < 32; ++c) CHECK(static_cast<std::int64_t>(got[c]) == affine_clamp(aff[c], xs[c], k));
  }
}

TEST_CASE("identity layers") {
  std::mt19937_64 rng(2);
  ModelSpec m;
  m.input = TensorShape{{1, 5, 5}, 4};
  LayerSpec id;
  id.kind = LayerKind::Conv;
  id.dims = {1, 1, 1, 1};
  id.k_w = 1;
  id.weights = {1};
  id.qmin = 0;
  id.qmax = 15;
  m.layers = {id};
  const auto in = random_input(rng, {1, 5, 5}, 4);
  CHECK(run_model(m, in).output.values == in.values);

  ModelSpec fc;
  fc.input = TensorShape{{4}, 3};
  LayerSpec l;
  l.kind = LayerKind::FullyConnected;
  l.dims = {4, 4};
  l.k_w = 1;
  l.weights = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  l.qmin = 0;
  l.qmax = 7;
  fc.layers = {l};
  const auto v = random_input(rng, {4}, 3);
  const auto r = run_model(fc, v);
  CHECK(r.output.values == v.values);
  REQUIRE(r.argmax);
  CHECK(*r.argmax == argmax(v));
}

TEST_CASE("empty model") {
  std::mt19937_64 rng(3);
  const auto in = random_input(rng, {2, 3, 3}, 5);
  const auto r = run_model(ModelSpec{}, in);
  CHECK(r.output == in);
  CHECK(r.ledger.at(Category::Convolution).energy_aj == 0);
  CHECK(r.ledger.at(Category::Quantization).energy_aj == 0);
}

TEST_CASE("negative pre-activations clamp to zero") {
  std::mt19937_64 rng(4);
  ModelSpec m;
  m.input = TensorShape{{1, 4, 4}, 3};
  LayerSpec l = random_weighted(rng, LayerKind::Conv, {2, 1, 2, 2}, 3, 4, true);
  for (auto& p : *l.bn) {
    p.gamma = -1;
    p.beta = -20;
  }
  m.layers = {l};
  const auto r = run_model(m, random_input(rng, {1, 4, 4}, 3));
  for (auto v : r.output.values) CHECK(v == 0);
}

TEST_CASE("random single layers match the reference") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 24; ++trial) {
    CAPTURE(trial);
    const int kin = 1 + static_cast<int>(rng() % 8), kout = 1 + static_cast<int>(rng() % 8);
    const int c = 1 + static_cast<int>(rng() % 3), h = 3 + static_cast<int>(rng() % 6);
    int w = 3 + static_cast<int>(rng() % 14);
    ModelSpec m;
    m.input = TensorShape{{c, h, w}, kin};
    switch (trial % 5) {
      case 0:
      case 1: {
        const int kh = 1 + static_cast<int>(rng() % 3), kw = 1 + static_cast<int>(rng() % 3);
        LayerSpec l = random_weighted(rng, LayerKind::Conv, {1 + static_cast<int>(rng() % 3), c, kh, kw}, kin, kout,
                                      trial % 2 == 0);
        l.stride = 1 + static_cast<int>(rng() % 2);
        m.layers = {l};
        break;
      }
      case 2: {
        // Inputs beyond one subarray's rows are a capacity error, tested elsewhere.
        w = std::min(w, 256 / (c * h));
        m.input = TensorShape{{c, h, w}, kin};
        m.layers = {random_weighted(rng, LayerKind::FullyConnected, {1 + static_cast<int>(rng() % 8), c * h * w},
                                    kin, kout, rng() % 2 == 0)};
        break;
      }
      default: {
        LayerSpec p;
        p.kind = std::array{LayerKind::MaxPool, LayerKind::MinPool, LayerKind::AvgPool}[rng() % 3];
        p.dims = {2, 1 + static_cast<int>(rng() % 3)};
        p.stride = 1 + static_cast<int>(rng() % 2);
        m.layers = {p};
      }
    }
    check_against_reference(m, random_input(rng, {c, h, w}, kin));
  }
}

TEST_CASE("fully connected matches a matvec oracle") {
  std::mt19937_64 rng(6);
  ModelSpec m;
  m.input = TensorShape{{4}, 4};
  LayerSpec l = random_weighted(rng, LayerKind::FullyConnected, {8, 4}, 4, 8, false);
  l.k_w = 4;
  for (auto& w : l.weights) w &= 15;
  l.bias.clear();
  l.qmin = 0;
  l.qmax = 255;  // codes equal the raw dot products
  m.layers = {l};
  const auto in = random_input(rng, {4}, 4);
  const auto out = run_model(m, in).output.values;
  for (int o = 0; o < 8; ++o) {
    std::int64_t dot = 0;
    for (int i = 0; i < 4; ++i) dot += l.weights[o * 4 + i] * in.values[i];
    CHECK(out[o] == std::min<std::int64_t>(dot, 255));
  }
}

TEST_CASE("pool examples") {
  ModelSpec m;
  m.input = TensorShape{{1, 2, 2}, 2};
  LayerSpec p;
  p.kind = LayerKind::MaxPool;
  p.dims = {2, 2};
  p.stride = 2;
  m.layers = {p};
  FixedPointTensor in({1, 2, 2}, 2);
  in.values = {1, 2, 3, 0};
  CHECK(run_model(m, in).output.values == std::vector<std::int64_t>{3});
  m.layers[0].kind = LayerKind::AvgPool;
  in.values = {1, 2, 3, 2};
  CHECK(run_model(m, in).output.values == std::vector<std::int64_t>{2});
  in.values = {3, 3, 3, 3};
  CHECK(run_model(m, in).output.values == std::vector<std::int64_t>{3});
}

TEST_CASE("toy models are bit-exact and touch every category") {
  for (std::uint64_t seed = 100; seed < 106; ++seed) {
    const ModelSpec m = make_toy_model(seed);
    const auto in = make_toy_input(m, seed);
    const auto r = run_model(m, in);
    CHECK(r.output.values == run_reference(m, in).values);
    for (auto c : kAllCategories) CHECK(r.ledger.at(c).energy_aj > 0);
    std::int64_t layers = 0;
    for (const auto& l : r.layers) layers += l.ledger.total_energy_aj();
    CHECK(layers == r.ledger.total_energy_aj());
  }
}

TEST_CASE("multi-layer models with larger dims") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 4; ++trial) {
    const int kin = 2 + static_cast<int>(rng() % 3);
    ModelSpec m;
    m.input = TensorShape{{2, 16, 16}, kin};
    LayerSpec c1 = random_weighted(rng, LayerKind::Conv, {3, 2, 3, 3}, kin, 4, true);
    LayerSpec pool;
    pool.kind = LayerKind::AvgPool;
    pool.dims = {2, 2};
    pool.stride = 2;
    LayerSpec c2 = random_weighted(rng, LayerKind::Conv, {2, 3, 2, 2}, 4, 3, false);
    LayerSpec fc = random_weighted(rng, LayerKind::FullyConnected, {5, 2 * 6 * 6}, 3, 4, true);
    m.layers = {c1, pool, c2, fc};
    check_against_reference(m, random_input(rng, {2, 16, 16}, kin));
  }
}

TEST_CASE("thread count does not change results, ledgers or traces") {
  const ModelSpec m = make_toy_model(42);
  const auto in = make_toy_input(m, 42);
  RunOptions one, many;
  one.trace = many.trace = true;
  many.threads = 6;
  const auto a = run_model(m, in, one), b = run_model(m, in, many);
  CHECK(a.output == b.output);
  CHECK(a.ledger == b.ledger);
  REQUIRE(a.trace.size() == b.trace.size());
  bool same = true;
  for (std::size_t i = 0; i < a.trace.size(); ++i)
    same = same && a.trace[i].op == b.trace[i].op && a.trace[i].subarray == b.trace[i].subarray &&
           a.trace[i].rows == b.trace[i].rows && a.trace[i].energy_fj == b.trace[i].energy_fj;
  CHECK(same);
}

TEST_CASE("capacity errors name the layer") {
  const ModelSpec m = make_toy_model(1);
  RunOptions opt;
  opt.geometry.device_rows = 3;
  try {
    (void)run_model(m, make_toy_input(m, 1), opt);
    FAIL("expected CapacityExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CapacityExceeded);
    CHECK(std::string(e.what()).find("conv1") != std::string::npos);
  }
}

TEST_CASE("lane executor rethrows the lowest failing lane") {
  LaneExecutor ex(4);
  std::vector<int> hits(100, 0);
  ex.for_each(100, [&](int i) { hits[i]++; });
  for (int h : hits) CHECK(h == 1);
  try {
    ex.for_each(50, [](int i) {
      if (i == 7 || i == 31) throw Error(ErrorCode::InvariantViolation, "lane " + std::to_string(i));
    });
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("lane 7") != std::string::npos);
  }
}

}  // TEST_SUITE
