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

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "nandspin/errors.hpp"
#include "nandspin/primitives.hpp"
#include "oracles.hpp"

using namespace nandspin;

namespace {

const CostParams kParams{};

std::vector<std::uint64_t> random_column(std::mt19937_64& rng, int columns, int bits) {
  std::vector<std::uint64_t> v(static_cast<std::size_t>(columns));
  for (auto& x : v) x = oracle::random_bits(rng, bits);
  return v;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvariantViolation;
}

FixedPointTensor tensor2d(int rows, int cols, int bits, const std::vector<std::int64_t>& values) {
  FixedPointTensor t({rows, cols}, bits);
  t.values = values;
  return t;
}

}  // namespace

TEST_SUITE("primitives") {

TEST_CASE("bit planes decompose and reconstruct") {
  std::mt19937_64 rng(1);
  FixedPointTensor t({5, 7}, 6);
  for (auto& v : t.values) v = static_cast<std::int64_t>(oracle::random_bits(rng, 6));
  const auto planes = decompose(t);
  REQUIRE(planes.size() == 6);
  for (int n = 0; n < 6; ++n) {
    CHECK(planes[n].plane_index == n);
    for (int i = 0; i < 35; ++i) CHECK(planes[n].bits[i] == ((t.values[i] >> n) & 1));
  }
  CHECK(reconstruct(planes).values == t.values);
}

TEST_CASE("addition") {
  SUBCASE("2 + 3 = 5") {
    Subarray sub({4, 1, 8, 4, 16}, 0, &kParams);
    write_vertical(sub, {0, 2, 0}, std::vector<std::uint64_t>{2}, Category::Convolution);
    write_vertical(sub, {2, 2, 0}, std::vector<std::uint64_t>{3}, Category::Convolution);
    const VerticalOperand ops[] = {{0, 2, 0}, {2, 2, 0}};
    bitserial_add(sub, ops, {8, 3, 0});
    CHECK(sub.peek(8, 0) == 1);
    CHECK(sub.peek(9, 0) == 0);
    CHECK(sub.peek(10, 0) == 1);
  }
  SUBCASE("random operand sets") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const int count = 1 + static_cast<int>(rng() % 16), bits = 1 + static_cast<int>(rng() % 8);
      Subarray sub({32, 128, 8, 4, 16}, 0, &kParams);
      std::vector<VerticalOperand> ops;
      std::vector<std::uint64_t> expect(128, 0);
      for (int i = 0; i < count; ++i) {
        ops.push_back({i * bits, bits, 0});
        const auto vals = random_column(rng, 128, bits);
        write_vertical(sub, ops.back(), vals, Category::Convolution);
        for (int c = 0; c < 128; ++c) expect[c] += vals[c];
      }
      const int width = bits + bit_length(static_cast<std::uint64_t>(count));
      const VerticalOperand res{count * bits, width, 0};
      bitserial_add(sub, ops, res);
      CHECK(peek_vertical(sub, res) == expect);
    }
  }
  SUBCASE("zero operands give zero") {
    Subarray sub({32, 16, 8, 4, 16}, 0, &kParams);
    const VerticalOperand ops[] = {{0, 4, 0}, {4, 4, 0}, {8, 4, 0}};
    bitserial_add(sub, ops, {16, 6, 0});
    CHECK(peek_vertical(sub, {16, 6, 0}) == std::vector<std::uint64_t>(16, 0));
  }
  SUBCASE("grouping does not matter") {
    std::mt19937_64 rng(3);
    Subarray sub({32, 64, 8, 4, 16}, 0, &kParams);
    const VerticalOperand a{0, 5, 0}, b{8, 5, 0}, c{16, 5, 0};
    for (auto op : {a, b, c}) write_vertical(sub, op, random_column(rng, 64, 5), Category::Convolution);
    const VerticalOperand ab{24, 6, 0}, abc1{32, 7, 0}, bc{40, 6, 0}, abc2{48, 7, 0}, flat{56, 7, 0};
    bitserial_add(sub, std::vector{a, b}, ab);
    bitserial_add(sub, std::vector{ab, c}, abc1);
    bitserial_add(sub, std::vector{b, c}, bc);
    bitserial_add(sub, std::vector{a, bc}, abc2);
    bitserial_add(sub, std::vector{a, b, c}, flat);
    CHECK(peek_vertical(sub, abc1) == peek_vertical(sub, abc2));
    CHECK(peek_vertical(sub, abc1) == peek_vertical(sub, flat));
  }
  SUBCASE("shifted operands") {
    std::mt19937_64 rng(4);
    Subarray sub({32, 32, 8, 4, 16}, 0, &kParams);
    const VerticalOperand a{0, 4, 0}, b{4, 4, 3};
    const auto va = random_column(rng, 32, 4), vb = random_column(rng, 32, 4);
    write_vertical(sub, a, va, Category::Convolution);
    write_vertical(sub, b, vb, Category::Convolution);
    const VerticalOperand r{8, 8, 0};
    bitserial_add(sub, std::vector{a, b}, r);
    const auto got = peek_vertical(sub, r);
    for (int c = 0; c < 32; ++c) CHECK(got[c] == va[c] + (vb[c] << 3));
  }
  SUBCASE("result too narrow") {
    Subarray sub({32, 8, 8, 4, 16}, 0, &kParams);
    const VerticalOperand ops[] = {{0, 4, 0}, {4, 4, 0}};
    CHECK(code_of([&] { bitserial_add(sub, ops, {8, 4, 0}); }) == ErrorCode::InsufficientResultRows);
  }
}

TEST_CASE("multiplication") {
  SUBCASE("3 x 3 = 9") {
    Subarray sub({4, 1, 8, 4, 16}, 0, &kParams);
    write_vertical(sub, {0, 2, 0}, std::vector<std::uint64_t>{3}, Category::Convolution);
    bitserial_mul(sub, {0, 2, 0}, 3, 2, {8, 4, 0});
    CHECK(peek_vertical(sub, {8, 4, 0}) == std::vector<std::uint64_t>{9});
  }
  SUBCASE("8 x 8 bits, identities and powers of two") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 12; ++trial) {
      Subarray sub({32, 128, 8, 4, 16}, 0, &kParams);
      const auto vals = random_column(rng, 128, 8);
      const VerticalOperand a{0, 8, 0};
      write_vertical(sub, a, vals, Category::Convolution);
      const std::uint64_t b = trial == 0 ? 0 : trial == 1 ? 1 : oracle::random_bits(rng, 8);
      bitserial_mul(sub, a, b, 8, {8, 16, 0});
      const auto got = peek_vertical(sub, {8, 16, 0});
      for (int c = 0; c < 128; ++c) CHECK(got[c] == vals[c] * b);
      for (int j = 0; j < 8; ++j) {
        const VerticalOperand r{24 + 0, 16, 0};
        Subarray s2({32, 128, 8, 4, 16}, 1, &kParams);
        write_vertical(s2, a, vals, Category::Convolution);
        bitserial_mul(s2, a, std::uint64_t{1} << j, 8, r);
        std::vector<BitRow> stream;
        for (int i = 0; i < 8; ++i) stream.push_back(s2.peek_row(a.row(i)));
        shift_by_row_placement(s2, stream, 48, 16, j);
        CHECK(peek_vertical(s2, r) == peek_vertical(s2, {48, 16, 0}));
      }
    }
  }
  SUBCASE("result too narrow") {
    Subarray sub({32, 8, 8, 4, 16}, 0, &kParams);
    CHECK(code_of([&] { bitserial_mul(sub, {0, 4, 0}, 5, 4, {8, 7, 0}); }) ==
          ErrorCode::InsufficientResultRows);
  }
}

TEST_CASE("comparison") {
  SUBCASE("3 vs 1") {
    Subarray sub({4, 1, 8, 4, 16}, 0, &kParams);
    write_vertical(sub, {0, 2, 0}, std::vector<std::uint64_t>{3}, Category::PoolingCompare);
    write_vertical(sub, {2, 2, 0}, std::vector<std::uint64_t>{1}, Category::PoolingCompare);
    bitserial_compare(sub, {0, 2, 0}, {2, 2, 0}, 8, 9);
    CHECK(sub.peek(9, 0));
  }
  SUBCASE("exhaustive 4-bit pairs with max/min select") {
    Subarray sub({32, 256, 8, 4, 16}, 0, &kParams);
    std::vector<std::uint64_t> a(256), b(256);
    for (int i = 0; i < 256; ++i) {
      a[i] = static_cast<std::uint64_t>(i >> 4);
      b[i] = static_cast<std::uint64_t>(i & 15);
    }
    const VerticalOperand va{0, 4, 0}, vb{8, 4, 0}, mx{16, 4, 0}, mn{24, 4, 0};
    write_vertical(sub, va, a, Category::PoolingCompare);
    write_vertical(sub, vb, b, Category::PoolingCompare);
    bitserial_compare(sub, va, vb, 32, 33);
    execute(build_select(33, va, vb, mx), sub);
    execute(build_select(33, vb, va, mn), sub);
    const BitRow res = sub.peek_row(33);
    const auto gmax = peek_vertical(sub, mx), gmin = peek_vertical(sub, mn);
    for (int i = 0; i < 256; ++i) {
      CHECK(res[i] == (a[i] > b[i]));
      CHECK(gmax[i] == std::max(a[i], b[i]));
      CHECK(gmin[i] == std::min(a[i], b[i]));
    }
  }
  SUBCASE("random 8-bit pairs") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 8; ++trial) {
      Subarray sub({32, 128, 8, 4, 16}, 0, &kParams);
      auto a = random_column(rng, 128, 8), b = random_column(rng, 128, 8);
      for (int c = 0; c < 8; ++c) b[c] = a[c];  // equality columns
      write_vertical(sub, {0, 8, 0}, a, Category::PoolingCompare);
      write_vertical(sub, {8, 8, 0}, b, Category::PoolingCompare);
      bitserial_compare(sub, {0, 8, 0}, {8, 8, 0}, 16, 17);
      const BitRow res = sub.peek_row(17);
      for (int c = 0; c < 128; ++c) CHECK(res[c] == (a[c] > b[c]));
    }
  }
}

TEST_CASE("invert, relu and constants") {
  std::mt19937_64 rng(7);
  Subarray sub({32, 64, 8, 4, 16}, 0, &kParams);
  const auto v = random_column(rng, 64, 6);
  const VerticalOperand x{0, 6, 0}, inv{8, 6, 0}, relu{16, 5, 0};
  write_vertical(sub, x, v, Category::BatchNorm);
  sub.program_bit_row(24, ones(64));
  execute(build_invert(x, 24, inv, Category::BatchNorm), sub);
  execute(build_relu(x, relu, Category::BatchNorm), sub);
  const auto gi = peek_vertical(sub, inv), gr = peek_vertical(sub, relu);
  for (int c = 0; c < 64; ++c) {
    CHECK(gi[c] == (~v[c] & 63));
    CHECK(gr[c] == (v[c] & 32 ? 0 : v[c]));
  }
  const auto k = random_column(rng, 64, 5);
  execute(build_write_constants({32, 5, 0}, k, Category::BatchNorm), sub);
  CHECK(peek_vertical(sub, {32, 5, 0}) == k);
}

TEST_CASE("row placement") {
  Subarray sub({4, 4, 8, 4, 16}, 0, &kParams);
  const std::vector<BitRow> three = {ones(4), ones(4)};
  shift_by_row_placement(sub, three, 0, 4);
  CHECK(peek_vertical(sub, {0, 4, 0}) == std::vector<std::uint64_t>(4, 3));
  shift_by_row_placement(sub, std::vector<BitRow>{}, 8, 0);
  CHECK(peek_vertical(sub, {8, 4, 0}) == std::vector<std::uint64_t>(4, 0));
  // Counter stream of 6 placed into rows.
  for (int i = 0; i < 6; ++i) sub.accumulate_counters(ones(4));
  std::vector<BitRow> stream;
  for (int i = 0; i < 3; ++i) stream.push_back(sub.counter_lsb_and_shift());
  shift_by_row_placement(sub, stream, 16, 4);
  CHECK(peek_vertical(sub, {16, 4, 0}) == std::vector<std::uint64_t>(4, 6));
  CHECK(code_of([&] { shift_by_row_placement(sub, stream, 24, 3, 1); }) == ErrorCode::InsufficientResultRows);
}

TEST_CASE("layout and allocation") {
  ColumnVectorLayout ok{{{0, 4, 0}, {4, 4, 0}}, VerticalOperand{8, 5, 0}, 13, 14};
  ok.validate(256);
  ColumnVectorLayout clash{{{0, 4, 0}, {3, 4, 0}}, std::nullopt, std::nullopt, std::nullopt};
  CHECK(code_of([&] { clash.validate(256); }) == ErrorCode::GeometryMismatch);
  ColumnVectorLayout tag_clash{{{0, 4, 0}}, std::nullopt, 2, 5};
  CHECK(code_of([&] { tag_clash.validate(256); }) == ErrorCode::GeometryMismatch);

  Subarray sub({4, 8, 8, 4, 16}, 0, &kParams);
  RowAllocator alloc(4, 8);
  const auto a = alloc.allocate(sub, 9);
  CHECK(a.base_row == 0);
  CHECK(alloc.free_device_rows() == 2);
  const auto b = alloc.allocate(sub, 3);
  CHECK(b.base_row == 16);
  write_vertical(sub, b, std::vector<std::uint64_t>(8, 5), Category::Convolution);
  alloc.release(b);
  CHECK(code_of([&] { (void)alloc.allocate(sub, 17); }) == ErrorCode::CapacityExceeded);
  const auto c = alloc.allocate(sub, 8);
  CHECK(c.base_row == 16);
  CHECK(peek_vertical(sub, c) == std::vector<std::uint64_t>(8, 0));  // released rows come back erased
}

TEST_CASE("bitwise convolution examples") {
  SUBCASE("1x1") {
    const auto out = bitwise_convolution(decompose(tensor2d(1, 1, 2, {3})), decompose(tensor2d(1, 1, 2, {2})), 1);
    CHECK(out.values == std::vector<std::int64_t>{6});
  }
  SUBCASE("zero weight") {
    const auto out = bitwise_convolution(decompose(tensor2d(3, 4, 3, {1, 2, 3, 4, 5, 6, 7, 0, 1, 2, 3, 4})),
                                         decompose(tensor2d(2, 2, 2, {0, 0, 0, 0})), 1);
    CHECK(out.values == std::vector<std::int64_t>(6, 0));
  }
  SUBCASE("2x5 input, 2x2 weight") {
    const std::vector<std::int64_t> in = {1, 3, 0, 2, 1, 2, 2, 3, 1, 0}, w = {3, 1, 2, 2};
    const auto out = bitwise_convolution(decompose(tensor2d(2, 5, 2, in)), decompose(tensor2d(2, 2, 2, w)), 1);
    CHECK(out.dims == std::vector<int>{1, 4});
    CHECK(out.values == oracle::conv(in, 1, 2, 5, w, 1, 2, 2, 1));
  }
  SUBCASE("stride must be positive") {
    CHECK(code_of([&] {
            (void)bitwise_convolution(decompose(tensor2d(2, 2, 1, {1, 1, 1, 1})),
                                      decompose(tensor2d(1, 1, 1, {1})), 0);
          }) == ErrorCode::StrideInvalid);
  }
  SUBCASE("window larger than input") {
    CHECK(code_of([&] {
            (void)bitwise_convolution(decompose(tensor2d(2, 2, 1, {1, 1, 1, 1})),
                                      decompose(tensor2d(3, 1, 1, {1, 1, 1})), 1);
          }) == ErrorCode::DimMismatch);
  }
}

TEST_CASE("bitwise convolution equals both oracles") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 60; ++trial) {
    const int h = 1 + static_cast<int>(rng() % 8), w = 1 + static_cast<int>(rng() % 8);
    const int kh = 1 + static_cast<int>(rng() % h), kw = 1 + static_cast<int>(rng() % w);
    const int n = 1 + static_cast<int>(rng() % 8), m = 1 + static_cast<int>(rng() % 8);
    const int s = 1 + static_cast<int>(rng() % 3);
    std::vector<std::int64_t> in(static_cast<std::size_t>(h * w)), wt(static_cast<std::size_t>(kh * kw));
    for (auto& v : in) v = static_cast<std::int64_t>(oracle::random_bits(rng, n));
    for (auto& v : wt) v = static_cast<std::int64_t>(oracle::random_bits(rng, m));
    CAPTURE(trial);
    const auto out = bitwise_convolution(decompose(tensor2d(h, w, n, in)), decompose(tensor2d(kh, kw, m, wt)), s);
    const auto direct = oracle::conv(in, 1, h, w, wt, 1, kh, kw, s);
    CHECK(out.values == direct);
    CHECK(oracle::conv_by_planes(in, h, w, n, wt, kh, kw, m, s) == direct);
  }
}

TEST_CASE("window groups and cross-writing") {
  for (int kw = 1; kw <= 5; ++kw)
    for (int s = 1; s <= 3; ++s)
      for (int width = kw; width <= 12; ++width) {
        ConvShape shape;
        shape.height = 2;
        shape.width = width;
        shape.kernel_w = kw;
        shape.stride = s;
        const auto groups = window_groups(shape);
        std::set<std::pair<int, int>> seen;
        for (const auto& g : groups) {
          std::vector<int> cols(static_cast<std::size_t>(width), 0);
          for (int ox : g.oxs) {
            CHECK(seen.insert({g.oy, ox}).second);
            for (int j = 0; j < kw; ++j) CHECK(cols[ox * s + j]++ == 0);
          }
        }
        CHECK(seen.size() == static_cast<std::size_t>(shape.out_h() * shape.out_w()));
      }
  for (int planes = 1; planes <= 8; ++planes)
    for (int groups = 1; groups <= 12; ++groups) {
      const auto periods = cross_write_periods(planes, groups);
      std::set<std::pair<int, int>> pairs;
      for (const auto& p : periods) {
        std::set<int> planes_in, groups_in;
        for (const auto& a : p) {
          CHECK(planes_in.insert(a.plane).second);
          CHECK(groups_in.insert(a.group).second);
          CHECK(pairs.insert({a.plane, a.group}).second);
        }
      }
      CHECK(pairs.size() == static_cast<std::size_t>(planes * groups));
    }
}

TEST_CASE("schedules never read unwritten rows") {
  // Rows outside the operands stay untouched: compare a dump before and after.
  Subarray sub({32, 16, 8, 4, 16}, 0, &kParams);
  std::mt19937_64 rng(9);
  write_vertical(sub, {0, 4, 0}, random_column(rng, 16, 4), Category::Convolution);
  write_vertical(sub, {4, 4, 0}, random_column(rng, 16, 4), Category::Convolution);
  const auto before = sub.dump();
  const auto s = build_add(std::vector<VerticalOperand>{{0, 4, 0}, {4, 4, 0}}, {8, 5, 0});
  for (const auto& op : s.ops())
    if (const auto* r = std::get_if<uop::ReadToCounter>(&op.body)) CHECK(r->bit_row < 8);
  execute(s, sub);
  const auto after = sub.dump();
  CHECK(after.substr(0, 8 * 17) == before.substr(0, 8 * 17));
  CHECK(after.substr(13 * 17) == before.substr(13 * 17));
}

}  // TEST_SUITE
