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

#include <cmath>
#include <random>
#include <vector>

#include "nandspin/errors.hpp"
#include "nandspin/fixed_point.hpp"
#include "oracles.hpp"

using namespace nandspin;

TEST_SUITE("fixed_point") {

TEST_CASE("quantize endpoints and example") {
  const std::int64_t qi[] = {0, 10, 5};
  const auto q = quantize(qi, 0.0, 10.0, 4);
  CHECK(q[0] == 0);
  CHECK(q[1] == 15);
  CHECK(q[2] == 8);
  const std::int64_t wide[] = {-100, 1000};
  const auto c = quantize(wide, 0.0, 10.0, 4);
  CHECK(c[0] == 0);
  CHECK(c[1] == 15);
}

TEST_CASE("quantize errors") {
  CHECK_THROWS_WITH_AS(quantize_affine(3.0, 3.0, 4), doctest::Contains("DegenerateRange"), Error);
  CHECK_THROWS_AS(quantize_affine(5.0, 3.0, 4), Error);
}

TEST_CASE("quantize is monotone, onto and exact on non-negative inputs") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 8);
    const double qmin = std::floor(u(rng) * 200 - 100);
    const double qmax = qmin + 1 + std::floor(u(rng) * 1000);
    std::vector<std::int64_t> xs;
    for (std::int64_t x = static_cast<std::int64_t>(qmin) - 5; x <= static_cast<std::int64_t>(qmax) + 5; ++x)
      xs.push_back(x);
    const auto q = quantize(xs, qmin, qmax, k);
    std::vector<bool> hit(std::size_t{1} << k, false);
    int exact = 0, non_negative = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (i) CHECK(q[i] >= q[i - 1]);
      hit[static_cast<std::size_t>(q[i])] = true;
      const auto want = oracle::quantize_real(static_cast<double>(xs[i]), qmin, qmax, k);
      CHECK(std::llabs(q[i] - want) <= 1);
      if (xs[i] >= 0) {
        exact += q[i] == want;
        ++non_negative;
      }
    }
    // Accumulators are never negative; there the result is exact.
    CHECK(exact == non_negative);
    if (qmax - qmin >= (1 << k))
      for (bool h : hit) CHECK(h);
  }
}

TEST_CASE("batch norm examples") {
  BatchNormParams p{4.0, 2.0, 1.5, 3.0, 1e-5};
  const std::int64_t at_mean[] = {4};
  CHECK(batch_norm(at_mean, p, 4)[0] == 3);
  p.gamma = 0;
  const std::int64_t xs[] = {0, 3, 9, 15};
  for (auto v : batch_norm(xs, p, 4)) CHECK(v == 3);
}

TEST_CASE("batch norm within one grid step of the real formula") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int total = 0, exact = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 8);
    const double top = (1 << k) - 1;
    BatchNormParams p{u(rng) * top, 0.2 + u(rng) * 4, u(rng) * 6 - 2, u(rng) * top, 1e-5};
    std::vector<std::int64_t> xs;
    for (int x = 0; x <= static_cast<int>(top); ++x) xs.push_back(x);
    const auto got = batch_norm(xs, p, k);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double real = oracle::batch_norm_exact(static_cast<double>(xs[i]), p.mu, p.sigma, p.gamma, p.beta, p.eps);
      const double clamped = std::clamp(real, 0.0, top);
      CHECK(std::fabs(static_cast<double>(got[i]) - clamped) <= 1.0);
      exact += got[i] == oracle::batch_norm_real(static_cast<double>(xs[i]), p.mu, p.sigma, p.gamma, p.beta, p.eps, k);
      ++total;
    }
  }
  CHECK(exact >= total - total / 1000);
}

TEST_CASE("affine group shares one shift") {
  const double scales[] = {0.5, -3.25, 100.0}, offsets[] = {1.0, 2.0, 3.0};
  const auto g = make_affine_group(scales, offsets);
  REQUIRE(g.size() == 3);
  CHECK(g[0].shift == g[1].shift);
  CHECK(g[1].shift == g[2].shift);
  for (int i = 0; i < 3; ++i)
    CHECK(std::ldexp(static_cast<double>(g[i].scale), -g[i].shift) == doctest::Approx(scales[i]).epsilon(1e-5));
  CHECK(g[1].apply(4) == static_cast<std::int64_t>(std::floor(4 * -3.25 + 2.0)));
}

TEST_CASE("reciprocal rounds half up exactly") {
  for (std::int64_t d = 1; d <= 64; ++d) {
    const std::int64_t max = 255 * d;
    const auto a = reciprocal_affine(d, max);
    for (std::int64_t x = 0; x <= max; ++x) CHECK(a.apply(x) == (2 * x + d) / (2 * d));
  }
  // 2x2 window [[1,2],[3,2]]: 8/4 = 2.
  CHECK(reciprocal_affine(4, 1020).apply(8) == 2);
  CHECK(reciprocal_affine(4, 1020).apply(10) == 3);
  CHECK_THROWS_AS(reciprocal_affine(0, 10), Error);
}

}  // TEST_SUITE
