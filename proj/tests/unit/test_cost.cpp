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
#include <vector>

#include "nandspin/cost.hpp"
#include "nandspin/errors.hpp"
#include "nandspin/schedule.hpp"
#include "nandspin/subarray.hpp"

using namespace nandspin;

namespace {

CostLedger random_ledger(std::mt19937_64& rng, const CostParams& p) {
  CostLedger l;
  for (int i = 0; i < 20; ++i) {
    const auto kind = static_cast<OpKind>(rng() % (kNumOpKinds - 1));
    const auto cat = kAllCategories[rng() % kNumCategories];
    const std::uint64_t count = rng() % 50;
    l.charge(p, {kind, count, count ? 1 + rng() % 3 : 0, cat});
  }
  return l;
}

}  // namespace

TEST_SUITE("cost") {

TEST_CASE("defaults") {
  CostParams p;
  CHECK(p.erase_energy_per_device == 180.0);
  CHECK(p.erase_latency_per_mtj == 0.3);
  CHECK(p.program_energy_per_device == 840.0);
  CHECK(p.program_latency_per_bit == 5.0);
  CHECK(p.read_energy == 4.0);
  CHECK(p.read_latency == 0.17);
  CHECK(p.program_energy_per_bit() * p.group_size == p.program_energy_per_device);
  CHECK(p.program_energy_per_bit() == 105.0);
}

TEST_CASE("single events") {
  CostParams p;
  CostLedger l;
  l.charge(p, {OpKind::Erase, 1, 1, Category::Load});
  CHECK(l.at(Category::Load).energy_aj == 180000);
  CHECK(l.at(Category::Load).latency_ps == 2400);
  CostLedger r;
  r.charge(p, {OpKind::Read, 1, 1, Category::Load});
  CHECK(r.at(Category::Load).energy_fj() == 4.0);
  CHECK(r.at(Category::Load).latency_ns() == 0.17);
  CostLedger z;
  z.charge(p, {OpKind::Read, 0, 0, Category::Load});
  CHECK(z.total_energy_aj() == 0);
  CHECK(z.total_latency_ps() == 0);
}

TEST_CASE("lane composition") {
  CostParams p;
  SubarrayGeometry g;
  Subarray a(g, 0, &p), b(g, 1, &p);
  for (Subarray* s : {&a, &b}) s->charge(OpKind::Program, 2, 2);  // 10 ns each
  const std::vector<CostLedger> lanes = {a.take_ledger(), b.take_ledger()};
  const CostLedger both = combine_lanes(lanes);
  CHECK(both.total_latency_ps() == 10000);
  CHECK(both.total_energy_aj() == 2 * lanes[0].total_energy_aj());

  Subarray c(g, 2, &p);
  c.program_bit_row(0, ones(128));
  for (int i = 0; i < 3; ++i) (void)c.read_bit_row(0);
  // One program pulse plus three serial reads.
  CHECK(c.ledger().total_latency_ps() == 5000 + 3 * 170);

  Subarray d(g, 3, &p);
  Schedule s;
  for (int r = 0; r < 8; ++r) {
    BitRow row = zeros(128);
    row[0] = 1;
    s.add(uop::Program{r, row});
  }
  execute(s, d);
  CHECK(d.ledger().total_latency_ps() == 40000);
}

TEST_CASE("merge is associative and commutative") {
  std::mt19937_64 rng(1);
  CostParams p;
  for (int t = 0; t < 50; ++t) {
    const CostLedger a = random_ledger(rng, p), b = random_ledger(rng, p), c = random_ledger(rng, p);
    CHECK((CostLedger(a).merge_serial(b) == CostLedger(b).merge_serial(a)));
    CHECK((CostLedger(a).merge_parallel(b) == CostLedger(b).merge_parallel(a)));
    CHECK((CostLedger(a).merge_serial(b).merge_serial(c) == CostLedger(a).merge_serial(CostLedger(b).merge_serial(c))));
    CHECK((CostLedger(a).merge_parallel(b).merge_parallel(c) ==
           CostLedger(a).merge_parallel(CostLedger(b).merge_parallel(c))));
    CostLedger total = a;
    total.merge_serial(b);
    std::int64_t sum = 0;
    for (auto cat : kAllCategories) {
      CHECK(total.at(cat).energy_aj >= 0);
      sum += total.at(cat).energy_aj;
    }
    CHECK(sum == total.total_energy_aj());
  }
}

TEST_CASE("parameter linearity") {
  std::mt19937_64 rng(2), rng2(2);
  CostParams p;
  const CostParams p2 = p.scaled(2.0);
  for (int t = 0; t < 20; ++t) {
    const CostLedger a = random_ledger(rng, p), b = random_ledger(rng2, p2);
    for (auto cat : kAllCategories) {
      CHECK(b.at(cat).energy_aj == 2 * a.at(cat).energy_aj);
      CHECK(b.at(cat).latency_ps == 2 * a.at(cat).latency_ps);
    }
    for (std::size_t k = 0; k < kNumOpKinds; ++k)
      CHECK(a.events(static_cast<OpKind>(k)) == b.events(static_cast<OpKind>(k)));
  }
}

TEST_CASE("unknown op kind") {
  CostLedger l;
  CHECK_THROWS_AS(l.charge({}, {static_cast<OpKind>(99), 1, 1, Category::Load}), Error);
  CHECK_FALSE(op_kind_from_string("teleport"));
  CHECK(op_kind_from_string("erase") == OpKind::Erase);
}

TEST_CASE("reports") {
  CostParams p;
  const CostLedger empty;
  const auto j = report_json(empty, p);
  for (auto cat : kAllCategories) {
    const auto key = std::string(to_string(cat));
    CHECK(j["energy_fj"][key] == 0.0);
    CHECK(j["percentages"]["energy"][key] == 0.0);
    CHECK(j["percentages"]["latency"][key] == 0.0);
  }
  CHECK(j["params_echo"]["estimated"].size() == 8);

  CostLedger conv;
  conv.charge(p, {OpKind::And, 10, 10, Category::Convolution});
  const auto jc = report_json(conv, p);
  CHECK(jc["percentages"]["energy"]["convolution"] == 100.0);
  CHECK(jc["events"]["and"] == 10);
  const auto csv = report_csv(conv);
  CHECK(csv.rfind("category,energy_fj,energy_pct,latency_ns,latency_pct\n", 0) == 0);
  CHECK(csv.find("convolution,40.000000,100.000000,1.700000,100.000000\n") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);

  std::mt19937_64 rng(3);
  const auto jr = report_json(random_ledger(rng, p), p);
  double s = 0;
  for (auto& [k, v] : jr["percentages"]["energy"].items()) s += v.get<double>();
  CHECK(s == doctest::Approx(100.0).epsilon(1e-4));
}

TEST_CASE("params json round trip and validation") {
  CostParams p;
  p.bus_beat_energy = 12.5;
  const CostParams q = CostParams::from_json(p.to_json());
  CHECK(q.bus_beat_energy == 12.5);
  CHECK(q.read_latency == 0.17);
  CHECK_THROWS_AS(CostParams::from_json({{"read_energy", -1.0}}), Error);
}

}  // TEST_SUITE
