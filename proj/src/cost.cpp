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

#include "nandspin/cost.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "nandspin/errors.hpp"

namespace nandspin {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::Load: return "load";
    case Category::Convolution: return "convolution";
    case Category::Transfer: return "transfer";
    case Category::PoolingCompare: return "pooling_compare";
    case Category::BatchNorm: return "batch_norm";
    case Category::Quantization: return "quantization";
  }
  return "?";
}

namespace {

constexpr std::array<std::string_view, kNumOpKinds> kOpNames = {
    "erase",         "program",       "read",          "and",      "buffer_write",
    "counter_accumulate", "counter_shift", "counter_reset", "bus_beat", "host_op"};

// Fields without a calibrated device figure, listed under "estimated".
constexpr std::array<std::string_view, 8> kEstimatedFields = {
    "buffer_write_energy",  "buffer_write_latency",  "counter_step_energy", "counter_step_latency",
    "counter_reset_energy", "counter_reset_latency", "bus_beat_energy",     "bus_beat_latency"};

}  // namespace

std::string_view to_string(OpKind k) { return kOpNames[static_cast<std::size_t>(k)]; }

std::optional<OpKind> op_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i)
    if (kOpNames[i] == name) return static_cast<OpKind>(i);
  return std::nullopt;
}

CostParams CostParams::scaled(double f) const {
  CostParams p = *this;
  for (double* v : {&p.erase_energy_per_device, &p.erase_latency_per_mtj, &p.program_energy_per_device,
                    &p.program_latency_per_bit, &p.read_energy, &p.read_latency, &p.buffer_write_energy,
                    &p.buffer_write_latency, &p.counter_step_energy, &p.counter_step_latency,
                    &p.counter_reset_energy, &p.counter_reset_latency, &p.bus_beat_energy,
                    &p.bus_beat_latency})
    *v *= f;
  return p;
}

void CostParams::validate() const {
  for (double v : {erase_energy_per_device, erase_latency_per_mtj, program_energy_per_device,
                   program_latency_per_bit, read_energy, read_latency, buffer_write_energy,
                   buffer_write_latency, counter_step_energy, counter_step_latency,
                   counter_reset_energy, counter_reset_latency, bus_beat_energy, bus_beat_latency})
    if (!(v >= 0)) fail(ErrorCode::InvalidParameter, "cost parameters must be non-negative");
  if (group_size < 1) fail(ErrorCode::InvalidParameter, "cost group size must be positive");
}

nlohmann::json CostParams::to_json() const {
  nlohmann::json j = {
      {"erase_energy_per_device", erase_energy_per_device},
      {"erase_latency_per_mtj", erase_latency_per_mtj},
      {"program_energy_per_device", program_energy_per_device},
      {"program_latency_per_bit", program_latency_per_bit},
      {"read_energy", read_energy},
      {"read_latency", read_latency},
      {"buffer_write_energy", buffer_write_energy},
      {"buffer_write_latency", buffer_write_latency},
      {"counter_step_energy", counter_step_energy},
      {"counter_step_latency", counter_step_latency},
      {"counter_reset_energy", counter_reset_energy},
      {"counter_reset_latency", counter_reset_latency},
      {"bus_beat_energy", bus_beat_energy},
      {"bus_beat_latency", bus_beat_latency},
      {"group_size", group_size},
  };
  j["estimated"] = nlohmann::json::array();
  for (auto f : kEstimatedFields) j["estimated"].push_back(f);
  return j;
}

CostParams CostParams::from_json(const nlohmann::json& j) { return from_json(j, CostParams{}); }

CostParams CostParams::from_json(const nlohmann::json& j, CostParams p) {
  auto take = [&](const char* key, double& field) {
    if (j.contains(key)) field = j.at(key).get<double>();
  };
  take("erase_energy_per_device", p.erase_energy_per_device);
  take("erase_latency_per_mtj", p.erase_latency_per_mtj);
  take("program_energy_per_device", p.program_energy_per_device);
  take("program_latency_per_bit", p.program_latency_per_bit);
  take("read_energy", p.read_energy);
  take("read_latency", p.read_latency);
  take("buffer_write_energy", p.buffer_write_energy);
  take("buffer_write_latency", p.buffer_write_latency);
  take("counter_step_energy", p.counter_step_energy);
  take("counter_step_latency", p.counter_step_latency);
  take("counter_reset_energy", p.counter_reset_energy);
  take("counter_reset_latency", p.counter_reset_latency);
  take("bus_beat_energy", p.bus_beat_energy);
  take("bus_beat_latency", p.bus_beat_latency);
  if (j.contains("group_size")) p.group_size = j.at("group_size").get<int>();
  p.validate();
  return p;
}

void CostLedger::charge(const CostParams& p, const CostEvent& e) {
  double energy_each = 0;
  double latency_each = 0;
  switch (e.kind) {
    case OpKind::Erase:
      energy_each = p.erase_energy_per_device;
      latency_each = p.erase_latency();
      break;
    case OpKind::Program:
      energy_each = p.program_energy_per_bit();
      latency_each = p.program_latency_per_bit;
      break;
    case OpKind::Read:
    case OpKind::And:
      energy_each = p.read_energy;
      latency_each = p.read_latency;
      break;
    case OpKind::BufferWrite:
      energy_each = p.buffer_write_energy;
      latency_each = p.buffer_write_latency;
      break;
    case OpKind::CounterAccumulate:
    case OpKind::CounterShift:
      energy_each = p.counter_step_energy;
      latency_each = p.counter_step_latency;
      break;
    case OpKind::CounterReset:
      energy_each = p.counter_reset_energy;
      latency_each = p.counter_reset_latency;
      break;
    case OpKind::BusBeat:
      energy_each = p.bus_beat_energy;
      latency_each = p.bus_beat_latency;
      break;
    case OpKind::HostOp:
      break;
    default:
      fail(ErrorCode::UnknownOpKind, "op kind " + std::to_string(static_cast<int>(e.kind)));
  }
  auto& entry = entries_[static_cast<std::size_t>(e.category)];
  entry.energy_aj += to_units(energy_each) * static_cast<std::int64_t>(e.count);
  entry.latency_ps += to_units(latency_each) * static_cast<std::int64_t>(e.pulses);
  events_[static_cast<std::size_t>(e.kind)] += e.count;
}

std::int64_t CostLedger::to_units(double v) { return std::llround(v * kUnitsPerBase); }

std::int64_t CostLedger::total_energy_aj() const {
  std::int64_t t = 0;
  for (const auto& e : entries_) t += e.energy_aj;
  return t;
}

std::int64_t CostLedger::total_latency_ps() const {
  std::int64_t t = 0;
  for (const auto& e : entries_) t += e.latency_ps;
  return t;
}

double CostLedger::total_energy() const { return static_cast<double>(total_energy_aj()) / kUnitsPerBase; }

double CostLedger::total_latency() const { return static_cast<double>(total_latency_ps()) / kUnitsPerBase; }

bool CostLedger::empty() const { return *this == CostLedger{}; }

CostLedger& CostLedger::merge_serial(const CostLedger& o) {
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    entries_[i].energy_aj += o.entries_[i].energy_aj;
    entries_[i].latency_ps += o.entries_[i].latency_ps;
  }
  for (std::size_t i = 0; i < kNumOpKinds; ++i) events_[i] += o.events_[i];
  return *this;
}

CostLedger& CostLedger::merge_parallel(const CostLedger& o) {
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    entries_[i].energy_aj += o.entries_[i].energy_aj;
    entries_[i].latency_ps = std::max(entries_[i].latency_ps, o.entries_[i].latency_ps);
  }
  for (std::size_t i = 0; i < kNumOpKinds; ++i) events_[i] += o.events_[i];
  return *this;
}

CostLedger combine_lanes(std::span<const CostLedger> lanes) {
  CostLedger out;
  for (const auto& l : lanes) out.merge_parallel(l);
  return out;
}

namespace {

double percent(double part, double total) { return total > 0 ? 100.0 * part / total : 0.0; }

std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

nlohmann::json report_json(const CostLedger& ledger, const CostParams& params) {
  using nlohmann::json;
  const double te = ledger.total_energy();
  const double tl = ledger.total_latency();
  json energy = json::object(), latency = json::object();
  json pe = json::object(), pl = json::object();
  for (auto c : kAllCategories) {
    const auto key = std::string(to_string(c));
    energy[key] = ledger.at(c).energy_fj();
    latency[key] = ledger.at(c).latency_ns();
    pe[key] = percent(ledger.at(c).energy_fj(), te);
    pl[key] = percent(ledger.at(c).latency_ns(), tl);
  }
  json events = json::object();
  for (std::size_t i = 0; i < kNumOpKinds; ++i) {
    auto k = static_cast<OpKind>(i);
    events[std::string(to_string(k))] = ledger.events(k);
  }
  return json{{"energy_fj", energy},
              {"latency_ns", latency},
              {"percentages", {{"energy", pe}, {"latency", pl}}},
              {"totals", {{"energy_fj", te}, {"latency_ns", tl}}},
              {"events", events},
              {"params_echo", params.to_json()}};
}

std::string report_csv(const CostLedger& ledger) {
  std::ostringstream out;
  const double te = ledger.total_energy();
  const double tl = ledger.total_latency();
  out << "category,energy_fj,energy_pct,latency_ns,latency_pct\n";
  for (auto c : kAllCategories) {
    const auto& e = ledger.at(c);
    out << to_string(c) << ',' << fmt_num(e.energy_fj()) << ',' << fmt_num(percent(e.energy_fj(), te)) << ','
        << fmt_num(e.latency_ns()) << ',' << fmt_num(percent(e.latency_ns(), tl)) << '\n';
  }
  return out.str();
}

}  // namespace nandspin
