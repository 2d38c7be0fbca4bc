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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

namespace nandspin {

/// Breakdown categories used in reports.
enum class Category : std::uint8_t {
  Load,
  Convolution,
  Transfer,
  PoolingCompare,
  BatchNorm,
  Quantization,
};
inline constexpr std::size_t kNumCategories = 6;
inline constexpr std::array<Category, kNumCategories> kAllCategories = {
    Category::Load,           Category::Convolution, Category::Transfer,
    Category::PoolingCompare, Category::BatchNorm,   Category::Quantization};

std::string_view to_string(Category c);

enum class OpKind : std::uint8_t {
  Erase,           // count = devices erased, pulses = erase pulses
  Program,         // count = bits switched AP -> P, pulses = row program pulses
  Read,            // count = row reads
  And,             // count = row AND senses
  BufferWrite,     // count = buffer rows written
  CounterAccumulate,
  CounterShift,
  CounterReset,
  BusBeat,         // count = bus-width beats
  HostOp,          // host-side work (final argmax); free
};
inline constexpr std::size_t kNumOpKinds = 10;

std::string_view to_string(OpKind k);
std::optional<OpKind> op_kind_from_string(std::string_view name);

/// Per-event energy (fJ) and latency (ns). Device figures are the measured
/// defaults; fields listed as "estimated" have no device figure and are exposed for
/// sensitivity studies.
struct CostParams {
  double erase_energy_per_device = 180.0;
  double erase_latency_per_mtj = 0.3;
  double program_energy_per_device = 840.0;
  double program_latency_per_bit = 5.0;
  double read_energy = 4.0;
  double read_latency = 0.17;

  // estimated
  double buffer_write_energy = 10.0;
  double buffer_write_latency = 0.5;
  double counter_step_energy = 16.0;
  double counter_step_latency = 0.1;
  double counter_reset_energy = 8.0;
  double counter_reset_latency = 0.05;
  double bus_beat_energy = 64.0;
  double bus_beat_latency = 1.0;

  int group_size = 8;

  double program_energy_per_bit() const { return program_energy_per_device / group_size; }
  double erase_latency() const { return erase_latency_per_mtj * group_size; }

  CostParams scaled(double factor) const;
  void validate() const;

  nlohmann::json to_json() const;
  /// Overrides the fields present in `j` on top of `base` (defaults when omitted).
  static CostParams from_json(const nlohmann::json& j);
  static CostParams from_json(const nlohmann::json& j, CostParams base);
};

struct CostEvent {
  OpKind kind;
  std::uint64_t count = 1;
  std::uint64_t pulses = 1;
  Category category = Category::Convolution;
};

/// Energy and latency accumulated per category, plus per-kind event counts.
class CostLedger {
 public:
  /// Integer fixed point (attojoules, picoseconds) so that every merge is
  /// exact, associative and commutative. Per-event costs are rounded to the
  /// same grid.
  struct Entry {
    std::int64_t energy_aj = 0;
    std::int64_t latency_ps = 0;
    double energy_fj() const { return static_cast<double>(energy_aj) / kUnitsPerBase; }
    double latency_ns() const { return static_cast<double>(latency_ps) / kUnitsPerBase; }
    friend bool operator==(const Entry&, const Entry&) = default;
  };
  static constexpr double kUnitsPerBase = 1000.0;
  /// One per-event cost on the ledger grid.
  static std::int64_t to_units(double v);

  void charge(const CostParams& params, const CostEvent& event);

  const Entry& at(Category c) const { return entries_[static_cast<std::size_t>(c)]; }
  std::uint64_t events(OpKind k) const { return events_[static_cast<std::size_t>(k)]; }

  double total_energy() const;
  double total_latency() const;
  std::int64_t total_energy_aj() const;
  std::int64_t total_latency_ps() const;
  bool empty() const;

  /// Sequential composition: energy, latency and counts all add.
  CostLedger& merge_serial(const CostLedger& other);
  /// Concurrent lanes: energy and counts add, latency is the per-category max.
  CostLedger& merge_parallel(const CostLedger& other);

  friend bool operator==(const CostLedger&, const CostLedger&) = default;

 private:
  std::array<Entry, kNumCategories> entries_{};
  std::array<std::uint64_t, kNumOpKinds> events_{};
};

/// Lane-max latency model: lanes run concurrently, each lane serial.
CostLedger combine_lanes(std::span<const CostLedger> lanes);

nlohmann::json report_json(const CostLedger& ledger, const CostParams& params);
std::string report_csv(const CostLedger& ledger);

}  // namespace nandspin
