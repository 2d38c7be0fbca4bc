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
#include <span>
#include <string>
#include <vector>

#include "nandspin/bits.hpp"
#include "nandspin/cost.hpp"
#include "nandspin/device.hpp"

namespace nandspin {

/// Subarray shape. The G junctions of a device stack along the row axis, so
/// device row d covers bit rows [d*G, d*G + G).
struct SubarrayGeometry {
  int device_rows = 32;
  int columns = 128;
  int group_size = 8;
  int buffer_rows = 4;
  int counter_width = 16;

  int bit_rows() const { return device_rows * group_size; }
  void validate() const;
  friend bool operator==(const SubarrayGeometry&, const SubarrayGeometry&) = default;
};

struct TraceEvent {
  std::string op;
  int subarray = 0;
  std::vector<int> rows;
  Category category = Category::Convolution;
  double energy_fj = 0;
  double latency_ns = 0;
  std::string note;
};

/// One NAND-SPIN subarray: device grid, sense amplifiers, weight buffer and a
/// bit-counter per column. Every access charges the subarray's private lane
/// ledger under the currently selected category.
class Subarray {
 public:
  Subarray(SubarrayGeometry geometry, int id, const CostParams* params,
           ProgramCheck check = ProgramCheck::Strict);

  const SubarrayGeometry& geometry() const { return geom_; }
  int id() const { return id_; }
  int columns() const { return geom_.columns; }
  int bit_rows() const { return geom_.bit_rows(); }

  // --- memory mode -------------------------------------------------------
  /// Erase the device row then program its G bit rows from `data`.
  void write_row_group(int device_row, std::span<const BitRow> data);
  /// Erase every device in one device row.
  void erase_device_row(int device_row);
  /// Program the 1-bits of `bits` into an erased bit row.
  void program_bit_row(int bit_row, std::span<const std::uint8_t> bits);
  BitRow read_bit_row(int bit_row);

  // --- acceleration mode -------------------------------------------------
  /// Columnwise AND of a stored row with a full-width buffer row.
  BitRow and_bit_row(int bit_row, int buffer_row);
  /// AND against the first `width` bits of a buffer row, replicated at each
  /// column offset. Columns outside every window see FU low.
  BitRow and_bit_row_aligned(int bit_row, int buffer_row, int width, std::span<const int> offsets);
  /// AND against a single FU level driven on every column.
  BitRow and_bit_row_broadcast(int bit_row, bool fu);

  void accumulate_counters(std::span<const std::uint8_t> bits);
  /// Emit every counter's LSB, then halve the counters.
  BitRow counter_lsb_and_shift();
  BitRow counter_lsb() const;
  void reset_counters();
  const std::vector<std::uint32_t>& counters() const { return counters_; }

  void load_buffer_row(int buffer_row, std::span<const std::uint8_t> bits);
  const std::optional<BitRow>& buffer_row(int buffer_row) const;
  int buffer_writes() const { return buffer_writes_; }

  // --- introspection (free of cost) -------------------------------------
  bool peek(int bit_row, int column) const;
  BitRow peek_row(int bit_row) const;
  const NandSpinDevice& device(int device_row, int column) const;
  /// Text grid of 0/1, one line per bit row.
  std::string dump() const;

  // --- accounting ----------------------------------------------------------
  void set_category(Category c) { category_ = c; }
  Category category() const { return category_; }
  void charge(OpKind kind, std::uint64_t count, std::uint64_t pulses, std::vector<int> rows = {});
  const CostLedger& ledger() const { return ledger_; }
  CostLedger take_ledger();

  void enable_trace(bool on) { tracing_ = on; }
  bool tracing() const { return tracing_; }
  /// Zero-cost trace marker.
  void annotate(std::string note);
  std::vector<TraceEvent> take_trace();

 private:
  void check_bit_row(int bit_row) const;
  void check_device_row(int device_row) const;
  void check_width(std::size_t width) const;
  const BitRow& loaded_buffer(int buffer_row) const;

  SubarrayGeometry geom_;
  int id_;
  const CostParams* params_;
  ProgramCheck check_;
  std::vector<NandSpinDevice> devices_;  // row-major [device_row][column]
  std::vector<std::optional<BitRow>> buffer_;
  std::vector<std::uint32_t> counters_;
  int buffer_writes_ = 0;
  Category category_ = Category::Convolution;
  CostLedger ledger_;
  bool tracing_ = false;
  std::vector<TraceEvent> trace_;
};

}  // namespace nandspin
