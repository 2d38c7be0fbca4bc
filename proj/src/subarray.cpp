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

#include "nandspin/subarray.hpp"

#include <algorithm>
#include <string>

#include "nandspin/errors.hpp"

namespace nandspin {

void SubarrayGeometry::validate() const {
  if (device_rows < 1 || columns < 1 || group_size < 1 || group_size > NandSpinDevice::kMaxGroupSize ||
      buffer_rows < 1 || counter_width < 1 || counter_width > 31)
    fail(ErrorCode::InvalidParameter, "subarray geometry values must be positive (G <= 64, counter width <= 31)");
}

Subarray::Subarray(SubarrayGeometry geometry, int id, const CostParams* params, ProgramCheck check)
    : geom_(geometry), id_(id), params_(params), check_(check) {
  geom_.validate();
  devices_.assign(static_cast<std::size_t>(geom_.device_rows) * geom_.columns,
                  NandSpinDevice(geom_.group_size));
  buffer_.assign(geom_.buffer_rows, std::nullopt);
  counters_.assign(geom_.columns, 0);
}

void Subarray::check_bit_row(int bit_row) const {
  if (bit_row < 0 || bit_row >= bit_rows())
    fail(ErrorCode::RowOutOfRange, "bit row " + std::to_string(bit_row) + " of subarray " +
                                       std::to_string(id_) + " (" + std::to_string(bit_rows()) + " rows)");
}

void Subarray::check_device_row(int device_row) const {
  if (device_row < 0 || device_row >= geom_.device_rows)
    fail(ErrorCode::RowOutOfRange, "device row " + std::to_string(device_row) + " of subarray " +
                                       std::to_string(id_));
}

void Subarray::check_width(std::size_t width) const {
  if (width != static_cast<std::size_t>(geom_.columns))
    fail(ErrorCode::GeometryMismatch,
         "row of " + std::to_string(width) + " bits, subarray has " + std::to_string(geom_.columns) + " columns");
}

void Subarray::charge(OpKind kind, std::uint64_t count, std::uint64_t pulses, std::vector<int> rows) {
  if (!params_) return;
  if (!tracing_) {
    ledger_.charge(*params_, {kind, count, pulses, category_});
    return;
  }
  CostLedger delta;
  delta.charge(*params_, {kind, count, pulses, category_});
  ledger_.merge_serial(delta);
  trace_.push_back({std::string(to_string(kind)), id_, std::move(rows), category_, delta.total_energy(),
                    delta.total_latency(), {}});
}

void Subarray::erase_device_row(int device_row) {
  check_device_row(device_row);
  auto* row = &devices_[static_cast<std::size_t>(device_row) * geom_.columns];
  for (int c = 0; c < geom_.columns; ++c) row[c].erase();
  charge(OpKind::Erase, geom_.columns, 1, {device_row * geom_.group_size});
}

void Subarray::program_bit_row(int bit_row, std::span<const std::uint8_t> bits) {
  check_bit_row(bit_row);
  check_width(bits.size());
  const int dr = bit_row / geom_.group_size;
  const int idx = bit_row % geom_.group_size;
  auto* row = &devices_[static_cast<std::size_t>(dr) * geom_.columns];
  std::uint64_t n = 0;
  for (int c = 0; c < geom_.columns; ++c) {
    if (!bits[c]) continue;
    row[c].program(idx, true, check_);
    ++n;
  }
  // A pulse is only issued when some column is selected.
  charge(OpKind::Program, n, n ? 1 : 0, {bit_row});
}

void Subarray::write_row_group(int device_row, std::span<const BitRow> data) {
  check_device_row(device_row);
  if (static_cast<int>(data.size()) != geom_.group_size)
    fail(ErrorCode::GeometryMismatch, "row group write needs " + std::to_string(geom_.group_size) +
                                          " rows, got " + std::to_string(data.size()));
  for (const auto& r : data) check_width(r.size());
  erase_device_row(device_row);
  for (int i = 0; i < geom_.group_size; ++i) program_bit_row(device_row * geom_.group_size + i, data[i]);
}

BitRow Subarray::read_bit_row(int bit_row) {
  BitRow out = peek_row(bit_row);
  charge(OpKind::Read, 1, 1, {bit_row});
  return out;
}

const BitRow& Subarray::loaded_buffer(int buffer_row) const {
  const auto& b = this->buffer_row(buffer_row);
  if (!b) fail(ErrorCode::BufferRowEmpty, "buffer row " + std::to_string(buffer_row) + " not loaded");
  return *b;
}

BitRow Subarray::and_bit_row(int bit_row, int buffer_row) {
  const BitRow& fu = loaded_buffer(buffer_row);
  BitRow out = peek_row(bit_row);
  for (int c = 0; c < geom_.columns; ++c) out[c] = sense_decision(fu[c], out[c] ? MtjState::P : MtjState::AP);
  charge(OpKind::And, 1, 1, {bit_row});
  return out;
}

BitRow Subarray::and_bit_row_aligned(int bit_row, int buffer_row, int width, std::span<const int> offsets) {
  const BitRow& pattern = loaded_buffer(buffer_row);
  if (width < 0 || width > geom_.columns)
    fail(ErrorCode::GeometryMismatch, "aligned AND width " + std::to_string(width));
  BitRow fu = zeros(geom_.columns);
  BitRow covered = zeros(geom_.columns);
  for (int off : offsets) {
    if (off < 0 || off + width > geom_.columns)
      fail(ErrorCode::GeometryMismatch, "aligned AND window at column " + std::to_string(off) + " overruns row");
    for (int j = 0; j < width; ++j) {
      if (covered[off + j]) fail(ErrorCode::GeometryMismatch, "overlapping aligned AND windows");
      covered[off + j] = 1;
      fu[off + j] = pattern[j];
    }
  }
  BitRow out = peek_row(bit_row);
  for (int c = 0; c < geom_.columns; ++c) out[c] = sense_decision(fu[c], out[c] ? MtjState::P : MtjState::AP);
  charge(OpKind::And, 1, 1, {bit_row});
  return out;
}

BitRow Subarray::and_bit_row_broadcast(int bit_row, bool fu) {
  BitRow out = peek_row(bit_row);
  for (auto& b : out) b = sense_decision(fu, b ? MtjState::P : MtjState::AP);
  charge(OpKind::And, 1, 1, {bit_row});
  return out;
}

void Subarray::accumulate_counters(std::span<const std::uint8_t> bits) {
  check_width(bits.size());
  const std::uint32_t limit = (std::uint32_t{1} << geom_.counter_width) - 1;
  for (int c = 0; c < geom_.columns; ++c) {
    if (!bits[c]) continue;
    if (counters_[c] >= limit)
      fail(ErrorCode::CounterOverflow, "bit-counter of column " + std::to_string(c) + " in subarray " +
                                           std::to_string(id_) + " exceeds " +
                                           std::to_string(geom_.counter_width) + " bits");
    ++counters_[c];
  }
  charge(OpKind::CounterAccumulate, 1, 1);
}

BitRow Subarray::counter_lsb() const {
  BitRow out(geom_.columns);
  for (int c = 0; c < geom_.columns; ++c) out[c] = counters_[c] & 1u;
  return out;
}

BitRow Subarray::counter_lsb_and_shift() {
  BitRow out = counter_lsb();
  for (auto& v : counters_) v >>= 1;
  charge(OpKind::CounterShift, 1, 1);
  return out;
}

void Subarray::reset_counters() {
  std::fill(counters_.begin(), counters_.end(), 0u);
  charge(OpKind::CounterReset, 1, 1);
}

void Subarray::load_buffer_row(int buffer_row, std::span<const std::uint8_t> bits) {
  if (buffer_row < 0 || buffer_row >= geom_.buffer_rows)
    fail(ErrorCode::BufferIndexOutOfRange,
         "buffer row " + std::to_string(buffer_row) + " (capacity " + std::to_string(geom_.buffer_rows) + ")");
  check_width(bits.size());
  buffer_[buffer_row] = BitRow(bits.begin(), bits.end());
  ++buffer_writes_;
  charge(OpKind::BufferWrite, 1, 1);
}

const std::optional<BitRow>& Subarray::buffer_row(int buffer_row) const {
  if (buffer_row < 0 || buffer_row >= geom_.buffer_rows)
    fail(ErrorCode::BufferIndexOutOfRange,
         "buffer row " + std::to_string(buffer_row) + " (capacity " + std::to_string(geom_.buffer_rows) + ")");
  return buffer_[buffer_row];
}

bool Subarray::peek(int bit_row, int column) const {
  check_bit_row(bit_row);
  if (column < 0 || column >= geom_.columns) fail(ErrorCode::GeometryMismatch, "column out of range");
  const int dr = bit_row / geom_.group_size;
  return device(dr, column).read(bit_row % geom_.group_size);
}

BitRow Subarray::peek_row(int bit_row) const {
  check_bit_row(bit_row);
  const int dr = bit_row / geom_.group_size;
  const int idx = bit_row % geom_.group_size;
  const auto* row = &devices_[static_cast<std::size_t>(dr) * geom_.columns];
  BitRow out(geom_.columns);
  for (int c = 0; c < geom_.columns; ++c) out[c] = row[c].read(idx);
  return out;
}

const NandSpinDevice& Subarray::device(int device_row, int column) const {
  check_device_row(device_row);
  return devices_[static_cast<std::size_t>(device_row) * geom_.columns + column];
}

std::string Subarray::dump() const {
  std::string out;
  out.reserve(static_cast<std::size_t>(bit_rows()) * (geom_.columns + 1));
  for (int r = 0; r < bit_rows(); ++r) {
    for (auto b : peek_row(r)) out.push_back(b ? '1' : '0');
    out.push_back('\n');
  }
  return out;
}

CostLedger Subarray::take_ledger() {
  CostLedger out = ledger_;
  ledger_ = {};
  return out;
}

void Subarray::annotate(std::string note) {
  if (!tracing_) return;
  TraceEvent e;
  e.op = "annotate";
  e.subarray = id_;
  e.category = category_;
  e.note = std::move(note);
  trace_.push_back(std::move(e));
}

std::vector<TraceEvent> Subarray::take_trace() {
  std::vector<TraceEvent> out;
  out.swap(trace_);
  return out;
}

}  // namespace nandspin
