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

#include "nandspin/device.hpp"

#include <algorithm>
#include <string>

#include "nandspin/errors.hpp"

namespace nandspin {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ProgramWithoutErase: return "ProgramWithoutErase";
    case ErrorCode::AmbiguousSignals: return "AmbiguousSignals";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::RowOutOfRange: return "RowOutOfRange";
    case ErrorCode::BufferRowEmpty: return "BufferRowEmpty";
    case ErrorCode::BufferIndexOutOfRange: return "BufferIndexOutOfRange";
    case ErrorCode::CounterOverflow: return "CounterOverflow";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::StrideInvalid: return "StrideInvalid";
    case ErrorCode::InsufficientResultRows: return "InsufficientResultRows";
    case ErrorCode::CapacityExceeded: return "CapacityExceeded";
    case ErrorCode::DegenerateRange: return "DegenerateRange";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::UnknownOpKind: return "UnknownOpKind";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

NandSpinDevice::NandSpinDevice(int group_size) : group_size_(group_size) {
  if (group_size < 1 || group_size > kMaxGroupSize)
    fail(ErrorCode::InvalidParameter, "group size " + std::to_string(group_size) + " not in [1, 64]");
}

void NandSpinDevice::check_index(int index) const {
  if (index < 0 || index >= group_size_)
    fail(ErrorCode::RowOutOfRange,
         "MTJ index " + std::to_string(index) + " outside group of " + std::to_string(group_size_));
}

MtjState NandSpinDevice::state(int index) const {
  check_index(index);
  return (p_mask_ >> index) & 1u ? MtjState::P : MtjState::AP;
}

void NandSpinDevice::program(int index, bool d, ProgramCheck check) {
  check_index(index);
  if (!d) return;
  const std::uint64_t bit = std::uint64_t{1} << index;
  if ((p_mask_ & bit) && check == ProgramCheck::Strict)
    fail(ErrorCode::ProgramWithoutErase,
         "MTJ " + std::to_string(index) + " already in P; erase the strip before reprogramming");
  p_mask_ |= bit;
}

bool NandSpinDevice::read(int index) const { return sense_decision(true, state(index)); }

NandSpinDevice erased(NandSpinDevice dev) {
  dev.erase();
  return dev;
}

NandSpinDevice programmed(NandSpinDevice dev, int index, bool d, ProgramCheck check) {
  dev.program(index, d, check);
  return dev;
}

namespace {

// Returns the single selected row, -1 when none, -2 when several.
int selected_row(const std::vector<bool>& rows) {
  int sel = -1;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i]) continue;
    if (sel != -1) return -2;
    sel = static_cast<int>(i);
  }
  return sel;
}

}  // namespace

DecodedSignals decode_signals(const ControlSignals& s) {
  const int row = selected_row(s.row_select);
  // Erase: WE ER high, no column or row select, FU and REF low.
  if (s.we && s.er && !s.column_select && row == -1 && !s.fu && !s.ref)
    return {SignalOp::Erase, -1, false};
  // Program D: WE high, ER low, C_x = D, one row, FU and REF low.
  if (s.we && !s.er && row >= 0 && !s.fu && !s.ref)
    return {SignalOp::Program, row, s.column_select};
  // Read / AND share the sensing path; FU carries the operand.
  if (!s.we && s.er && !s.column_select && row >= 0 && s.ref)
    return {s.fu ? SignalOp::Read : SignalOp::And, row, s.fu};
  fail(ErrorCode::AmbiguousSignals, "signal combination matches no operation pattern");
}

std::optional<bool> apply_signals(NandSpinDevice& dev, const ControlSignals& signals,
                                  ProgramCheck check) {
  if (static_cast<int>(signals.row_select.size()) != dev.group_size())
    fail(ErrorCode::GeometryMismatch, "row select width differs from device group size");
  const auto op = decode_signals(signals);
  switch (op.op) {
    case SignalOp::Erase:
      dev.erase();
      return std::nullopt;
    case SignalOp::Program:
      dev.program(op.row, op.operand, check);
      return std::nullopt;
    case SignalOp::Read:
    case SignalOp::And:
      return sense_decision(op.operand, dev.state(op.row));
  }
  return std::nullopt;
}

}  // namespace nandspin
