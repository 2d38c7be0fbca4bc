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

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nandspin/bits.hpp"
#include "nandspin/cost.hpp"
#include "nandspin/subarray.hpp"

namespace nandspin {

// Micro-ops of the subarray instruction set. Every in-memory primitive is an
// ordered list of these, replayed by `execute`.
namespace uop {

struct Erase { int device_row; };
struct WriteRowGroup { int device_row; std::vector<BitRow> data; };
struct Program { int bit_row; BitRow bits; };
struct ReadToCounter { int bit_row; };
struct AndToCounter { int bit_row; int buffer_row; };
struct AndAlignedToCounter { int bit_row; int buffer_row; int width; std::vector<int> offsets; };
struct AndBroadcastToCounter { int bit_row; bool fu; };
/// Counter LSBs (optionally masked) programmed into an erased row, then shift.
struct WriteBackLsb { int bit_row; std::optional<BitRow> mask; };
/// Counter LSBs leave the subarray through the output mux, then shift.
struct ShiftOut {};
struct LoadBuffer { int buffer_row; BitRow bits; };
struct LoadBufferFromRow { int buffer_row; int bit_row; bool invert; };
struct LoadBufferFromLsb { int buffer_row; };
struct ProgramFromBuffer { int bit_row; int buffer_row; };
struct ResetCounters {};
/// Sensed row leaves the subarray through the output mux.
struct ReadOut { int bit_row; };
struct Annotate { std::string note; };

}  // namespace uop

using MicroOpBody =
    std::variant<uop::Erase, uop::WriteRowGroup, uop::Program, uop::ReadToCounter, uop::AndToCounter,
                 uop::AndAlignedToCounter, uop::AndBroadcastToCounter, uop::WriteBackLsb, uop::ShiftOut,
                 uop::LoadBuffer, uop::LoadBufferFromRow, uop::LoadBufferFromLsb, uop::ProgramFromBuffer,
                 uop::ResetCounters, uop::ReadOut, uop::Annotate>;

struct MicroOp {
  MicroOpBody body;
  Category category;
};

class Schedule {
 public:
  explicit Schedule(Category category = Category::Convolution) : category_(category) {}

  template <typename Op>
  Schedule& add(Op op) {
    ops_.push_back({MicroOpBody(std::move(op)), category_});
    return *this;
  }
  Schedule& append(const Schedule& other);
  void set_category(Category c) { category_ = c; }

  const std::vector<MicroOp>& ops() const { return ops_; }
  std::size_t size() const { return ops_.size(); }
  bool empty() const { return ops_.empty(); }

 private:
  Category category_;
  std::vector<MicroOp> ops_;
};

std::string_view op_name(const MicroOpBody& op);

/// Replays a schedule against one subarray. Returns the rows that left the
/// subarray (ShiftOut / ReadOut), in issue order.
std::vector<BitRow> execute(const Schedule& schedule, Subarray& sub);

}  // namespace nandspin
