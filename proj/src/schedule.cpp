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

#include "nandspin/schedule.hpp"

#include "nandspin/errors.hpp"

namespace nandspin {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

Schedule& Schedule::append(const Schedule& other) {
  ops_.insert(ops_.end(), other.ops_.begin(), other.ops_.end());
  return *this;
}

std::string_view op_name(const MicroOpBody& op) {
  return std::visit(overloaded{
                        [](const uop::Erase&) { return "erase"; },
                        [](const uop::WriteRowGroup&) { return "write_row_group"; },
                        [](const uop::Program&) { return "program"; },
                        [](const uop::ReadToCounter&) { return "read_to_counter"; },
                        [](const uop::AndToCounter&) { return "and_to_counter"; },
                        [](const uop::AndAlignedToCounter&) { return "and_aligned_to_counter"; },
                        [](const uop::AndBroadcastToCounter&) { return "and_broadcast_to_counter"; },
                        [](const uop::WriteBackLsb&) { return "write_back_lsb"; },
                        [](const uop::ShiftOut&) { return "shift_out"; },
                        [](const uop::LoadBuffer&) { return "load_buffer"; },
                        [](const uop::LoadBufferFromRow&) { return "load_buffer_from_row"; },
                        [](const uop::LoadBufferFromLsb&) { return "load_buffer_from_lsb"; },
                        [](const uop::ProgramFromBuffer&) { return "program_from_buffer"; },
                        [](const uop::ResetCounters&) { return "reset_counters"; },
                        [](const uop::ReadOut&) { return "read_out"; },
                        [](const uop::Annotate&) { return "annotate"; },
                    },
                    op);
}

std::vector<BitRow> execute(const Schedule& schedule, Subarray& sub) {
  std::vector<BitRow> out;
  const Category saved = sub.category();
  for (const auto& op : schedule.ops()) {
    sub.set_category(op.category);
    std::visit(overloaded{
                   [&](const uop::Erase& o) { sub.erase_device_row(o.device_row); },
                   [&](const uop::WriteRowGroup& o) { sub.write_row_group(o.device_row, o.data); },
                   [&](const uop::Program& o) { sub.program_bit_row(o.bit_row, o.bits); },
                   [&](const uop::ReadToCounter& o) { sub.accumulate_counters(sub.read_bit_row(o.bit_row)); },
                   [&](const uop::AndToCounter& o) {
                     sub.accumulate_counters(sub.and_bit_row(o.bit_row, o.buffer_row));
                   },
                   [&](const uop::AndAlignedToCounter& o) {
                     sub.accumulate_counters(sub.and_bit_row_aligned(o.bit_row, o.buffer_row, o.width, o.offsets));
                   },
                   [&](const uop::AndBroadcastToCounter& o) {
                     sub.accumulate_counters(sub.and_bit_row_broadcast(o.bit_row, o.fu));
                   },
                   [&](const uop::WriteBackLsb& o) {
                     BitRow lsb = sub.counter_lsb_and_shift();
                     if (o.mask)
                       for (std::size_t c = 0; c < lsb.size(); ++c) lsb[c] &= (*o.mask)[c];
                     sub.program_bit_row(o.bit_row, lsb);
                   },
                   [&](const uop::ShiftOut&) { out.push_back(sub.counter_lsb_and_shift()); },
                   [&](const uop::LoadBuffer& o) { sub.load_buffer_row(o.buffer_row, o.bits); },
                   [&](const uop::LoadBufferFromRow& o) {
                     BitRow r = sub.read_bit_row(o.bit_row);
                     sub.load_buffer_row(o.buffer_row, o.invert ? bitwise_not(r) : r);
                   },
                   [&](const uop::LoadBufferFromLsb& o) { sub.load_buffer_row(o.buffer_row, sub.counter_lsb()); },
                   [&](const uop::ProgramFromBuffer& o) {
                     const auto& b = sub.buffer_row(o.buffer_row);
                     if (!b) fail(ErrorCode::BufferRowEmpty, "program from empty buffer row");
                     sub.program_bit_row(o.bit_row, *b);
                   },
                   [&](const uop::ResetCounters&) { sub.reset_counters(); },
                   [&](const uop::ReadOut& o) { out.push_back(sub.read_bit_row(o.bit_row)); },
                   [&](const uop::Annotate& o) { sub.annotate(o.note); },
               },
               op.body);
  }
  sub.set_category(saved);
  return out;
}

}  // namespace nandspin
