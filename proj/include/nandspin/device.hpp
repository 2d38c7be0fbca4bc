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
#include <vector>

namespace nandspin {

/// Magnetization of one junction. AP is the erased state and stores data 0;
/// P stores data 1 (complementary storage).
enum class MtjState : std::uint8_t { AP, P };

enum class ProgramCheck { Strict, Permissive };

/// A heavy-metal strip carrying a fixed group of MTJs. Writes are two-step:
/// a bulk erase of the whole strip to AP, then per-junction programs AP -> P.
///
/// Value type. The group is stored as a bitmask of junctions in P, so the
/// group size is capped at 64.
class NandSpinDevice {
 public:
  static constexpr int kDefaultGroupSize = 8;
  static constexpr int kMaxGroupSize = 64;

  explicit NandSpinDevice(int group_size = kDefaultGroupSize);

  int group_size() const noexcept { return group_size_; }
  MtjState state(int index) const;

  void erase() noexcept { p_mask_ = 0; }

  /// d = 0 leaves the junction untouched. In strict mode, programming d = 1
  /// onto a junction that is already P raises ProgramWithoutErase.
  void program(int index, bool d, ProgramCheck check = ProgramCheck::Strict);

  bool read(int index) const;
  bool and_sense(int index, bool w) const { return w && read(index); }

  /// Data view, bit i = data stored in junction i.
  std::uint64_t data() const noexcept { return p_mask_; }

  friend bool operator==(const NandSpinDevice&, const NandSpinDevice&) = default;

 private:
  void check_index(int index) const;

  int group_size_;
  std::uint64_t p_mask_ = 0;
};

/// Value-returning forms, matching the functional device contract.
NandSpinDevice erased(NandSpinDevice dev);
NandSpinDevice programmed(NandSpinDevice dev, int index, bool d,
                          ProgramCheck check = ProgramCheck::Strict);

/// Sense amplifier decision: 1 only when FU is high and the selected junction
/// is in the low-resistance P state.
constexpr bool sense_decision(bool fu, MtjState selected) noexcept {
  return fu && selected == MtjState::P;
}

/// Decoder-level signals seen by one device column. `column_select` carries
/// C_x for this device's column and `row_select` has one entry per junction.
struct ControlSignals {
  bool we = false;
  bool er = false;
  bool column_select = false;
  std::vector<bool> row_select;
  bool fu = false;
  bool ref = false;
};

enum class SignalOp { Erase, Program, Read, And };

struct DecodedSignals {
  SignalOp op;
  int row = -1;        // selected junction; -1 for erase
  bool operand = false;  // D for program, W for AND (1 for read)
};

/// Exact match against the four signal patterns of the operation table; any
/// other combination raises AmbiguousSignals.
DecodedSignals decode_signals(const ControlSignals& signals);

/// Decode and apply to a device. Returns the SA output for read/AND.
std::optional<bool> apply_signals(NandSpinDevice& dev, const ControlSignals& signals,
                                  ProgramCheck check = ProgramCheck::Strict);

}  // namespace nandspin
