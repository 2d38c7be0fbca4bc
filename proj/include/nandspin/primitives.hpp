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
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "nandspin/bits.hpp"
#include "nandspin/schedule.hpp"
#include "nandspin/subarray.hpp"
#include "nandspin/tensor.hpp"

namespace nandspin {

/// An unsigned number stored element-by-element vertically: bit i of every
/// column lives in row base_row + i and carries significance 2^(shift + i).
struct VerticalOperand {
  int base_row = 0;
  int width = 0;
  int shift = 0;

  int end_row() const { return base_row + width; }
  int row(int bit) const { return base_row + bit; }
};

/// Rows of one subarray reserved for a column-parallel primitive.
struct ColumnVectorLayout {
  std::vector<VerticalOperand> operands;
  std::optional<VerticalOperand> result;
  std::optional<int> tag_row;
  std::optional<int> result_row;

  /// Throws GeometryMismatch if any two row sets overlap or leave the subarray.
  void validate(int bit_rows) const;
};

/// Hands out blocks of whole device rows. Released rows are erased lazily the
/// next time they are handed out; a fresh subarray starts erased.
class RowAllocator {
 public:
  RowAllocator(int device_rows, int group_size);

  /// Low takes the first fitting block, High the last. Keeping long-lived
  /// blocks high leaves the low rows contiguous for short-lived ones.
  enum class Placement { Low, High };

  /// Contiguous block of at least `bits` rows, pre-erased via `sub`.
  /// Throws CapacityExceeded when no block fits.
  VerticalOperand allocate(Subarray& sub, int bits, Placement where = Placement::Low);
  std::optional<VerticalOperand> try_allocate(Subarray& sub, int bits, Placement where = Placement::Low);
  void release(const VerticalOperand& block);
  /// Marks every row dirty, e.g. when a subarray is reused for new data.
  void release_all();
  int free_device_rows() const;
  int largest_free_block() const;  // in device rows
  int group_size() const { return group_size_; }

 private:
  enum class State : std::uint8_t { Clean, Used, Dirty };
  std::vector<State> rows_;
  int group_size_;
};

// --- schedule builders ------------------------------------------------------

enum class AddMode { Exact, Modular };

/// Column-parallel addition of vertical operands by bit-counting from the LSB:
/// each step reads every operand bit of that significance into the counters,
/// writes the counter LSB into the result row and keeps the shifted count as
/// the carry. `operand_max` bounds each operand value (defaults to the full
/// width). Exact mode throws InsufficientResultRows when the result is too narrow.
Schedule build_add(std::span<const VerticalOperand> operands, const VerticalOperand& result,
                   AddMode mode = AddMode::Exact, std::span<const std::uint64_t> operand_max = {},
                   Category category = Category::Convolution);

/// Multiplies a vertical multiplicand by a scalar driven on FU, product bits
/// from LSB to MSB. Requires result.width >= multiplicand.width + multiplier_bits.
/// `mask` limits which columns receive product bits.
Schedule build_mul(const VerticalOperand& multiplicand, std::uint64_t multiplier, int multiplier_bits,
                   const VerticalOperand& result, const std::optional<BitRow>& mask = std::nullopt,
                   Category category = Category::Convolution);

/// MSB-first comparison with Tag/Result bookkeeping. Both rows must be erased.
/// Afterwards result_row holds 1 where a > b and 0 where a <= b. Uses buffer
/// rows 0..1.
Schedule build_compare(const VerticalOperand& a, const VerticalOperand& b, int tag_row, int result_row,
                       Category category = Category::PoolingCompare);

/// out = flag ? if_one : if_zero, columnwise. Uses buffer rows 0..1.
Schedule build_select(int flag_row, const VerticalOperand& if_one, const VerticalOperand& if_zero,
                      const VerticalOperand& out, Category category = Category::PoolingCompare);

/// out = ~src using an all-ones row. Uses buffer row 0.
Schedule build_invert(const VerticalOperand& src, int ones_row, const VerticalOperand& out, Category category);

/// ReLU on a two's complement vertical value: bits below the MSB are copied
/// where the MSB is 0 and zeroed elsewhere. out.width = value.width - 1.
Schedule build_relu(const VerticalOperand& value, const VerticalOperand& out, Category category);

/// Host constants written into erased rows, one value per column.
Schedule build_write_constants(const VerticalOperand& rows, std::span<const std::uint64_t> per_column,
                               Category category);

/// Places an LSB-first bit stream into rows base_row + shift + i, which scales
/// its value by 2^shift positionally. `rows_available` bounds the target
/// region (InsufficientResultRows).
void shift_by_row_placement(Subarray& sub, std::span<const BitRow> stream, int base_row, int rows_available,
                            int shift = 0);

// --- column-vector helpers ----------------------------------------------------

/// Convenience wrappers that execute the corresponding schedule.
void bitserial_add(Subarray& sub, std::span<const VerticalOperand> operands, const VerticalOperand& result,
                   AddMode mode = AddMode::Exact, std::span<const std::uint64_t> operand_max = {});
void bitserial_mul(Subarray& sub, const VerticalOperand& multiplicand, std::uint64_t multiplier,
                   int multiplier_bits, const VerticalOperand& result);
void bitserial_compare(Subarray& sub, const VerticalOperand& a, const VerticalOperand& b, int tag_row,
                       int result_row);

/// Writes one value per column into erased rows (no cost beyond programs).
void write_vertical(Subarray& sub, const VerticalOperand& rows, std::span<const std::uint64_t> per_column,
                    Category category);
/// Reads a vertical operand out through the sense amplifiers (charges reads).
std::vector<std::uint64_t> read_vertical(Subarray& sub, const VerticalOperand& rows);
/// Inspects stored values without cost.
std::vector<std::uint64_t> peek_vertical(const Subarray& sub, const VerticalOperand& rows);

// --- bitwise convolution ------------------------------------------------------

struct ConvShape {
  int channels = 1;
  int height = 1;
  int width = 1;
  int out_channels = 1;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int input_bits = 1;
  int weight_bits = 1;

  int out_h() const { return (height - kernel_h) / stride + 1; }
  int out_w() const { return (width - kernel_w) / stride + 1; }
  void validate() const;
};

/// Windows on one output row whose input columns are pairwise disjoint, so
/// their bit-counts can share a single counter pass.
struct WindowGroup {
  int oy = 0;
  std::vector<int> oxs;
};

std::vector<WindowGroup> window_groups(const ConvShape& shape);

/// Which input subarray (bit plane) works on which window group in a period.
struct PeriodAssignment {
  int plane = 0;
  int group = 0;
};
using ConvPeriod = std::vector<PeriodAssignment>;

/// Cross-writing rotation: in period t plane n handles group (t + n) mod P,
/// P = max(groups, planes). Every (plane, group) pair occurs exactly once and
/// no two planes share a group (hence accumulation columns) in one period.
std::vector<ConvPeriod> cross_write_periods(int planes, int groups);

/// Where an output element's accumulator lives.
struct AccumulatorSlot {
  int subarray = 0;  // index into the accumulation subarray list
  int column = 0;
};

/// Executes the multi-bit convolution of one channel tile as AND + bit-count
/// passes in the input-plane subarrays, cross-written into accumulation
/// subarrays, followed by in-memory addition. On return every accumulation
/// subarray holds the per-column dot products in `sums[i]`.
class ConvolutionEngine {
 public:
  struct Result {
    std::vector<VerticalOperand> sums;      // per accumulation subarray
    std::vector<std::uint64_t> max_value;   // static bound per accumulation subarray
    std::vector<RowAllocator> allocators;   // row state per accumulation subarray
  };

  struct Lanes {
    std::span<Subarray> inputs;        // one per input bit plane
    std::span<Subarray> accumulators;  // accumulation subarrays
  };

  /// Hooks invoked by the engine at phase boundaries, used by callers for
  /// ledger/trace collection and parallel execution.
  struct Hooks {
    /// Runs fn(i) for i in [0, n); may run them concurrently.
    std::function<void(int, const std::function<void(int)>&)> for_each_lane;
    /// Called after each phase with the subarrays that took part concurrently.
    std::function<void(std::span<Subarray* const>)> end_phase;
  };

  ConvolutionEngine(ConvShape shape, int bus_width, Hooks hooks = {});

  /// Element ordering inside a tile: e = o * OH * OW + oy * OW + ox.
  AccumulatorSlot slot_of(int o_local, int oy, int ox, int columns) const;
  int accumulators_needed(int tile_channels, int columns) const;

  /// Writes input planes into the input subarrays (row c*H + y, column x).
  void load_inputs(const FixedPointTensor& input, std::span<Subarray> inputs, Category category) const;

  /// weights: [tile_channels][C][kh][kw], unsigned weight_bits values.
  /// `allocators` carries row state of reused accumulation subarrays; fresh
  /// (erased) state is assumed when empty.
  Result run(const std::vector<std::int64_t>& weights, int tile_channels, Lanes lanes,
             std::vector<RowAllocator> allocators = {}) const;

  static std::uint64_t max_accumulator(const ConvShape& shape);

 private:
  void phase(std::span<Subarray* const> subs) const;

  ConvShape shape_;
  int bus_width_;
  Hooks hooks_;
};

/// Single-channel bitwise convolution on bit planes (LSB-first sets). Returns
/// the [out_h, out_w] dot products computed in simulated subarrays.
FixedPointTensor bitwise_convolution(const std::vector<BitPlaneTensor>& input_planes,
                                     const std::vector<BitPlaneTensor>& weight_planes, int stride,
                                     const SubarrayGeometry& geometry = {}, const CostParams* params = nullptr,
                                     CostLedger* ledger = nullptr);

}  // namespace nandspin
