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

#include "nandspin/primitives.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "nandspin/errors.hpp"

namespace nandspin {

namespace {

constexpr std::uint64_t kMaxValue = std::uint64_t{1} << 62;

std::uint64_t full_max(int width) {
  if (width <= 0) return 0;
  if (width >= 62) return kMaxValue;
  return (std::uint64_t{1} << width) - 1;
}

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) { return std::min(kMaxValue, a + std::min(b, kMaxValue)); }

std::uint64_t sat_shl(std::uint64_t v, int shift) {
  if (v == 0) return 0;
  if (shift >= 62 || bit_length(v) + shift > 62) return kMaxValue;
  return v << shift;
}

void check_operand(const VerticalOperand& op, const char* what) {
  if (op.width < 0 || op.base_row < 0 || op.shift < 0)
    fail(ErrorCode::InvalidParameter, std::string(what) + " has a negative base, width or shift");
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

// --- layout ----------------------------------------------------------------

void ColumnVectorLayout::validate(int bit_rows) const {
  std::vector<std::pair<int, int>> spans;
  for (const auto& op : operands) spans.emplace_back(op.base_row, op.end_row());
  if (result) spans.emplace_back(result->base_row, result->end_row());
  if (tag_row) spans.emplace_back(*tag_row, *tag_row + 1);
  if (result_row) spans.emplace_back(*result_row, *result_row + 1);
  for (const auto& [lo, hi] : spans)
    if (lo < 0 || hi > bit_rows || hi < lo)
      fail(ErrorCode::GeometryMismatch,
           "rows [" + std::to_string(lo) + ", " + std::to_string(hi) + ") outside the subarray");
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i)
    if (spans[i].first < spans[i - 1].second && spans[i].second > spans[i].first &&
        spans[i - 1].second > spans[i - 1].first)
      fail(ErrorCode::GeometryMismatch, "row sets overlap at row " + std::to_string(spans[i].first));
}

// --- row allocation ----------------------------------------------------------

RowAllocator::RowAllocator(int device_rows, int group_size)
    : rows_(static_cast<std::size_t>(std::max(device_rows, 0)), State::Clean), group_size_(group_size) {
  if (device_rows < 1 || group_size < 1) fail(ErrorCode::InvalidParameter, "allocator needs a positive geometry");
}

std::optional<VerticalOperand> RowAllocator::try_allocate(Subarray& sub, int bits, Placement where) {
  if (bits < 1) fail(ErrorCode::InvalidParameter, "allocation of " + std::to_string(bits) + " rows");
  const int need = ceil_div(bits, group_size_);
  const int n = static_cast<int>(rows_.size());
  auto fits = [&](int start) {
    for (int d = start; d < start + need; ++d)
      if (rows_[d] == State::Used) return false;
    return true;
  };
  std::optional<int> found;
  if (where == Placement::Low) {
    for (int start = 0; start + need <= n && !found; ++start)
      if (fits(start)) found = start;
  } else {
    for (int start = n - need; start >= 0 && !found; --start)
      if (fits(start)) found = start;
  }
  if (!found) return std::nullopt;
  for (int d = *found; d < *found + need; ++d) {
    if (rows_[d] == State::Dirty) sub.erase_device_row(d);
    rows_[d] = State::Used;
  }
  return VerticalOperand{*found * group_size_, bits, 0};
}

VerticalOperand RowAllocator::allocate(Subarray& sub, int bits, Placement where) {
  auto block = try_allocate(sub, bits, where);
  if (!block)
    fail(ErrorCode::CapacityExceeded, "subarray " + std::to_string(sub.id()) + " has no block of " +
                                          std::to_string(bits) + " free rows");
  return *block;
}

void RowAllocator::release(const VerticalOperand& block) {
  if (block.width <= 0) return;
  const int first = block.base_row / group_size_;
  const int last = (block.end_row() - 1) / group_size_;
  for (int d = first; d <= last && d < static_cast<int>(rows_.size()); ++d) rows_[d] = State::Dirty;
}

void RowAllocator::release_all() {
  for (auto& r : rows_)
    if (r == State::Used) r = State::Dirty;
}

int RowAllocator::free_device_rows() const {
  return static_cast<int>(std::count_if(rows_.begin(), rows_.end(), [](State s) { return s != State::Used; }));
}

int RowAllocator::largest_free_block() const {
  int best = 0, run = 0;
  for (State s : rows_) {
    run = s == State::Used ? 0 : run + 1;
    best = std::max(best, run);
  }
  return best;
}

// --- builders ----------------------------------------------------------------

Schedule build_add(std::span<const VerticalOperand> operands, const VerticalOperand& result, AddMode mode,
                   std::span<const std::uint64_t> operand_max, Category category) {
  check_operand(result, "result");
  if (!operand_max.empty() && operand_max.size() != operands.size())
    fail(ErrorCode::InvalidParameter, "operand_max must match the operand count");
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < operands.size(); ++i) {
    check_operand(operands[i], "operand");
    if (operands[i].width > 0 && operands[i].shift < result.shift)
      fail(ErrorCode::InvalidParameter, "operand significance below the result LSB");
    const std::uint64_t m = operand_max.empty() ? full_max(operands[i].width)
                                                : std::min(operand_max[i], full_max(operands[i].width));
    total = sat_add(total, sat_shl(m, operands[i].shift - result.shift));
  }
  if (mode == AddMode::Exact && bit_length(total) > result.width)
    fail(ErrorCode::InsufficientResultRows, "sum needs " + std::to_string(bit_length(total)) + " rows, result has " +
                                                std::to_string(result.width));

  Schedule s(category);
  s.add(uop::ResetCounters{});
  for (int b = 0; b < result.width; ++b) {
    const int sig = result.shift + b;
    for (const auto& op : operands) {
      const int bit = sig - op.shift;
      if (bit >= 0 && bit < op.width) s.add(uop::ReadToCounter{op.row(bit)});
    }
    s.add(uop::WriteBackLsb{result.row(b), std::nullopt});
  }
  if (mode == AddMode::Modular) s.add(uop::ResetCounters{});
  return s;
}

Schedule build_mul(const VerticalOperand& multiplicand, std::uint64_t multiplier, int multiplier_bits,
                   const VerticalOperand& result, const std::optional<BitRow>& mask, Category category) {
  check_operand(multiplicand, "multiplicand");
  check_operand(result, "result");
  if (multiplier_bits < 1 || multiplier_bits > 62)
    fail(ErrorCode::InvalidParameter, "multiplier width must be in [1, 62]");
  if (multiplier >> multiplier_bits)
    fail(ErrorCode::InvalidParameter, "multiplier does not fit in " + std::to_string(multiplier_bits) + " bits");
  const int a = multiplicand.width;
  if (result.width < a + multiplier_bits)
    fail(ErrorCode::InsufficientResultRows, "product needs " + std::to_string(a + multiplier_bits) +
                                                " rows, result has " + std::to_string(result.width));
  Schedule s(category);
  s.add(uop::ResetCounters{});
  for (int j = 0; j < a + multiplier_bits; ++j) {
    // Partial products are issued for every bit pair, zero multiplier bits included.
    for (int i = 0; i < a; ++i) {
      const int m = j - i;
      if (m >= 0 && m < multiplier_bits) s.add(uop::AndBroadcastToCounter{multiplicand.row(i), ((multiplier >> m) & 1) != 0});
    }
    s.add(uop::WriteBackLsb{result.row(j), mask});
  }
  return s;
}

Schedule build_compare(const VerticalOperand& a, const VerticalOperand& b, int tag_row, int result_row,
                       Category category) {
  check_operand(a, "a");
  check_operand(b, "b");
  if (a.width != b.width) fail(ErrorCode::DimMismatch, "compare operands differ in width");
  Schedule s(category);
  s.add(uop::Annotate{"compare: per bit, diff = (a ^ b) & ~tag; tag |= diff; result |= diff & a"});
  s.add(uop::ResetCounters{});
  for (int bit = a.width - 1; bit >= 0; --bit) {
    s.add(uop::LoadBufferFromRow{0, tag_row, true});
    s.add(uop::AndToCounter{a.row(bit), 0});
    s.add(uop::AndToCounter{b.row(bit), 0});
    // Counter is 1 exactly where the bits differ in still undecided columns.
    s.add(uop::LoadBufferFromLsb{1});
    s.add(uop::ResetCounters{});
    s.add(uop::ProgramFromBuffer{tag_row, 1});
    s.add(uop::AndToCounter{a.row(bit), 1});
    s.add(uop::WriteBackLsb{result_row, std::nullopt});
    s.add(uop::ResetCounters{});
  }
  return s;
}

Schedule build_select(int flag_row, const VerticalOperand& if_one, const VerticalOperand& if_zero,
                      const VerticalOperand& out, Category category) {
  check_operand(if_one, "if_one");
  check_operand(if_zero, "if_zero");
  check_operand(out, "out");
  Schedule s(category);
  s.add(uop::LoadBufferFromRow{0, flag_row, false});
  s.add(uop::LoadBufferFromRow{1, flag_row, true});
  s.add(uop::ResetCounters{});
  for (int bit = 0; bit < out.width; ++bit) {
    if (bit < if_one.width) s.add(uop::AndToCounter{if_one.row(bit), 0});
    if (bit < if_zero.width) s.add(uop::AndToCounter{if_zero.row(bit), 1});
    s.add(uop::WriteBackLsb{out.row(bit), std::nullopt});
  }
  return s;
}

Schedule build_invert(const VerticalOperand& src, int ones_row, const VerticalOperand& out, Category category) {
  check_operand(src, "src");
  check_operand(out, "out");
  if (out.width != src.width) fail(ErrorCode::DimMismatch, "invert output width differs from source");
  Schedule s(category);
  s.add(uop::ResetCounters{});
  for (int bit = 0; bit < src.width; ++bit) {
    s.add(uop::LoadBufferFromRow{0, src.row(bit), true});
    s.add(uop::AndToCounter{ones_row, 0});
    s.add(uop::WriteBackLsb{out.row(bit), std::nullopt});
  }
  return s;
}

Schedule build_relu(const VerticalOperand& value, const VerticalOperand& out, Category category) {
  check_operand(value, "value");
  check_operand(out, "out");
  if (value.width < 2) fail(ErrorCode::InvalidParameter, "relu needs a sign bit and at least one value bit");
  if (out.width != value.width - 1) fail(ErrorCode::DimMismatch, "relu output must drop the sign bit");
  Schedule s(category);
  s.add(uop::LoadBufferFromRow{0, value.row(value.width - 1), true});
  s.add(uop::ResetCounters{});
  for (int bit = 0; bit < out.width; ++bit) {
    s.add(uop::AndToCounter{value.row(bit), 0});
    s.add(uop::WriteBackLsb{out.row(bit), std::nullopt});
  }
  return s;
}

Schedule build_write_constants(const VerticalOperand& rows, std::span<const std::uint64_t> per_column,
                               Category category) {
  check_operand(rows, "rows");
  for (std::size_t c = 0; c < per_column.size(); ++c)
    if (rows.width < 64 && (per_column[c] >> rows.width))
      fail(ErrorCode::InvalidParameter, "constant " + std::to_string(per_column[c]) + " exceeds " +
                                            std::to_string(rows.width) + " rows");
  Schedule s(category);
  for (int bit = 0; bit < rows.width; ++bit) {
    BitRow r(per_column.size());
    for (std::size_t c = 0; c < per_column.size(); ++c) r[c] = (per_column[c] >> bit) & 1;
    if (any(r)) s.add(uop::Program{rows.row(bit), std::move(r)});
  }
  return s;
}

void shift_by_row_placement(Subarray& sub, std::span<const BitRow> stream, int base_row, int rows_available,
                            int shift) {
  if (shift < 0) fail(ErrorCode::InvalidParameter, "negative shift");
  if (shift + static_cast<int>(stream.size()) > rows_available)
    fail(ErrorCode::InsufficientResultRows, "shifted stream needs " + std::to_string(shift + stream.size()) +
                                                " rows, region has " + std::to_string(rows_available));
  for (std::size_t i = 0; i < stream.size(); ++i)
    sub.program_bit_row(base_row + shift + static_cast<int>(i), stream[i]);
}

// --- column-vector helpers ---------------------------------------------------

void bitserial_add(Subarray& sub, std::span<const VerticalOperand> operands, const VerticalOperand& result,
                   AddMode mode, std::span<const std::uint64_t> operand_max) {
  execute(build_add(operands, result, mode, operand_max, sub.category()), sub);
}

void bitserial_mul(Subarray& sub, const VerticalOperand& multiplicand, std::uint64_t multiplier,
                   int multiplier_bits, const VerticalOperand& result) {
  execute(build_mul(multiplicand, multiplier, multiplier_bits, result, std::nullopt, sub.category()), sub);
}

void bitserial_compare(Subarray& sub, const VerticalOperand& a, const VerticalOperand& b, int tag_row,
                       int result_row) {
  execute(build_compare(a, b, tag_row, result_row, sub.category()), sub);
}

void write_vertical(Subarray& sub, const VerticalOperand& rows, std::span<const std::uint64_t> per_column,
                    Category category) {
  if (static_cast<int>(per_column.size()) != sub.columns())
    fail(ErrorCode::GeometryMismatch, "expected one constant per column");
  execute(build_write_constants(rows, per_column, category), sub);
}

std::vector<std::uint64_t> read_vertical(Subarray& sub, const VerticalOperand& rows) {
  std::vector<std::uint64_t> out(static_cast<std::size_t>(sub.columns()), 0);
  for (int bit = 0; bit < rows.width; ++bit) {
    const BitRow r = sub.read_bit_row(rows.row(bit));
    for (std::size_t c = 0; c < out.size(); ++c) out[c] |= std::uint64_t{r[c]} << bit;
  }
  return out;
}

std::vector<std::uint64_t> peek_vertical(const Subarray& sub, const VerticalOperand& rows) {
  std::vector<std::uint64_t> out(static_cast<std::size_t>(sub.columns()), 0);
  for (int bit = 0; bit < rows.width; ++bit) {
    const BitRow r = sub.peek_row(rows.row(bit));
    for (std::size_t c = 0; c < out.size(); ++c) out[c] |= std::uint64_t{r[c]} << bit;
  }
  return out;
}

// --- convolution -------------------------------------------------------------

void ConvShape::validate() const {
  if (channels < 1 || height < 1 || width < 1 || out_channels < 1 || kernel_h < 1 || kernel_w < 1)
    fail(ErrorCode::DimMismatch, "convolution dimensions must be positive");
  if (stride < 1) fail(ErrorCode::StrideInvalid, "stride must be >= 1, got " + std::to_string(stride));
  if (kernel_h > height || kernel_w > width)
    fail(ErrorCode::DimMismatch, "kernel " + std::to_string(kernel_h) + "x" + std::to_string(kernel_w) +
                                     " larger than input " + std::to_string(height) + "x" + std::to_string(width));
  if (input_bits < 1 || input_bits > 16 || weight_bits < 1 || weight_bits > 16)
    fail(ErrorCode::InvalidParameter, "operand widths must be in [1, 16]");
}

std::vector<WindowGroup> window_groups(const ConvShape& shape) {
  shape.validate();
  const int q = ceil_div(shape.kernel_w, shape.stride);
  const int ow = shape.out_w();
  std::vector<WindowGroup> groups;
  for (int oy = 0; oy < shape.out_h(); ++oy)
    for (int phase = 0; phase < std::min(q, ow); ++phase) {
      WindowGroup g{oy, {}};
      for (int ox = phase; ox < ow; ox += q) g.oxs.push_back(ox);
      groups.push_back(std::move(g));
    }
  return groups;
}

std::vector<ConvPeriod> cross_write_periods(int planes, int groups) {
  if (planes < 1 || groups < 1) fail(ErrorCode::InvalidParameter, "cross-writing needs planes and groups");
  const int p = std::max(planes, groups);
  std::vector<ConvPeriod> periods;
  for (int t = 0; t < p; ++t) {
    ConvPeriod period;
    for (int n = 0; n < planes; ++n) {
      const int g = (t + n) % p;
      if (g < groups) period.push_back({n, g});
    }
    if (!period.empty()) periods.push_back(std::move(period));
  }
  return periods;
}

ConvolutionEngine::ConvolutionEngine(ConvShape shape, int bus_width, Hooks hooks)
    : shape_(shape), bus_width_(bus_width), hooks_(std::move(hooks)) {
  shape_.validate();
  if (bus_width_ < 1) fail(ErrorCode::InvalidParameter, "bus width must be positive");
  if (!hooks_.for_each_lane)
    hooks_.for_each_lane = [](int n, const std::function<void(int)>& fn) {
      for (int i = 0; i < n; ++i) fn(i);
    };
}

AccumulatorSlot ConvolutionEngine::slot_of(int o_local, int oy, int ox, int columns) const {
  const int e = (o_local * shape_.out_h() + oy) * shape_.out_w() + ox;
  return {e / columns, e % columns};
}

int ConvolutionEngine::accumulators_needed(int tile_channels, int columns) const {
  return ceil_div(tile_channels * shape_.out_h() * shape_.out_w(), columns);
}

std::uint64_t ConvolutionEngine::max_accumulator(const ConvShape& s) {
  return std::uint64_t(s.channels) * s.kernel_h * s.kernel_w * full_max(s.input_bits) * full_max(s.weight_bits);
}

void ConvolutionEngine::phase(std::span<Subarray* const> subs) const {
  if (hooks_.end_phase) hooks_.end_phase(subs);
}

void ConvolutionEngine::load_inputs(const FixedPointTensor& input, std::span<Subarray> inputs,
                                    Category category) const {
  const auto chw = input.chw();
  if (chw[0] != shape_.channels || chw[1] != shape_.height || chw[2] != shape_.width)
    fail(ErrorCode::DimMismatch, "input tensor does not match the convolution shape");
  if (static_cast<int>(inputs.size()) != shape_.input_bits)
    fail(ErrorCode::GeometryMismatch, "need one input subarray per input bit");
  const int rows = shape_.channels * shape_.height;
  std::vector<Subarray*> ptrs;
  for (auto& sub : inputs) ptrs.push_back(&sub);
  if (rows > inputs[0].bit_rows())
    fail(ErrorCode::CapacityExceeded, "C*H = " + std::to_string(rows) + " exceeds " +
                                          std::to_string(inputs[0].bit_rows()) + " rows");
  if (shape_.width > inputs[0].columns())
    fail(ErrorCode::CapacityExceeded, "input width " + std::to_string(shape_.width) + " exceeds " +
                                          std::to_string(inputs[0].columns()) + " columns");
  hooks_.for_each_lane(shape_.input_bits, [&](int n) {
    Subarray& sub = inputs[n];
    const Category saved = sub.category();
    sub.set_category(category);
    const int g = sub.geometry().group_size;
    for (int d = 0; d * g < rows; ++d) {
      std::vector<BitRow> data(static_cast<std::size_t>(g), zeros(sub.columns()));
      for (int k = 0; k < g; ++k) {
        const int r = d * g + k;
        if (r >= rows) break;
        const std::size_t base = static_cast<std::size_t>(r) * shape_.width;
        for (int x = 0; x < shape_.width; ++x) data[k][x] = (input.values[base + x] >> n) & 1;
      }
      sub.write_row_group(d, data);
    }
    sub.set_category(saved);
  });
  phase(ptrs);
}

ConvolutionEngine::Result ConvolutionEngine::run(const std::vector<std::int64_t>& weights, int tile_channels,
                                                 Lanes lanes, std::vector<RowAllocator> allocators) const {
  const ConvShape& s = shape_;
  const int N = s.input_bits, M = s.weight_bits, C = s.channels, kh = s.kernel_h, kw = s.kernel_w;
  if (tile_channels < 1) fail(ErrorCode::InvalidParameter, "empty channel tile");
  if (weights.size() != static_cast<std::size_t>(tile_channels) * C * kh * kw)
    fail(ErrorCode::DimMismatch, "weight tensor does not match the tile shape");
  for (auto w : weights)
    if (w < 0 || static_cast<std::uint64_t>(w) > full_max(M))
      fail(ErrorCode::InvalidParameter, "weight " + std::to_string(w) + " outside the unsigned weight range");
  if (static_cast<int>(lanes.inputs.size()) != N)
    fail(ErrorCode::GeometryMismatch, "need one input subarray per input bit");
  const int columns = lanes.inputs[0].columns();
  const int A = accumulators_needed(tile_channels, columns);
  if (static_cast<int>(lanes.accumulators.size()) < A)
    fail(ErrorCode::CapacityExceeded, "tile needs " + std::to_string(A) + " accumulation subarrays");
  if (kw > columns) fail(ErrorCode::CapacityExceeded, "kernel width exceeds the column count");

  const auto groups = window_groups(s);
  const auto periods = cross_write_periods(N, static_cast<int>(groups.size()));
  // Kernel rows go through the buffer in bands of at most buffer_rows.
  const int band_rows = std::min(kh, lanes.inputs[0].geometry().buffer_rows);
  if (band_rows < 1) fail(ErrorCode::CapacityExceeded, "input subarrays have no buffer rows");
  const int cb_max = bit_length(static_cast<std::uint64_t>(band_rows));
  const int OH = s.out_h(), OW = s.out_w();

  std::vector<Subarray*> in_ptrs, acc_ptrs;
  for (auto& sub : lanes.inputs) in_ptrs.push_back(&sub);
  for (int a = 0; a < A; ++a) acc_ptrs.push_back(&lanes.accumulators[a]);

  const auto& ageo = lanes.accumulators[0].geometry();
  const int G = ageo.group_size;
  Result res;
  res.allocators = std::move(allocators);
  if (static_cast<int>(res.allocators.size()) < A) {
    if (!res.allocators.empty()) fail(ErrorCode::InvalidParameter, "one allocator per accumulation subarray");
    for (int a = 0; a < A; ++a) res.allocators.emplace_back(ageo.device_rows, G);
  }
  std::vector<std::optional<VerticalOperand>> sum(A);
  std::uint64_t sum_max = 0;
  std::vector<std::vector<VerticalOperand>> pending(A);   // slot operands per accumulator
  std::vector<std::vector<VerticalOperand>> blocks(A);    // slot blocks to release on fold
  std::uint64_t pending_max = 0;
  std::vector<std::uint64_t> pending_maxes;

  // The running sum and its successor live in the high rows; slot blocks take
  // the rest. Kernel columns are split into chunks whose slots fit.
  const int reserve = ceil_div(std::max(1, bit_length(max_accumulator(s))), G);
  const int slot_budget = (ageo.device_rows - 2 * reserve) * G;
  const int chunk_cols = std::min(kw, slot_budget / (N * cb_max));
  if (chunk_cols < 1)
    fail(ErrorCode::CapacityExceeded, "accumulation subarray cannot hold " + std::to_string(N * cb_max) +
                                          " slot rows plus the running sum");

  auto fold = [&] {
    if (pending[0].empty()) return;
    const std::uint64_t new_max = sat_add(sum_max, pending_max);
    const int width = std::max(1, bit_length(new_max));
    hooks_.for_each_lane(A, [&](int a) {
      Subarray& acc = lanes.accumulators[a];
      const Category saved = acc.category();
      acc.set_category(Category::Convolution);
      std::vector<VerticalOperand> ops;
      std::vector<std::uint64_t> maxes;
      if (sum[a]) {
        ops.push_back(*sum[a]);
        maxes.push_back(sum_max);
      }
      ops.insert(ops.end(), pending[a].begin(), pending[a].end());
      maxes.insert(maxes.end(), pending_maxes.begin(), pending_maxes.end());
      VerticalOperand out = res.allocators[a].allocate(acc, width, RowAllocator::Placement::High);
      execute(build_add(ops, out, AddMode::Exact, maxes, Category::Convolution), acc);
      if (sum[a]) res.allocators[a].release(*sum[a]);
      for (const auto& b : blocks[a]) res.allocators[a].release(b);
      sum[a] = out;
      pending[a].clear();
      blocks[a].clear();
      acc.set_category(saved);
    });
    sum_max = new_max;
    pending_max = 0;
    pending_maxes.clear();
    phase(acc_ptrs);
  };

  auto weight = [&](int o, int c, int r, int j) {
    return weights[((static_cast<std::size_t>(o) * C + c) * kh + r) * kw + j];
  };

  struct Round {
    int c, m, r0, rows, j0, cols;
  };
  std::vector<Round> rounds;
  for (int c = 0; c < C; ++c)
    for (int m = 0; m < M; ++m)
      for (int r0 = 0; r0 < kh; r0 += band_rows)
        for (int j0 = 0; j0 < kw; j0 += chunk_cols)
          rounds.push_back({c, m, r0, std::min(band_rows, kh - r0), j0, std::min(chunk_cols, kw - j0)});

  for (const Round& rd : rounds) {
    const int c = rd.c, m = rd.m, cb = bit_length(static_cast<std::uint64_t>(rd.rows));
    const int slot_rows = N * rd.cols * cb;
    const int slot_device_rows = ceil_div(slot_rows, G);
    // Slot rows for this round, shared by all output channels.
    if (res.allocators[0].largest_free_block() < slot_device_rows + reserve) fold();
    if (res.allocators[0].largest_free_block() < slot_device_rows + reserve)
      fail(ErrorCode::CapacityExceeded, "accumulation subarray cannot hold " + std::to_string(slot_rows) +
                                            " slot rows plus the running sum");
    auto slot_row = [&](int n, int j, int k) { return (n * rd.cols + (j - rd.j0)) * cb + k; };
    std::vector<int> slot_base(A);
    for (int a = 0; a < A; ++a) {
      Subarray& acc = lanes.accumulators[a];
      const Category saved = acc.category();
      acc.set_category(Category::Transfer);
      VerticalOperand block = res.allocators[a].allocate(acc, slot_rows);
      acc.set_category(saved);
      blocks[a].push_back(block);
      slot_base[a] = block.base_row;
      for (int n = 0; n < N; ++n)
        for (int j = rd.j0; j < rd.j0 + rd.cols; ++j)
          pending[a].push_back({block.base_row + slot_row(n, j, 0), cb, n + m});
    }
    for (int n = 0; n < N; ++n)
      for (int j = 0; j < rd.cols; ++j) {
        pending_maxes.push_back(static_cast<std::uint64_t>(rd.rows));
        pending_max = sat_add(pending_max, static_cast<std::uint64_t>(rd.rows) << (n + m));
      }

    for (int o = 0; o < tile_channels; ++o) {
      // Phase A: every input plane runs its periods and emits count bits.
      std::vector<std::vector<BitRow>> emitted(N);
      hooks_.for_each_lane(N, [&](int n) {
        Subarray& sub = lanes.inputs[n];
        Schedule sch(Category::Load);
        for (int r = 0; r < rd.rows; ++r) {
          BitRow pattern = zeros(columns);
          for (int j = rd.j0; j < rd.j0 + rd.cols; ++j) pattern[j] = (weight(o, c, rd.r0 + r, j) >> m) & 1;
          sch.add(uop::LoadBuffer{r, std::move(pattern)});
        }
        sch.set_category(Category::Convolution);
        std::vector<int> beats;
        for (const auto& period : periods)
          for (const auto& pa : period) {
            if (pa.plane != n) continue;
            const auto& grp = groups[pa.group];
            std::vector<int> offsets;
            for (int ox : grp.oxs) offsets.push_back(ox * s.stride);
            for (int r = 0; r < rd.rows; ++r)
              sch.add(uop::AndAlignedToCounter{c * s.height + grp.oy * s.stride + rd.r0 + r, r, kw, offsets});
            for (int k = 0; k < cb; ++k) sch.add(uop::ShiftOut{});
            sch.add(uop::ResetCounters{});
            beats.push_back(ceil_div(static_cast<int>(grp.oxs.size()) * rd.cols, bus_width_));
          }
        emitted[n] = execute(sch, sub);
        const Category saved = sub.category();
        sub.set_category(Category::Transfer);
        std::uint64_t total_beats = 0;
        for (int b : beats) total_beats += static_cast<std::uint64_t>(b) * cb;
        if (total_beats) sub.charge(OpKind::BusBeat, total_beats, total_beats);
        sub.set_category(saved);
      });
      phase(in_ptrs);

      // Phase B: route each emitted bit into its accumulator slot row.
      hooks_.for_each_lane(A, [&](int a) {
        Subarray& acc = lanes.accumulators[a];
        const Category saved = acc.category();
        acc.set_category(Category::Transfer);
        std::vector<std::size_t> cursor(N, 0);
        for (const auto& period : periods)
          for (const auto& pa : period) {
            const auto& grp = groups[pa.group];
            const int n = pa.plane;
            for (int k = 0; k < cb; ++k) {
              const BitRow& vec = emitted[n][cursor[n] + k];
              for (int j = rd.j0; j < rd.j0 + rd.cols; ++j) {
                BitRow row = zeros(columns);
                bool touched = false;
                for (int ox : grp.oxs) {
                  const AccumulatorSlot slot = slot_of(o, grp.oy, ox, columns);
                  if (slot.subarray != a) continue;
                  row[slot.column] = vec[ox * s.stride + j];
                  touched = true;
                }
                if (touched) acc.program_bit_row(slot_base[a] + slot_row(n, j, k), row);
              }
            }
            cursor[n] += static_cast<std::size_t>(cb);
          }
        acc.set_category(saved);
      });
      phase(acc_ptrs);
    }
  }
  fold();

  // OH*OW elements per channel may not fill every accumulator; they all share the bound.
  for (int a = 0; a < A; ++a) {
    res.sums.push_back(*sum[a]);
    res.max_value.push_back(sum_max);
  }
  (void)OH;
  (void)OW;
  return res;
}

FixedPointTensor bitwise_convolution(const std::vector<BitPlaneTensor>& input_planes,
                                     const std::vector<BitPlaneTensor>& weight_planes, int stride,
                                     const SubarrayGeometry& geometry, const CostParams* params,
                                     CostLedger* ledger) {
  if (input_planes.empty() || weight_planes.empty()) fail(ErrorCode::DimMismatch, "no bit planes given");
  const FixedPointTensor in = reconstruct(input_planes);
  const FixedPointTensor w = reconstruct(weight_planes);
  ConvShape shape;
  shape.height = in.dims[0];
  shape.width = in.dims[1];
  shape.kernel_h = w.dims[0];
  shape.kernel_w = w.dims[1];
  shape.stride = stride;
  shape.input_bits = static_cast<int>(input_planes.size());
  shape.weight_bits = static_cast<int>(weight_planes.size());

  static const CostParams kDefaults{};
  const CostParams* p = params ? params : &kDefaults;
  ConvolutionEngine::Hooks hooks;
  if (ledger)
    hooks.end_phase = [ledger](std::span<Subarray* const> subs) {
      std::vector<CostLedger> lanes;
      for (auto* sub : subs) lanes.push_back(sub->take_ledger());
      ledger->merge_serial(combine_lanes(lanes));
    };
  ConvolutionEngine engine(shape, geometry.columns, hooks);

  std::vector<Subarray> inputs, accs;
  for (int n = 0; n < shape.input_bits; ++n) inputs.emplace_back(geometry, n, p);
  const int A = engine.accumulators_needed(1, geometry.columns);
  for (int a = 0; a < A; ++a) accs.emplace_back(geometry, shape.input_bits + a, p);
  engine.load_inputs(in, inputs, Category::Load);
  auto result = engine.run(w.values, 1, {inputs, accs});

  FixedPointTensor out({shape.out_h(), shape.out_w()}, std::max(1, bit_length(result.max_value[0])));
  std::vector<std::vector<std::uint64_t>> sums;
  for (int a = 0; a < A; ++a) {
    accs[a].set_category(Category::Transfer);
    sums.push_back(read_vertical(accs[a], result.sums[a]));
  }
  if (ledger) {
    std::vector<Subarray*> ptrs;
    for (auto& a : accs) ptrs.push_back(&a);
    std::vector<CostLedger> lanes;
    for (auto* sub : ptrs) lanes.push_back(sub->take_ledger());
    ledger->merge_serial(combine_lanes(lanes));
  }
  for (int oy = 0; oy < shape.out_h(); ++oy)
    for (int ox = 0; ox < shape.out_w(); ++ox) {
      const auto slot = engine.slot_of(0, oy, ox, geometry.columns);
      out.values[static_cast<std::size_t>(oy) * shape.out_w() + ox] =
          static_cast<std::int64_t>(sums[slot.subarray][slot.column]);
    }
  return out;
}

}  // namespace nandspin
