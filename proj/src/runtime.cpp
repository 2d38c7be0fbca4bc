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

#include "nandspin/runtime.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "nandspin/errors.hpp"
#include "nandspin/reference.hpp"
#include "nandspin/schedule.hpp"

namespace nandspin {

// --- lane executor -------------------------------------------------------------

LaneExecutor::LaneExecutor(int threads) : threads_(std::max(1, threads)) {
  for (int i = 1; i < threads_; ++i) workers_.emplace_back([this] { worker(); });
}

LaneExecutor::~LaneExecutor() {
  {
    std::lock_guard lk(mu_);
    stop_ = true;
  }
  wake_.notify_all();
  for (auto& t : workers_) t.join();
}

void LaneExecutor::worker() {
  std::uint64_t seen = 0;
  for (;;) {
    {
      std::unique_lock lk(mu_);
      wake_.wait(lk, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
    }
    drain();
  }
}

void LaneExecutor::drain() {
  for (;;) {
    int i;
    {
      std::lock_guard lk(mu_);
      if (next_ >= job_size_) break;
      i = next_++;
    }
    try {
      (*job_)(i);
    } catch (...) {
      errors_[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  std::lock_guard lk(mu_);
  if (--active_ == 0) done_.notify_all();
}

void LaneExecutor::for_each(int n, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  if (threads_ == 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  {
    std::lock_guard lk(mu_);
    job_ = &fn;
    job_size_ = n;
    next_ = 0;
    active_ = threads_;
    errors_.assign(static_cast<std::size_t>(n), nullptr);
    ++generation_;
  }
  wake_.notify_all();
  drain();
  {
    std::unique_lock lk(mu_);
    done_.wait(lk, [&] { return active_ == 0; });
    job_ = nullptr;
  }
  for (auto& e : errors_)
    if (e) std::rethrow_exception(e);
}

// --- in-memory affine ------------------------------------------------------------

namespace {

using i128 = __int128;

std::vector<std::uint64_t> all_columns(int columns, std::uint64_t v) {
  return std::vector<std::uint64_t>(static_cast<std::size_t>(columns), v);
}

int bit_length128(i128 v) {
  int n = 0;
  while (v > 0) {
    ++n;
    v >>= 1;
  }
  return n;
}

}  // namespace

VerticalOperand affine_stage(Subarray& sub, RowAllocator& alloc, const VerticalOperand& x, std::uint64_t x_max,
                             std::span<const FixedPointAffine> per_column, int k, Category category) {
  const int columns = sub.columns();
  if (static_cast<int>(per_column.size()) != columns)
    fail(ErrorCode::GeometryMismatch, "affine stage needs one affine per column");
  if (k < 1 || k > 16) fail(ErrorCode::InvalidParameter, "affine output bits must be in [1, 16]");
  const int F = per_column[0].shift;
  std::uint64_t s_max = 0;
  bool negative = false;
  i128 lo = 0, hi = 0;
  for (const auto& a : per_column) {
    if (a.shift != F) fail(ErrorCode::InvalidParameter, "affines in one stage must share the shift");
    const std::uint64_t mag = a.scale < 0 ? static_cast<std::uint64_t>(-a.scale) : static_cast<std::uint64_t>(a.scale);
    s_max = std::max(s_max, mag);
    negative = negative || a.scale < 0;
    const i128 sx = static_cast<i128>(a.scale) * static_cast<i128>(x_max);
    lo = std::min(lo, static_cast<i128>(a.offset) + std::min<i128>(0, sx));
    hi = std::max(hi, static_cast<i128>(a.offset) + std::max<i128>(0, sx));
  }
  const int wS = bit_length(s_max);
  const int wP = wS ? x.width + wS : 0;
  const int W = std::max({std::max(bit_length128(-lo), bit_length128(hi)) + 1, F + 2, wP + 1});
  if (W > 62) fail(ErrorCode::InvalidParameter, "affine stage needs " + std::to_string(W) + "-bit intermediates");

  const Category saved = sub.category();
  sub.set_category(category);

  // Product rows, one scalar multiply per distinct |S|.
  std::optional<VerticalOperand> q;
  if (wP) {
    const VerticalOperand p = alloc.allocate(sub, wP);
    std::map<std::uint64_t, BitRow> masks;
    for (int c = 0; c < columns; ++c) {
      const auto s = per_column[c].scale;
      const std::uint64_t mag = s < 0 ? static_cast<std::uint64_t>(-s) : static_cast<std::uint64_t>(s);
      if (!mag) continue;
      auto [it, fresh] = masks.try_emplace(mag, zeros(columns));
      it->second[c] = 1;
    }
    for (const auto& [mag, mask] : masks) {
      std::optional<BitRow> m;
      if (popcount(mask) != static_cast<std::size_t>(columns)) m = mask;
      execute(build_mul(x, mag, wS, p, m, category), sub);
    }
    q = p;
    if (negative) {
      // Negative scales add ~P + 1, the two's complement of the product.
      const VerticalOperand aux = alloc.allocate(sub, 2);
      const int ones_row = aux.base_row, flag_row = aux.base_row + 1;
      write_vertical(sub, {ones_row, 1, 0}, all_columns(columns, 1), category);
      std::vector<std::uint64_t> flags(static_cast<std::size_t>(columns));
      for (int c = 0; c < columns; ++c) flags[c] = per_column[c].scale < 0;
      write_vertical(sub, {flag_row, 1, 0}, flags, category);
      const VerticalOperand np = alloc.allocate(sub, wP);
      execute(build_invert(p, ones_row, np, category), sub);
      const VerticalOperand sel = alloc.allocate(sub, wP);
      execute(build_select(flag_row, np, p, sel, category), sub);
      alloc.release(p);
      alloc.release(np);
      alloc.release(aux);
      q = sel;
    }
  }

  // T = Q + K mod 2^W, with K folding the offset and the negation constant.
  const i128 mod = static_cast<i128>(1) << W;
  std::vector<std::uint64_t> konst(static_cast<std::size_t>(columns));
  for (int c = 0; c < columns; ++c) {
    i128 v = per_column[c].offset;
    if (per_column[c].scale < 0) v += mod - (static_cast<i128>(1) << wP) + 1;
    v %= mod;
    if (v < 0) v += mod;
    konst[c] = static_cast<std::uint64_t>(v);
  }
  const VerticalOperand kr = alloc.allocate(sub, W);
  write_vertical(sub, kr, konst, category);
  const VerticalOperand t = alloc.allocate(sub, W);
  std::vector<VerticalOperand> addends{kr};
  if (q) addends.push_back(*q);
  execute(build_add(addends, t, AddMode::Modular, {}, category), sub);
  if (q) alloc.release(*q);
  alloc.release(kr);

  // Rows F.. of T hold floor(T / 2^F); ReLU drops the sign.
  const VerticalOperand y{t.base_row + F, W - F, 0};
  const VerticalOperand r = alloc.allocate(sub, W - F - 1);
  execute(build_relu(y, r, category), sub);
  alloc.release(t);

  VerticalOperand out = r;
  if (r.width > k) {
    const VerticalOperand cap = alloc.allocate(sub, r.width);
    write_vertical(sub, cap, all_columns(columns, (std::uint64_t{1} << k) - 1), category);
    const VerticalOperand flags = alloc.allocate(sub, 2);
    execute(build_compare(r, cap, flags.base_row, flags.base_row + 1, category), sub);
    out = alloc.allocate(sub, k);
    execute(build_select(flags.base_row + 1, cap, r, out, category), sub);
    alloc.release(r);
    alloc.release(cap);
    alloc.release(flags);
  }
  sub.set_category(saved);
  return out;
}

// --- runtime ---------------------------------------------------------------------

Runtime::Runtime(RunOptions options) : options_(std::move(options)) {
  options_.geometry.validate();
  options_.mats.validate();
  options_.params.group_size = options_.geometry.group_size;
  options_.params.validate();
  executor_ = std::make_unique<LaneExecutor>(options_.threads);
}

CostLedger Runtime::take_ledger() { return std::exchange(ledger_, CostLedger{}); }

std::vector<TraceEvent> Runtime::take_trace() { return std::exchange(trace_, {}); }

void Runtime::end_phase(std::span<Subarray* const> subs) {
  std::vector<CostLedger> lanes;
  lanes.reserve(subs.size());
  for (Subarray* s : subs) {
    lanes.push_back(s->take_ledger());
    if (s->tracing()) {
      auto t = s->take_trace();
      trace_.insert(trace_.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
    }
  }
  ledger_.merge_serial(combine_lanes(lanes));
}

std::vector<Subarray> Runtime::make_subarrays(int n) {
  std::vector<Subarray> subs;
  subs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    subs.emplace_back(options_.geometry, next_id_++, &options_.params, options_.check);
    subs.back().enable_trace(options_.trace);
  }
  return subs;
}

ConvolutionEngine::Hooks Runtime::hooks() {
  ConvolutionEngine::Hooks h;
  h.for_each_lane = [this](int n, const std::function<void(int)>& fn) { executor_->for_each(n, fn); };
  h.end_phase = [this](std::span<Subarray* const> subs) { end_phase(subs); };
  return h;
}

namespace {

std::vector<Subarray*> pointers(std::span<Subarray> subs) {
  std::vector<Subarray*> p;
  for (auto& s : subs) p.push_back(&s);
  return p;
}

FixedPointAffine idle_affine(int shift) { return {0, 0, shift}; }

}  // namespace

FixedPointTensor Runtime::run_conv_layer(const LayerSpec& layer, const FixedPointTensor& input,
                                         const TensorShape& out_shape, const LayerMapping& mapping,
                                         bool first_layer) {
  const ConvShape& s = mapping.shape;
  const int k = out_shape.bits;
  const int columns = options_.geometry.columns;
  const int OH = s.out_h(), OW = s.out_w(), per_channel = OH * OW;
  FixedPointTensor in = input;
  in.bit_width = s.input_bits;
  if (layer.kind == LayerKind::FullyConnected) in.dims = {static_cast<int>(in.values.size())};

  const ConvolutionEngine engine(s, options_.mats.bus_width, hooks());
  auto inputs = make_subarrays(s.input_bits);
  auto accs = make_subarrays(mapping.accumulation_subarrays);
  engine.load_inputs(in, inputs, first_layer ? Category::Load : Category::Transfer);

  const auto quant = quantize_constants(layer, k);
  const auto bn = batch_norm_constants(layer);
  FixedPointTensor out(out_shape.dims, k);
  std::vector<RowAllocator> allocators;
  for (int a = 0; a < mapping.accumulation_subarrays; ++a)
    allocators.emplace_back(options_.geometry.device_rows, options_.geometry.group_size);

  const std::size_t slice = static_cast<std::size_t>(s.channels) * s.kernel_h * s.kernel_w;
  for (int t = 0; t < mapping.tiles; ++t) {
    const int o0 = t * mapping.tile_channels;
    const int tc = std::min(mapping.tile_channels, s.out_channels - o0);
    const std::vector<std::int64_t> weights(layer.weights.begin() + static_cast<std::ptrdiff_t>(o0 * slice),
                                            layer.weights.begin() + static_cast<std::ptrdiff_t>((o0 + tc) * slice));
    const int A = engine.accumulators_needed(tc, columns);
    std::span<Subarray> tile_accs(accs.data(), static_cast<std::size_t>(A));
    auto res = engine.run(weights, tc, {inputs, tile_accs}, std::move(allocators));

    executor_->for_each(A, [&](int a) {
      Subarray& acc = tile_accs[a];
      RowAllocator& alloc = res.allocators[a];
      std::vector<FixedPointAffine> qcols, bcols;
      for (int c = 0; c < columns; ++c) {
        const int e = a * columns + c;
        const bool used = e < tc * per_channel;
        const int o = o0 + e / per_channel;
        qcols.push_back(used ? quant[o] : idle_affine(quant[0].shift));
        if (!bn.empty()) bcols.push_back(used ? bn[o] : idle_affine(bn[0].shift));
      }
      VerticalOperand y = affine_stage(acc, alloc, res.sums[a], res.max_value[a], qcols, k, Category::Quantization);
      if (!bn.empty()) {
        const VerticalOperand z =
            affine_stage(acc, alloc, y, (std::uint64_t{1} << k) - 1, bcols, k, Category::BatchNorm);
        alloc.release(y);
        y = z;
      }
      acc.set_category(Category::Transfer);
      const auto vals = read_vertical(acc, y);
      for (int c = 0; c < columns; ++c) {
        const int e = a * columns + c;
        if (e >= tc * per_channel) break;
        out.values[static_cast<std::size_t>(o0) * per_channel + e] = static_cast<std::int64_t>(vals[c]);
      }
      alloc.release_all();
    });
    const auto ptrs = pointers(tile_accs);
    end_phase(ptrs);
    allocators = std::move(res.allocators);
  }
  return out;
}

FixedPointTensor Runtime::run_fc_layer(const LayerSpec& layer, const FixedPointTensor& input,
                                       const TensorShape& out_shape, const LayerMapping& mapping, bool first_layer) {
  if (layer.kind != LayerKind::FullyConnected) fail(ErrorCode::InvalidParameter, "not an fc layer");
  return run_conv_layer(layer, input, out_shape, mapping, first_layer);
}

FixedPointTensor Runtime::run_pool_layer(const LayerSpec& layer, const FixedPointTensor& input,
                                         const TensorShape& out_shape, const LayerMapping& mapping,
                                         bool first_layer) {
  const auto chw = input.chw();
  const int H = chw[1], W = chw[2];
  const int kh = layer.dims[0], kw = layer.dims[1], stride = layer.stride;
  const int OH = out_shape.dims[1], OW = out_shape.dims[2];
  const int elements = out_shape.dims[0] * OH * OW;
  const int k = input.bit_width;
  const int columns = options_.geometry.columns;
  const std::uint64_t vmax = (std::uint64_t{1} << k) - 1;
  const std::int64_t window = static_cast<std::int64_t>(kh) * kw;
  FixedPointTensor out(out_shape.dims, k);
  auto subs = make_subarrays(mapping.accumulation_subarrays);

  executor_->for_each(static_cast<int>(subs.size()), [&](int p) {
    Subarray& sub = subs[p];
    RowAllocator alloc(options_.geometry.device_rows, options_.geometry.group_size);
    const Category place = first_layer ? Category::Load : Category::Transfer;
    sub.set_category(place);
    std::vector<VerticalOperand> ops;
    for (int r = 0; r < kh; ++r)
      for (int j = 0; j < kw; ++j) {
        std::vector<std::uint64_t> vals(static_cast<std::size_t>(columns), 0);
        for (int c = 0; c < columns; ++c) {
          const int e = p * columns + c;
          if (e >= elements) break;
          const int ch = e / (OH * OW), oy = (e / OW) % OH, ox = e % OW;
          vals[c] = static_cast<std::uint64_t>(
              input.values[(static_cast<std::size_t>(ch) * H + oy * stride + r) * W + ox * stride + j]);
        }
        const VerticalOperand rows = alloc.allocate(sub, k);
        write_vertical(sub, rows, vals, place);
        ops.push_back(rows);
      }

    sub.set_category(Category::PoolingCompare);
    VerticalOperand result{};
    if (layer.kind == LayerKind::AvgPool) {
      const std::uint64_t sum_max = vmax * static_cast<std::uint64_t>(window);
      const VerticalOperand sum = alloc.allocate(sub, std::max(1, bit_length(sum_max)));
      const std::vector<std::uint64_t> maxes(ops.size(), vmax);
      execute(build_add(ops, sum, AddMode::Exact, maxes, Category::PoolingCompare), sub);
      for (const auto& o : ops) alloc.release(o);
      const FixedPointAffine recip = reciprocal_affine(window, static_cast<std::int64_t>(sum_max));
      std::vector<FixedPointAffine> cols;
      for (int c = 0; c < columns; ++c) cols.push_back(p * columns + c < elements ? recip : idle_affine(recip.shift));
      result = affine_stage(sub, alloc, sum, sum_max, cols, k, Category::PoolingCompare);
      alloc.release(sum);
    } else {
      const bool is_max = layer.kind == LayerKind::MaxPool;
      VerticalOperand cur = ops[0];
      for (std::size_t i = 1; i < ops.size(); ++i) {
        const VerticalOperand flags = alloc.allocate(sub, 2);
        const int tag = flags.base_row, res_row = flags.base_row + 1;
        // res = ops[i] > cur
        execute(build_compare(ops[i], cur, tag, res_row, Category::PoolingCompare), sub);
        const VerticalOperand next = alloc.allocate(sub, k);
        if (is_max)
          execute(build_select(res_row, ops[i], cur, next, Category::PoolingCompare), sub);
        else
          execute(build_select(res_row, cur, ops[i], next, Category::PoolingCompare), sub);
        alloc.release(flags);
        alloc.release(cur);
        alloc.release(ops[i]);
        cur = next;
      }
      result = cur;
    }

    sub.set_category(Category::Transfer);
    const auto vals = read_vertical(sub, result);
    for (int c = 0; c < columns; ++c) {
      const int e = p * columns + c;
      if (e >= elements) break;
      out.values[static_cast<std::size_t>(e)] = static_cast<std::int64_t>(vals[c]);
    }
  });
  end_phase(pointers(subs));
  return out;
}

RunResult Runtime::run_model(const ModelSpec& model, const FixedPointTensor& input) {
  input.validate();
  const TensorShape in_shape = model.input_shape_for(input.dims, input.bit_width);
  const auto shapes = model.infer_shapes(in_shape);
  RunResult result;
  result.plan = plan_mapping(model, in_shape, options_.geometry, options_.mats);
  FixedPointTensor cur = input;
  cur.bit_width = in_shape.bits;
  cur.validate();
  take_ledger();
  take_trace();
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& l = model.layers[i];
    const LayerMapping& m = result.plan.layers[i];
    const bool first = i == 0;
    try {
      switch (l.kind) {
        case LayerKind::Conv: cur = run_conv_layer(l, cur, shapes[i + 1], m, first); break;
        case LayerKind::FullyConnected: cur = run_fc_layer(l, cur, shapes[i + 1], m, first); break;
        default: cur = run_pool_layer(l, cur, shapes[i + 1], m, first); break;
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::CapacityExceeded && std::string(e.what()).rfind("layer ", 0) != 0)
        fail(ErrorCode::CapacityExceeded, m.label + ": " + e.what());
      throw;
    }
    LayerReport rep{static_cast<int>(i), m.label, take_ledger()};
    result.ledger.merge_serial(rep.ledger);
    result.layers.push_back(std::move(rep));
  }
  if (!model.layers.empty() && cur.dims.size() == 1) {
    result.argmax = argmax(cur);
    CostLedger host;
    host.charge(options_.params, {OpKind::HostOp, 1, 1, Category::Transfer});
    result.ledger.merge_serial(host);
    if (options_.trace)
      trace_.push_back({"host_op", -1, {}, Category::Transfer, host.total_energy(), host.total_latency(), "argmax"});
  }
  result.output = std::move(cur);
  result.trace = take_trace();
  return result;
}

RunResult run_model(const ModelSpec& model, const FixedPointTensor& input, const RunOptions& options) {
  Runtime rt(options);
  return rt.run_model(model, input);
}

}  // namespace nandspin
