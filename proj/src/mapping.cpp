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

#include "nandspin/mapping.hpp"

#include <set>

#include "nandspin/errors.hpp"

namespace nandspin {

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

std::string label_of(const LayerSpec& l, std::size_t i) {
  return "layer " + std::to_string(i) + (l.name.empty() ? "" : " '" + l.name + "'") + " (" +
         std::string(to_string(l.kind)) + ")";
}

[[noreturn]] void too_big(const std::string& label, const std::string& what) {
  fail(ErrorCode::CapacityExceeded, label + ": " + what);
}

}  // namespace

void MatGeometry::validate() const {
  if (subarray_rows < 1 || subarray_cols < 1 || mat_rows < 1 || mat_cols < 1 || bus_width < 1)
    fail(ErrorCode::InvalidParameter, "mat geometry values must be positive");
}

MappingPlan plan_mapping(const ModelSpec& model, const TensorShape& input, const SubarrayGeometry& geo,
                         const MatGeometry& mats) {
  geo.validate();
  mats.validate();
  const auto shapes = model.infer_shapes(input);
  MappingPlan plan;
  const int total = mats.subarrays();
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& l = model.layers[i];
    TensorShape in = shapes[i];
    if (in.dims.size() == 2) in.dims.insert(in.dims.begin(), 1);
    const TensorShape& out = shapes[i + 1];
    LayerMapping m;
    m.layer = static_cast<int>(i);
    m.kind = l.kind;
    m.label = label_of(l, i);
    if (l.has_weights()) {
      TensorShape conv_in = in;
      if (l.kind == LayerKind::FullyConnected) conv_in.dims = {l.dims[1], 1, 1};
      const ConvShape s = conv_shape_of(l, conv_in);
      m.shape = s;
      if (s.channels * s.height > geo.bit_rows())
        too_big(m.label, "C*H = " + std::to_string(s.channels * s.height) + " rows exceed " +
                             std::to_string(geo.bit_rows()) + " bit rows");
      if (s.width > geo.columns)
        too_big(m.label, "input width " + std::to_string(s.width) + " exceeds " + std::to_string(geo.columns) +
                             " columns");
      // One kernel column of one buffer band is the smallest round.
      const int cb = bit_length(static_cast<std::uint64_t>(std::min(s.kernel_h, geo.buffer_rows)));
      const int slot_rows = ceil_div(s.input_bits * cb, geo.group_size);
      const int reserve =
          ceil_div(std::max(1, bit_length(ConvolutionEngine::max_accumulator(s))), geo.group_size);
      if (slot_rows + 2 * reserve > geo.device_rows)
        too_big(m.label, "accumulation needs " + std::to_string(slot_rows + 2 * reserve) + " device rows, have " +
                             std::to_string(geo.device_rows));
      m.input_subarrays = s.input_bits;
      const int per_channel = s.out_h() * s.out_w();
      int tile = 0;
      for (int t = s.out_channels; t >= 1; --t)
        if (s.input_bits + ceil_div(t * per_channel, geo.columns) <= total) {
          tile = t;
          break;
        }
      if (tile == 0)
        too_big(m.label, "needs " + std::to_string(s.input_bits + ceil_div(per_channel, geo.columns)) +
                             " subarrays, the mat group has " + std::to_string(total));
      m.tile_channels = tile;
      m.tiles = ceil_div(s.out_channels, tile);
      m.accumulation_subarrays = ceil_div(tile * per_channel, geo.columns);
      m.groups = window_groups(s);
      m.periods = cross_write_periods(s.input_bits, static_cast<int>(m.groups.size()));
      for (int c = 0; c < s.channels; ++c)
        for (int w = 0; w < s.weight_bits; ++w) m.rounds.emplace_back(c, w);
    } else {
      const int elements = out.dims[0] * out.dims[1] * out.dims[2];
      const int window = l.dims[0] * l.dims[1];
      m.accumulation_subarrays = ceil_div(elements, geo.columns);
      if (m.accumulation_subarrays > total)
        too_big(m.label, "needs " + std::to_string(m.accumulation_subarrays) + " subarrays, the mat group has " +
                             std::to_string(total));
      // Window operands plus a running value and the compare/sum scratch rows.
      const int rows = window * ceil_div(in.bits, geo.group_size) + 6;
      if (rows > geo.device_rows)
        too_big(m.label, "pooling window needs " + std::to_string(rows) + " device rows, have " +
                             std::to_string(geo.device_rows));
      m.tile_channels = out.dims[0];
      m.tiles = 1;
    }
    m.mats_used = ceil_div(m.input_subarrays + m.accumulation_subarrays, mats.subarrays_per_mat());
    plan.layers.push_back(std::move(m));
  }
  return plan;
}

bool cross_writing_sound(const LayerMapping& m, int columns) {
  if (m.periods.empty()) return true;
  const ConvolutionEngine engine(m.shape, 1);
  for (const auto& period : m.periods)
    for (int o = 0; o < m.tile_channels; ++o) {
      std::set<std::pair<int, int>> written;
      for (const auto& pa : period) {
        const auto& g = m.groups[static_cast<std::size_t>(pa.group)];
        for (int ox : g.oxs) {
          const auto slot = engine.slot_of(o, g.oy, ox, columns);
          if (!written.insert({slot.subarray, slot.column}).second) return false;
        }
      }
    }
  return true;
}

std::map<std::pair<int, int>, int> plane_pair_coverage(const LayerMapping& m) {
  std::map<std::pair<int, int>, int> out;
  const int groups = static_cast<int>(m.groups.size());
  for (int n = 0; n < m.input_subarrays; ++n)
    for (int w = 0; w < m.shape.weight_bits; ++w) {
      int agreed = -2;
      for (const auto& [c, round_w] : m.rounds) {
        if (round_w != w) continue;
        std::vector<int> hits(static_cast<std::size_t>(groups), 0);
        for (const auto& period : m.periods)
          for (const auto& pa : period)
            if (pa.plane == n) ++hits[static_cast<std::size_t>(pa.group)];
        int x = hits.empty() ? 0 : hits[0];
        for (int h : hits)
          if (h != x) x = -1;
        agreed = agreed == -2 ? x : (agreed == x ? x : -1);
        (void)c;
      }
      out[{n, w}] = agreed == -2 ? 0 : agreed;
    }
  return out;
}

nlohmann::json MappingPlan::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& m : layers) {
    nlohmann::json periods = nlohmann::json::array();
    for (const auto& p : m.periods) {
      nlohmann::json pj = nlohmann::json::array();
      for (const auto& a : p) pj.push_back({a.plane, a.group});
      periods.push_back(pj);
    }
    j.push_back({{"layer", m.layer},
                 {"label", m.label},
                 {"input_subarrays", m.input_subarrays},
                 {"accumulation_subarrays", m.accumulation_subarrays},
                 {"tile_channels", m.tile_channels},
                 {"tiles", m.tiles},
                 {"mats_used", m.mats_used},
                 {"window_groups", m.groups.size()},
                 {"rounds", m.rounds.size()},
                 {"periods", periods}});
  }
  return {{"layers", j}};
}

}  // namespace nandspin
