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

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nandspin/model.hpp"
#include "nandspin/primitives.hpp"
#include "nandspin/subarray.hpp"

namespace nandspin {

/// Mats of subarrays grouped together; one group is the compute budget of a layer.
struct MatGeometry {
  int subarray_rows = 4;  // subarrays per mat: rows x cols
  int subarray_cols = 4;
  int mat_rows = 4;  // mats per group: rows x cols
  int mat_cols = 4;
  int bus_width = 128;  // bits per transfer beat

  int subarrays_per_mat() const { return subarray_rows * subarray_cols; }
  int mats() const { return mat_rows * mat_cols; }
  int subarrays() const { return subarrays_per_mat() * mats(); }
  void validate() const;
  friend bool operator==(const MatGeometry&, const MatGeometry&) = default;
};

struct LayerMapping {
  int layer = 0;
  LayerKind kind = LayerKind::Conv;
  std::string label;
  ConvShape shape;                // weighted layers only
  int input_subarrays = 0;        // plane n -> input subarray n
  int accumulation_subarrays = 0;  // per channel tile (or pool subarrays)
  int tile_channels = 0;
  int tiles = 0;
  int mats_used = 0;
  std::vector<WindowGroup> groups;
  std::vector<ConvPeriod> periods;
  /// (channel, weight plane) rounds in issue order; every round broadcasts
  /// one weight bit-plane per output channel into every input subarray buffer.
  std::vector<std::pair<int, int>> rounds;
};

struct MappingPlan {
  std::vector<LayerMapping> layers;
  nlohmann::json to_json() const;
};

/// Deterministic plan for every layer. Throws CapacityExceeded naming the
/// layer when it cannot be placed.
MappingPlan plan_mapping(const ModelSpec& model, const TensorShape& input, const SubarrayGeometry& geometry,
                         const MatGeometry& mats);

/// True when no two planes write the same accumulation column in one period.
bool cross_writing_sound(const LayerMapping& m, int columns);

/// Times each (input plane n, weight plane m) pair covers every window group
/// of every channel; a sound plan yields exactly 1 for all pairs.
std::map<std::pair<int, int>, int> plane_pair_coverage(const LayerMapping& m);

}  // namespace nandspin
