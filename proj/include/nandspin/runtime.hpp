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

#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "nandspin/cost.hpp"
#include "nandspin/mapping.hpp"
#include "nandspin/model.hpp"
#include "nandspin/primitives.hpp"
#include "nandspin/subarray.hpp"
#include "nandspin/tensor.hpp"

namespace nandspin {

/// Runs lane bodies on a fixed set of worker threads. Lanes touch disjoint
/// subarrays; the first failing lane (lowest index) is rethrown.
class LaneExecutor {
 public:
  explicit LaneExecutor(int threads = 1);
  ~LaneExecutor();
  LaneExecutor(const LaneExecutor&) = delete;
  LaneExecutor& operator=(const LaneExecutor&) = delete;

  int threads() const { return threads_; }
  void for_each(int n, const std::function<void(int)>& fn);

 private:
  void worker();
  void drain();

  int threads_;
  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable wake_, done_;
  const std::function<void(int)>* job_ = nullptr;
  int job_size_ = 0;
  int next_ = 0;
  int active_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
  std::vector<std::exception_ptr> errors_;
};

struct RunOptions {
  SubarrayGeometry geometry;
  MatGeometry mats;
  CostParams params;
  ProgramCheck check = ProgramCheck::Strict;
  int threads = 1;
  bool trace = false;
};

struct LayerReport {
  int layer = 0;
  std::string label;
  CostLedger ledger;
};

struct RunResult {
  FixedPointTensor output;
  CostLedger ledger;
  std::vector<LayerReport> layers;
  std::vector<TraceEvent> trace;
  std::optional<int> argmax;  // host-side, rank-1 outputs only
  MappingPlan plan;
};

/// y = clamp(floor((x * S + B) / 2^F), 0, 2^k - 1) per column, computed in
/// memory: scalar multiplies per distinct |S| (masked), a modular add with a
/// folded constant (two's complement for negative S), an MSB-test ReLU and a
/// compare/select upper clamp. All affines must share F. Intermediate rows
/// are released; the returned rows hold at most k bits.
VerticalOperand affine_stage(Subarray& sub, RowAllocator& alloc, const VerticalOperand& x, std::uint64_t x_max,
                             std::span<const FixedPointAffine> per_column, int k, Category category);

/// Executes models layer by layer on simulated subarrays.
class Runtime {
 public:
  explicit Runtime(RunOptions options);

  FixedPointTensor run_conv_layer(const LayerSpec& layer, const FixedPointTensor& input, const TensorShape& out,
                                  const LayerMapping& mapping, bool first_layer);
  FixedPointTensor run_fc_layer(const LayerSpec& layer, const FixedPointTensor& input, const TensorShape& out,
                                const LayerMapping& mapping, bool first_layer);
  FixedPointTensor run_pool_layer(const LayerSpec& layer, const FixedPointTensor& input, const TensorShape& out,
                                  const LayerMapping& mapping, bool first_layer);

  RunResult run_model(const ModelSpec& model, const FixedPointTensor& input);

  const RunOptions& options() const { return options_; }
  /// Ledger of the work since the last take_ledger.
  CostLedger take_ledger();
  std::vector<TraceEvent> take_trace();

 private:
  void end_phase(std::span<Subarray* const> subs);
  std::vector<Subarray> make_subarrays(int n);
  ConvolutionEngine::Hooks hooks();

  RunOptions options_;
  std::unique_ptr<LaneExecutor> executor_;
  CostLedger ledger_;
  std::vector<TraceEvent> trace_;
  int next_id_ = 0;
};

RunResult run_model(const ModelSpec& model, const FixedPointTensor& input, const RunOptions& options = {});

}  // namespace nandspin
