// Copyright 2026 The FusedInf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fusedinf/graph_ir.hpp"
#include "fusedinf/manifest.hpp"

namespace fusedinf {

enum class ExecMode { kUnfused, kFused };

std::string_view to_string(ExecMode mode);
std::optional<ExecMode> parse_exec_mode(std::string_view name);

enum class Phase { kInit, kMalloc, kMemcpy, kIterate, kTeardown };

std::string_view to_string(Phase phase);
std::optional<Phase> parse_phase(std::string_view name);

// Aggregate time spent in one device function while initializing the
// calibration set, with and without a shared preamble. Seconds.
struct InitCallCost {
  std::string function;
  Phase phase = Phase::kInit;
  double unfused_s = 0;
  double fused_s = 0;
};

double decrease_pct(const InitCallCost& cost);

struct CostTable {
  std::vector<InitCallCost> init_calls;  // file order
  int calibration_models = 7;
  double calibration_weight_mib = 1212;
  double context_base_mib = 500;
  double per_model_overhead_mib = 34;
  double dedup_saving_mib_per_extra_model = 34;
  double memcpy_unfused_gibps = 0;
  double memcpy_fused_gibps = 0;
  // Share of iteration time that is host/device transfer and therefore
  // scales with memcpy throughput in a fused DAG.
  double transfer_fraction = 0;
  std::map<OpKind, double> op_ms_per_mflop;
  double node_dispatch_ms = 0;

  // The shipped calibration, compiled in from calibration/paper_tableIV.cfg.
  static const CostTable& defaults();
  static std::string_view default_text();
  static CostTable parse(std::string_view text, const std::string& source = "<cost table>");
  static CostTable load(const std::filesystem::path& path);

  // Throws Error naming the first violated invariant.
  void validate() const;

  const InitCallCost* find(std::string_view function) const;
  const InitCallCost& phase_cost(Phase phase) const;  // malloc or memcpy row
  double op_latency_ms(OpKind kind, double flops) const;
};

struct MemoryEstimate {
  double context_mib = 0;
  double weights_mib = 0;
  double activations_mib = 0;
  double overhead_mib = 0;
  double peak_mib = 0;
};

MemoryEstimate estimate_memory(const std::vector<ModelManifest>& members,
                               ExecMode mode, const CostTable& ct);

struct FunctionTime {
  std::string function;
  Phase phase;
  double seconds;
};

struct LoadTimeline {
  std::vector<std::pair<Phase, double>> phases;
  std::vector<FunctionTime> functions;  // breakdown of init/malloc/memcpy
  double total_s = 0;

  double phase_s(Phase phase) const;
  const FunctionTime* function(std::string_view name) const;
};

// Per-function time for an n-member load. Unfused scales linearly from the
// calibration set; fused interpolates between n=1 (no sharing) and the
// calibration point.
double scaled_call_time(const InitCallCost& cost, int n, ExecMode mode,
                        const CostTable& ct);

double memcpy_traffic_gib(double weights_mib, const CostTable& ct);
double memcpy_throughput_gibps(int n, ExecMode mode, const CostTable& ct);

LoadTimeline simulate_load(const std::vector<ModelManifest>& members,
                           ExecMode mode, const CostTable& ct);

// Loading one incoming member into a resident DAG of `dag_size` members
// (after the swap). Fused mode reuses the preamble.
LoadTimeline simulate_swap_load(const ModelManifest& incoming, int dag_size,
                                ExecMode mode, const CostTable& ct);

double iteration_factor(int n, ExecMode mode, const CostTable& ct);
double iteration_time_s(const std::vector<ModelManifest>& members,
                        long iterations, ExecMode mode, const CostTable& ct);

struct RunReport {
  ExecMode mode = ExecMode::kUnfused;
  int model_count = 0;
  long iterations = 0;
  LoadTimeline timeline;  // includes the iterate phase
  MemoryEstimate memory;
  double load_s = 0;
  double iterate_s = 0;
  double total_time_s = 0;
  double peak_mem_mib = 0;
};

RunReport simulate_run(const std::vector<ModelManifest>& members,
                       long iterations, ExecMode mode, const CostTable& ct);

// Fits of dedup_saving_mib_per_extra_model to observed (n, saved MiB) pairs.
// Anchored: line through (1, 0) and the largest-n point. Least squares: best
// slope through (1, 0).
double fit_dedup_anchored(const std::vector<std::pair<int, double>>& points);
double fit_dedup_least_squares(const std::vector<std::pair<int, double>>& points);

// Transfer fraction that makes the calibration set's fused/unfused totals
// match. The iteration term is whatever the loads leave of each total.
double fit_transfer_fraction(const CostTable& ct, double weights_mib,
                             double unfused_total_s, double fused_total_s);

}  // namespace fusedinf
