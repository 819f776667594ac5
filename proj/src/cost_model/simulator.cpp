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

#include <algorithm>
#include <cmath>

#include "fusedinf/cost_model.hpp"
#include "fusedinf/errors.hpp"

namespace fusedinf {

std::string_view to_string(ExecMode mode) {
  return mode == ExecMode::kFused ? "fused" : "unfused";
}

std::optional<ExecMode> parse_exec_mode(std::string_view name) {
  if (name == "fused") return ExecMode::kFused;
  if (name == "unfused") return ExecMode::kUnfused;
  return std::nullopt;
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::kInit: return "init";
    case Phase::kMalloc: return "malloc";
    case Phase::kMemcpy: return "memcpy";
    case Phase::kIterate: return "iterate";
    case Phase::kTeardown: return "teardown";
  }
  return "?";
}

std::optional<Phase> parse_phase(std::string_view name) {
  for (Phase p : {Phase::kInit, Phase::kMalloc, Phase::kMemcpy, Phase::kIterate,
                  Phase::kTeardown}) {
    if (to_string(p) == name) return p;
  }
  return std::nullopt;
}

MemoryEstimate estimate_memory(const std::vector<ModelManifest>& members,
                               ExecMode mode, const CostTable& ct) {
  MemoryEstimate est;
  if (members.empty()) return est;
  const double n = static_cast<double>(members.size());
  est.context_mib = ct.context_base_mib;
  for (const auto& m : members) {
    est.weights_mib += m.weights_mib;
    est.activations_mib += m.activations_mib;
  }
  est.overhead_mib = n * ct.per_model_overhead_mib;
  if (mode == ExecMode::kFused) {
    est.overhead_mib = std::max(est.overhead_mib - (n - 1) * ct.dedup_saving_mib_per_extra_model,
                                ct.per_model_overhead_mib);
  }
  est.peak_mib = est.context_mib + est.weights_mib + est.activations_mib + est.overhead_mib;
  return est;
}

double LoadTimeline::phase_s(Phase phase) const {
  double total = 0;
  for (const auto& [p, d] : phases) {
    if (p == phase) total += d;
  }
  return total;
}

const FunctionTime* LoadTimeline::function(std::string_view name) const {
  for (const auto& f : functions) {
    if (f.function == name) return &f;
  }
  return nullptr;
}

double scaled_call_time(const InitCallCost& cost, int n, ExecMode mode,
                        const CostTable& ct) {
  const double N = ct.calibration_models;
  const double per_model = cost.unfused_s / N;
  if (n == ct.calibration_models) return mode == ExecMode::kFused ? cost.fused_s : cost.unfused_s;
  if (mode == ExecMode::kUnfused || n <= 1) return per_model * n;
  const double t = (n - 1) / (N - 1);
  return std::max(0.0, cost.fused_s * t + per_model * (1 - t));
}

double memcpy_traffic_gib(double weights_mib, const CostTable& ct) {
  const auto& row = ct.phase_cost(Phase::kMemcpy);
  return weights_mib / ct.calibration_weight_mib * (row.unfused_s * ct.memcpy_unfused_gibps);
}

double memcpy_throughput_gibps(int n, ExecMode mode, const CostTable& ct) {
  return mode == ExecMode::kFused && n > 1 ? ct.memcpy_fused_gibps : ct.memcpy_unfused_gibps;
}

namespace {

double memcpy_time(double weights_mib, int n, ExecMode mode, const CostTable& ct) {
  const auto& row = ct.phase_cost(Phase::kMemcpy);
  // Same as traffic / throughput; written so the calibration set lands on
  // the table values.
  const double share = weights_mib / ct.calibration_weight_mib;
  return row.unfused_s * share * (ct.memcpy_unfused_gibps / memcpy_throughput_gibps(n, mode, ct));
}

void finish(LoadTimeline& tl) {
  double init = 0, malloc = 0, memcpy = 0;
  for (const auto& f : tl.functions) {
    if (f.phase == Phase::kInit) init += f.seconds;
    if (f.phase == Phase::kMalloc) malloc += f.seconds;
    if (f.phase == Phase::kMemcpy) memcpy += f.seconds;
  }
  tl.phases = {{Phase::kInit, init}, {Phase::kMalloc, malloc}, {Phase::kMemcpy, memcpy}};
  tl.total_s = init + malloc + memcpy;
}

double total_weights(const std::vector<ModelManifest>& members) {
  double w = 0;
  for (const auto& m : members) w += m.weights_mib;
  return w;
}

}  // namespace

LoadTimeline simulate_load(const std::vector<ModelManifest>& members,
                           ExecMode mode, const CostTable& ct) {
  if (members.empty()) throw Error("simulate_load needs at least one member");
  const int n = static_cast<int>(members.size());
  LoadTimeline tl;
  for (const auto& c : ct.init_calls) {
    const double s = c.phase == Phase::kMemcpy ? memcpy_time(total_weights(members), n, mode, ct)
                                               : scaled_call_time(c, n, mode, ct);
    tl.functions.push_back({c.function, c.phase, s});
  }
  finish(tl);
  return tl;
}

LoadTimeline simulate_swap_load(const ModelManifest& incoming, int dag_size,
                                ExecMode mode, const CostTable& ct) {
  if (mode == ExecMode::kUnfused || dag_size <= 1) {
    return simulate_load({incoming}, mode, ct);
  }
  LoadTimeline tl;
  for (const auto& c : ct.init_calls) {
    double s = 0;
    if (c.phase == Phase::kMalloc) s = scaled_call_time(c, dag_size, mode, ct) / dag_size;
    if (c.phase == Phase::kMemcpy) s = memcpy_time(incoming.weights_mib, dag_size, mode, ct);
    tl.functions.push_back({c.function, c.phase, s});
  }
  finish(tl);
  return tl;
}

double iteration_factor(int n, ExecMode mode, const CostTable& ct) {
  if (mode == ExecMode::kUnfused || n < 2) return 1.0;
  return 1.0 - ct.transfer_fraction * (1.0 - ct.memcpy_unfused_gibps / ct.memcpy_fused_gibps);
}

double iteration_time_s(const std::vector<ModelManifest>& members,
                        long iterations, ExecMode mode, const CostTable& ct) {
  double lat_ms = 0;
  for (const auto& m : members) lat_ms += m.iter_latency_ms;
  return static_cast<double>(iterations) * (lat_ms / 1000.0) *
         iteration_factor(static_cast<int>(members.size()), mode, ct);
}

RunReport simulate_run(const std::vector<ModelManifest>& members,
                       long iterations, ExecMode mode, const CostTable& ct) {
  if (iterations < 0) throw Error("iterations must be >= 0");
  RunReport r;
  r.mode = mode;
  r.model_count = static_cast<int>(members.size());
  r.iterations = iterations;
  r.memory = estimate_memory(members, mode, ct);
  r.peak_mem_mib = r.memory.peak_mib;
  if (members.empty()) return r;
  r.timeline = simulate_load(members, mode, ct);
  r.load_s = r.timeline.total_s;
  r.iterate_s = iteration_time_s(members, iterations, mode, ct);
  r.timeline.phases.emplace_back(Phase::kIterate, r.iterate_s);
  r.timeline.phases.emplace_back(Phase::kTeardown, 0.0);
  r.timeline.total_s = r.load_s + r.iterate_s;
  r.total_time_s = r.timeline.total_s;
  return r;
}

double fit_dedup_anchored(const std::vector<std::pair<int, double>>& points) {
  const std::pair<int, double>* far = nullptr;
  for (const auto& p : points) {
    if (p.first > 1 && (!far || p.first > far->first)) far = &p;
  }
  if (!far) throw Error("fit needs a point with n > 1");
  return far->second / (far->first - 1);
}

double fit_dedup_least_squares(const std::vector<std::pair<int, double>>& points) {
  double sxy = 0, sxx = 0;
  for (const auto& [n, saved] : points) {
    const double x = n - 1;
    sxy += x * saved;
    sxx += x * x;
  }
  if (sxx == 0) throw Error("fit needs a point with n > 1");
  return sxy / sxx;
}

double fit_transfer_fraction(const CostTable& ct, double weights_mib,
                             double unfused_total_s, double fused_total_s) {
  const int n = ct.calibration_models;
  std::vector<ModelManifest> set(static_cast<size_t>(n));
  for (auto& m : set) m.weights_mib = weights_mib / n;
  const double iter_u = unfused_total_s - simulate_load(set, ExecMode::kUnfused, ct).total_s;
  const double iter_f = fused_total_s - simulate_load(set, ExecMode::kFused, ct).total_s;
  const double gain = 1.0 - ct.memcpy_unfused_gibps / ct.memcpy_fused_gibps;
  return (1.0 - iter_f / iter_u) / gain;
}

}  // namespace fusedinf
