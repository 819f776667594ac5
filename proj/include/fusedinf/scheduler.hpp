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

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fusedinf/cost_model.hpp"
#include "fusedinf/fuse_compiler.hpp"
#include "fusedinf/model_repo.hpp"

namespace fusedinf {

enum class UptimeClass { kShort, kLong };

std::string_view to_string(UptimeClass c);
std::optional<UptimeClass> parse_uptime_class(std::string_view name);

struct InferenceRequest {
  std::string request_id;
  std::string model_id;
  std::string input_ref = "zeros";  // zeros | seed:<n> | file:<path>
  long iterations_requested = 1;
  UptimeClass uptime_class = UptimeClass::kLong;
  double arrival_time_s = 0;
  uint64_t seq = 0;  // ingest order, assigned by the queue
};

// Reads a request input. File inputs are weights-format files holding one
// tensor. Throws Error on a bad reference.
Tensor resolve_input(const std::string& input_ref, const TensorSpec& spec);

struct IngestResult {
  bool accepted = false;
  std::string reason;  // unknown-model | zero-iterations | input-shape-mismatch | bad-input
  uint64_t seq = 0;
};

// Pending requests per uptime class, ordered by (arrival_time, ingest seq).
// Safe for many producers and one consumer.
class RequestQueue {
 public:
  explicit RequestQueue(const Repository& repo) : repo_(repo) {}

  IngestResult ingest(InferenceRequest req);
  // Puts back a request that was already accepted (keeps its seq).
  void requeue(InferenceRequest req);

  // Taken requests come back in (arrival_time, seq) order across classes.
  std::vector<InferenceRequest> take_arrived(double now);
  std::vector<InferenceRequest> take_arrived_for(double now, const std::set<std::string>& models);
  std::optional<double> next_arrival() const;

  size_t pending(UptimeClass c) const;
  size_t pending_total() const;
  std::vector<InferenceRequest> snapshot(UptimeClass c) const;
  std::vector<std::pair<InferenceRequest, std::string>> rejected() const;

  // Blocks until a request is pending, `close` was called, or the timeout.
  bool wait_for_pending(std::chrono::milliseconds timeout);
  void close();
  bool closed() const;

 private:
  void insert_locked(InferenceRequest req);

  const Repository& repo_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<InferenceRequest> pending_[2];
  std::vector<std::pair<InferenceRequest, std::string>> rejected_;
  uint64_t next_seq_ = 0;
  bool closed_ = false;
};

struct Batch {
  std::vector<std::string> model_ids;
  UptimeClass uptime_class = UptimeClass::kLong;
  double mem_estimate_mib = 0;
};

struct SchedulePlan {
  std::vector<Batch> batches;
  long quantum_iterations = 100;
  double device_budget_mib = 0;
  ExecMode planning_mode = ExecMode::kFused;
  std::vector<std::string> unschedulable;

  int batch_of(const std::string& model_id) const;  // -1 when absent
};

struct PlanItem {
  ModelManifest manifest;
  UptimeClass uptime_class = UptimeClass::kLong;
};

struct PlanOptions {
  long quantum_iterations = 100;
  ExecMode planning_mode = ExecMode::kFused;
  // Otherwise oversized models are listed in SchedulePlan::unschedulable.
  bool throw_unschedulable = true;
};

// First-fit decreasing by mem_required (ties by id) within each class;
// short-class batches come first.
SchedulePlan plan_batches(const std::vector<PlanItem>& items, double budget_mib,
                          const CostTable& ct, const PlanOptions& opts = {});
SchedulePlan plan_batches(const std::vector<ModelManifest>& models, double budget_mib,
                          const CostTable& ct, const PlanOptions& opts = {});

// Checks plan invariants: partition, budget, class order. Empty when valid.
std::vector<std::string> check_plan(const SchedulePlan& plan,
                                    const std::vector<ModelManifest>& models,
                                    const CostTable& ct);

enum class EventKind { kCompile, kLoad, kIterate, kSwapSubgraph, kRotate, kComplete, kError };

std::string_view to_string(EventKind kind);

struct RunEvent {
  double time_s = 0;
  EventKind kind = EventKind::kIterate;
  int batch = -1;
  std::string payload;
  std::string model_id;
  std::string request_id;
  int lane = 0;
};

// One segment of a turn: the stretch between a (re)load or swap and the
// next rotation or swap.
struct CycleRecord {
  int cycle = 0;
  int batch = -1;
  ExecMode mode = ExecMode::kUnfused;
  std::vector<std::string> members;
  long iterations = 0;
  double start_s = 0;
  double load_s = 0;
  double elapsed_s = 0;
  double peak_mem_mib = 0;
};

struct RunLog {
  std::vector<RunEvent> events;
  std::vector<CycleRecord> cycles;
  double end_s = 0;

  void append(const RunLog& other);  // sequential continuation
  std::vector<const RunEvent*> of_kind(EventKind kind) const;
};

// Interleaves logs of concurrent lanes by event time (stable by lane).
RunLog merge_logs(const std::vector<RunLog>& lanes);

struct SwapRequest {
  long at_iteration = 0;  // DAG iteration count of the owning batch
  std::string out_model;
  std::string in_model;
  long iterations = 0;  // request for the incoming model, 0 for none
  std::string input_ref = "zeros";
  UptimeClass uptime_class = UptimeClass::kLong;
};

struct SwapResult {
  FusedDag dag;
  RunEvent event;
};

// Swaps one member of the running DAG and updates `plan` to match.
// Throws UnknownSubgraph, BudgetExceeded (DAG and plan unchanged).
SwapResult request_swap(SchedulePlan& plan, const FusedDag& running, const std::string& out_model,
                        const ModelBundle& incoming, const ModelManifest& incoming_manifest,
                        const CostTable& ct);

using InputSource = std::function<Tensor(const InferenceRequest&, const ModelManifest&)>;
Tensor default_input_source(const InferenceRequest& req, const ModelManifest& manifest);

struct RunContext {
  const Repository* repo = nullptr;
  const CostTable* ct = nullptr;
  ExecMode mode = ExecMode::kFused;
  InputSource input_source = default_input_source;
  double start_time_s = 0;
  int first_cycle = 1;
  int lane = 0;
  std::vector<SwapRequest> swaps;
  // New requests for models of the plan, polled at turn boundaries.
  std::function<std::vector<InferenceRequest>(double now)> admit;
  std::function<void(const InferenceRequest&, const Tensor& output, double now)> on_complete;
  // Simulated clock moved from `from` to `to`.
  std::function<void(double from, double to)> on_advance;
};

struct RunResult {
  RunLog log;
  std::vector<InferenceRequest> requeued;  // swapped out before finishing
  std::vector<std::pair<InferenceRequest, std::string>> failed;
  std::vector<SwapRequest> unapplied_swaps;
  int turns = 0;
};

RunResult run_plan(const SchedulePlan& plan, std::vector<InferenceRequest> requests,
                   const RunContext& ctx);

}  // namespace fusedinf
