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
#include <sstream>

#include "fusedinf/errors.hpp"
#include "fusedinf/scheduler.hpp"

namespace fusedinf {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kCompile: return "compile";
    case EventKind::kLoad: return "load";
    case EventKind::kIterate: return "iterate";
    case EventKind::kSwapSubgraph: return "swap_subgraph";
    case EventKind::kRotate: return "rotate";
    case EventKind::kComplete: return "complete";
    case EventKind::kError: return "error";
  }
  return "?";
}

void RunLog::append(const RunLog& other) {
  events.insert(events.end(), other.events.begin(), other.events.end());
  cycles.insert(cycles.end(), other.cycles.begin(), other.cycles.end());
  end_s = std::max(end_s, other.end_s);
}

std::vector<const RunEvent*> RunLog::of_kind(EventKind kind) const {
  std::vector<const RunEvent*> out;
  for (const auto& e : events) {
    if (e.kind == kind) out.push_back(&e);
  }
  return out;
}

RunLog merge_logs(const std::vector<RunLog>& lanes) {
  RunLog out;
  for (const auto& l : lanes) out.append(l);
  std::stable_sort(out.events.begin(), out.events.end(), [](const RunEvent& a, const RunEvent& b) {
    if (a.time_s != b.time_s) return a.time_s < b.time_s;
    return a.lane < b.lane;
  });
  std::stable_sort(out.cycles.begin(), out.cycles.end(),
                   [](const CycleRecord& a, const CycleRecord& b) { return a.start_s < b.start_s; });
  return out;
}

SwapResult request_swap(SchedulePlan& plan, const FusedDag& running, const std::string& out_model,
                        const ModelBundle& incoming, const ModelManifest& incoming_manifest,
                        const CostTable& ct) {
  if (!running.find(out_model)) throw UnknownSubgraph(out_model);
  std::vector<ModelManifest> members;
  for (const auto& m : running.manifests()) {
    members.push_back(m.model_id == out_model ? incoming_manifest : m);
  }
  const double mem = estimate_memory(members, plan.planning_mode, ct).peak_mib;
  if (mem > plan.device_budget_mib) throw BudgetExceeded(mem, plan.device_budget_mib);

  FusedDag next = swap_subgraph(running, out_model, incoming, incoming_manifest, ct);
  const int b = plan.batch_of(out_model);
  if (b >= 0) {
    auto& ids = plan.batches[b].model_ids;
    std::replace(ids.begin(), ids.end(), out_model, incoming_manifest.model_id);
    plan.batches[b].mem_estimate_mib = mem;
  }
  RunEvent ev;
  ev.kind = EventKind::kSwapSubgraph;
  ev.batch = b;
  ev.model_id = incoming_manifest.model_id;
  ev.payload = out_model + " -> " + incoming_manifest.model_id;
  return {std::move(next), std::move(ev)};
}

namespace {

struct Active {
  InferenceRequest req;
  long done = 0;
  std::optional<Tensor> input;
  long remaining() const { return req.iterations_requested - done; }
};

std::string join(const std::vector<std::string>& ids) {
  std::string s;
  for (const auto& id : ids) s += (s.empty() ? "" : ",") + id;
  return s;
}

std::string fmt_seconds(double s) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << s << "s";
  return os.str();
}

class Runner {
 public:
  Runner(const SchedulePlan& plan, const RunContext& ctx)
      : plan_(plan), ctx_(ctx), ct_(*ctx.ct), repo_(*ctx.repo), now_(ctx.start_time_s),
        work_(plan.batches.size()), dag_iter_(plan.batches.size(), 0),
        broken_(plan.batches.size(), false), swaps_(ctx.swaps), cycle_(ctx.first_cycle) {
    res_.log.end_s = now_;
  }

  RunResult run(std::vector<InferenceRequest> requests) {
    for (auto& r : requests) assign(std::move(r));
    while (true) {
      bool ran = false;
      for (size_t b = 0; b < plan_.batches.size(); ++b) {
        admit();
        if (!has_work(b)) continue;
        ran = true;
        turn(b);
      }
      if (!ran) {
        if (!ctx_.admit) break;
        const size_t before = pending_count();
        admit();
        if (pending_count() == before) break;
      }
    }
    res_.unapplied_swaps = swaps_;
    res_.log.end_s = now_;
    return std::move(res_);
  }

 private:
  void emit(EventKind kind, int batch, std::string payload, std::string model = {},
            std::string request = {}) {
    res_.log.events.push_back(
        {now_, kind, batch, std::move(payload), std::move(model), std::move(request), ctx_.lane});
  }

  void advance(double dt) {
    if (dt <= 0) return;
    const double from = now_;
    now_ += dt;
    if (ctx_.on_advance) ctx_.on_advance(from, now_);
  }

  void fail(Active& a, const std::string& why) {
    emit(EventKind::kError, plan_.batch_of(a.req.model_id), why, a.req.model_id, a.req.request_id);
    res_.failed.emplace_back(a.req, why);
  }

  void assign(InferenceRequest r) {
    const int b = plan_.batch_of(r.model_id);
    if (b < 0) {
      res_.failed.emplace_back(std::move(r), "model not in plan");
      return;
    }
    if (broken_[b]) {
      res_.failed.emplace_back(std::move(r), "batch failed to compile");
      return;
    }
    work_[b].push_back(Active{std::move(r), 0, std::nullopt});
  }

  void admit() {
    if (!ctx_.admit) return;
    for (auto& r : ctx_.admit(now_)) assign(std::move(r));
  }

  size_t pending_count() const {
    size_t n = 0;
    for (const auto& w : work_) n += w.size();
    return n;
  }

  bool has_work(size_t b) const { return !broken_[b] && !work_[b].empty(); }

  // Batch members that still have work, in plan order.
  std::vector<std::string> active_members(size_t b) const {
    std::vector<std::string> out;
    for (const auto& id : plan_.batches[b].model_ids) {
      for (const auto& a : work_[b]) {
        if (a.req.model_id == id) {
          out.push_back(id);
          break;
        }
      }
    }
    return out;
  }

  long remaining_for(size_t b, const std::string& id) const {
    long r = 0;
    for (const auto& a : work_[b]) {
      if (a.req.model_id == id) r = std::max(r, a.remaining());
    }
    return r;
  }

  std::vector<ModelManifest> manifests(const std::vector<std::string>& ids) const {
    return repo_.get_many(ids);
  }

  bool compile(size_t b, const std::vector<std::string>& members) {
    try {
      const auto ms = manifests(members);
      std::vector<ModelBundle> bundles;
      for (const auto& id : members) bundles.push_back(repo_.load_bundle(id));
      programs_.clear();
      dag_.reset();
      if (ctx_.mode == ExecMode::kFused) {
        dag_.emplace(fuse_models(bundles, ms, ct_));
        emit(EventKind::kCompile, static_cast<int>(b), dag_->dag_id());
      } else {
        for (const auto& bundle : bundles) {
          programs_.emplace(bundle.model_id(), Program(bundle.graph, bundle.weights));
        }
        emit(EventKind::kCompile, static_cast<int>(b), "independent:" + join(members));
      }
      return true;
    } catch (const Error& e) {
      emit(EventKind::kError, static_cast<int>(b), std::string("compile: ") + e.what());
      broken_[b] = true;
      for (auto& a : work_[b]) res_.failed.emplace_back(a.req, std::string("compile: ") + e.what());
      work_[b].clear();
      resident_batch_ = -1;
      resident_.clear();
      return false;
    }
  }

  // Unloads members that have finished; no load is charged.
  void shrink(const std::vector<std::string>& members) {
    if (dag_) {
      std::vector<std::shared_ptr<const SubGraph>> keep;
      for (const auto& sg : dag_->subgraphs()) {
        if (std::find(members.begin(), members.end(), sg->model_id) != members.end()) keep.push_back(sg);
      }
      std::vector<ModelManifest> ms;
      for (const auto& sg : keep) ms.push_back(sg->manifest);
      const double mem = estimate_memory(ms, ExecMode::kFused, ct_).peak_mib;
      FusedDag next(dag_->dag_id(), dag_->preamble(), std::move(keep), mem,
                    dag_->compile_generation() + 1);
      dag_.emplace(std::move(next));
    }
    for (auto it = programs_.begin(); it != programs_.end();) {
      if (std::find(members.begin(), members.end(), it->first) == members.end()) {
        it = programs_.erase(it);
      } else {
        ++it;
      }
    }
    resident_ = members;
  }

  // Applies swaps due at the batch's current iteration. Returns load time.
  double apply_swaps(size_t b) {
    double load = 0;
    for (auto it = swaps_.begin(); it != swaps_.end();) {
      const auto& ids = plan_.batches[b].model_ids;
      if (it->at_iteration > dag_iter_[b] ||
          std::find(ids.begin(), ids.end(), it->out_model) == ids.end()) {
        ++it;
        continue;
      }
      const SwapRequest sw = *it;
      it = swaps_.erase(it);
      load += apply_swap(b, sw);
    }
    return load;
  }

  double apply_swap(size_t b, const SwapRequest& sw) {
    const int bi = static_cast<int>(b);
    // Hot swap only when the departing model is live on the device.
    const bool hot = resident_batch_ == bi &&
                     (dag_ ? dag_->find(sw.out_model) != nullptr : programs_.count(sw.out_model) > 0);
    ModelManifest in_m;
    ModelBundle in_b;
    try {
      in_m = repo_.lookup(sw.in_model);
      in_b = repo_.load_bundle(sw.in_model);
    } catch (const Error& e) {
      emit(EventKind::kError, bi, std::string("swap: ") + e.what(), sw.in_model);
      return 0;
    }
    try {
      if (hot && dag_) {
        SwapResult r = request_swap(plan_, *dag_, sw.out_model, in_b, in_m, ct_);
        dag_.emplace(std::move(r.dag));
        r.event.time_s = now_;
        r.event.lane = ctx_.lane;
        res_.log.events.push_back(std::move(r.event));
      } else {
        std::vector<std::string> after = plan_.batches[b].model_ids;
        std::replace(after.begin(), after.end(), sw.out_model, sw.in_model);
        const double mem = estimate_memory(manifests(after), plan_.planning_mode, ct_).peak_mib;
        if (mem > plan_.device_budget_mib) throw BudgetExceeded(mem, plan_.device_budget_mib);
        if (plan_.batch_of(sw.in_model) >= 0) throw DuplicateModelId(sw.in_model);
        plan_.batches[b].model_ids = after;
        plan_.batches[b].mem_estimate_mib = mem;
        emit(EventKind::kSwapSubgraph, bi, sw.out_model + " -> " + sw.in_model, sw.in_model);
      }
    } catch (const Error& e) {
      emit(EventKind::kError, bi, std::string("swap: ") + e.what(), sw.in_model);
      return 0;
    }

    // Unfinished work of the departing model goes back to the caller.
    auto& w = work_[b];
    for (auto it = w.begin(); it != w.end();) {
      if (it->req.model_id == sw.out_model) {
        InferenceRequest r = it->req;
        r.iterations_requested = it->remaining();
        res_.requeued.push_back(std::move(r));
        it = w.erase(it);
      } else {
        ++it;
      }
    }
    if (sw.iterations > 0) {
      InferenceRequest r;
      r.request_id = "swap-" + std::to_string(++swap_count_) + "-" + sw.in_model;
      r.model_id = sw.in_model;
      r.input_ref = sw.input_ref;
      r.iterations_requested = sw.iterations;
      r.uptime_class = sw.uptime_class;
      r.arrival_time_s = now_;
      w.push_back(Active{std::move(r), 0, std::nullopt});
    }

    double load = 0;
    if (hot) {
      std::replace(resident_.begin(), resident_.end(), sw.out_model, sw.in_model);
      if (!dag_) {
        programs_.erase(sw.out_model);
        programs_.emplace(sw.in_model, Program(in_b.graph, in_b.weights));
      }
      const LoadTimeline tl =
          simulate_swap_load(in_m, static_cast<int>(resident_.size()), ctx_.mode, ct_);
      load = tl.total_s;
      emit(EventKind::kLoad, bi, "swap-in " + sw.in_model + " " + fmt_seconds(load), sw.in_model);
      advance(load);
    }
    return load;
  }

  void execute(size_t b) {
    auto& w = work_[b];
    std::map<std::string, std::vector<size_t>> by_model;
    for (size_t i = 0; i < w.size(); ++i) {
      Active& a = w[i];
      if (!a.input) {
        try {
          a.input = ctx_.input_source(a.req, repo_.lookup(a.req.model_id));
        } catch (const Error& e) {
          failed_now_.push_back(i);
          fail(a, std::string("input: ") + e.what());
          continue;
        }
      }
      by_model[a.req.model_id].push_back(i);
    }
    outputs_.assign(w.size(), std::nullopt);
    for (size_t round = 0;; ++round) {
      std::map<std::string, Tensor> inputs;
      std::map<std::string, size_t> who;
      for (const auto& [id, idx] : by_model) {
        if (round < idx.size()) {
          inputs.emplace(id, *w[idx[round]].input);
          who.emplace(id, idx[round]);
        }
      }
      if (inputs.empty()) break;
      try {
        std::map<std::string, Tensor> out;
        if (dag_) {
          out = execute_subgraphs(*dag_, inputs);
        } else {
          for (const auto& [id, x] : inputs) out.emplace(id, programs_.at(id).run(x));
        }
        for (auto& [id, t] : out) outputs_[who.at(id)] = std::move(t);
      } catch (const Error& e) {
        for (const auto& [id, i] : who) {
          failed_now_.push_back(i);
          fail(w[i], std::string("execute: ") + e.what());
        }
      }
    }
  }

  void turn(size_t b) {
    const int bi = static_cast<int>(b);
    ++res_.turns;
    emit(EventKind::kRotate, bi, "turn");
    long left = plan_.quantum_iterations;
    while (left > 0 && has_work(b)) {
      const double start = now_;
      double load = apply_swaps(b);
      const auto members = active_members(b);
      if (members.empty()) break;

      const bool same = resident_batch_ == bi &&
                        std::all_of(members.begin(), members.end(), [&](const std::string& id) {
                          return std::find(resident_.begin(), resident_.end(), id) != resident_.end();
                        });
      if (!same) {
        if (!compile(b, members)) return;
        const LoadTimeline tl = simulate_load(manifests(members), ctx_.mode, ct_);
        emit(EventKind::kLoad, bi, join(members) + " " + fmt_seconds(tl.total_s));
        advance(tl.total_s);
        load += tl.total_s;
        resident_batch_ = bi;
        resident_ = members;
      } else if (members != resident_) {
        shrink(members);
      }

      long seg = left;
      long max_rem = 0;
      for (const auto& id : members) max_rem = std::max(max_rem, remaining_for(b, id));
      seg = std::min(seg, max_rem);
      for (const auto& sw : swaps_) {
        const auto& ids = plan_.batches[b].model_ids;
        if (sw.at_iteration > dag_iter_[b] &&
            std::find(ids.begin(), ids.end(), sw.out_model) != ids.end()) {
          seg = std::min(seg, sw.at_iteration - dag_iter_[b]);
        }
      }

      failed_now_.clear();
      execute(b);

      const auto ms = manifests(members);
      const double factor = iteration_factor(static_cast<int>(members.size()), ctx_.mode, ct_);
      double iter_s = 0;
      for (const auto& m : ms) {
        iter_s += static_cast<double>(std::min(seg, remaining_for(b, m.model_id))) *
                  (m.iter_latency_ms / 1000.0);
      }
      iter_s *= factor;
      emit(EventKind::kIterate, bi, std::to_string(seg) + " iterations " + fmt_seconds(iter_s));
      advance(iter_s);

      CycleRecord rec;
      rec.cycle = cycle_++;
      rec.batch = bi;
      rec.mode = ctx_.mode;
      rec.members = members;
      rec.iterations = seg;
      rec.start_s = start;
      rec.load_s = load;
      rec.elapsed_s = now_ - start;
      rec.peak_mem_mib = estimate_memory(ms, ctx_.mode, ct_).peak_mib;
      res_.log.cycles.push_back(std::move(rec));

      auto& w = work_[b];
      std::vector<Active> keep;
      for (size_t i = 0; i < w.size(); ++i) {
        if (std::find(failed_now_.begin(), failed_now_.end(), i) != failed_now_.end()) continue;
        Active& a = w[i];
        a.done += std::min(seg, a.remaining());
        if (a.remaining() > 0) {
          keep.push_back(std::move(a));
          continue;
        }
        emit(EventKind::kComplete, bi, a.req.model_id, a.req.model_id, a.req.request_id);
        if (ctx_.on_complete && outputs_[i]) ctx_.on_complete(a.req, *outputs_[i], now_);
      }
      w = std::move(keep);
      dag_iter_[b] += seg;
      left -= seg;
    }
  }

  SchedulePlan plan_;
  const RunContext& ctx_;
  const CostTable& ct_;
  const Repository& repo_;
  double now_;
  std::vector<std::vector<Active>> work_;
  std::vector<long> dag_iter_;
  std::vector<bool> broken_;
  std::vector<SwapRequest> swaps_;
  int cycle_;
  int swap_count_ = 0;

  int resident_batch_ = -1;
  std::vector<std::string> resident_;
  std::optional<FusedDag> dag_;
  std::map<std::string, Program> programs_;
  std::vector<std::optional<Tensor>> outputs_;
  std::vector<size_t> failed_now_;
  RunResult res_;
};

}  // namespace

RunResult run_plan(const SchedulePlan& plan, std::vector<InferenceRequest> requests,
                   const RunContext& ctx) {
  if (!ctx.repo || !ctx.ct) throw Error("run_plan needs a repository and a cost table");
  if (plan.quantum_iterations < 1) throw Error("quantum must be >= 1");
  return Runner(plan, ctx).run(std::move(requests));
}

}  // namespace fusedinf
