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

#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <set>
#include <sstream>

#include "fusedinf/errors.hpp"
#include "fusedinf/service.hpp"

namespace fusedinf {

std::string output_digest(const Tensor& t) {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&](const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (int64_t d : t.spec.dims) mix(&d, sizeof(d));
  mix(t.values.data(), t.values.size() * sizeof(float));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double saving_pct(double unfused, double fused) {
  if (unfused == 0) return 0.0;
  return std::round((unfused - fused) / unfused * 100.0 * 100.0) / 100.0;
}

std::optional<ReplayModes> parse_replay_modes(std::string_view s) {
  if (s == "fused") return ReplayModes::kFused;
  if (s == "unfused") return ReplayModes::kUnfused;
  if (s == "both") return ReplayModes::kBoth;
  return std::nullopt;
}

ReplayRun replay_mode(const Scenario& sc, const Repository& repo, ExecMode mode,
                      ExecMode planning_mode, const CostTable& ct) {
  ReplayRun run;
  run.mode = mode;
  RequestQueue queue(repo);
  for (const auto& r : sc.requests) queue.ingest(r);
  run.rejected = queue.rejected();

  std::vector<SwapRequest> swaps = sc.swaps;
  double clock = 0;
  int cycle = 1;
  while (queue.pending_total() > 0) {
    const double now = std::max(clock, *queue.next_arrival());
    std::vector<InferenceRequest> reqs = queue.take_arrived(now);

    std::map<std::string, UptimeClass> cls;
    std::vector<std::string> order;
    for (const auto& r : reqs) {
      auto [it, fresh] = cls.emplace(r.model_id, r.uptime_class);
      if (fresh) order.push_back(r.model_id);
      if (r.uptime_class == UptimeClass::kShort) it->second = UptimeClass::kShort;
    }
    std::vector<PlanItem> items;
    for (const auto& id : order) items.push_back({repo.lookup(id), cls[id]});
    PlanOptions po;
    po.quantum_iterations = sc.quantum;
    po.planning_mode = planning_mode;
    po.throw_unschedulable = false;
    const SchedulePlan plan = plan_batches(items, sc.budget_mib, ct, po);

    std::set<std::string> planned;
    for (const auto& b : plan.batches) planned.insert(b.model_ids.begin(), b.model_ids.end());
    std::vector<InferenceRequest> runnable;
    for (auto& r : reqs) {
      if (planned.count(r.model_id)) {
        runnable.push_back(std::move(r));
      } else {
        run.rejected.emplace_back(std::move(r), "unschedulable");
      }
    }

    RunContext ctx;
    ctx.repo = &repo;
    ctx.ct = &ct;
    ctx.mode = mode;
    ctx.start_time_s = now;
    ctx.first_cycle = cycle;
    ctx.swaps = swaps;
    ctx.admit = [&](double t) { return queue.take_arrived_for(t, planned); };
    ctx.on_complete = [&](const InferenceRequest& r, const Tensor& out, double) {
      run.outputs[r.request_id] = output_digest(out);
    };
    RunResult res = run_plan(plan, std::move(runnable), ctx);
    ++run.epochs;
    swaps = res.unapplied_swaps;
    for (auto& r : res.requeued) queue.requeue(std::move(r));
    for (auto& f : res.failed) run.rejected.push_back(std::move(f));
    cycle += static_cast<int>(res.log.cycles.size());
    clock = res.log.end_s;
    run.log.append(res.log);
    if (res.log.cycles.empty() && res.requeued.empty() && queue.pending_total() > 0 &&
        *queue.next_arrival() <= clock) {
      throw Error("replay made no progress at t=" + std::to_string(clock));
    }
  }
  run.log.end_s = clock;
  return run;
}

namespace {

RunReportRow row_for(const std::string& scenario, const CycleRecord& c) {
  RunReportRow r;
  r.scenario_id = scenario;
  r.cycle = c.cycle;
  r.mode = c.mode;
  r.model_count = static_cast<int>(c.members.size());
  r.peak_mem_mib = c.peak_mem_mib;
  r.total_time_s = c.elapsed_s;
  return r;
}

}  // namespace

ReplayReport replay(const Scenario& sc, const Repository& repo, ReplayModes modes,
                    const CostTable& ct) {
  ReplayReport rep;
  rep.scenario = sc.name;
  if (modes == ReplayModes::kBoth) {
    // Both runs plan with the unfused estimate so their cycles pair up.
    rep.runs.push_back(replay_mode(sc, repo, ExecMode::kUnfused, ExecMode::kUnfused, ct));
    rep.runs.push_back(replay_mode(sc, repo, ExecMode::kFused, ExecMode::kUnfused, ct));
    const auto& u = rep.runs[0].log.cycles;
    const auto& f = rep.runs[1].log.cycles;
    const size_t n = std::max(u.size(), f.size());
    for (size_t i = 0; i < n; ++i) {
      const bool paired = i < u.size() && i < f.size() && u[i].members == f[i].members;
      std::optional<RunReportRow> ru, rf;
      if (i < u.size()) ru = row_for(sc.name, u[i]);
      if (i < f.size()) rf = row_for(sc.name, f[i]);
      if (paired) {
        const double sm = saving_pct(ru->peak_mem_mib, rf->peak_mem_mib);
        const double st = saving_pct(ru->total_time_s, rf->total_time_s);
        ru->saving_mem_pct = rf->saving_mem_pct = sm;
        ru->saving_time_pct = rf->saving_time_pct = st;
      }
      if (ru) rep.rows.push_back(*ru);
      if (rf) rep.rows.push_back(*rf);
    }
  } else {
    const ExecMode m = modes == ReplayModes::kFused ? ExecMode::kFused : ExecMode::kUnfused;
    rep.runs.push_back(replay_mode(sc, repo, m, m, ct));
    for (const auto& c : rep.runs[0].log.cycles) rep.rows.push_back(row_for(sc.name, c));
  }
  return rep;
}

std::string to_csv(const std::vector<RunReportRow>& rows) {
  std::string out = std::string(kCsvHeader) + "\n";
  char buf[256];
  for (const auto& r : rows) {
    std::string sm, st;
    if (r.saving_mem_pct) {
      std::snprintf(buf, sizeof(buf), "%.2f", *r.saving_mem_pct);
      sm = buf;
    }
    if (r.saving_time_pct) {
      std::snprintf(buf, sizeof(buf), "%.2f", *r.saving_time_pct);
      st = buf;
    }
    std::snprintf(buf, sizeof(buf), "%s,%d,%s,%d,%.2f,%.3f,%s,%s\n", r.scenario_id.c_str(),
                  r.cycle, std::string(to_string(r.mode)).c_str(), r.model_count, r.peak_mem_mib,
                  r.total_time_s, sm.c_str(), st.c_str());
    out += buf;
  }
  return out;
}

std::string summarize(const ReplayReport& report) {
  std::ostringstream os;
  char buf[256];
  os << "scenario " << report.scenario << "\n";
  std::map<ExecMode, double> totals;
  for (const auto& run : report.runs) {
    double total = 0, peak = 0;
    for (const auto& c : run.log.cycles) {
      total += c.elapsed_s;
      peak = std::max(peak, c.peak_mem_mib);
    }
    totals[run.mode] = total;
    std::snprintf(buf, sizeof(buf), "  %-7s cycles=%zu total_time_s=%.3f max_peak_mib=%.2f completed=%zu rejected=%zu\n",
                  std::string(to_string(run.mode)).c_str(), run.log.cycles.size(), total, peak,
                  run.outputs.size(), run.rejected.size());
    os << buf;
  }
  if (totals.size() == 2) {
    const double u = totals[ExecMode::kUnfused], f = totals[ExecMode::kFused];
    std::snprintf(buf, sizeof(buf), "  time saving %.3f s (%.2f%%)\n", u - f, saving_pct(u, f));
    os << buf;
    bool same = report.runs[0].outputs == report.runs[1].outputs;
    os << "  outputs " << (same ? "identical" : "DIFFER") << " across modes\n";
  }
  return os.str();
}

}  // namespace fusedinf
