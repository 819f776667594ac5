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
#include <set>

#include "fusedinf/errors.hpp"
#include "fusedinf/scheduler.hpp"

namespace fusedinf {

int SchedulePlan::batch_of(const std::string& model_id) const {
  for (size_t i = 0; i < batches.size(); ++i) {
    const auto& ids = batches[i].model_ids;
    if (std::find(ids.begin(), ids.end(), model_id) != ids.end()) return static_cast<int>(i);
  }
  return -1;
}

SchedulePlan plan_batches(const std::vector<PlanItem>& items, double budget_mib,
                          const CostTable& ct, const PlanOptions& opts) {
  SchedulePlan plan;
  plan.quantum_iterations = opts.quantum_iterations;
  plan.device_budget_mib = budget_mib;
  plan.planning_mode = opts.planning_mode;

  std::set<std::string> seen;
  for (const auto& it : items) {
    if (!seen.insert(it.manifest.model_id).second) throw DuplicateModelId(it.manifest.model_id);
  }

  for (UptimeClass cls : {UptimeClass::kShort, UptimeClass::kLong}) {
    std::vector<const ModelManifest*> models;
    for (const auto& it : items) {
      if (it.uptime_class == cls) models.push_back(&it.manifest);
    }
    std::sort(models.begin(), models.end(), [](const ModelManifest* a, const ModelManifest* b) {
      if (a->mem_required_mib != b->mem_required_mib) return a->mem_required_mib > b->mem_required_mib;
      return a->model_id < b->model_id;
    });

    std::vector<std::vector<ModelManifest>> bins;
    for (const ModelManifest* m : models) {
      if (estimate_memory({*m}, opts.planning_mode, ct).peak_mib > budget_mib) {
        if (opts.throw_unschedulable) throw Unschedulable(m->model_id);
        plan.unschedulable.push_back(m->model_id);
        continue;
      }
      bool placed = false;
      for (auto& bin : bins) {
        bin.push_back(*m);
        if (estimate_memory(bin, opts.planning_mode, ct).peak_mib <= budget_mib) {
          placed = true;
          break;
        }
        bin.pop_back();
      }
      if (!placed) bins.push_back({*m});
    }
    for (const auto& bin : bins) {
      Batch b;
      b.uptime_class = cls;
      for (const auto& m : bin) b.model_ids.push_back(m.model_id);
      b.mem_estimate_mib = estimate_memory(bin, opts.planning_mode, ct).peak_mib;
      plan.batches.push_back(std::move(b));
    }
  }
  return plan;
}

SchedulePlan plan_batches(const std::vector<ModelManifest>& models, double budget_mib,
                          const CostTable& ct, const PlanOptions& opts) {
  std::vector<PlanItem> items;
  for (const auto& m : models) items.push_back({m, UptimeClass::kLong});
  return plan_batches(items, budget_mib, ct, opts);
}

std::vector<std::string> check_plan(const SchedulePlan& plan,
                                    const std::vector<ModelManifest>& models,
                                    const CostTable& ct) {
  std::vector<std::string> problems;
  std::map<std::string, const ModelManifest*> by_id;
  for (const auto& m : models) by_id[m.model_id] = &m;
  std::set<std::string> placed;
  bool seen_long = false;
  for (size_t i = 0; i < plan.batches.size(); ++i) {
    const Batch& b = plan.batches[i];
    const std::string tag = "batch " + std::to_string(i);
    if (b.model_ids.empty()) problems.push_back(tag + " is empty");
    if (b.uptime_class == UptimeClass::kLong) seen_long = true;
    if (b.uptime_class == UptimeClass::kShort && seen_long) {
      problems.push_back(tag + " is short-class after a long-class batch");
    }
    std::vector<ModelManifest> members;
    for (const auto& id : b.model_ids) {
      if (!placed.insert(id).second) problems.push_back(id + " appears in two batches");
      auto it = by_id.find(id);
      if (it == by_id.end()) {
        problems.push_back(tag + " has unknown model " + id);
      } else {
        members.push_back(*it->second);
      }
    }
    const double mem = estimate_memory(members, plan.planning_mode, ct).peak_mib;
    if (mem > plan.device_budget_mib) {
      problems.push_back(tag + " needs " + std::to_string(mem) + " MiB over budget");
    }
  }
  for (const auto& id : plan.unschedulable) {
    if (!placed.insert(id).second) problems.push_back(id + " both placed and unschedulable");
  }
  for (const auto& m : models) {
    if (!placed.count(m.model_id)) problems.push_back(m.model_id + " not in plan");
  }
  return problems;
}

}  // namespace fusedinf
