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

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <thread>

#include "fusedinf/errors.hpp"
#include "fusedinf/model_io.hpp"
#include "fusedinf/scheduler.hpp"
#include "fusedinf/zoo.hpp"
#include "test_util.hpp"

using namespace fusedinf;
using namespace fusedinf::testing;

namespace {

// Registers zoo models with explicit profiles: (id, mem MiB, latency ms).
std::unique_ptr<Repository> make_repo(const std::vector<std::tuple<std::string, double, double>>& specs) {
  auto repo = std::make_unique<Repository>();
  int seed = 0;
  for (const auto& [id, mem, lat] : specs) {
    const auto& fam = zoo_families()[static_cast<size_t>(seed) % zoo_families().size()];
    auto b = make_family_model(fam, id, static_cast<uint64_t>(++seed));
    repo->register_model(*b.graph, *b.weights, Profile{mem, lat, std::max(0.0, mem - 44)});
  }
  return repo;
}

InferenceRequest req(const std::string& id, const std::string& model, long iters, double at = 0,
                     UptimeClass c = UptimeClass::kLong) {
  InferenceRequest r;
  r.request_id = id;
  r.model_id = model;
  r.iterations_requested = iters;
  r.arrival_time_s = at;
  r.uptime_class = c;
  return r;
}

RunContext context(const Repository& repo, ExecMode mode = ExecMode::kFused) {
  RunContext ctx;
  ctx.repo = &repo;
  ctx.ct = &CostTable::defaults();
  ctx.mode = mode;
  return ctx;
}

// Fewest bins over all set partitions, or -1 when some model cannot fit.
int brute_force_bins(const std::vector<ModelManifest>& ms, double budget, ExecMode mode) {
  const CostTable& ct = CostTable::defaults();
  int best = -1;
  std::vector<std::vector<ModelManifest>> bins;
  std::function<void(size_t)> rec = [&](size_t i) {
    if (best >= 0 && static_cast<int>(bins.size()) >= best) return;
    if (i == ms.size()) {
      best = static_cast<int>(bins.size());
      return;
    }
    for (size_t k = 0; k < bins.size(); ++k) {
      bins[k].push_back(ms[i]);
      if (estimate_memory(bins[k], mode, ct).peak_mib <= budget) rec(i + 1);
      bins[k].pop_back();
    }
    bins.push_back({ms[i]});
    if (estimate_memory(bins.back(), mode, ct).peak_mib <= budget) rec(i + 1);
    bins.pop_back();
  };
  rec(0);
  return best;
}

}  // namespace

TEST(Queue, IngestAndReject) {
  auto repo = make_repo({{"a", 100, 1}});
  RequestQueue q(*repo);
  EXPECT_TRUE(q.ingest(req("1", "a", 5)).accepted);
  EXPECT_EQ(q.pending_total(), 1u);
  const auto unknown = q.ingest(req("2", "ghost", 5));
  EXPECT_FALSE(unknown.accepted);
  EXPECT_EQ(unknown.reason, "unknown-model");
  EXPECT_EQ(q.ingest(req("3", "a", 0)).reason, "zero-iterations");
  auto bad = req("4", "a", 1);
  bad.input_ref = "seed:x";
  EXPECT_EQ(q.ingest(bad).reason, "bad-input");
  EXPECT_EQ(q.pending_total(), 1u);
  EXPECT_EQ(q.rejected().size(), 3u);
}

TEST(Queue, FileInputShapeChecked) {
  auto repo = make_repo({{"a", 100, 1}});
  const auto dir = scratch_dir("queue_file");
  WeightStore one;
  one.add("x", TensorSpec{3, 4, 4}, std::vector<float>(48, 1.0f));
  save_weights(one, dir / "x.fiwt");
  RequestQueue q(*repo);
  auto r = req("1", "a", 1);
  r.input_ref = "file:" + (dir / "x.fiwt").string();
  EXPECT_EQ(q.ingest(r).reason, "input-shape-mismatch");
}

TEST(Queue, ConcurrentProducersKeepFifoPerClass) {
  auto repo = make_repo({{"a", 100, 1}, {"b", 100, 1}});
  RequestQueue q(*repo);
  std::vector<std::thread> producers;
  for (int p = 0; p < 4; ++p) {
    producers.emplace_back([&, p] {
      std::mt19937_64 rng(static_cast<uint64_t>(p));
      for (int i = 0; i < 250; ++i) {
        const double at = static_cast<double>(rng() % 50);
        auto r = req("p" + std::to_string(p) + "-" + std::to_string(i), i % 2 ? "a" : "b", 1, at,
                     rng() % 3 == 0 ? UptimeClass::kShort : UptimeClass::kLong);
        ASSERT_TRUE(q.ingest(r).accepted);
      }
    });
  }
  for (auto& t : producers) t.join();
  EXPECT_EQ(q.pending_total(), 1000u);
  for (auto c : {UptimeClass::kShort, UptimeClass::kLong}) {
    auto snap = q.snapshot(c);
    // Oracle: stable sort of the same records by arrival then ingest order.
    auto sorted = snap;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) {
      return x.arrival_time_s != y.arrival_time_s ? x.arrival_time_s < y.arrival_time_s : x.seq < y.seq;
    });
    ASSERT_EQ(snap.size(), sorted.size());
    for (size_t i = 0; i < snap.size(); ++i) EXPECT_EQ(snap[i].request_id, sorted[i].request_id);
  }
  EXPECT_EQ(q.take_arrived(1e9).size(), 1000u);
  EXPECT_EQ(q.pending_total(), 0u);
}

TEST(Queue, TakeArrivedFor) {
  auto repo = make_repo({{"a", 100, 1}, {"b", 100, 1}});
  RequestQueue q(*repo);
  q.ingest(req("1", "a", 1, 0));
  q.ingest(req("2", "b", 1, 0));
  q.ingest(req("3", "a", 1, 10));
  const auto got = q.take_arrived_for(5, {"a"});
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].request_id, "1");
  EXPECT_EQ(q.pending_total(), 2u);
  EXPECT_EQ(q.next_arrival(), 0.0);
}

TEST(Plan, ThreeSmallModelsOneBatch) {
  const CostTable& ct = CostTable::defaults();
  const std::vector<ModelManifest> ms{manifest("a", 10), manifest("b", 10), manifest("c", 10)};
  const auto plan = plan_batches(ms, 8192, ct);
  ASSERT_EQ(plan.batches.size(), 1u);
  EXPECT_EQ(plan.batches[0].model_ids.size(), 3u);
  EXPECT_TRUE(check_plan(plan, ms, ct).empty());
}

TEST(Plan, OversizedSoloModelUnschedulable) {
  const CostTable& ct = CostTable::defaults();
  const std::vector<ModelManifest> ms{manifest("big", 5000), manifest("a", 10)};
  EXPECT_THROW(plan_batches(ms, 1000, ct), Unschedulable);
  PlanOptions opts;
  opts.throw_unschedulable = false;
  const auto plan = plan_batches(ms, 1000, ct, opts);
  EXPECT_EQ(plan.unschedulable, std::vector<std::string>{"big"});
  EXPECT_TRUE(check_plan(plan, ms, ct).empty());
}

TEST(Plan, ShortClassFirst) {
  const CostTable& ct = CostTable::defaults();
  std::vector<PlanItem> items{{manifest("l", 100), UptimeClass::kLong},
                              {manifest("s", 100), UptimeClass::kShort}};
  const auto plan = plan_batches(items, 8192, ct);
  ASSERT_EQ(plan.batches.size(), 2u);
  EXPECT_EQ(plan.batches[0].uptime_class, UptimeClass::kShort);
  EXPECT_EQ(plan.batches[0].model_ids, std::vector<std::string>{"s"});
}

TEST(Plan, MatchesBruteForceOnSmallSets) {
  const CostTable& ct = CostTable::defaults();
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 6);
    std::vector<ModelManifest> ms;
    for (int i = 0; i < n; ++i) {
      const double mem = 35 + static_cast<double>(rng() % 700);
      ms.push_back(manifest("m" + std::to_string(i), mem, std::floor((mem - 34) * 0.8)));
    }
    const double budget = 600 + static_cast<double>(rng() % 1500);
    for (auto mode : {ExecMode::kUnfused, ExecMode::kFused}) {
      PlanOptions opts;
      opts.planning_mode = mode;
      opts.throw_unschedulable = false;
      const auto plan = plan_batches(ms, budget, ct, opts);
      ASSERT_TRUE(check_plan(plan, ms, ct).empty());
      const int opt = brute_force_bins(ms, budget, mode);
      EXPECT_EQ(opt >= 0, plan.unschedulable.empty()) << trial;
      if (opt >= 0) {
        const double k = static_cast<double>(plan.batches.size());
        EXPECT_GE(k, opt);
        EXPECT_LE(k, 11.0 / 9.0 * opt + 6.0 / 9.0) << trial;
      }
    }
  }
}

TEST(RunPlan, SingleModelSingleCycle) {
  auto repo = make_repo({{"a", 100, 2}});
  const auto plan = plan_batches(repo->list(), 8192, CostTable::defaults());
  std::vector<std::string> done;
  auto ctx = context(*repo);
  ctx.on_complete = [&](const InferenceRequest& r, const Tensor&, double) { done.push_back(r.request_id); };
  const auto res = run_plan(plan, {req("r1", "a", 50)}, ctx);
  ASSERT_EQ(res.log.cycles.size(), 1u);
  EXPECT_EQ(res.log.cycles[0].iterations, 50);
  EXPECT_EQ(done, std::vector<std::string>{"r1"});
  EXPECT_EQ(res.log.of_kind(EventKind::kComplete).size(), 1u);
  const auto& c = res.log.cycles[0];
  const auto m = repo->lookup("a");
  EXPECT_DOUBLE_EQ(c.elapsed_s, simulate_run({m}, 50, ExecMode::kFused, CostTable::defaults()).total_time_s);
}

TEST(RunPlan, TwoBatchesAlternate) {
  auto repo = make_repo({{"a", 1000, 1}, {"b", 1000, 1}});
  const auto plan = plan_batches(repo->list(), 1700, CostTable::defaults());
  ASSERT_EQ(plan.batches.size(), 2u);
  const auto res = run_plan(plan, {req("ra", "a", 300), req("rb", "b", 300)}, context(*repo));
  std::vector<int> rotations;
  for (const auto* e : res.log.of_kind(EventKind::kRotate)) rotations.push_back(e->batch);
  // Hand-unrolled: 300 iterations each at quantum 100 is three turns per batch.
  EXPECT_EQ(rotations, (std::vector<int>{0, 1, 0, 1, 0, 1}));
  // Every turn reloads because the other batch evicted it.
  EXPECT_EQ(res.log.of_kind(EventKind::kLoad).size(), 6u);
}

TEST(RunPlan, FinishedMembersShrinkWithoutReload) {
  auto repo = make_repo({{"a", 100, 1}, {"b", 100, 1}});
  auto plan = plan_batches(repo->list(), 8192, CostTable::defaults());
  plan.quantum_iterations = 50;
  const auto res = run_plan(plan, {req("ra", "a", 30), req("rb", "b", 80)}, context(*repo));
  ASSERT_EQ(res.log.cycles.size(), 2u);
  EXPECT_EQ(res.log.cycles[0].iterations, 50);
  EXPECT_EQ(res.log.cycles[1].iterations, 30);
  EXPECT_EQ(res.log.of_kind(EventKind::kLoad).size(), 1u);
  EXPECT_EQ(res.log.cycles[1].load_s, 0);
  EXPECT_EQ(res.log.cycles[1].members, std::vector<std::string>{"b"});
}

TEST(RunPlan, OutputsMatchExecutorInBothModes) {
  auto repo = make_repo({{"a", 100, 1}, {"b", 100, 1}, {"c", 100, 1}});
  const auto plan = plan_batches(repo->list(), 8192, CostTable::defaults());
  for (auto mode : {ExecMode::kUnfused, ExecMode::kFused}) {
    auto ctx = context(*repo, mode);
    std::map<std::string, Tensor> outs;
    ctx.on_complete = [&](const InferenceRequest& r, const Tensor& y, double) { outs[r.request_id] = y; };
    std::vector<InferenceRequest> rs;
    for (const auto& id : {"a", "b", "c"}) {
      auto r = req(std::string("r") + id, id, 7);
      r.input_ref = "seed:3";
      rs.push_back(r);
    }
    run_plan(plan, rs, ctx);
    ASSERT_EQ(outs.size(), 3u);
    for (const auto& id : {"a", "b", "c"}) {
      const auto b = repo->load_bundle(id);
      EXPECT_TRUE(bitwise_equal(outs.at(std::string("r") + id),
                                run(*b.graph, *b.weights, seeded_tensor(b.graph->input_spec(), 3))));
    }
  }
}

TEST(Swap, BudgetExceededLeavesDagUnchanged) {
  auto repo = make_repo({{"a", 100, 1}, {"b", 100, 1}, {"huge", 5000, 1}});
  auto plan = plan_batches(repo->get_many({"a", "b"}), 1000, CostTable::defaults());
  const auto before = plan.batches;
  const FusedDag dag = fuse_models({repo->load_bundle("a"), repo->load_bundle("b")}, repo->get_many({"a", "b"}));
  EXPECT_THROW(request_swap(plan, dag, "a", repo->load_bundle("huge"), repo->lookup("huge"), CostTable::defaults()),
               BudgetExceeded);
  EXPECT_EQ(plan.batches[0].model_ids, before[0].model_ids);
  EXPECT_THROW(request_swap(plan, dag, "zz", repo->load_bundle("huge"), repo->lookup("huge"), CostTable::defaults()),
               UnknownSubgraph);
}

TEST(Swap, RunPlanSwapsAtIteration) {
  auto repo = make_repo({{"a", 100, 1}, {"b", 100, 1}, {"c", 100, 1}});
  auto plan = plan_batches(repo->get_many({"a", "b"}), 8192, CostTable::defaults());
  plan.quantum_iterations = 10;
  auto ctx = context(*repo);
  ctx.swaps.push_back({10, "a", "c", 20, "zeros", UptimeClass::kLong});
  const auto res = run_plan(plan, {req("ra", "a", 40), req("rb", "b", 30)}, ctx);
  ASSERT_EQ(res.log.of_kind(EventKind::kSwapSubgraph).size(), 1u);
  ASSERT_EQ(res.requeued.size(), 1u);
  EXPECT_EQ(res.requeued[0].request_id, "ra");
  EXPECT_EQ(res.requeued[0].iterations_requested, 30);
  std::vector<std::string> done;
  for (const auto* e : res.log.of_kind(EventKind::kComplete)) done.push_back(e->model_id);
  std::sort(done.begin(), done.end());
  EXPECT_EQ(done, (std::vector<std::string>{"b", "c"}));
  EXPECT_TRUE(res.unapplied_swaps.empty());
  // Segment after the swap holds b and c only.
  auto members = res.log.cycles[1].members;
  std::sort(members.begin(), members.end());
  EXPECT_EQ(members, (std::vector<std::string>{"b", "c"}));
}

TEST(Logs, MergeOrdersByTime) {
  RunLog a, b;
  a.events.push_back({1.0, EventKind::kLoad, 0, "x", "", "", 0});
  a.events.push_back({3.0, EventKind::kLoad, 0, "y", "", "", 0});
  b.events.push_back({2.0, EventKind::kLoad, 0, "z", "", "", 1});
  const auto m = merge_logs({a, b});
  ASSERT_EQ(m.events.size(), 3u);
  EXPECT_EQ(m.events[0].payload, "x");
  EXPECT_EQ(m.events[1].payload, "z");
  EXPECT_EQ(m.events[2].payload, "y");
}
