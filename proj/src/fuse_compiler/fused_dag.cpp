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
#include <unordered_map>

#include "fusedinf/errors.hpp"
#include "fusedinf/fuse_compiler.hpp"
#include "fusedinf/model_repo.hpp"

namespace fusedinf {

InitPreamble make_preamble(const CostTable& ct) { return unfused_init_ledger(1, ct); }

InitPreamble unfused_init_ledger(int n, const CostTable& ct) {
  InitPreamble p;
  for (const auto& c : ct.init_calls) p.calls.push_back({c.function, n});
  return p;
}

std::string namespaced(const std::string& model_id, const std::string& node_id) {
  return model_id + "/" + node_id;
}

std::shared_ptr<const SubGraph> compile_subgraph(const ModelBundle& model,
                                                 const ModelManifest& manifest) {
  const ModelGraph& g = *model.graph;
  const std::string& id = g.model_id();
  auto sg = std::make_shared<SubGraph>(SubGraph{
      id, {}, {}, namespaced(id, g.entry()), namespaced(id, g.exit()), model, manifest,
      Program(model.graph, model.weights)});
  sg->nodes.reserve(g.nodes().size());
  for (const auto& nid : topo_order(g)) sg->nodes.push_back(namespaced(id, nid));
  for (const auto& [a, b] : g.edges()) sg->edges.emplace_back(namespaced(id, a), namespaced(id, b));
  return sg;
}

FusedDag::FusedDag(std::string dag_id, InitPreamble preamble,
                   std::vector<std::shared_ptr<const SubGraph>> subgraphs,
                   double total_mem_estimate_mib, int compile_generation)
    : dag_id_(std::move(dag_id)),
      preamble_(std::move(preamble)),
      subgraphs_(std::move(subgraphs)),
      total_mem_estimate_mib_(total_mem_estimate_mib),
      compile_generation_(compile_generation) {}

const SubGraph* FusedDag::find(const std::string& model_id) const {
  for (const auto& sg : subgraphs_) {
    if (sg->model_id == model_id) return sg.get();
  }
  return nullptr;
}

std::vector<std::string> FusedDag::member_ids() const {
  std::vector<std::string> out;
  for (const auto& sg : subgraphs_) out.push_back(sg->model_id);
  return out;
}

std::vector<ModelManifest> FusedDag::manifests() const {
  std::vector<ModelManifest> out;
  for (const auto& sg : subgraphs_) out.push_back(sg->manifest);
  return out;
}

size_t FusedDag::node_count() const {
  size_t n = 0;
  for (const auto& sg : subgraphs_) n += sg->nodes.size();
  return n;
}

std::vector<Edge> FusedDag::edges() const {
  std::vector<Edge> out;
  for (const auto& sg : subgraphs_) out.insert(out.end(), sg->edges.begin(), sg->edges.end());
  return out;
}

namespace {

ModelManifest manifest_for(const ModelBundle& model, const ModelManifest* given,
                           const CostTable& ct) {
  if (given) {
    if (given->model_id != model.model_id()) {
      throw Error("manifest '" + given->model_id + "' does not match model '" +
                  model.model_id() + "'");
    }
    return *given;
  }
  const Profile p = profile_model(*model.graph, *model.weights, ct);
  ModelManifest m;
  m.model_id = model.model_id();
  m.mem_required_mib = p.mem_required_mib;
  m.iter_latency_ms = p.iter_latency_ms;
  m.weights_mib = *p.weights_mib;
  m.activations_mib = std::max(0.0, p.mem_required_mib - ct.per_model_overhead_mib - m.weights_mib);
  m.input_spec = model.graph->input_spec();
  m.output_spec = model.graph->output_spec();
  return m;
}

void check_valid(const ModelBundle& model) {
  const ValidationReport report = validate_graph(*model.graph, *model.weights);
  if (!report.ok()) throw ValidationFailed(model.model_id(), report.summary());
}

std::string dag_id_for(const std::vector<std::shared_ptr<const SubGraph>>& subgraphs) {
  std::string id = "dag";
  char sep = ':';
  for (const auto& sg : subgraphs) {
    id += sep;
    id += sg->model_id;
    sep = '+';
  }
  return id;
}

double fused_estimate(const std::vector<std::shared_ptr<const SubGraph>>& subgraphs,
                      const CostTable& ct) {
  std::vector<ModelManifest> ms;
  for (const auto& sg : subgraphs) ms.push_back(sg->manifest);
  return estimate_memory(ms, ExecMode::kFused, ct).peak_mib;
}

}  // namespace

FusedDag fuse_models(const std::vector<ModelBundle>& models,
                     const std::vector<ModelManifest>& manifests, const CostTable& ct) {
  if (models.empty()) throw Error("fuse_models needs at least one model");
  if (!manifests.empty() && manifests.size() != models.size()) {
    throw Error("manifest list does not align with model list");
  }
  std::set<std::string> seen;
  for (const auto& m : models) {
    if (!seen.insert(m.model_id()).second) throw DuplicateModelId(m.model_id());
  }
  std::vector<std::shared_ptr<const SubGraph>> subgraphs;
  subgraphs.reserve(models.size());
  for (size_t i = 0; i < models.size(); ++i) {
    check_valid(models[i]);
    subgraphs.push_back(compile_subgraph(
        models[i], manifest_for(models[i], manifests.empty() ? nullptr : &manifests[i], ct)));
  }
  std::string id = dag_id_for(subgraphs);
  const double mem = fused_estimate(subgraphs, ct);
  return FusedDag(std::move(id), make_preamble(ct), std::move(subgraphs), mem, 0);
}

FusedDag swap_subgraph(const FusedDag& dag, const std::string& out_id,
                       const ModelBundle& incoming,
                       const std::optional<ModelManifest>& manifest, const CostTable& ct) {
  if (!dag.find(out_id)) throw UnknownSubgraph(out_id);
  const std::string& in_id = incoming.model_id();
  if (in_id != out_id && dag.find(in_id)) throw DuplicateModelId(in_id);
  check_valid(incoming);
  auto replacement = compile_subgraph(incoming, manifest_for(incoming, manifest ? &*manifest : nullptr, ct));
  std::vector<std::shared_ptr<const SubGraph>> subgraphs = dag.subgraphs();
  for (auto& sg : subgraphs) {
    if (sg->model_id == out_id) sg = replacement;
  }
  std::string id = dag_id_for(subgraphs);
  const double mem = fused_estimate(subgraphs, ct);
  return FusedDag(std::move(id), dag.preamble(), std::move(subgraphs), mem,
                  dag.compile_generation() + 1);
}

std::map<std::string, Tensor> execute_subgraphs(const FusedDag& dag,
                                                const std::map<std::string, Tensor>& inputs) {
  for (const auto& [id, x] : inputs) {
    if (!dag.find(id)) throw UnknownSubgraph(id);
  }
  std::map<std::string, Tensor> out;
  // Member order, each member in its own topological order.
  for (const auto& sg : dag.subgraphs()) {
    auto it = inputs.find(sg->model_id);
    if (it == inputs.end()) continue;
    out.emplace(sg->model_id, sg->program.run(it->second));
  }
  return out;
}

std::map<std::string, Tensor> execute_fused(const FusedDag& dag,
                                            const std::map<std::string, Tensor>& inputs) {
  for (const auto& sg : dag.subgraphs()) {
    if (!inputs.count(sg->model_id)) throw MissingInput(sg->model_id);
  }
  return execute_subgraphs(dag, inputs);
}

size_t cross_edge_count(const FusedDag& dag) {
  std::unordered_map<std::string, size_t> owner;
  for (size_t i = 0; i < dag.subgraphs().size(); ++i) {
    for (const auto& n : dag.subgraphs()[i]->nodes) owner.emplace(n, i);
  }
  size_t cross = 0;
  for (const auto& [a, b] : dag.edges()) {
    auto ia = owner.find(a), ib = owner.find(b);
    if (ia == owner.end() || ib == owner.end() || ia->second != ib->second) ++cross;
  }
  return cross;
}

}  // namespace fusedinf
