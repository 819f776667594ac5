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

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fusedinf/cost_model.hpp"
#include "fusedinf/executor.hpp"
#include "fusedinf/graph_ir.hpp"
#include "fusedinf/manifest.hpp"
#include "json.hpp"

namespace fusedinf {

struct InitCall {
  std::string function_name;
  int multiplicity = 1;

  friend bool operator==(const InitCall&, const InitCall&) = default;
};

struct InitPreamble {
  std::vector<InitCall> calls;

  friend bool operator==(const InitPreamble&, const InitPreamble&) = default;
};

// One call per device function of the cost table.
InitPreamble make_preamble(const CostTable& ct);
// What n independently initialized models would call.
InitPreamble unfused_init_ledger(int n, const CostTable& ct);

std::string namespaced(const std::string& model_id, const std::string& node_id);

// A member model inside a fused DAG. Never modified after compilation, so a
// swap can keep untouched members by sharing the same object.
struct SubGraph {
  std::string model_id;
  std::vector<std::string> nodes;  // namespaced, evaluation order
  std::vector<Edge> edges;         // namespaced
  std::string entry;
  std::string exit;
  ModelBundle bundle;  // weight_binding
  ModelManifest manifest;
  Program program;
};

std::shared_ptr<const SubGraph> compile_subgraph(const ModelBundle& model,
                                                 const ModelManifest& manifest);

class FusedDag {
 public:
  FusedDag(std::string dag_id, InitPreamble preamble,
           std::vector<std::shared_ptr<const SubGraph>> subgraphs,
           double total_mem_estimate_mib, int compile_generation);

  const std::string& dag_id() const { return dag_id_; }
  const InitPreamble& preamble() const { return preamble_; }
  const std::vector<std::shared_ptr<const SubGraph>>& subgraphs() const { return subgraphs_; }
  double total_mem_estimate_mib() const { return total_mem_estimate_mib_; }
  int compile_generation() const { return compile_generation_; }

  const SubGraph* find(const std::string& model_id) const;
  std::vector<std::string> member_ids() const;
  std::vector<ModelManifest> manifests() const;
  size_t node_count() const;
  std::vector<Edge> edges() const;  // union of member edges

 private:
  std::string dag_id_;
  InitPreamble preamble_;
  std::vector<std::shared_ptr<const SubGraph>> subgraphs_;
  double total_mem_estimate_mib_;
  int compile_generation_;
};

// Manifests, when given, must align with `models`; otherwise each member is
// profiled from its graph and weights.
FusedDag fuse_models(const std::vector<ModelBundle>& models,
                     const std::vector<ModelManifest>& manifests = {},
                     const CostTable& ct = CostTable::defaults());

FusedDag swap_subgraph(const FusedDag& dag, const std::string& out_id,
                       const ModelBundle& incoming,
                       const std::optional<ModelManifest>& manifest = std::nullopt,
                       const CostTable& ct = CostTable::defaults());

// Exactly one input per member. Keyed by model id.
std::map<std::string, Tensor> execute_fused(const FusedDag& dag,
                                            const std::map<std::string, Tensor>& inputs);
// Any subset of members.
std::map<std::string, Tensor> execute_subgraphs(const FusedDag& dag,
                                                const std::map<std::string, Tensor>& inputs);

size_t cross_edge_count(const FusedDag& dag);

// Serialized form: the model format's fields over namespaced nodes, plus
// `subgraphs` and `preamble` sections.
nlohmann::json dag_to_json(const FusedDag& dag);

struct DagDocument {
  std::string dag_id;
  int compile_generation = 0;
  double total_mem_estimate_mib = 0;
  InitPreamble preamble;
  std::vector<OpNode> nodes;  // namespaced
  struct Member {
    std::string model_id;
    std::vector<std::string> nodes;
    std::string entry;
    std::string exit;
  };
  std::vector<Member> subgraphs;
};

DagDocument dag_from_json(const nlohmann::json& doc);  // ParseError
size_t cross_edge_count(const DagDocument& doc);

}  // namespace fusedinf
