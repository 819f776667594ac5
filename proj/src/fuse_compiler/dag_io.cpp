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

#include <unordered_map>

#include "fusedinf/errors.hpp"
#include "fusedinf/fuse_compiler.hpp"
#include "fusedinf/model_io.hpp"

namespace fusedinf {

using nlohmann::json;

json dag_to_json(const FusedDag& dag) {
  json nodes = json::array();
  json subgraphs = json::array();
  for (const auto& sg : dag.subgraphs()) {
    const json model = model_to_json(*sg->bundle.graph);
    for (json node : model["nodes"]) {
      node["node_id"] = namespaced(sg->model_id, node["node_id"].get<std::string>());
      for (auto& in : node["inputs"]) in = namespaced(sg->model_id, in.get<std::string>());
      nodes.push_back(std::move(node));
    }
    subgraphs.push_back({{"model_id", sg->model_id},
                         {"input_spec", model["input_spec"]},
                         {"output_spec", model["output_spec"]},
                         {"entry", sg->entry},
                         {"exit", sg->exit},
                         {"nodes", sg->nodes},
                         {"mem_required_mib", sg->manifest.mem_required_mib}});
  }
  json preamble = json::array();
  for (const auto& c : dag.preamble().calls) {
    preamble.push_back({{"function", c.function_name}, {"multiplicity", c.multiplicity}});
  }
  return {{"dag_id", dag.dag_id()},
          {"compile_generation", dag.compile_generation()},
          {"total_mem_estimate_mib", dag.total_mem_estimate_mib()},
          {"preamble", std::move(preamble)},
          {"nodes", std::move(nodes)},
          {"subgraphs", std::move(subgraphs)}};
}

DagDocument dag_from_json(const json& doc) {
  try {
    DagDocument d;
    d.dag_id = doc.at("dag_id").get<std::string>();
    d.compile_generation = doc.value("compile_generation", 0);
    d.total_mem_estimate_mib = doc.value("total_mem_estimate_mib", 0.0);
    for (const auto& c : doc.at("preamble")) {
      d.preamble.calls.push_back({c.at("function").get<std::string>(), c.at("multiplicity").get<int>()});
    }
    for (const auto& jn : doc.at("nodes")) {
      OpNode n;
      n.id = jn.at("node_id").get<std::string>();
      auto kind = parse_op_kind(jn.at("kind").get<std::string>());
      if (!kind) throw ParseError("node '" + n.id + "' has unknown kind");
      n.kind = *kind;
      n.weight_refs = jn.value("weight_refs", std::vector<std::string>{});
      n.inputs = jn.value("inputs", std::vector<std::string>{});
      d.nodes.push_back(std::move(n));
    }
    for (const auto& js : doc.at("subgraphs")) {
      d.subgraphs.push_back({js.at("model_id").get<std::string>(),
                             js.at("nodes").get<std::vector<std::string>>(),
                             js.at("entry").get<std::string>(), js.at("exit").get<std::string>()});
    }
    return d;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad DAG file: ") + e.what());
  }
}

size_t cross_edge_count(const DagDocument& doc) {
  std::unordered_map<std::string, size_t> owner;
  for (size_t i = 0; i < doc.subgraphs.size(); ++i) {
    for (const auto& n : doc.subgraphs[i].nodes) owner.emplace(n, i);
  }
  size_t cross = 0;
  for (const auto& node : doc.nodes) {
    for (const auto& in : node.inputs) {
      auto a = owner.find(in), b = owner.find(node.id);
      if (a == owner.end() || b == owner.end() || a->second != b->second) ++cross;
    }
  }
  return cross;
}

}  // namespace fusedinf
