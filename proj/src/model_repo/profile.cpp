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
#include <set>
#include <unordered_map>

#include "fusedinf/errors.hpp"
#include "fusedinf/model_repo.hpp"

namespace fusedinf {

int64_t peak_activation_bytes(const ModelGraph& graph) {
  const auto order = topo_order(graph);
  const auto shapes = infer_shapes(graph);
  std::unordered_map<std::string, size_t> pos;
  for (size_t i = 0; i < order.size(); ++i) pos.emplace(order[i], i);

  const size_t n = order.size();
  std::vector<size_t> last_use(n);
  for (size_t i = 0; i < n; ++i) last_use[i] = order[i] == graph.exit() ? n - 1 : i;
  for (size_t i = 0; i < n; ++i) {
    for (const auto& in : graph.find(order[i])->inputs) {
      size_t& lu = last_use[pos.at(in)];
      lu = std::max(lu, i);
    }
  }
  const int64_t input_bytes = graph.input_spec().byte_size();
  int64_t peak = 0;
  for (size_t step = 0; step < n; ++step) {
    int64_t live = graph.find(order[step])->inputs.empty() ? input_bytes : 0;
    for (size_t j = 0; j <= step; ++j) {
      if (last_use[j] >= step) live += shapes.at(order[j]).byte_size();
    }
    peak = std::max(peak, live);
  }
  return peak;
}

ProfileDetail profile_model_detail(const ModelGraph& graph, const WeightStore& weights,
                                   const CostTable& ct) {
  ProfileDetail d;
  std::set<std::string_view> seen;
  for (const auto& node : graph.nodes()) {
    for (const auto& ref : node.weight_refs) {
      if (!seen.insert(ref).second) continue;
      const WeightTensor* w = weights.find(ref);
      if (w == nullptr) throw MissingWeight(ref);
      d.weight_bytes += w->spec.byte_size();
    }
  }
  d.peak_activation_bytes = peak_activation_bytes(graph);
  d.mem_required_mib =
      std::ceil(static_cast<double>(d.weight_bytes + d.peak_activation_bytes) / kMiB) +
      ct.per_model_overhead_mib;

  const auto shapes = infer_shapes(graph);
  for (const auto& node : graph.nodes()) {
    std::vector<TensorSpec> in;
    if (node.inputs.empty()) in.push_back(graph.input_spec());
    for (const auto& i : node.inputs) in.push_back(shapes.at(i));
    d.iter_latency_ms += ct.op_latency_ms(node.kind, node_flops(node, in, shapes.at(node.id)));
  }
  return d;
}

Profile profile_model(const ModelGraph& graph, const WeightStore& weights,
                      const CostTable& ct) {
  const auto d = profile_model_detail(graph, weights, ct);
  return {d.mem_required_mib, d.iter_latency_ms, static_cast<double>(d.weight_bytes) / kMiB};
}

}  // namespace fusedinf
