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
#include <cstring>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "fusedinf/errors.hpp"
#include "fusedinf/graph_ir.hpp"

namespace fusedinf {

bool TensorSpec::valid() const {
  return !dims.empty() &&
         std::all_of(dims.begin(), dims.end(), [](int64_t d) { return d >= 1; });
}

int64_t TensorSpec::element_count() const {
  if (dims.empty()) return 0;
  return std::accumulate(dims.begin(), dims.end(), int64_t{1},
                         std::multiplies<>());
}

std::string to_string(const TensorSpec& spec) {
  std::ostringstream out;
  out << '(';
  for (size_t i = 0; i < spec.dims.size(); ++i) {
    if (i) out << ',';
    out << spec.dims[i];
  }
  out << ')';
  return out.str();
}

Tensor Tensor::zeros(const TensorSpec& spec) {
  return Tensor{spec, std::vector<float>(spec.element_count(), 0.0f)};
}

Tensor Tensor::from(TensorSpec spec, std::vector<float> values) {
  if (static_cast<int64_t>(values.size()) != spec.element_count()) {
    throw Error("tensor of shape " + to_string(spec) + " given " +
                std::to_string(values.size()) + " values");
  }
  return Tensor{std::move(spec), std::move(values)};
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.spec == b.spec && a.values.size() == b.values.size() &&
         (a.values.empty() ||
          std::memcmp(a.values.data(), b.values.data(),
                      a.values.size() * sizeof(float)) == 0);
}

namespace {

constexpr std::array<std::string_view, 9> kKindNames = {
    "dense",         "conv2d",          "relu",
    "maxpool2d",     "batchnorm_inference", "residual_add",
    "global_avg_pool", "flatten",       "concat",
};

}  // namespace

std::string_view to_string(OpKind kind) {
  return kKindNames[static_cast<size_t>(kind)];
}

std::optional<OpKind> parse_op_kind(std::string_view name) {
  for (size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<OpKind>(i);
  }
  return std::nullopt;
}

int min_arity(OpKind kind) { return is_variadic(kind) ? 2 : 1; }

bool is_variadic(OpKind kind) {
  return kind == OpKind::kResidualAdd || kind == OpKind::kConcat;
}

void WeightStore::add(std::string name, TensorSpec spec,
                      std::vector<float> values) {
  if (!spec.valid()) {
    throw Error("weight '" + name + "' has invalid shape " + to_string(spec));
  }
  if (static_cast<int64_t>(values.size()) != spec.element_count()) {
    throw Error("weight '" + name + "' of shape " + to_string(spec) +
                " given " + std::to_string(values.size()) + " values");
  }
  tensors_.insert_or_assign(std::move(name),
                            WeightTensor{std::move(spec), std::move(values)});
}

const WeightTensor* WeightStore::find(std::string_view name) const {
  auto it = tensors_.find(name);
  return it == tensors_.end() ? nullptr : &it->second;
}

int64_t WeightStore::total_bytes() const {
  int64_t total = 0;
  for (const auto& [_, t] : tensors_) total += t.spec.byte_size();
  return total;
}

ModelGraph::ModelGraph(std::string model_id, TensorSpec input_spec,
                       TensorSpec output_spec, std::vector<OpNode> nodes,
                       std::string entry, std::string exit)
    : model_id_(std::move(model_id)),
      input_spec_(std::move(input_spec)),
      output_spec_(std::move(output_spec)),
      nodes_(std::move(nodes)),
      entry_(std::move(entry)),
      exit_(std::move(exit)) {
  index_.reserve(nodes_.size());
  for (size_t i = 0; i < nodes_.size(); ++i) index_.emplace(nodes_[i].id, i);
}

const OpNode* ModelGraph::find(std::string_view id) const {
  auto idx = index_of(id);
  return idx ? &nodes_[*idx] : nullptr;
}

std::optional<size_t> ModelGraph::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<Edge> ModelGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count());
  for (const auto& node : nodes_) {
    for (const auto& in : node.inputs) out.emplace_back(in, node.id);
  }
  return out;
}

size_t ModelGraph::edge_count() const {
  size_t n = 0;
  for (const auto& node : nodes_) n += node.inputs.size();
  return n;
}

bool ValidationReport::has(std::string_view message) const {
  return std::any_of(problems.begin(), problems.end(), [&](const Problem& p) {
    return p.message == message;
  });
}

std::string ValidationReport::summary() const {
  std::string out;
  for (const auto& p : problems) {
    if (!out.empty()) out += "; ";
    if (!p.node_id.empty()) out += p.node_id + ": ";
    out += p.message;
  }
  return out;
}

std::vector<std::string> topo_order(const ModelGraph& graph) {
  const auto& nodes = graph.nodes();
  const size_t n = nodes.size();
  std::vector<size_t> indegree(n, 0);
  std::vector<std::vector<size_t>> consumers(n);
  for (size_t i = 0; i < n; ++i) {
    for (const auto& in : nodes[i].inputs) {
      auto src = graph.index_of(in);
      if (!src) {
        throw Error("node '" + nodes[i].id + "' reads unknown node '" + in +
                    "'");
      }
      consumers[*src].push_back(i);
      ++indegree[i];
    }
  }

  auto by_id = [&](size_t a, size_t b) { return nodes[a].id > nodes[b].id; };
  std::priority_queue<size_t, std::vector<size_t>, decltype(by_id)> ready(
      by_id);
  for (size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }

  std::vector<std::string> order;
  order.reserve(n);
  while (!ready.empty()) {
    size_t i = ready.top();
    ready.pop();
    order.push_back(nodes[i].id);
    for (size_t c : consumers[i]) {
      if (--indegree[c] == 0) ready.push(c);
    }
  }
  if (order.size() != n) throw CycleDetected();
  return order;
}

namespace {

void check_weights(const OpNode& node, const TensorSpec& input,
                   const WeightStore& weights, ValidationReport& report) {
  const size_t refs = node.weight_refs.size();
  bool count_ok = true;
  switch (node.kind) {
    case OpKind::kDense:
    case OpKind::kConv2d:
      count_ok = refs == 1 || refs == 2;
      break;
    case OpKind::kBatchNormInference:
      count_ok = refs == 4;
      break;
    default:
      count_ok = refs == 0;
  }
  if (!count_ok) {
    report.problems.push_back({node.id, "weight count mismatch"});
    return;
  }
  if (refs == 0) return;

  auto expected = expected_weight_shapes(node, input, refs);
  for (size_t i = 0; i < refs; ++i) {
    const WeightTensor* w = weights.find(node.weight_refs[i]);
    if (w == nullptr) {
      report.problems.push_back({node.id, "missing weight"});
      continue;
    }
    if (w->spec != expected[i]) {
      report.problems.push_back({node.id, "weight shape mismatch"});
      continue;
    }
    if (node.kind == OpKind::kBatchNormInference && i == 3) {
      bool negative = std::any_of(w->values.begin(), w->values.end(),
                                  [](float v) { return !(v >= 0.0f); });
      if (negative) report.problems.push_back({node.id, "negative variance"});
    }
  }
}

}  // namespace

ValidationReport validate_graph(const ModelGraph& graph,
                                const WeightStore& weights) {
  ValidationReport report;
  const auto& nodes = graph.nodes();

  if (!graph.input_spec().valid()) {
    report.problems.push_back({"", "invalid input spec"});
  }
  if (!graph.output_spec().valid()) {
    report.problems.push_back({"", "invalid output spec"});
  }
  if (nodes.empty()) {
    report.problems.push_back({"", "graph has no nodes"});
    return report;
  }

  std::set<std::string> seen;
  bool dangling = false;
  for (const auto& node : nodes) {
    if (!seen.insert(node.id).second) {
      report.problems.push_back({node.id, "duplicate node id"});
    }
    for (const auto& in : node.inputs) {
      if (!graph.find(in)) {
        report.problems.push_back({node.id, "unknown input '" + in + "'"});
        dangling = true;
      }
    }
    const int arity = node.inputs.empty() && node.id == graph.entry()
                          ? 1
                          : static_cast<int>(node.inputs.size());
    if (node.id == graph.entry() && !node.inputs.empty()) {
      report.problems.push_back({node.id, "entry node must have no inputs"});
    } else if (node.id != graph.entry() && node.inputs.empty()) {
      report.problems.push_back({node.id, "unreachable node"});
    } else if (is_variadic(node.kind) ? arity < 2 : arity != 1) {
      report.problems.push_back({node.id, "arity mismatch"});
    }
  }
  const OpNode* entry = graph.find(graph.entry());
  const OpNode* exit = graph.find(graph.exit());
  if (!entry) report.problems.push_back({"", "entry node not found"});
  if (!exit) report.problems.push_back({"", "exit node not found"});
  if (!report.ok() && (dangling || !entry || !exit)) return report;

  std::vector<std::string> order;
  try {
    order = topo_order(graph);
  } catch (const CycleDetected&) {
    report.problems.push_back({"", "cycle detected"});
    return report;
  }

  // Reachability from entry along edges, and whether exit is reached.
  std::vector<std::vector<size_t>> consumers(nodes.size());
  for (size_t i = 0; i < nodes.size(); ++i) {
    for (const auto& in : nodes[i].inputs) {
      consumers[*graph.index_of(in)].push_back(i);
    }
  }
  std::vector<bool> reached(nodes.size(), false);
  std::vector<size_t> stack = {*graph.index_of(graph.entry())};
  reached[stack.back()] = true;
  while (!stack.empty()) {
    size_t i = stack.back();
    stack.pop_back();
    for (size_t c : consumers[i]) {
      if (!reached[c]) {
        reached[c] = true;
        stack.push_back(c);
      }
    }
  }
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (!reached[i] && !nodes[i].inputs.empty()) {
      report.problems.push_back({nodes[i].id, "unreachable node"});
    }
  }
  if (!reached[*graph.index_of(graph.exit())]) {
    report.problems.push_back({"", "entry does not reach exit"});
  }
  if (!report.ok() || !graph.input_spec().valid()) return report;

  // Shape walk in topological order; weight checks need each node's input.
  std::map<std::string, TensorSpec> shapes;
  for (const auto& id : order) {
    const OpNode& node = *graph.find(id);
    std::vector<TensorSpec> in_specs;
    if (node.inputs.empty()) {
      in_specs.push_back(graph.input_spec());
    } else {
      for (const auto& in : node.inputs) in_specs.push_back(shapes.at(in));
    }
    try {
      shapes[id] = infer_node_shape(node, in_specs);
    } catch (const ShapeMismatch& e) {
      report.problems.push_back({id, std::string("shape mismatch: ") + e.what()});
      return report;
    }
    check_weights(node, in_specs.front(), weights, report);
  }
  if (shapes.at(graph.exit()) != graph.output_spec()) {
    report.problems.push_back(
        {graph.exit(), "output spec mismatch: inferred " +
                           to_string(shapes.at(graph.exit())) + ", declared " +
                           to_string(graph.output_spec())});
  }
  return report;
}

}  // namespace fusedinf
