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
#include <unordered_set>

#include "fusedinf/errors.hpp"
#include "fusedinf/executor.hpp"

namespace fusedinf {

Program::Program(std::shared_ptr<const ModelGraph> graph,
                 std::shared_ptr<const WeightStore> weights)
    : graph_(std::move(graph)), weights_(std::move(weights)) {
  build(topo_order(*graph_));
}

Program::Program(std::shared_ptr<const ModelGraph> graph,
                 std::shared_ptr<const WeightStore> weights,
                 const std::vector<std::string>& order)
    : graph_(std::move(graph)), weights_(std::move(weights)) {
  build(order);
}

void Program::build(const std::vector<std::string>& order) {
  const ModelGraph& g = *graph_;
  if (order.size() != g.nodes().size()) {
    throw Error("order has " + std::to_string(order.size()) + " ids, graph has " +
                std::to_string(g.nodes().size()) + " nodes");
  }
  std::unordered_map<std::string, int> slot;
  steps_.clear();
  steps_.reserve(order.size());
  for (const auto& id : order) {
    const OpNode* node = g.find(id);
    if (node == nullptr) throw Error("order names unknown node '" + id + "'");
    if (slot.count(id)) throw Error("order repeats node '" + id + "'");
    Step step{node, {}, {}};
    if (node->inputs.empty()) step.inputs.push_back(-1);
    for (const auto& in : node->inputs) {
      auto it = slot.find(in);
      if (it == slot.end()) {
        throw Error("order places '" + id + "' before its input '" + in + "'");
      }
      step.inputs.push_back(it->second);
    }
    for (const auto& ref : node->weight_refs) step.weights.push_back(weights_->find(ref));
    slot.emplace(id, static_cast<int>(steps_.size()));
    steps_.push_back(std::move(step));
  }
  auto it = slot.find(g.exit());
  if (it == slot.end()) throw Error("exit node '" + g.exit() + "' not found");
  exit_slot_ = it->second;
}

Tensor Program::run(const Tensor& x) const {
  const ModelGraph& g = *graph_;
  if (x.spec != g.input_spec() ||
      static_cast<int64_t>(x.values.size()) != x.spec.element_count()) {
    throw ShapeMismatch(g.entry(), "input is " + to_string(x.spec) + ", model expects " +
                                       to_string(g.input_spec()));
  }
  std::vector<Tensor> values(steps_.size());
  std::vector<const Tensor*> args;
  for (size_t i = 0; i < steps_.size(); ++i) {
    const Step& step = steps_[i];
    for (size_t k = 0; k < step.weights.size(); ++k) {
      if (step.weights[k] == nullptr) throw MissingWeight(step.node->weight_refs[k]);
    }
    args.clear();
    for (int in : step.inputs) args.push_back(in < 0 ? &x : &values[in]);
    values[i] = apply_node(*step.node, args, step.weights);
  }
  return std::move(values[exit_slot_]);
}

namespace {

// Non-owning aliases; the Program does not outlive these calls.
template <typename T>
std::shared_ptr<const T> borrow(const T& value) {
  return std::shared_ptr<const T>(&value, [](const T*) {});
}

}  // namespace

Tensor run(const ModelGraph& g, const WeightStore& w, const Tensor& x) {
  return Program(borrow(g), borrow(w)).run(x);
}

Tensor run_with_order(const ModelGraph& g, const WeightStore& w, const Tensor& x,
                      const std::vector<std::string>& order) {
  return Program(borrow(g), borrow(w), order).run(x);
}

std::vector<Tensor> run_batch(const ModelGraph& g, const WeightStore& w,
                              const std::vector<Tensor>& xs) {
  std::vector<Tensor> out;
  if (xs.empty()) return out;
  Program program(borrow(g), borrow(w));
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(program.run(x));
  return out;
}

}  // namespace fusedinf
