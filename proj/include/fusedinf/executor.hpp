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

#include <memory>
#include <string>
#include <vector>

#include "fusedinf/graph_ir.hpp"

namespace fusedinf {

// Evaluates one node. `inputs` are the node's operand tensors in input order
// (the external input for the entry node); `weights` resolve weight_refs in
// order. Accumulation is a left fold in ascending index order.
Tensor apply_node(const OpNode& node, const std::vector<const Tensor*>& inputs,
                  const std::vector<const WeightTensor*>& weights);

// Pre-resolved evaluation schedule for one graph. Shares ownership of the
// graph and weights so it can outlive the caller's handles.
class Program {
 public:
  Program(std::shared_ptr<const ModelGraph> graph,
          std::shared_ptr<const WeightStore> weights);
  // Same, with a caller-chosen evaluation order. Throws Error unless `order`
  // is a permutation of the node ids that respects every edge.
  Program(std::shared_ptr<const ModelGraph> graph,
          std::shared_ptr<const WeightStore> weights,
          const std::vector<std::string>& order);

  Tensor run(const Tensor& x) const;

  const ModelGraph& graph() const { return *graph_; }
  const WeightStore& weights() const { return *weights_; }
  const std::shared_ptr<const ModelGraph>& graph_ptr() const { return graph_; }
  const std::shared_ptr<const WeightStore>& weights_ptr() const { return weights_; }

 private:
  struct Step {
    const OpNode* node;
    std::vector<int> inputs;  // indices into the value table, -1 = external
    std::vector<const WeightTensor*> weights;
  };

  void build(const std::vector<std::string>& order);

  std::shared_ptr<const ModelGraph> graph_;
  std::shared_ptr<const WeightStore> weights_;
  std::vector<Step> steps_;
  int exit_slot_ = -1;
};

Tensor run(const ModelGraph& g, const WeightStore& w, const Tensor& x);
Tensor run_with_order(const ModelGraph& g, const WeightStore& w, const Tensor& x,
                      const std::vector<std::string>& order);
std::vector<Tensor> run_batch(const ModelGraph& g, const WeightStore& w,
                              const std::vector<Tensor>& xs);

}  // namespace fusedinf
