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

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace fusedinf {

// Shape of a dense fp32 tensor. No batch axis; spatial tensors are (C, H, W).
struct TensorSpec {
  std::vector<int64_t> dims;

  TensorSpec() = default;
  TensorSpec(std::initializer_list<int64_t> d) : dims(d) {}
  explicit TensorSpec(std::vector<int64_t> d) : dims(std::move(d)) {}

  bool valid() const;
  int64_t rank() const { return static_cast<int64_t>(dims.size()); }
  int64_t element_count() const;
  int64_t byte_size() const { return 4 * element_count(); }

  friend bool operator==(const TensorSpec&, const TensorSpec&) = default;
};

std::string to_string(const TensorSpec& spec);

struct Tensor {
  TensorSpec spec;
  std::vector<float> values;

  static Tensor zeros(const TensorSpec& spec);
  static Tensor from(TensorSpec spec, std::vector<float> values);

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

// Exact bit-level comparison; unlike operator== it treats -0.0f and 0.0f as
// different and NaN as equal to itself with the same payload.
bool bitwise_equal(const Tensor& a, const Tensor& b);

enum class OpKind {
  kDense,
  kConv2d,
  kRelu,
  kMaxPool2d,
  kBatchNormInference,
  kResidualAdd,
  kGlobalAvgPool,
  kFlatten,
  kConcat,
};

inline constexpr std::array<OpKind, 9> kAllOpKinds = {
    OpKind::kDense,        OpKind::kConv2d,
    OpKind::kRelu,         OpKind::kMaxPool2d,
    OpKind::kBatchNormInference, OpKind::kResidualAdd,
    OpKind::kGlobalAvgPool, OpKind::kFlatten,
    OpKind::kConcat,
};

std::string_view to_string(OpKind kind);
std::optional<OpKind> parse_op_kind(std::string_view name);

// Kind-specific parameters. Unused fields keep their defaults and are not
// serialized.
struct OpAttrs {
  int64_t units = 0;   // dense out_features, conv2d out_channels
  int64_t fan_in = 0;  // dense in_features
  int64_t kernel = 0;
  int64_t stride = 1;
  int64_t pad = 0;
  float epsilon = 1e-5f;

  friend bool operator==(const OpAttrs&, const OpAttrs&) = default;
};

struct OpNode {
  std::string id;
  OpKind kind = OpKind::kRelu;
  OpAttrs attrs;
  // dense/conv2d: {weight} or {weight, bias}; batchnorm: {gamma, beta, mean,
  // var}; all other kinds: none.
  std::vector<std::string> weight_refs;
  // Predecessor node ids. Empty only for the entry node, which consumes the
  // external model input.
  std::vector<std::string> inputs;

  friend bool operator==(const OpNode&, const OpNode&) = default;
};

// Minimum/maximum number of predecessors for a kind, counting the external
// input for the entry node.
int min_arity(OpKind kind);
bool is_variadic(OpKind kind);

struct WeightTensor {
  TensorSpec spec;
  std::vector<float> values;

  friend bool operator==(const WeightTensor&, const WeightTensor&) = default;
};

class WeightStore {
 public:
  // Throws Error when values.size() does not match the tensor shape.
  void add(std::string name, TensorSpec spec, std::vector<float> values);
  const WeightTensor* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }

  const std::map<std::string, WeightTensor, std::less<>>& tensors() const {
    return tensors_;
  }
  size_t size() const { return tensors_.size(); }
  int64_t total_bytes() const;

  friend bool operator==(const WeightStore&, const WeightStore&) = default;

 private:
  std::map<std::string, WeightTensor, std::less<>> tensors_;
};

using Edge = std::pair<std::string, std::string>;

// One DNN as a DAG of operator nodes. Immutable after construction.
class ModelGraph {
 public:
  ModelGraph() = default;
  ModelGraph(std::string model_id, TensorSpec input_spec,
             TensorSpec output_spec, std::vector<OpNode> nodes,
             std::string entry, std::string exit);

  const std::string& model_id() const { return model_id_; }
  const TensorSpec& input_spec() const { return input_spec_; }
  const TensorSpec& output_spec() const { return output_spec_; }
  const std::vector<OpNode>& nodes() const { return nodes_; }
  const std::string& entry() const { return entry_; }
  const std::string& exit() const { return exit_; }

  // First node with the id, or nullptr.
  const OpNode* find(std::string_view id) const;
  std::optional<size_t> index_of(std::string_view id) const;

  // (producer, consumer) pairs derived from node inputs, in node order.
  std::vector<Edge> edges() const;
  size_t edge_count() const;

  friend bool operator==(const ModelGraph& a, const ModelGraph& b) {
    return a.model_id_ == b.model_id_ && a.input_spec_ == b.input_spec_ &&
           a.output_spec_ == b.output_spec_ && a.nodes_ == b.nodes_ &&
           a.entry_ == b.entry_ && a.exit_ == b.exit_;
  }

 private:
  std::string model_id_;
  TensorSpec input_spec_;
  TensorSpec output_spec_;
  std::vector<OpNode> nodes_;
  std::string entry_;
  std::string exit_;
  std::unordered_map<std::string, size_t> index_;
};

struct Problem {
  std::string node_id;  // empty for graph-level problems
  std::string message;
};

struct ValidationReport {
  std::vector<Problem> problems;

  bool ok() const { return problems.empty(); }
  bool has(std::string_view message) const;
  std::string summary() const;
};

// Checks every structural and shape invariant of the graph and that each
// weight_ref resolves to a tensor of the shape its node requires. Problems are
// returned, never thrown.
ValidationReport validate_graph(const ModelGraph& graph,
                                const WeightStore& weights);

// Node ids ordered so every edge goes forward; ties broken by ascending id.
// Throws CycleDetected, or Error for inputs naming unknown nodes.
std::vector<std::string> topo_order(const ModelGraph& graph);

// Output spec of a single node given its input specs. Throws ShapeMismatch.
TensorSpec infer_node_shape(const OpNode& node,
                            const std::vector<TensorSpec>& inputs);

// Output spec per node. Throws ShapeMismatch / CycleDetected.
std::map<std::string, TensorSpec> infer_shapes(const ModelGraph& graph);

// Weight shapes a node needs, in weight_refs order. `input` is the first
// input spec. Only meaningful for the weighted kinds.
std::vector<TensorSpec> expected_weight_shapes(const OpNode& node,
                                               const TensorSpec& input,
                                               size_t ref_count);

// Multiply-accumulate style work estimate used by the analytic profiler.
double node_flops(const OpNode& node, const std::vector<TensorSpec>& inputs,
                  const TensorSpec& output);

}  // namespace fusedinf
