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
#include <map>

#include "fusedinf/errors.hpp"
#include "fusedinf/graph_ir.hpp"

namespace fusedinf {

namespace {

int64_t window_extent(int64_t in, int64_t kernel, int64_t stride, int64_t pad) {
  const int64_t span = in + 2 * pad - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

void require(bool cond, const OpNode& node, const std::string& detail) {
  if (!cond) throw ShapeMismatch(node.id, detail);
}

TensorSpec spatial_window(const OpNode& node, const TensorSpec& in,
                          int64_t out_channels) {
  const auto& a = node.attrs;
  require(in.rank() == 3, node, "expects (C,H,W) input, got " + to_string(in));
  require(a.kernel >= 1 && a.stride >= 1 && a.pad >= 0, node,
          "kernel/stride must be >= 1 and pad >= 0");
  const int64_t h = window_extent(in.dims[1], a.kernel, a.stride, a.pad);
  const int64_t w = window_extent(in.dims[2], a.kernel, a.stride, a.pad);
  require(h >= 1 && w >= 1, node,
          "kernel " + std::to_string(a.kernel) + " does not fit " +
              to_string(in));
  return TensorSpec{out_channels, h, w};
}

}  // namespace

TensorSpec infer_node_shape(const OpNode& node,
                            const std::vector<TensorSpec>& inputs) {
  require(!inputs.empty(), node, "no inputs");
  for (const auto& s : inputs) require(s.valid(), node, "invalid input spec");
  const TensorSpec& in = inputs.front();
  const auto& a = node.attrs;

  if (!is_variadic(node.kind)) {
    require(inputs.size() == 1, node, "expects exactly one input");
  }

  switch (node.kind) {
    case OpKind::kDense:
      require(a.fan_in >= 1 && a.units >= 1, node,
              "fan_in and units must be >= 1");
      require(in.rank() == 1 && in.dims[0] == a.fan_in, node,
              "expects (" + std::to_string(a.fan_in) + ") input, got " +
                  to_string(in));
      return TensorSpec{a.units};
    case OpKind::kConv2d:
      require(a.units >= 1, node, "out_channels must be >= 1");
      return spatial_window(node, in, a.units);
    case OpKind::kMaxPool2d:
      require(a.pad * 2 <= a.kernel, node, "pad must be at most kernel/2");
      return spatial_window(node, in, in.rank() == 3 ? in.dims[0] : 0);
    case OpKind::kRelu:
    case OpKind::kBatchNormInference:
      return in;
    case OpKind::kResidualAdd:
      require(inputs.size() >= 2, node, "expects at least two inputs");
      for (const auto& s : inputs) {
        require(s == in, node,
                "operand shapes differ: " + to_string(in) + " vs " +
                    to_string(s));
      }
      return in;
    case OpKind::kGlobalAvgPool:
      require(in.rank() == 3, node, "expects (C,H,W) input, got " + to_string(in));
      return TensorSpec{in.dims[0]};
    case OpKind::kFlatten:
      return TensorSpec{in.element_count()};
    case OpKind::kConcat: {
      require(inputs.size() >= 2, node, "expects at least two inputs");
      TensorSpec out = in;
      out.dims[0] = 0;
      for (const auto& s : inputs) {
        require(s.rank() == in.rank() &&
                    std::equal(s.dims.begin() + 1, s.dims.end(),
                               in.dims.begin() + 1),
                node,
                "trailing dims differ: " + to_string(in) + " vs " +
                    to_string(s));
        out.dims[0] += s.dims[0];
      }
      return out;
    }
  }
  throw ShapeMismatch(node.id, "unknown kind");
}

std::map<std::string, TensorSpec> infer_shapes(const ModelGraph& graph) {
  std::map<std::string, TensorSpec> shapes;
  for (const auto& id : topo_order(graph)) {
    const OpNode& node = *graph.find(id);
    std::vector<TensorSpec> in_specs;
    if (node.inputs.empty()) {
      in_specs.push_back(graph.input_spec());
    } else {
      for (const auto& in : node.inputs) in_specs.push_back(shapes.at(in));
    }
    shapes.emplace(id, infer_node_shape(node, in_specs));
  }
  return shapes;
}

std::vector<TensorSpec> expected_weight_shapes(const OpNode& node,
                                               const TensorSpec& input,
                                               size_t ref_count) {
  const auto& a = node.attrs;
  std::vector<TensorSpec> out;
  switch (node.kind) {
    case OpKind::kDense:
      out.push_back(TensorSpec{a.units, a.fan_in});
      if (ref_count > 1) out.push_back(TensorSpec{a.units});
      break;
    case OpKind::kConv2d: {
      const int64_t c = input.rank() >= 1 ? input.dims[0] : 0;
      out.push_back(TensorSpec{a.units, c, a.kernel, a.kernel});
      if (ref_count > 1) out.push_back(TensorSpec{a.units});
      break;
    }
    case OpKind::kBatchNormInference: {
      const int64_t c = input.rank() >= 1 ? input.dims[0] : 0;
      out.assign(4, TensorSpec{c});
      break;
    }
    default:
      break;
  }
  return out;
}

double node_flops(const OpNode& node, const std::vector<TensorSpec>& inputs,
                  const TensorSpec& output) {
  const auto& a = node.attrs;
  const double out_n = static_cast<double>(output.element_count());
  switch (node.kind) {
    case OpKind::kDense:
      return 2.0 * static_cast<double>(a.fan_in) * static_cast<double>(a.units);
    case OpKind::kConv2d: {
      const double c = static_cast<double>(inputs.front().dims[0]);
      return 2.0 * c * static_cast<double>(a.kernel * a.kernel) * out_n;
    }
    case OpKind::kMaxPool2d:
      return static_cast<double>(a.kernel * a.kernel) * out_n;
    case OpKind::kBatchNormInference:
      return 4.0 * out_n;
    case OpKind::kResidualAdd:
      return static_cast<double>(inputs.size() - 1) * out_n;
    case OpKind::kGlobalAvgPool:
      return static_cast<double>(inputs.front().element_count());
    case OpKind::kRelu:
      return out_n;
    case OpKind::kFlatten:
    case OpKind::kConcat:
      return 0.0;
  }
  return 0.0;
}

}  // namespace fusedinf
