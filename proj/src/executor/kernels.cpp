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

#include <cmath>
#include <limits>

#include "fusedinf/errors.hpp"
#include "fusedinf/executor.hpp"

namespace fusedinf {

namespace {

const WeightTensor& weight_at(const OpNode& node,
                              const std::vector<const WeightTensor*>& weights,
                              size_t i, const TensorSpec& expected) {
  if (i >= weights.size() || weights[i] == nullptr) {
    throw MissingWeight(i < node.weight_refs.size() ? node.weight_refs[i]
                                                    : node.id + "#" + std::to_string(i));
  }
  if (weights[i]->spec != expected) {
    throw ShapeMismatch(node.id, "weight '" + node.weight_refs[i] + "' is " +
                                     to_string(weights[i]->spec) +
                                     ", expected " + to_string(expected));
  }
  return *weights[i];
}

Tensor dense(const OpNode& node, const Tensor& x,
             const std::vector<const WeightTensor*>& weights,
             const TensorSpec& out_spec) {
  const auto expected = expected_weight_shapes(node, x.spec, weights.size());
  const auto& w = weight_at(node, weights, 0, expected[0]);
  const WeightTensor* b = weights.size() > 1 ? &weight_at(node, weights, 1, expected[1]) : nullptr;
  const int64_t units = node.attrs.units;
  const int64_t fan_in = node.attrs.fan_in;
  Tensor out = Tensor::zeros(out_spec);
  for (int64_t u = 0; u < units; ++u) {
    float acc = 0.0f;
    const float* row = w.values.data() + u * fan_in;
    for (int64_t i = 0; i < fan_in; ++i) acc = acc + row[i] * x.values[i];
    if (b) acc = acc + b->values[u];
    out.values[u] = acc;
  }
  return out;
}

Tensor conv2d(const OpNode& node, const Tensor& x,
              const std::vector<const WeightTensor*>& weights,
              const TensorSpec& out_spec) {
  const auto expected = expected_weight_shapes(node, x.spec, weights.size());
  const auto& w = weight_at(node, weights, 0, expected[0]);
  const WeightTensor* b = weights.size() > 1 ? &weight_at(node, weights, 1, expected[1]) : nullptr;
  const int64_t C = x.spec.dims[0], H = x.spec.dims[1], W = x.spec.dims[2];
  const int64_t K = node.attrs.kernel, S = node.attrs.stride, P = node.attrs.pad;
  const int64_t O = out_spec.dims[0], OH = out_spec.dims[1], OW = out_spec.dims[2];
  Tensor out = Tensor::zeros(out_spec);
  for (int64_t o = 0; o < O; ++o) {
    for (int64_t oh = 0; oh < OH; ++oh) {
      for (int64_t ow = 0; ow < OW; ++ow) {
        float acc = 0.0f;
        for (int64_t c = 0; c < C; ++c) {
          for (int64_t kh = 0; kh < K; ++kh) {
            const int64_t ih = oh * S - P + kh;
            if (ih < 0 || ih >= H) continue;
            for (int64_t kw = 0; kw < K; ++kw) {
              const int64_t iw = ow * S - P + kw;
              if (iw < 0 || iw >= W) continue;
              acc = acc + w.values[((o * C + c) * K + kh) * K + kw] *
                              x.values[(c * H + ih) * W + iw];
            }
          }
        }
        if (b) acc = acc + b->values[o];
        out.values[(o * OH + oh) * OW + ow] = acc;
      }
    }
  }
  return out;
}

Tensor maxpool(const OpNode& node, const Tensor& x, const TensorSpec& out_spec) {
  const int64_t H = x.spec.dims[1], W = x.spec.dims[2];
  const int64_t K = node.attrs.kernel, S = node.attrs.stride, P = node.attrs.pad;
  const int64_t C = out_spec.dims[0], OH = out_spec.dims[1], OW = out_spec.dims[2];
  Tensor out = Tensor::zeros(out_spec);
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t oh = 0; oh < OH; ++oh) {
      for (int64_t ow = 0; ow < OW; ++ow) {
        float best = -std::numeric_limits<float>::infinity();
        for (int64_t kh = 0; kh < K; ++kh) {
          const int64_t ih = oh * S - P + kh;
          if (ih < 0 || ih >= H) continue;
          for (int64_t kw = 0; kw < K; ++kw) {
            const int64_t iw = ow * S - P + kw;
            if (iw < 0 || iw >= W) continue;
            const float v = x.values[(c * H + ih) * W + iw];
            if (v > best) best = v;
          }
        }
        out.values[(c * OH + oh) * OW + ow] = best;
      }
    }
  }
  return out;
}

Tensor batchnorm(const OpNode& node, const Tensor& x,
                 const std::vector<const WeightTensor*>& weights) {
  if (weights.size() != 4) {
    throw ShapeMismatch(node.id, "batchnorm needs gamma, beta, mean, var");
  }
  const auto expected = expected_weight_shapes(node, x.spec, 4);
  const auto& gamma = weight_at(node, weights, 0, expected[0]);
  const auto& beta = weight_at(node, weights, 1, expected[1]);
  const auto& mean = weight_at(node, weights, 2, expected[2]);
  const auto& var = weight_at(node, weights, 3, expected[3]);
  const int64_t C = x.spec.dims[0];
  const int64_t inner = x.spec.element_count() / C;
  Tensor out = Tensor::zeros(x.spec);
  for (int64_t c = 0; c < C; ++c) {
    const float denom = std::sqrt(var.values[c] + node.attrs.epsilon);
    for (int64_t i = 0; i < inner; ++i) {
      const int64_t k = c * inner + i;
      out.values[k] = gamma.values[c] * (x.values[k] - mean.values[c]) / denom +
                      beta.values[c];
    }
  }
  return out;
}

Tensor global_avg_pool(const Tensor& x, const TensorSpec& out_spec) {
  const int64_t C = x.spec.dims[0];
  const int64_t inner = x.spec.dims[1] * x.spec.dims[2];
  Tensor out = Tensor::zeros(out_spec);
  for (int64_t c = 0; c < C; ++c) {
    float acc = 0.0f;
    for (int64_t i = 0; i < inner; ++i) acc = acc + x.values[c * inner + i];
    out.values[c] = acc / static_cast<float>(inner);
  }
  return out;
}

}  // namespace

Tensor apply_node(const OpNode& node, const std::vector<const Tensor*>& inputs,
                  const std::vector<const WeightTensor*>& weights) {
  std::vector<TensorSpec> specs;
  specs.reserve(inputs.size());
  for (const Tensor* t : inputs) specs.push_back(t->spec);
  const TensorSpec out_spec = infer_node_shape(node, specs);
  const Tensor& x = *inputs.front();

  switch (node.kind) {
    case OpKind::kDense:
      return dense(node, x, weights, out_spec);
    case OpKind::kConv2d:
      return conv2d(node, x, weights, out_spec);
    case OpKind::kRelu: {
      Tensor out = x;
      for (float& v : out.values) v = v > 0.0f ? v : 0.0f;
      return out;
    }
    case OpKind::kMaxPool2d:
      return maxpool(node, x, out_spec);
    case OpKind::kBatchNormInference:
      return batchnorm(node, x, weights);
    case OpKind::kResidualAdd: {
      Tensor out = x;
      for (size_t k = 1; k < inputs.size(); ++k) {
        const auto& rhs = inputs[k]->values;
        for (size_t i = 0; i < out.values.size(); ++i) out.values[i] = out.values[i] + rhs[i];
      }
      return out;
    }
    case OpKind::kGlobalAvgPool:
      return global_avg_pool(x, out_spec);
    case OpKind::kFlatten:
      return Tensor{out_spec, x.values};
    case OpKind::kConcat: {
      Tensor out{out_spec, {}};
      out.values.reserve(static_cast<size_t>(out_spec.element_count()));
      for (const Tensor* t : inputs) {
        out.values.insert(out.values.end(), t->values.begin(), t->values.end());
      }
      return out;
    }
  }
  throw ShapeMismatch(node.id, "unknown kind");
}

}  // namespace fusedinf
