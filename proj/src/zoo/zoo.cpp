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
#include <cstdio>
#include <map>

#include "fusedinf/errors.hpp"
#include "fusedinf/zoo.hpp"

namespace fusedinf {

float uniform_from_bits(std::mt19937_64& rng, float lo, float hi) {
  const double u = static_cast<double>(rng() >> 40) / static_cast<double>(1ull << 24);
  return static_cast<float>(lo + (hi - lo) * u);
}

Tensor seeded_tensor(const TensorSpec& spec, uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor t = Tensor::zeros(spec);
  for (float& v : t.values) v = uniform_from_bits(rng, -1.0f, 1.0f);
  return t;
}

namespace {

class Builder {
 public:
  Builder(std::string model_id, TensorSpec input, uint64_t seed)
      : model_id_(std::move(model_id)), input_(std::move(input)), rng_(seed) {}

  const TensorSpec& spec(const std::string& id) const { return specs_.at(id); }

  std::string conv(const std::string& in, int64_t out_c, int64_t k, int64_t s = 1,
                   int64_t p = 0, bool bias = true) {
    OpNode n = make(OpKind::kConv2d, {in});
    n.attrs.units = out_c;
    n.attrs.kernel = k;
    n.attrs.stride = s;
    n.attrs.pad = p;
    const int64_t c = in_spec(n).dims[0];
    const float scale = 1.0f / std::sqrt(static_cast<float>(c * k * k));
    add_weight(n, TensorSpec{out_c, c, k, k}, -scale, scale);
    if (bias) add_weight(n, TensorSpec{out_c}, -0.1f, 0.1f);
    return finish(std::move(n));
  }

  std::string dense(const std::string& in, int64_t units, bool bias = true) {
    OpNode n = make(OpKind::kDense, {in});
    const int64_t fan_in = in_spec(n).element_count();
    n.attrs.fan_in = fan_in;
    n.attrs.units = units;
    const float scale = 1.0f / std::sqrt(static_cast<float>(fan_in));
    add_weight(n, TensorSpec{units, fan_in}, -scale, scale);
    if (bias) add_weight(n, TensorSpec{units}, -0.1f, 0.1f);
    return finish(std::move(n));
  }

  std::string bn(const std::string& in) {
    OpNode n = make(OpKind::kBatchNormInference, {in});
    const int64_t c = in_spec(n).dims[0];
    add_weight(n, TensorSpec{c}, 0.5f, 1.5f);   // gamma
    add_weight(n, TensorSpec{c}, -0.2f, 0.2f);  // beta
    add_weight(n, TensorSpec{c}, -0.2f, 0.2f);  // mean
    add_weight(n, TensorSpec{c}, 0.5f, 1.5f);   // var
    return finish(std::move(n));
  }

  std::string maxpool(const std::string& in, int64_t k, int64_t s, int64_t p = 0) {
    OpNode n = make(OpKind::kMaxPool2d, {in});
    n.attrs.kernel = k;
    n.attrs.stride = s;
    n.attrs.pad = p;
    return finish(std::move(n));
  }

  std::string op(OpKind kind, std::vector<std::string> inputs) {
    return finish(make(kind, std::move(inputs)));
  }

  size_t node_count() const { return nodes_.size(); }

  ModelBundle build(const std::string& exit) {
    ModelGraph g(model_id_, input_, specs_.at(exit), std::move(nodes_), entry_, exit);
    return ModelBundle::make(std::move(g), std::move(weights_));
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  OpNode make(OpKind kind, std::vector<std::string> inputs) {
    OpNode n;
    char id[16];
    std::snprintf(id, sizeof(id), "n%03zu", nodes_.size());
    n.id = id;
    n.kind = kind;
    for (auto& in : inputs) {
      if (!in.empty()) n.inputs.push_back(std::move(in));
    }
    return n;
  }

  TensorSpec in_spec(const OpNode& n) const {
    return n.inputs.empty() ? input_ : specs_.at(n.inputs.front());
  }

  void add_weight(OpNode& n, TensorSpec spec, float lo, float hi) {
    std::string name = n.id + ".w" + std::to_string(n.weight_refs.size());
    std::vector<float> values(static_cast<size_t>(spec.element_count()));
    for (float& v : values) v = uniform_from_bits(rng_, lo, hi);
    weights_.add(name, std::move(spec), std::move(values));
    n.weight_refs.push_back(std::move(name));
  }

  std::string finish(OpNode n) {
    std::vector<TensorSpec> in;
    if (n.inputs.empty()) {
      in.push_back(input_);
      entry_ = n.id;
    }
    for (const auto& i : n.inputs) in.push_back(specs_.at(i));
    specs_[n.id] = infer_node_shape(n, in);
    std::string id = n.id;
    nodes_.push_back(std::move(n));
    return id;
  }

  std::string model_id_;
  TensorSpec input_;
  std::mt19937_64 rng_;
  std::vector<OpNode> nodes_;
  WeightStore weights_;
  std::map<std::string, TensorSpec> specs_;
  std::string entry_;
};

// An empty input name makes the node the entry.
ModelBundle vgg(const std::string& id, uint64_t seed) {
  Builder b(id, {3, 16, 16}, seed);
  auto x = b.conv("", 8, 3, 1, 1);
  x = b.op(OpKind::kRelu, {b.bn(x)});
  x = b.op(OpKind::kRelu, {b.conv(x, 8, 3, 1, 1)});
  x = b.maxpool(x, 2, 2);
  x = b.op(OpKind::kRelu, {b.bn(b.conv(x, 16, 3, 1, 1))});
  x = b.maxpool(x, 2, 2);
  x = b.op(OpKind::kFlatten, {x});
  x = b.op(OpKind::kRelu, {b.dense(x, 32)});
  return b.build(b.dense(x, 10));
}

ModelBundle resnet(const std::string& id, uint64_t seed) {
  Builder b(id, {3, 16, 16}, seed);
  auto x = b.op(OpKind::kRelu, {b.bn(b.conv("", 8, 3, 1, 1))});
  for (int block = 0; block < 2; ++block) {
    auto y = b.op(OpKind::kRelu, {b.bn(b.conv(x, 8, 3, 1, 1, false))});
    y = b.bn(b.conv(y, 8, 3, 1, 1, false));
    x = b.op(OpKind::kRelu, {b.op(OpKind::kResidualAdd, {x, y})});
  }
  x = b.maxpool(x, 2, 2);
  x = b.op(OpKind::kGlobalAvgPool, {x});
  return b.build(b.dense(x, 10));
}

ModelBundle densenet(const std::string& id, uint64_t seed) {
  Builder b(id, {3, 16, 16}, seed);
  auto x = b.conv("", 8, 3, 1, 1);
  for (int layer = 0; layer < 2; ++layer) {
    auto y = b.conv(b.op(OpKind::kRelu, {b.bn(x)}), 4, 3, 1, 1);
    x = b.op(OpKind::kConcat, {x, y});
  }
  x = b.op(OpKind::kRelu, {b.bn(x)});
  x = b.op(OpKind::kGlobalAvgPool, {x});
  return b.build(b.dense(x, 10));
}

ModelBundle mobilenet(const std::string& id, uint64_t seed) {
  Builder b(id, {3, 16, 16}, seed);
  auto x = b.op(OpKind::kRelu, {b.bn(b.conv("", 8, 3, 2, 1))});
  auto y = b.op(OpKind::kRelu, {b.bn(b.conv(x, 16, 1))});
  y = b.op(OpKind::kRelu, {b.bn(b.conv(y, 16, 3, 1, 1))});
  y = b.bn(b.conv(y, 8, 1));
  x = b.op(OpKind::kResidualAdd, {x, y});
  x = b.op(OpKind::kGlobalAvgPool, {x});
  return b.build(b.dense(x, 10));
}

ModelBundle squeezenet(const std::string& id, uint64_t seed) {
  Builder b(id, {3, 16, 16}, seed);
  auto x = b.op(OpKind::kRelu, {b.conv("", 8, 3, 2, 1)});
  auto s = b.op(OpKind::kRelu, {b.conv(x, 4, 1)});
  auto e1 = b.op(OpKind::kRelu, {b.conv(s, 8, 1)});
  auto e3 = b.op(OpKind::kRelu, {b.conv(s, 8, 3, 1, 1)});
  x = b.op(OpKind::kConcat, {e1, e3});
  x = b.maxpool(x, 2, 2);
  x = b.op(OpKind::kRelu, {b.conv(x, 10, 1)});
  return b.build(b.op(OpKind::kGlobalAvgPool, {x}));
}

ModelBundle inception(const std::string& id, uint64_t seed) {
  Builder b(id, {3, 16, 16}, seed);
  auto x = b.op(OpKind::kRelu, {b.conv("", 8, 3, 1, 1)});
  auto b1 = b.conv(x, 4, 1);
  auto b2 = b.conv(b.conv(x, 4, 1), 4, 3, 1, 1);
  auto b3 = b.conv(b.maxpool(x, 3, 1, 1), 4, 1);
  x = b.op(OpKind::kRelu, {b.op(OpKind::kConcat, {b1, b2, b3})});
  x = b.op(OpKind::kGlobalAvgPool, {x});
  return b.build(b.dense(x, 10));
}

}  // namespace

const std::vector<std::string>& zoo_families() {
  static const std::vector<std::string> families = {"vgg",        "resnet",     "densenet",
                                                    "mobilenet",  "squeezenet", "inception"};
  return families;
}

ModelBundle make_family_model(const std::string& family, const std::string& model_id,
                              uint64_t seed) {
  if (family == "vgg") return vgg(model_id, seed);
  if (family == "resnet") return resnet(model_id, seed);
  if (family == "densenet") return densenet(model_id, seed);
  if (family == "mobilenet") return mobilenet(model_id, seed);
  if (family == "squeezenet") return squeezenet(model_id, seed);
  if (family == "inception") return inception(model_id, seed);
  if (family == "random") return random_model(model_id, seed);
  throw Error("unknown model family '" + family + "'");
}

ModelBundle vgg16_like(const std::string& model_id, uint64_t seed) {
  Builder b(model_id, {3, 32, 32}, seed);
  const int64_t widths[5] = {8, 16, 32, 32, 32};
  const int convs[5] = {2, 2, 3, 3, 3};
  std::string x;
  for (int stage = 0; stage < 5; ++stage) {
    for (int i = 0; i < convs[stage]; ++i) {
      x = b.op(OpKind::kRelu, {b.conv(x, widths[stage], 3, 1, 1)});
    }
    x = b.maxpool(x, 2, 2);
  }
  x = b.op(OpKind::kFlatten, {x});
  x = b.op(OpKind::kRelu, {b.dense(x, 64)});
  x = b.op(OpKind::kRelu, {b.dense(x, 64)});
  return b.build(b.dense(x, 10));
}

ModelBundle random_model(const std::string& model_id, uint64_t seed, int max_nodes) {
  if (max_nodes < 12) throw Error("random_model needs max_nodes >= 12");
  std::mt19937_64 pick(seed ^ 0x9e3779b97f4a7c15ull);
  auto below = [&](uint64_t n) { return static_cast<int64_t>(pick() % n); };

  const int64_t c0 = 1 + below(3);
  const int64_t hw = 5 + below(5);
  Builder b(model_id, {c0, hw, hw}, seed);

  std::vector<std::string> maps;  // rank-3 tensors produced so far
  auto cur = b.conv("", 2 + below(3), below(2) ? 3 : 1, 1, 0);
  maps.push_back(cur);

  // Mandatory kinds first in random order, then fillers. Tail adds 4 nodes.
  std::vector<OpKind> plan = {OpKind::kRelu, OpKind::kBatchNormInference,
                              OpKind::kResidualAdd, OpKind::kConcat, OpKind::kMaxPool2d};
  const int budget = static_cast<int>(max_nodes) - 4 - 1;
  const std::vector<OpKind> pool = {OpKind::kConv2d, OpKind::kRelu, OpKind::kBatchNormInference,
                                    OpKind::kResidualAdd, OpKind::kConcat, OpKind::kMaxPool2d};
  // Each planned op adds at most two nodes, so the plan always fits.
  const int extra = static_cast<int>(below(static_cast<uint64_t>((budget - 12) / 2) + 1));
  for (int i = 0; i < extra; ++i) plan.push_back(pool[below(pool.size())]);
  std::shuffle(plan.begin(), plan.end(), pick);

  auto partner = [&](auto&& match) -> std::string {
    std::vector<std::string> c;
    for (const auto& m : maps) {
      if (m != cur && match(b.spec(m))) c.push_back(m);
    }
    return c.empty() ? std::string() : c[below(c.size())];
  };

  for (OpKind kind : plan) {
    const TensorSpec s = b.spec(cur);
    switch (kind) {
      case OpKind::kConv2d:
        cur = b.conv(cur, 2 + below(4), s.dims[1] >= 3 && below(2) ? 3 : 1, 1, 0);
        break;
      case OpKind::kRelu:
      case OpKind::kBatchNormInference:
        cur = kind == OpKind::kRelu ? b.op(kind, {cur}) : b.bn(cur);
        break;
      case OpKind::kResidualAdd: {
        std::string other = partner([&](const TensorSpec& o) { return o == s; });
        if (other.empty()) other = b.op(OpKind::kRelu, {cur});
        cur = b.op(OpKind::kResidualAdd, {cur, other});
        break;
      }
      case OpKind::kConcat: {
        std::string other = partner([&](const TensorSpec& o) {
          return o.dims[1] == s.dims[1] && o.dims[2] == s.dims[2] && o.dims[0] + s.dims[0] <= 16;
        });
        if (other.empty()) other = b.conv(cur, 2, 1);
        cur = b.op(OpKind::kConcat, {cur, other});
        break;
      }
      case OpKind::kMaxPool2d: {
        const int64_t h = s.dims[1];
        if (h >= 4 && below(2)) {
          cur = b.maxpool(cur, 2, 2);
        } else if (h >= 3 && below(2)) {
          cur = b.maxpool(cur, 2, 1);
        } else {
          cur = b.maxpool(cur, 3, 1, 1);
        }
        break;
      }
      default:
        break;
    }
    maps.push_back(cur);
  }

  auto gap = b.op(OpKind::kGlobalAvgPool, {cur});
  auto flat = b.op(OpKind::kFlatten, {cur});
  auto joined = b.op(OpKind::kConcat, {gap, flat});
  return b.build(b.dense(joined, 1 + below(4), below(4) != 0));
}

}  // namespace fusedinf
