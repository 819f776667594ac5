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

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <set>

#include "fusedinf/errors.hpp"
#include "fusedinf/graph_ir.hpp"
#include "fusedinf/model_io.hpp"
#include "fusedinf/zoo.hpp"
#include "test_util.hpp"

using namespace fusedinf;
using namespace fusedinf::testing;

namespace {

// Output positions of one spatial axis, counted by walking every window start.
int64_t enumerate_positions(int64_t size, int64_t kernel, int64_t stride, int64_t pad) {
  int64_t count = 0;
  for (int64_t start = -pad; start + kernel <= size + pad; start += stride) ++count;
  return count;
}

}  // namespace

TEST(Validate, SingleDenseNodeIsValid) {
  auto m = dense_model("mlp", {1, 0, 0, 1}, {0, 0}, 2, 2);
  EXPECT_TRUE(validate_graph(*m.graph, *m.weights).ok());
}

TEST(Validate, TwoNodeCycle) {
  ModelGraph g("cyc", TensorSpec{4}, TensorSpec{4},
               {node("a", OpKind::kRelu, {"b"}), node("b", OpKind::kRelu, {"a"})}, "a", "b");
  const auto report = validate_graph(g, WeightStore{});
  EXPECT_TRUE(report.has("cycle detected")) << report.summary();
  EXPECT_THROW(topo_order(g), CycleDetected);
}

TEST(Validate, DenseWeightShapeMismatch) {
  ModelGraph g("bad", TensorSpec{4}, TensorSpec{1},
               {node("d", OpKind::kDense, {}, {"w"}, dense_attrs(4, 1))}, "d", "d");
  WeightStore ws;
  ws.add("w", TensorSpec{5}, std::vector<float>(5, 1.0f));
  // Oracle: the shape walk says the dense node needs (units, fan_in).
  const auto shapes = expected_weight_shapes(g.nodes()[0], g.input_spec(), 1);
  ASSERT_EQ(shapes.size(), 1u);
  EXPECT_EQ(shapes[0], (TensorSpec{1, 4}));
  EXPECT_NE(shapes[0], ws.find("w")->spec);
  EXPECT_TRUE(validate_graph(g, ws).has("weight shape mismatch"));
}

TEST(Validate, MissingWeightAndUnreachable) {
  ModelGraph g("m", TensorSpec{2}, TensorSpec{2},
               {node("d", OpKind::kDense, {}, {"w"}, dense_attrs(2, 2)), node("r", OpKind::kRelu, {"d"})},
               "d", "r");
  EXPECT_TRUE(validate_graph(g, WeightStore{}).has("missing weight"));
  ModelGraph stray("s", TensorSpec{2}, TensorSpec{2},
                   {node("a", OpKind::kRelu, {}), node("b", OpKind::kRelu, {"a"}), node("x", OpKind::kRelu, {})},
                   "a", "b");
  EXPECT_TRUE(validate_graph(stray, WeightStore{}).has("unreachable node"));
}

TEST(Validate, NegativeVarianceRejected) {
  OpAttrs a;
  ModelGraph g("bn", TensorSpec{1, 2, 2}, TensorSpec{1, 2, 2},
               {node("bn", OpKind::kBatchNormInference, {}, {"g", "b", "m", "v"}, a)}, "bn", "bn");
  WeightStore ws;
  ws.add("g", TensorSpec{1}, {1});
  ws.add("b", TensorSpec{1}, {0});
  ws.add("m", TensorSpec{1}, {0});
  ws.add("v", TensorSpec{1}, {-1});
  EXPECT_TRUE(validate_graph(g, ws).has("negative variance"));
}

TEST(Validate, ZooModelsAreValid) {
  for (const auto& f : zoo_families()) {
    auto m = make_family_model(f, f, 11);
    EXPECT_TRUE(validate_graph(*m.graph, *m.weights).ok()) << f;
  }
  auto v = vgg16_like("vgg16", 1);
  EXPECT_TRUE(validate_graph(*v.graph, *v.weights).ok());
}

TEST(Shapes, ReluPreservesShape) {
  EXPECT_EQ(infer_node_shape(node("r", OpKind::kRelu, {}), {TensorSpec{3, 8, 8}}),
            (TensorSpec{3, 8, 8}));
}

TEST(Shapes, ConvAndPoolMatchEnumeration) {
  const auto conv = infer_node_shape(node("c", OpKind::kConv2d, {}, {"w"}, window(3, 1, 0, 2)),
                                     {TensorSpec{1, 8, 8}});
  const int64_t p = enumerate_positions(8, 3, 1, 0);
  EXPECT_EQ(conv, (TensorSpec{2, p, p}));
  EXPECT_EQ(conv, (TensorSpec{2, 6, 6}));

  const auto pool = infer_node_shape(node("p", OpKind::kMaxPool2d, {}, {}, window(2, 2, 0)),
                                     {TensorSpec{2, 6, 6}});
  const int64_t q = enumerate_positions(6, 2, 2, 0);
  EXPECT_EQ(pool, (TensorSpec{2, q, q}));
  EXPECT_EQ(pool, (TensorSpec{2, 3, 3}));
}

TEST(Shapes, EnumerationAgreesOverParameterSweep) {
  for (int64_t size = 1; size <= 9; ++size) {
    for (int64_t k = 1; k <= 4; ++k) {
      for (int64_t s = 1; s <= 3; ++s) {
        for (int64_t pad = 0; pad < k; ++pad) {
          const int64_t expect = enumerate_positions(size, k, s, pad);
          const TensorSpec in{2, size, size};
          const OpNode c = node("c", OpKind::kConv2d, {}, {"w"}, window(k, s, pad, 3));
          if (expect <= 0) {
            EXPECT_THROW(infer_node_shape(c, {in}), ShapeMismatch);
            continue;
          }
          EXPECT_EQ(infer_node_shape(c, {in}), (TensorSpec{3, expect, expect}))
              << size << " " << k << " " << s << " " << pad;
        }
      }
    }
  }
}

TEST(Shapes, ConcatResidualAndMismatch) {
  const OpNode cat = node("c", OpKind::kConcat, {"a", "b"});
  EXPECT_EQ(infer_node_shape(cat, {TensorSpec{2, 4, 4}, TensorSpec{3, 4, 4}}),
            (TensorSpec{5, 4, 4}));
  EXPECT_THROW(infer_node_shape(cat, {TensorSpec{2, 4, 4}, TensorSpec{3, 5, 4}}), ShapeMismatch);
  const OpNode add = node("r", OpKind::kResidualAdd, {"a", "b"});
  EXPECT_THROW(infer_node_shape(add, {TensorSpec{2, 4, 4}, TensorSpec{2, 4, 3}}), ShapeMismatch);
  EXPECT_EQ(infer_node_shape(node("g", OpKind::kGlobalAvgPool, {}), {TensorSpec{7, 3, 3}}),
            (TensorSpec{7}));
  EXPECT_EQ(infer_node_shape(node("f", OpKind::kFlatten, {}), {TensorSpec{7, 3, 2}}),
            (TensorSpec{42}));
}

TEST(Topo, SingleNode) {
  auto m = dense_model("one", {1}, {0}, 1, 1);
  EXPECT_EQ(topo_order(*m.graph), std::vector<std::string>{"d"});
}

TEST(Topo, DiamondTieBreak) {
  ModelGraph g("dia", TensorSpec{4}, TensorSpec{4},
               {node("d", OpKind::kResidualAdd, {"c", "b"}), node("c", OpKind::kRelu, {"a"}),
                node("b", OpKind::kRelu, {"a"}), node("a", OpKind::kRelu, {})},
               "a", "d");
  EXPECT_EQ(topo_order(g), (std::vector<std::string>{"a", "b", "c", "d"}));
}

TEST(Topo, Random50NodeDagRespectsEveryEdge) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<OpNode> nodes;
    nodes.push_back(node("n00", OpKind::kRelu, {}));
    for (int i = 1; i < 50; ++i) {
      char id[8];
      std::snprintf(id, sizeof(id), "n%02d", i);
      std::vector<std::string> ins;
      const int fan = 1 + static_cast<int>(rng() % 3);
      std::set<int> picked;
      for (int k = 0; k < fan; ++k) picked.insert(static_cast<int>(rng() % i));
      for (int p : picked) {
        char pid[8];
        std::snprintf(pid, sizeof(pid), "n%02d", p);
        ins.push_back(pid);
      }
      nodes.push_back(node(id, ins.size() == 1 ? OpKind::kRelu : OpKind::kResidualAdd, ins));
    }
    std::shuffle(nodes.begin(), nodes.end(), rng);
    ModelGraph g("r", TensorSpec{3}, TensorSpec{3}, nodes, "n00", "n49");
    const auto order = topo_order(g);
    ASSERT_EQ(order.size(), 50u);
    std::map<std::string, size_t> pos;
    for (size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
    for (const auto& [from, to] : g.edges()) EXPECT_LT(pos.at(from), pos.at(to));
  }
}

TEST(ModelIo, JsonRoundTrip) {
  auto m = make_family_model("inception", "inc", 3);
  const auto j = model_to_json(*m.graph);
  EXPECT_EQ(model_from_json(j), *m.graph);
  EXPECT_EQ(model_from_json(nlohmann::json::parse(j.dump())), *m.graph);
}

TEST(ModelIo, MalformedJsonIsParseError) {
  EXPECT_THROW(model_from_json(nlohmann::json::parse(R"({"model_id": 3})")), ParseError);
  EXPECT_THROW(model_from_json(nlohmann::json::parse(
                   R"({"model_id":"m","input_spec":[2],"output_spec":[2],"entry":"a","exit":"a",
                       "nodes":[{"node_id":"a","kind":"softmax","inputs":[]}]})")),
               ParseError);
}

TEST(ModelIo, WeightsRoundTripAndCorruption) {
  auto m = make_family_model("resnet", "res", 9);
  const std::string bytes = encode_weights(*m.weights);
  EXPECT_EQ(decode_weights(bytes, "w"), *m.weights);

  std::string bad = bytes;
  bad[0] ^= 0x20;
  try {
    decode_weights(bad, "model.fiwt");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("model.fiwt"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos);
  }
  EXPECT_THROW(decode_weights(bytes.substr(0, bytes.size() - 3), "w"), IoError);
  EXPECT_THROW(decode_weights(bytes + "x", "w"), IoError);
}

TEST(ModelIo, WeightsByteLayout) {
  WeightStore ws;
  ws.add("ab", TensorSpec{2}, {1.0f, -2.0f});
  const std::string b = encode_weights(ws);
  // magic 4 + count 4 + name_len 2 + name 2 + rank 1 + dim 4 + values 8
  ASSERT_EQ(b.size(), 25u);
  EXPECT_EQ(b.substr(0, 4), "FIWT");
  EXPECT_EQ(static_cast<unsigned char>(b[4]), 1);
  EXPECT_EQ(b.substr(10, 2), "ab");
  EXPECT_EQ(static_cast<unsigned char>(b[12]), 1);
  EXPECT_EQ(static_cast<unsigned char>(b[13]), 2);
  float v = 0;
  std::memcpy(&v, b.data() + 21, 4);
  EXPECT_EQ(v, -2.0f);
}

TEST(ModelIo, RandomModelsUseAllKindsAndStayBounded) {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    auto m = random_model("r" + std::to_string(seed), seed, 30);
    ASSERT_TRUE(validate_graph(*m.graph, *m.weights).ok()) << seed;
    EXPECT_LE(m.graph->nodes().size(), 30u);
    std::set<OpKind> kinds;
    for (const auto& n : m.graph->nodes()) kinds.insert(n.kind);
    EXPECT_EQ(kinds.size(), kAllOpKinds.size()) << seed;
  }
}
