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

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fusedinf/graph_ir.hpp"
#include "fusedinf/manifest.hpp"

namespace fusedinf::testing {

inline OpNode node(std::string id, OpKind kind, std::vector<std::string> inputs,
                   std::vector<std::string> weights = {}, OpAttrs attrs = {}) {
  OpNode n;
  n.id = std::move(id);
  n.kind = kind;
  n.inputs = std::move(inputs);
  n.weight_refs = std::move(weights);
  n.attrs = attrs;
  return n;
}

inline OpAttrs dense_attrs(int64_t fan_in, int64_t units) {
  OpAttrs a;
  a.fan_in = fan_in;
  a.units = units;
  return a;
}

inline OpAttrs window(int64_t kernel, int64_t stride, int64_t pad, int64_t units = 0) {
  OpAttrs a;
  a.kernel = kernel;
  a.stride = stride;
  a.pad = pad;
  a.units = units;
  return a;
}

// Single dense layer model: x(fan_in) -> units, weight "w" and bias "b".
inline ModelBundle dense_model(const std::string& id, std::vector<float> w, std::vector<float> b,
                               int64_t fan_in, int64_t units) {
  ModelGraph g(id, TensorSpec{fan_in}, TensorSpec{units},
               {node("d", OpKind::kDense, {}, {"w", "b"}, dense_attrs(fan_in, units))}, "d", "d");
  WeightStore ws;
  ws.add("w", TensorSpec{units, fan_in}, std::move(w));
  ws.add("b", TensorSpec{units}, std::move(b));
  return ModelBundle::make(std::move(g), std::move(ws));
}

inline std::vector<float> random_values(size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Fresh per-test scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::current_path() / "scratch" / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline ModelManifest manifest(const std::string& id, double mem, double weights_mib = 0,
                              double latency_ms = 1) {
  ModelManifest m;
  m.model_id = id;
  m.mem_required_mib = mem;
  m.weights_mib = weights_mib;
  m.activations_mib = std::max(0.0, mem - 34 - weights_mib);
  m.iter_latency_ms = latency_ms;
  return m;
}

}  // namespace fusedinf::testing
