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

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fusedinf/graph_ir.hpp"
#include "fusedinf/manifest.hpp"

namespace fusedinf {

// Uniform in [lo, hi) from the top 24 bits of one raw draw, so values are
// identical across standard libraries.
float uniform_from_bits(std::mt19937_64& rng, float lo, float hi);

// Deterministic tensor of values in [-1, 1).
Tensor seeded_tensor(const TensorSpec& spec, uint64_t seed);

// Toy analogues of the evaluated architecture families. All take (3,16,16)
// and predict 10 classes; the seed only changes weight values.
const std::vector<std::string>& zoo_families();
ModelBundle make_family_model(const std::string& family, const std::string& model_id,
                              uint64_t seed);

// A random valid model of at most `max_nodes` (>= 12) nodes that uses all
// nine op kinds.
ModelBundle random_model(const std::string& model_id, uint64_t seed, int max_nodes = 30);

// Larger VGG-16-shaped fixture: 13 conv layers in five pooled stages and a
// three-layer classifier, on (3,32,32).
ModelBundle vgg16_like(const std::string& model_id, uint64_t seed);

}  // namespace fusedinf
