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
#include <memory>
#include <string>

#include "fusedinf/graph_ir.hpp"

namespace fusedinf {

// Repository record for one model. Memory figures are MiB, latency is ms per
// inference iteration. mem_required = weights + activations + per-model
// framework overhead.
struct ModelManifest {
  std::string model_id;
  std::string graph_path;
  std::string weights_path;
  double mem_required_mib = 0;
  double weights_mib = 0;
  double activations_mib = 0;
  double iter_latency_ms = 0;
  int64_t registered_at_ms = 0;
  TensorSpec input_spec;
  TensorSpec output_spec;

  friend bool operator==(const ModelManifest&, const ModelManifest&) = default;
};

// A model's architecture and weights, shared read-only.
struct ModelBundle {
  std::shared_ptr<const ModelGraph> graph;
  std::shared_ptr<const WeightStore> weights;

  static ModelBundle make(ModelGraph graph, WeightStore weights) {
    return {std::make_shared<const ModelGraph>(std::move(graph)),
            std::make_shared<const WeightStore>(std::move(weights))};
  }
  const std::string& model_id() const { return graph->model_id(); }
};

}  // namespace fusedinf
