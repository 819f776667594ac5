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
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "fusedinf/cost_model.hpp"
#include "fusedinf/graph_ir.hpp"
#include "fusedinf/manifest.hpp"
#include "json.hpp"

namespace fusedinf {

inline constexpr double kMiB = 1024.0 * 1024.0;

struct Profile {
  double mem_required_mib = 0;
  double iter_latency_ms = 0;
  // Weight share of mem_required; measured from the weights when absent.
  std::optional<double> weights_mib;
};

struct ProfileDetail {
  int64_t weight_bytes = 0;
  int64_t peak_activation_bytes = 0;
  double mem_required_mib = 0;
  double iter_latency_ms = 0;
};

// Peak bytes of simultaneously live activations when evaluating in
// topo_order. A tensor is live from its producer through its last consumer;
// the external input is live through the entry node and the exit output
// through the end.
int64_t peak_activation_bytes(const ModelGraph& graph);

ProfileDetail profile_model_detail(const ModelGraph& graph, const WeightStore& weights,
                                   const CostTable& ct);
Profile profile_model(const ModelGraph& graph, const WeightStore& weights,
                      const CostTable& ct);

nlohmann::json manifest_to_json(const ModelManifest& m);
ModelManifest manifest_from_json(const nlohmann::json& doc);

bool valid_model_id(std::string_view id);

// Registered models keyed by id. With a root directory each model is
// persisted as root/<id>/graph and root/<id>/weights, indexed by
// root/repo.index; without one the repository lives in memory only.
// Lookups may run concurrently; registration takes an exclusive lock.
class Repository {
 public:
  using Clock = std::function<int64_t()>;  // ms since epoch

  Repository();
  explicit Repository(std::filesystem::path root, Clock clock = {});

  const std::filesystem::path& root() const { return root_; }
  bool persistent() const { return !root_.empty(); }

  ModelManifest register_model(const ModelGraph& graph, const WeightStore& weights,
                               const std::optional<Profile>& profile = std::nullopt,
                               const CostTable& ct = CostTable::defaults());

  ModelManifest lookup(const std::string& model_id) const;
  std::vector<ModelManifest> get_many(const std::vector<std::string>& ids) const;
  bool contains(const std::string& model_id) const;
  std::vector<ModelManifest> list() const;  // ascending id
  size_t size() const;

  // Graph and weights of a registered model, read from disk on first use.
  ModelBundle load_bundle(const std::string& model_id) const;

  std::filesystem::path index_path() const { return root_ / "repo.index"; }

 private:
  void write_index_locked() const;

  std::filesystem::path root_;
  Clock clock_;
  mutable std::shared_mutex mu_;
  std::map<std::string, ModelManifest> index_;
  mutable std::map<std::string, ModelBundle> bundles_;
  mutable std::mutex bundle_mu_;
};

}  // namespace fusedinf
