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
#include <chrono>
#include <mutex>

#include "fusedinf/errors.hpp"
#include "fusedinf/model_io.hpp"
#include "fusedinf/model_repo.hpp"

namespace fusedinf {

using nlohmann::json;

nlohmann::json manifest_to_json(const ModelManifest& m) {
  return {{"model_id", m.model_id},
          {"graph_path", m.graph_path},
          {"weights_path", m.weights_path},
          {"mem_required_mib", m.mem_required_mib},
          {"weights_mib", m.weights_mib},
          {"activations_mib", m.activations_mib},
          {"iter_latency_ms", m.iter_latency_ms},
          {"registered_at_ms", m.registered_at_ms},
          {"input_spec", spec_to_json(m.input_spec)},
          {"output_spec", spec_to_json(m.output_spec)}};
}

ModelManifest manifest_from_json(const nlohmann::json& doc) {
  try {
    ModelManifest m;
    m.model_id = doc.at("model_id").get<std::string>();
    m.graph_path = doc.at("graph_path").get<std::string>();
    m.weights_path = doc.at("weights_path").get<std::string>();
    m.mem_required_mib = doc.at("mem_required_mib").get<double>();
    m.weights_mib = doc.at("weights_mib").get<double>();
    m.activations_mib = doc.at("activations_mib").get<double>();
    m.iter_latency_ms = doc.at("iter_latency_ms").get<double>();
    m.registered_at_ms = doc.at("registered_at_ms").get<int64_t>();
    m.input_spec = spec_from_json(doc.at("input_spec"));
    m.output_spec = spec_from_json(doc.at("output_spec"));
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad manifest: ") + e.what());
  }
}

bool valid_model_id(std::string_view id) {
  if (id.empty() || id == "." || id == "..") return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

namespace {

int64_t system_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

Repository::Repository() : clock_(system_ms) {}

Repository::Repository(std::filesystem::path root, Clock clock)
    : root_(std::move(root)), clock_(clock ? std::move(clock) : Clock(system_ms)) {
  if (root_.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) throw IoError(root_.string(), "cannot create repository: " + ec.message());
  if (!std::filesystem::exists(index_path())) return;
  json doc;
  try {
    doc = json::parse(read_file(index_path()));
  } catch (const json::parse_error& e) {
    throw ParseError(index_path().string() + ": " + e.what());
  }
  if (!doc.contains("models") || !doc["models"].is_array()) {
    throw ParseError(index_path().string() + ": missing models array");
  }
  for (const auto& jm : doc["models"]) {
    ModelManifest m = manifest_from_json(jm);
    const std::string id = m.model_id;
    if (!index_.emplace(id, std::move(m)).second) throw DuplicateModelId(id);
  }
}

void Repository::write_index_locked() const {
  json models = json::array();
  for (const auto& [id, m] : index_) models.push_back(manifest_to_json(m));
  const json doc = {{"format", "fusedinf-repo"}, {"version", 1}, {"models", std::move(models)}};
  const auto tmp = root_ / "repo.index.tmp";
  write_file(tmp, doc.dump(2) + "\n");
  std::error_code ec;
  std::filesystem::rename(tmp, index_path(), ec);
  if (ec) throw IoError(index_path().string(), "cannot replace index: " + ec.message());
}

ModelManifest Repository::register_model(const ModelGraph& graph, const WeightStore& weights,
                                         const std::optional<Profile>& profile,
                                         const CostTable& ct) {
  const std::string& id = graph.model_id();
  if (!valid_model_id(id)) {
    throw ValidationFailed(id, "model id must be non-empty [A-Za-z0-9_.-]");
  }
  {
    std::shared_lock lock(mu_);
    if (index_.count(id)) throw DuplicateModelId(id);
  }
  const ValidationReport report = validate_graph(graph, weights);
  if (!report.ok()) throw ValidationFailed(id, report.summary());

  const Profile measured = profile_model(graph, weights, ct);
  ModelManifest m;
  m.model_id = id;
  m.graph_path = id + "/graph";
  m.weights_path = id + "/weights";
  m.mem_required_mib = profile ? profile->mem_required_mib : measured.mem_required_mib;
  m.iter_latency_ms = profile ? profile->iter_latency_ms : measured.iter_latency_ms;
  m.weights_mib = profile && profile->weights_mib ? *profile->weights_mib : *measured.weights_mib;
  m.activations_mib = std::max(0.0, m.mem_required_mib - ct.per_model_overhead_mib - m.weights_mib);
  m.input_spec = graph.input_spec();
  m.output_spec = graph.output_spec();
  if (!(m.mem_required_mib > 0) || !(m.iter_latency_ms > 0)) {
    throw ValidationFailed(id, "mem_required and iter_latency must be > 0");
  }

  std::unique_lock lock(mu_);
  if (index_.count(id)) throw DuplicateModelId(id);
  m.registered_at_ms = clock_();
  if (persistent()) {
    save_model(graph, root_ / m.graph_path);
    save_weights(weights, root_ / m.weights_path);
  }
  index_.emplace(id, m);
  if (persistent()) {
    try {
      write_index_locked();
    } catch (...) {
      index_.erase(id);
      throw;
    }
  }
  {
    std::lock_guard bl(bundle_mu_);
    bundles_[id] = ModelBundle::make(graph, weights);
  }
  return m;
}

ModelManifest Repository::lookup(const std::string& model_id) const {
  std::shared_lock lock(mu_);
  auto it = index_.find(model_id);
  if (it == index_.end()) throw NotFound(model_id);
  return it->second;
}

std::vector<ModelManifest> Repository::get_many(const std::vector<std::string>& ids) const {
  std::shared_lock lock(mu_);
  std::vector<ModelManifest> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = index_.find(id);
    if (it == index_.end()) throw NotFound(id);
    out.push_back(it->second);
  }
  return out;
}

bool Repository::contains(const std::string& model_id) const {
  std::shared_lock lock(mu_);
  return index_.count(model_id) > 0;
}

std::vector<ModelManifest> Repository::list() const {
  std::shared_lock lock(mu_);
  std::vector<ModelManifest> out;
  for (const auto& [id, m] : index_) out.push_back(m);
  return out;
}

size_t Repository::size() const {
  std::shared_lock lock(mu_);
  return index_.size();
}

ModelBundle Repository::load_bundle(const std::string& model_id) const {
  const ModelManifest m = lookup(model_id);
  std::lock_guard bl(bundle_mu_);
  if (auto it = bundles_.find(model_id); it != bundles_.end()) return it->second;
  if (!persistent()) throw NotFound(model_id);
  ModelBundle b = ModelBundle::make(load_model(root_ / m.graph_path),
                                    load_weights(root_ / m.weights_path));
  bundles_.emplace(model_id, b);
  return b;
}

}  // namespace fusedinf
