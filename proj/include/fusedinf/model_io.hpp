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

#include <filesystem>
#include <string>

#include "fusedinf/graph_ir.hpp"
#include "json.hpp"

namespace fusedinf {

// Model description file (JSON):
//   {model_id, input_spec, output_spec,
//    nodes: [{node_id, kind, attrs, weight_refs, inputs}], entry, exit}
nlohmann::json model_to_json(const ModelGraph& graph);
ModelGraph model_from_json(const nlohmann::json& doc);  // throws ParseError

nlohmann::json spec_to_json(const TensorSpec& spec);
TensorSpec spec_from_json(const nlohmann::json& doc);

void save_model(const ModelGraph& graph, const std::filesystem::path& path);
ModelGraph load_model(const std::filesystem::path& path);  // IoError/ParseError

// Weights file, little-endian:
//   "FIWT" u32 count, then per tensor: u16 name_len, name, u8 rank,
//   u32 dims[rank], f32 values[prod(dims)] row-major.
std::string encode_weights(const WeightStore& store);
WeightStore decode_weights(std::string_view bytes, const std::string& source);

void save_weights(const WeightStore& store, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);  // IoError

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace fusedinf
