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

#include "fusedinf/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "fusedinf/errors.hpp"

namespace fusedinf {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "weights codec assumes a little-endian host");

json spec_to_json(const TensorSpec& spec) { return spec.dims; }

TensorSpec spec_from_json(const json& doc) {
  if (!doc.is_array()) throw ParseError("tensor spec must be an array");
  TensorSpec spec;
  for (const auto& d : doc) {
    if (!d.is_number_integer()) throw ParseError("tensor dims must be integers");
    spec.dims.push_back(d.get<int64_t>());
  }
  return spec;
}

namespace {

json attrs_to_json(const OpNode& node) {
  const auto& a = node.attrs;
  json out = json::object();
  switch (node.kind) {
    case OpKind::kDense:
      out["fan_in"] = a.fan_in;
      out["units"] = a.units;
      break;
    case OpKind::kConv2d:
      out["out_channels"] = a.units;
      [[fallthrough]];
    case OpKind::kMaxPool2d:
      out["kernel"] = a.kernel;
      out["stride"] = a.stride;
      out["pad"] = a.pad;
      break;
    case OpKind::kBatchNormInference:
      out["epsilon"] = a.epsilon;
      break;
    default:
      break;
  }
  return out;
}

int64_t int_attr(const json& attrs, const char* key, int64_t fallback) {
  auto it = attrs.find(key);
  if (it == attrs.end()) return fallback;
  if (!it->is_number_integer()) {
    throw ParseError(std::string("attr '") + key + "' must be an integer");
  }
  return it->get<int64_t>();
}

OpAttrs attrs_from_json(OpKind kind, const json& attrs) {
  if (!attrs.is_object()) throw ParseError("attrs must be an object");
  OpAttrs a;
  switch (kind) {
    case OpKind::kDense:
      a.fan_in = int_attr(attrs, "fan_in", 0);
      a.units = int_attr(attrs, "units", 0);
      break;
    case OpKind::kConv2d:
      a.units = int_attr(attrs, "out_channels", 0);
      [[fallthrough]];
    case OpKind::kMaxPool2d:
      a.kernel = int_attr(attrs, "kernel", 0);
      a.stride = int_attr(attrs, "stride", 1);
      a.pad = int_attr(attrs, "pad", 0);
      break;
    case OpKind::kBatchNormInference:
      if (auto it = attrs.find("epsilon"); it != attrs.end()) {
        if (!it->is_number()) throw ParseError("attr 'epsilon' must be a number");
        a.epsilon = it->get<float>();
      }
      break;
    default:
      break;
  }
  return a;
}

std::vector<std::string> string_list(const json& doc, const char* what) {
  if (!doc.is_array()) throw ParseError(std::string(what) + " must be an array");
  std::vector<std::string> out;
  for (const auto& s : doc) {
    if (!s.is_string()) throw ParseError(std::string(what) + " entries must be strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

const json& field(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw ParseError(std::string("missing field '") + key + "'");
  return *it;
}

std::string string_field(const json& doc, const char* key) {
  const json& v = field(doc, key);
  if (!v.is_string()) throw ParseError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

json model_to_json(const ModelGraph& graph) {
  json nodes = json::array();
  for (const auto& node : graph.nodes()) {
    nodes.push_back({{"node_id", node.id},
                     {"kind", std::string(to_string(node.kind))},
                     {"attrs", attrs_to_json(node)},
                     {"weight_refs", node.weight_refs},
                     {"inputs", node.inputs}});
  }
  return {{"model_id", graph.model_id()},
          {"input_spec", spec_to_json(graph.input_spec())},
          {"output_spec", spec_to_json(graph.output_spec())},
          {"nodes", std::move(nodes)},
          {"entry", graph.entry()},
          {"exit", graph.exit()}};
}

ModelGraph model_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("model file must be a JSON object");
  std::vector<OpNode> nodes;
  const json& jnodes = field(doc, "nodes");
  if (!jnodes.is_array()) throw ParseError("nodes must be an array");
  for (const auto& jn : jnodes) {
    OpNode node;
    node.id = string_field(jn, "node_id");
    const std::string kind = string_field(jn, "kind");
    auto parsed = parse_op_kind(kind);
    if (!parsed) throw ParseError("node '" + node.id + "': unknown kind '" + kind + "'");
    node.kind = *parsed;
    node.attrs = attrs_from_json(node.kind, jn.value("attrs", json::object()));
    node.weight_refs = string_list(jn.value("weight_refs", json::array()), "weight_refs");
    node.inputs = string_list(jn.value("inputs", json::array()), "inputs");
    nodes.push_back(std::move(node));
  }
  return ModelGraph(string_field(doc, "model_id"),
                    spec_from_json(field(doc, "input_spec")),
                    spec_from_json(field(doc, "output_spec")), std::move(nodes),
                    string_field(doc, "entry"), string_field(doc, "exit"));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string(), "write failed");
}

void save_model(const ModelGraph& graph, const std::filesystem::path& path) {
  write_file(path, model_to_json(graph).dump(2) + "\n");
}

ModelGraph load_model(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  try {
    return model_from_json(doc);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

namespace {

constexpr char kMagic[4] = {'F', 'I', 'W', 'T'};

template <typename T>
void put(std::string& out, T value) {
  char raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.append(raw, sizeof(T));
}

class Reader {
 public:
  Reader(std::string_view bytes, const std::string& source)
      : bytes_(bytes), source_(source) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(size_t n) {
    need(n);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError(source_, "truncated weights file");
  }

  std::string_view bytes_;
  const std::string& source_;
  size_t pos_ = 0;
};

}  // namespace

std::string encode_weights(const WeightStore& store) {
  std::string out(kMagic, sizeof(kMagic));
  put<uint32_t>(out, static_cast<uint32_t>(store.size()));
  for (const auto& [name, tensor] : store.tensors()) {
    if (name.size() > std::numeric_limits<uint16_t>::max()) {
      throw Error("weight name too long: " + name.substr(0, 32) + "...");
    }
    put<uint16_t>(out, static_cast<uint16_t>(name.size()));
    out += name;
    put<uint8_t>(out, static_cast<uint8_t>(tensor.spec.rank()));
    for (int64_t d : tensor.spec.dims) put<uint32_t>(out, static_cast<uint32_t>(d));
    out.append(reinterpret_cast<const char*>(tensor.values.data()),
               tensor.values.size() * sizeof(float));
  }
  return out;
}

WeightStore decode_weights(std::string_view bytes, const std::string& source) {
  Reader in(bytes, source);
  auto magic = in.take(4);
  if (magic != std::string_view(kMagic, 4)) throw IoError(source, "bad magic, not a FIWT weights file");
  const uint32_t count = in.get<uint32_t>();
  WeightStore store;
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = in.get<uint16_t>();
    std::string name(in.take(name_len));
    const uint8_t rank = in.get<uint8_t>();
    TensorSpec spec;
    for (uint8_t r = 0; r < rank; ++r) spec.dims.push_back(in.get<uint32_t>());
    if (!spec.valid()) throw IoError(source, "tensor '" + name + "' has invalid dims");
    const auto raw = in.take(static_cast<size_t>(spec.element_count()) * sizeof(float));
    std::vector<float> values(static_cast<size_t>(spec.element_count()));
    std::memcpy(values.data(), raw.data(), raw.size());
    store.add(std::move(name), std::move(spec), std::move(values));
  }
  if (!in.done()) throw IoError(source, "trailing bytes after last tensor");
  return store;
}

void save_weights(const WeightStore& store, const std::filesystem::path& path) {
  write_file(path, encode_weights(store));
}

WeightStore load_weights(const std::filesystem::path& path) {
  return decode_weights(read_file(path), path.string());
}

}  // namespace fusedinf
