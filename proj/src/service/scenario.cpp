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

#include <charconv>
#include <set>
#include <sstream>

#include "fusedinf/errors.hpp"
#include "fusedinf/model_io.hpp"
#include "fusedinf/service.hpp"
#include "fusedinf/zoo.hpp"

namespace fusedinf {

namespace {

class Fields {
 public:
  Fields(int line, const std::vector<std::string>& tokens, size_t first) : line_(line) {
    for (size_t i = first; i < tokens.size(); ++i) {
      const auto eq = tokens[i].find('=');
      if (eq == std::string::npos || eq == 0) {
        throw ScenarioParse(line, "expected key=value, got '" + tokens[i] + "'");
      }
      const std::string key = tokens[i].substr(0, eq);
      if (!kv_.emplace(key, tokens[i].substr(eq + 1)).second) {
        throw ScenarioParse(line, "repeated key '" + key + "'");
      }
    }
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string str(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    used_.insert(key);
    auto it = kv_.find(key);
    if (it != kv_.end()) return it->second;
    if (fallback) return *fallback;
    throw ScenarioParse(line_, "missing '" + key + "'");
  }

  double num(const std::string& key, std::optional<double> fallback = std::nullopt) {
    if (!has(key) && fallback) {
      used_.insert(key);
      return *fallback;
    }
    const std::string v = str(key);
    double out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
      throw ScenarioParse(line_, "'" + key + "' is not a number: " + v);
    }
    return out;
  }

  long integer(const std::string& key, std::optional<long> fallback = std::nullopt) {
    if (!has(key) && fallback) {
      used_.insert(key);
      return *fallback;
    }
    const std::string v = str(key);
    long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
      throw ScenarioParse(line_, "'" + key + "' is not an integer: " + v);
    }
    return out;
  }

  UptimeClass uptime(const std::string& key) {
    const std::string v = str(key, std::string("long"));
    auto c = parse_uptime_class(v);
    if (!c) throw ScenarioParse(line_, "class must be short or long, got '" + v + "'");
    return *c;
  }

  void finish() const {
    for (const auto& [k, v] : kv_) {
      if (!used_.count(k)) throw ScenarioParse(line_, "unknown key '" + k + "'");
    }
  }

 private:
  int line_;
  std::map<std::string, std::string> kv_;
  std::set<std::string> used_;
};

std::vector<std::string> tokenize(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

std::string resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.string();
}

}  // namespace

Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir) {
  Scenario sc;
  std::set<std::string> model_ids;
  std::set<std::string> request_ids;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  int auto_id = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    const auto tok = tokenize(raw);
    if (tok.empty()) continue;
    const std::string& verb = tok[0];

    if (verb == "scenario") {
      if (tok.size() != 2) throw ScenarioParse(line, "usage: scenario <name>");
      sc.name = tok[1];
    } else if (verb == "budget" || verb == "quantum") {
      if (tok.size() != 2) throw ScenarioParse(line, "usage: " + verb + " <value>");
      Fields f(line, {"_", "v=" + tok[1]}, 1);
      if (verb == "budget") {
        sc.budget_mib = f.num("v");
        if (!(sc.budget_mib > 0)) throw ScenarioParse(line, "budget must be > 0");
      } else {
        sc.quantum = f.integer("v");
        if (sc.quantum < 1) throw ScenarioParse(line, "quantum must be >= 1");
      }
    } else if (verb == "model") {
      if (tok.size() < 2) throw ScenarioParse(line, "usage: model <id> key=value...");
      ScenarioModel m;
      m.model_id = tok[1];
      m.line = line;
      if (!model_ids.insert(m.model_id).second) {
        throw ScenarioParse(line, "model '" + m.model_id + "' declared twice");
      }
      Fields f(line, tok, 2);
      if (f.has("graph")) {
        m.graph_path = resolve(base_dir, f.str("graph"));
        m.weights_path = resolve(base_dir, f.str("weights"));
      } else {
        m.family = f.str("family");
        m.seed = static_cast<uint64_t>(f.integer("seed", 0));
      }
      if (f.has("mem") || f.has("latency_ms")) {
        Profile p;
        p.mem_required_mib = f.num("mem");
        p.iter_latency_ms = f.num("latency_ms");
        if (f.has("weights_mib")) p.weights_mib = f.num("weights_mib");
        m.profile = p;
      }
      f.finish();
      sc.models.push_back(std::move(m));
    } else if (verb == "request") {
      Fields f(line, tok, 1);
      InferenceRequest r;
      r.arrival_time_s = f.num("at", 0.0);
      r.model_id = f.str("model");
      r.iterations_requested = f.integer("iterations");
      r.uptime_class = f.uptime("class");
      r.input_ref = f.str("input", std::string("zeros"));
      if (r.input_ref.rfind("file:", 0) == 0) {
        r.input_ref = "file:" + resolve(base_dir, r.input_ref.substr(5));
      }
      r.request_id = f.str("id", "q" + std::to_string(++auto_id));
      f.finish();
      if (!request_ids.insert(r.request_id).second) {
        throw ScenarioParse(line, "request id '" + r.request_id + "' repeated");
      }
      sc.requests.push_back(std::move(r));
    } else if (verb == "swap") {
      Fields f(line, tok, 1);
      SwapRequest s;
      s.at_iteration = f.integer("at_iteration");
      s.out_model = f.str("out");
      s.in_model = f.str("in");
      s.iterations = f.integer("iterations", 0);
      s.input_ref = f.str("input", std::string("zeros"));
      s.uptime_class = f.uptime("class");
      f.finish();
      if (s.at_iteration < 0 || s.iterations < 0) {
        throw ScenarioParse(line, "swap counts must be >= 0");
      }
      sc.swaps.push_back(std::move(s));
    } else {
      throw ScenarioParse(line, "unknown directive '" + verb + "'");
    }
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  Scenario sc = parse_scenario(read_file(path), path.parent_path());
  if (sc.name.empty()) sc.name = path.filename().string();
  return sc;
}

std::unique_ptr<Repository> build_repository(const Scenario& sc, const CostTable& ct) {
  auto repo = std::make_unique<Repository>(std::filesystem::path{}, [] { return int64_t{0}; });
  for (const auto& m : sc.models) {
    ModelGraph graph;
    WeightStore weights;
    if (!m.graph_path.empty()) {
      graph = load_model(m.graph_path);
      weights = load_weights(m.weights_path);
      if (graph.model_id() != m.model_id) {
        throw ScenarioParse(m.line, "graph file declares model '" + graph.model_id() + "'");
      }
    } else {
      try {
        ModelBundle b = make_family_model(m.family, m.model_id, m.seed);
        graph = *b.graph;
        weights = *b.weights;
      } catch (const Error& e) {
        throw ScenarioParse(m.line, e.what());
      }
    }
    repo->register_model(graph, weights, m.profile, ct);
  }
  return repo;
}

}  // namespace fusedinf
