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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>

#include "CLI11.hpp"
#include "fusedinf/errors.hpp"
#include "fusedinf/executor.hpp"
#include "fusedinf/fuse_compiler.hpp"
#include "fusedinf/model_io.hpp"
#include "fusedinf/model_repo.hpp"
#include "fusedinf/scheduler.hpp"
#include "fusedinf/service.hpp"
#include "fusedinf/zoo.hpp"

using namespace fusedinf;

namespace {

enum Exit { kOk = 0, kGeneric = 1, kValidation = 2, kDuplicate = 3, kIo = 4, kNotFound = 5 };

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DuplicateModelId*>(&e)) return kDuplicate;
  if (dynamic_cast<const IoError*>(&e)) return kIo;
  if (dynamic_cast<const ValidationFailed*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const ShapeMismatch*>(&e) || dynamic_cast<const CycleDetected*>(&e) ||
      dynamic_cast<const MissingWeight*>(&e)) {
    return kValidation;
  }
  if (dynamic_cast<const NotFound*>(&e)) return kNotFound;
  return kGeneric;
}

struct Globals {
  std::string repo = "fusedinf-repo";
  std::string cost_table;
  double budget = 8192;
  long quantum = 100;
  std::string mode = "fused";

  CostTable costs() const {
    return cost_table.empty() ? CostTable::defaults() : CostTable::load(cost_table);
  }
  ExecMode exec_mode() const {
    auto m = parse_exec_mode(mode);
    if (!m) throw Error("--mode must be fused or unfused here");
    return *m;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string summary_line(const ModelManifest& m) {
  return "registered " + m.model_id + " mem_required_mib=" + fmt("%.2f", m.mem_required_mib) +
         " iter_latency_ms=" + fmt("%.6f", m.iter_latency_ms) +
         " weights_mib=" + fmt("%.4f", m.weights_mib) + " input=" + to_string(m.input_spec) +
         " output=" + to_string(m.output_spec);
}

void print_dag(const DagDocument& d) {
  size_t edges = 0;
  for (const auto& n : d.nodes) edges += n.inputs.size();
  std::cout << "kind=dag id=" << d.dag_id << " subgraphs=" << d.subgraphs.size()
            << " nodes=" << d.nodes.size() << " edges=" << edges
            << " cross_edges=" << cross_edge_count(d) << " generation=" << d.compile_generation
            << "\n";
  std::cout << "preamble";
  for (const auto& c : d.preamble.calls) std::cout << " " << c.function_name << "=" << c.multiplicity;
  std::cout << "\n";
  for (const auto& s : d.subgraphs) {
    std::cout << "subgraph " << s.model_id << " nodes=" << s.nodes.size() << " entry=" << s.entry
              << " exit=" << s.exit << "\n";
  }
}

void print_model(const ModelGraph& g) {
  std::map<std::string, int> kinds;
  for (const auto& n : g.nodes()) ++kinds[std::string(to_string(n.kind))];
  std::cout << "kind=model id=" << g.model_id() << " subgraphs=1 nodes=" << g.nodes().size()
            << " edges=" << g.edge_count() << " cross_edges=0 input=" << to_string(g.input_spec())
            << " output=" << to_string(g.output_spec()) << "\n";
  std::cout << "ops";
  for (const auto& [k, n] : kinds) std::cout << " " << k << "=" << n;
  std::cout << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FusedInf: multi-model DAG fusion, simulation and serving"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--repo", g.repo, "Repository directory");
  app.add_option("--cost-table", g.cost_table, "Cost table file (default: built-in calibration)");
  app.add_option("--budget", g.budget, "Device memory budget in MiB");
  app.add_option("--quantum", g.quantum, "Iterations per round-robin turn");
  app.add_option("--mode", g.mode, "fused | unfused | both (replay only)");

  // register
  auto* reg = app.add_subcommand("register", "Validate, profile and store a model");
  std::string reg_graph, reg_weights;
  std::optional<double> reg_mem, reg_lat;
  reg->add_option("graph", reg_graph, "Model description file")->required();
  reg->add_option("weights", reg_weights, "Weights file")->required();
  reg->add_option("--mem", reg_mem, "Explicit mem_required (MiB)");
  reg->add_option("--latency", reg_lat, "Explicit iteration latency (ms)");

  // profile
  auto* prof = app.add_subcommand("profile", "Analytic memory and latency profile");
  std::string prof_graph, prof_weights;
  prof->add_option("graph", prof_graph)->required();
  prof->add_option("weights", prof_weights)->required();

  // replay
  auto* rep = app.add_subcommand("replay", "Replay a scenario and emit CSV rows");
  std::string rep_path, rep_out;
  rep->add_option("scenario", rep_path)->required();
  rep->add_option("--out", rep_out, "CSV path (default stdout)");

  // serve
  auto* srv = app.add_subcommand("serve", "Line-protocol request loop");
  bool srv_stdin = false;
  std::string srv_socket, srv_scenario, srv_out_dir;
  double srv_scale = 0;
  srv->add_flag("--stdin", srv_stdin, "Serve requests from stdin");
  srv->add_option("--socket", srv_socket, "Unix socket path");
  srv->add_option("--scenario", srv_scenario, "Use a scenario's models instead of --repo");
  srv->add_option("--time-scale", srv_scale, "Wall seconds per simulated second");
  srv->add_option("--out-dir", srv_out_dir, "Write outputs as weights files here");

  // inspect
  auto* ins = app.add_subcommand("inspect", "Structural dump of a model or DAG file");
  std::string ins_path;
  ins->add_option("path", ins_path)->required();

  // fuse
  auto* fus = app.add_subcommand("fuse", "Fuse models into one DAG file");
  std::vector<std::string> fus_files;
  std::string fus_out;
  fus->add_option("files", fus_files, "graph weights [graph weights ...]")->required();
  fus->add_option("--out", fus_out, "DAG path (default stdout)");

  // run-model
  auto* runm = app.add_subcommand("run-model", "Execute one model on one input");
  std::string run_graph, run_weights, run_input = "zeros";
  runm->add_option("graph", run_graph)->required();
  runm->add_option("weights", run_weights)->required();
  runm->add_option("--input", run_input, "zeros | seed:<n> | file:<path>");

  // zoo
  auto* zoo = app.add_subcommand("zoo", "Write a toy model of a family");
  std::string zoo_family, zoo_id, zoo_dir = ".";
  uint64_t zoo_seed = 1;
  zoo->add_option("family", zoo_family, "vgg|resnet|densenet|mobilenet|squeezenet|inception|random")
      ->required();
  zoo->add_option("model_id", zoo_id)->required();
  zoo->add_option("--seed", zoo_seed);
  zoo->add_option("--out-dir", zoo_dir);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*reg) {
      Repository repo(g.repo);
      const ModelGraph graph = load_model(reg_graph);
      const WeightStore weights = load_weights(reg_weights);
      std::optional<Profile> p;
      if (reg_mem || reg_lat) {
        if (!reg_mem || !reg_lat) throw Error("--mem and --latency go together");
        p = Profile{*reg_mem, *reg_lat, std::nullopt};
      }
      std::cout << summary_line(repo.register_model(graph, weights, p, g.costs())) << "\n";
    } else if (*prof) {
      const ModelGraph graph = load_model(prof_graph);
      const WeightStore weights = load_weights(prof_weights);
      const ValidationReport report = validate_graph(graph, weights);
      if (!report.ok()) throw ValidationFailed(graph.model_id(), report.summary());
      const auto d = profile_model_detail(graph, weights, g.costs());
      std::cout << "model " << graph.model_id() << " mem_required_mib=" << fmt("%.0f", d.mem_required_mib)
                << " iter_latency_ms=" << fmt("%.6f", d.iter_latency_ms)
                << " weight_bytes=" << d.weight_bytes
                << " peak_activation_bytes=" << d.peak_activation_bytes << "\n";
    } else if (*rep) {
      auto modes = parse_replay_modes(g.mode);
      if (!modes) throw Error("--mode must be fused, unfused or both");
      const CostTable ct = g.costs();
      const Scenario sc = load_scenario(rep_path);
      auto repo = build_repository(sc, ct);
      const ReplayReport report = replay(sc, *repo, *modes, ct);
      const std::string csv = to_csv(report.rows);
      if (rep_out.empty()) {
        std::cout << csv;
        std::cerr << summarize(report);
      } else {
        write_file(rep_out, csv);
        std::cout << summarize(report);
      }
    } else if (*srv) {
      if (srv_stdin == !srv_socket.empty()) throw Error("serve needs exactly one of --stdin, --socket");
      const CostTable ct = g.costs();
      std::unique_ptr<Repository> repo;
      if (!srv_scenario.empty()) {
        repo = build_repository(load_scenario(srv_scenario), ct);
      } else {
        repo = std::make_unique<Repository>(g.repo);
      }
      ServerOptions opts;
      opts.budget_mib = g.budget;
      opts.quantum = g.quantum;
      opts.mode = g.exec_mode();
      opts.time_scale = srv_scale;
      opts.out_dir = srv_out_dir;
      opts.cost_table = ct;
      Server server(*repo, opts);
      server.start();
      if (srv_stdin) {
        std::mutex out_mu;
        server.serve_stream(std::cin, [&](const std::string& line) {
          std::lock_guard lock(out_mu);
          std::cout << line << std::endl;
        });
        server.drain_and_stop();
      } else {
        server.serve_unix(srv_socket);
        server.stop();
      }
    } else if (*ins) {
      const std::string text = read_file(ins_path);
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(text);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(ins_path + ": " + e.what());
      }
      if (doc.is_object() && doc.contains("subgraphs")) {
        print_dag(dag_from_json(doc));
      } else {
        try {
          print_model(model_from_json(doc));
        } catch (const nlohmann::json::exception& e) {
          throw ParseError(ins_path + ": " + e.what());
        }
      }
    } else if (*fus) {
      if (fus_files.size() % 2 != 0) throw Error("fuse takes graph/weights pairs");
      std::vector<ModelBundle> models;
      for (size_t i = 0; i < fus_files.size(); i += 2) {
        models.push_back(ModelBundle::make(load_model(fus_files[i]), load_weights(fus_files[i + 1])));
      }
      const FusedDag dag = fuse_models(models, {}, g.costs());
      const std::string text = dag_to_json(dag).dump(2) + "\n";
      if (fus_out.empty()) {
        std::cout << text;
      } else {
        write_file(fus_out, text);
        std::cout << "wrote " << fus_out << " subgraphs=" << dag.subgraphs().size()
                  << " nodes=" << dag.node_count() << " cross_edges=" << cross_edge_count(dag) << "\n";
      }
    } else if (*runm) {
      const ModelGraph graph = load_model(run_graph);
      const WeightStore weights = load_weights(run_weights);
      const ValidationReport report = validate_graph(graph, weights);
      if (!report.ok()) throw ValidationFailed(graph.model_id(), report.summary());
      const Tensor y = run(graph, weights, resolve_input(run_input, graph.input_spec()));
      std::cout << "output " << to_string(y.spec) << " " << output_digest(y) << "\n";
      for (size_t i = 0; i < y.values.size() && i < 16; ++i) {
        std::cout << (i ? " " : "") << fmt("%.9g", y.values[i]);
      }
      std::cout << (y.values.size() > 16 ? " ...\n" : "\n");
    } else if (*zoo) {
      const ModelBundle b = make_family_model(zoo_family, zoo_id, zoo_seed);
      const auto dir = std::filesystem::path(zoo_dir);
      save_model(*b.graph, dir / (zoo_id + ".json"));
      save_weights(*b.weights, dir / (zoo_id + ".fiwt"));
      std::cout << "wrote " << (dir / (zoo_id + ".json")).string() << " "
                << (dir / (zoo_id + ".fiwt")).string() << " nodes=" << b.graph->nodes().size()
                << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kOk;
}
