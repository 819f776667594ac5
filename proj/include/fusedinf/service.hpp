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

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fusedinf/cost_model.hpp"
#include "fusedinf/model_repo.hpp"
#include "fusedinf/scheduler.hpp"

namespace fusedinf {

// ---- scenario files ------------------------------------------------------
//
// Line directives, '#' starts a comment:
//   scenario <name>
//   budget <MiB>
//   quantum <iterations>
//   model <id> family=<f> seed=<n> [mem=<MiB> latency_ms=<ms> [weights_mib=<MiB>]]
//         [graph=<path> weights=<path>]
//   request at=<s> model=<id> iterations=<n> [class=short|long] [input=<ref>] [id=<rid>]
//   swap at_iteration=<n> out=<id> in=<id> [iterations=<n>] [input=<ref>] [class=...]

struct ScenarioModel {
  std::string model_id;
  std::string family;
  uint64_t seed = 0;
  std::string graph_path;  // resolved; empty for zoo models
  std::string weights_path;
  std::optional<Profile> profile;
  int line = 0;
};

struct Scenario {
  std::string name;
  double budget_mib = 8192;
  long quantum = 100;
  std::vector<ScenarioModel> models;
  std::vector<InferenceRequest> requests;
  std::vector<SwapRequest> swaps;
};

Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);  // ScenarioParse, IoError

// In-memory repository holding every scenario model.
std::unique_ptr<Repository> build_repository(const Scenario& sc, const CostTable& ct);

// ---- replay and reports --------------------------------------------------

std::string output_digest(const Tensor& t);  // fnv1a:<16 hex>

struct RunReportRow {
  std::string scenario_id;
  int cycle = 0;
  ExecMode mode = ExecMode::kUnfused;
  int model_count = 0;
  double peak_mem_mib = 0;
  double total_time_s = 0;
  std::optional<double> saving_mem_pct;
  std::optional<double> saving_time_pct;
};

double saving_pct(double unfused, double fused);  // rounded to 2 decimals

struct ReplayRun {
  ExecMode mode = ExecMode::kUnfused;
  RunLog log;
  std::map<std::string, std::string> outputs;  // request id -> digest
  std::vector<std::pair<InferenceRequest, std::string>> rejected;
  int epochs = 0;
};

struct ReplayReport {
  std::string scenario;
  std::vector<ReplayRun> runs;
  std::vector<RunReportRow> rows;
};

enum class ReplayModes { kFused, kUnfused, kBoth };

std::optional<ReplayModes> parse_replay_modes(std::string_view s);

// Epoch loop: plan whatever has arrived, run the plan, repeat until the
// request stream is drained.
ReplayRun replay_mode(const Scenario& sc, const Repository& repo, ExecMode mode,
                      ExecMode planning_mode, const CostTable& ct);
ReplayReport replay(const Scenario& sc, const Repository& repo, ReplayModes modes,
                    const CostTable& ct);

inline constexpr const char* kCsvHeader =
    "scenario,cycle,mode,model_count,peak_mem_mib,total_time_s,saving_mem_pct,saving_time_pct";

std::string to_csv(const std::vector<RunReportRow>& rows);
std::string summarize(const ReplayReport& report);

// ---- serve loop ----------------------------------------------------------

struct ServerOptions {
  double budget_mib = 8192;
  long quantum = 100;
  ExecMode mode = ExecMode::kFused;
  // Wall seconds slept per simulated second; 0 runs as fast as possible.
  double time_scale = 0;
  std::string out_dir;  // when set, outputs are written as weights files
  CostTable cost_table = CostTable::defaults();
};

// Line protocol:
//   REQ <model_id> <iterations> <class> <input_ref>
//   -> ACK <request_id> | REJ <reason> | ERR parse
//   later DONE <request_id> <output_ref>
class Server {
 public:
  using Writer = std::function<void(const std::string& line)>;

  Server(const Repository& repo, ServerOptions opts);
  ~Server();

  void start();
  // Waits until every accepted request is done, then stops the lane.
  void drain_and_stop();
  void stop();

  // Serves one connection until EOF. Safe to call from several threads.
  void serve_stream(std::istream& in, Writer write);
  void serve_fd(int fd);
  // Accepts connections on a unix socket until stop(). Returns on error.
  void serve_unix(const std::string& path);

  void wait_idle();
  std::vector<InferenceRequest> captured() const;  // accepted, ingest order
  RunLog log() const;
  std::map<std::string, std::string> outputs() const;
  double sim_now() const { return sim_now_.load(); }

 private:
  struct Connection {
    std::mutex mu;  // held while writing a reply
    std::condition_variable cv;
    size_t pending = 0;  // accepted, DONE not yet written
    Writer write;
  };

  void handle_line(const std::string& line, const std::shared_ptr<Connection>& conn);
  void lane();
  void finish_request(const std::string& id, const std::string& ref);

  const Repository& repo_;
  ServerOptions opts_;
  RequestQueue queue_;
  std::atomic<double> sim_now_{0};
  std::atomic<bool> stopping_{false};
  std::thread lane_;

  mutable std::mutex mu_;
  std::condition_variable idle_cv_;
  uint64_t next_id_ = 0;
  size_t outstanding_ = 0;
  std::map<std::string, std::shared_ptr<Connection>> owners_;
  std::vector<InferenceRequest> captured_;
  std::map<std::string, std::string> outputs_;
  RunLog log_;
  int cycle_ = 1;
  int listen_fd_ = -1;
};

}  // namespace fusedinf
