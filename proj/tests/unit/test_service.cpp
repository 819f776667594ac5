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

#include <gtest/gtest.h>

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <set>
#include <sstream>
#include <thread>

#include "fusedinf/errors.hpp"
#include "fusedinf/model_io.hpp"
#include "fusedinf/service.hpp"
#include "fusedinf/zoo.hpp"
#include "test_util.hpp"

using namespace fusedinf;
using namespace fusedinf::testing;

namespace {

const char* kSmall = R"(scenario small
budget 4000
quantum 50
model a family=vgg seed=1 mem=300 latency_ms=2
model b family=resnet seed=2 mem=200 latency_ms=3 weights_mib=150
request at=0 model=a iterations=80
request at=0 model=b iterations=40 class=short input=seed:4
request at=5 model=a iterations=10 id=late
)";

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

struct Collector {
  std::mutex mu;
  std::vector<std::string> lines;
  Server::Writer writer() {
    return [this](const std::string& l) {
      std::lock_guard lock(mu);
      lines.push_back(l);
    };
  }
};

}  // namespace

TEST(Scenario, ParsesDirectives) {
  const Scenario sc = parse_scenario(kSmall);
  EXPECT_EQ(sc.name, "small");
  EXPECT_EQ(sc.budget_mib, 4000);
  EXPECT_EQ(sc.quantum, 50);
  ASSERT_EQ(sc.models.size(), 2u);
  EXPECT_EQ(sc.models[1].profile->weights_mib, 150);
  ASSERT_EQ(sc.requests.size(), 3u);
  EXPECT_EQ(sc.requests[0].request_id, "q1");
  EXPECT_EQ(sc.requests[1].uptime_class, UptimeClass::kShort);
  EXPECT_EQ(sc.requests[2].request_id, "late");
}

TEST(Scenario, ErrorsCarryLineNumbers) {
  const std::pair<const char*, int> cases[] = {
      {"scenario x\nbogus 1\n", 2},
      {"model a family=vgg\nrequest model=a iterations=many\n", 2},
      {"model a family=vgg colour=red\n", 1},
      {"model a family=vgg\nmodel a family=vgg\n", 2},
      {"budget -3\n", 1},
      {"request model=a iterations=1 class=medium\n", 1},
  };
  for (const auto& [text, line] : cases) {
    try {
      parse_scenario(text);
      ADD_FAILURE() << text;
    } catch (const ScenarioParse& e) {
      EXPECT_EQ(e.line(), line) << text << e.what();
    }
  }
}

TEST(Scenario, GraphFilesResolvedRelativeToScenario) {
  const auto dir = scratch_dir("scenario_files");
  auto m = make_family_model("squeezenet", "sq", 5);
  save_model(*m.graph, dir / "sq.json");
  save_weights(*m.weights, dir / "sq.fiwt");
  write_file(dir / "s.scn", "model sq graph=sq.json weights=sq.fiwt\nrequest model=sq iterations=3\n");
  const Scenario sc = load_scenario(dir / "s.scn");
  EXPECT_EQ(sc.name, "s.scn");
  auto repo = build_repository(sc, CostTable::defaults());
  EXPECT_EQ(*repo->load_bundle("sq").graph, *m.graph);

  write_file(dir / "missing.scn", "model zz graph=nope.json weights=nope.fiwt\n");
  EXPECT_THROW(build_repository(load_scenario(dir / "missing.scn"), CostTable::defaults()), IoError);
}

TEST(Replay, EmptyScenarioIsHeaderOnly) {
  const Scenario sc = parse_scenario("scenario empty\n");
  auto repo = build_repository(sc, CostTable::defaults());
  const auto rep = replay(sc, *repo, ReplayModes::kBoth, CostTable::defaults());
  EXPECT_EQ(to_csv(rep.rows), std::string(kCsvHeader) + "\n");
}

TEST(Replay, DeterministicAndPaired) {
  const Scenario sc = parse_scenario(kSmall);
  const CostTable& ct = CostTable::defaults();
  auto repo = build_repository(sc, ct);
  const auto a = replay(sc, *repo, ReplayModes::kBoth, ct);
  auto repo2 = build_repository(sc, ct);
  const auto b = replay(sc, *repo2, ReplayModes::kBoth, ct);
  EXPECT_EQ(to_csv(a.rows), to_csv(b.rows));
  ASSERT_EQ(a.rows.size() % 2, 0u);
  for (size_t i = 0; i < a.rows.size(); i += 2) {
    EXPECT_EQ(a.rows[i].mode, ExecMode::kUnfused);
    EXPECT_EQ(a.rows[i + 1].mode, ExecMode::kFused);
    EXPECT_EQ(a.rows[i].cycle, a.rows[i + 1].cycle);
    ASSERT_TRUE(a.rows[i].saving_mem_pct.has_value());
    EXPECT_EQ(*a.rows[i].saving_mem_pct, saving_pct(a.rows[i].peak_mem_mib, a.rows[i + 1].peak_mem_mib));
  }
  ASSERT_EQ(a.runs.size(), 2u);
  EXPECT_EQ(a.runs[0].outputs, a.runs[1].outputs);
  EXPECT_EQ(a.runs[0].outputs.size(), 3u);
}

TEST(Replay, SingleModeLeavesSavingsEmpty) {
  const Scenario sc = parse_scenario(kSmall);
  auto repo = build_repository(sc, CostTable::defaults());
  const auto rep = replay(sc, *repo, ReplayModes::kFused, CostTable::defaults());
  const auto lines = lines_of(to_csv(rep.rows));
  ASSERT_GE(lines.size(), 2u);
  EXPECT_EQ(lines[1].substr(lines[1].size() - 2), ",,");
}

TEST(Replay, ShortClassRunsFirst) {
  const Scenario sc = parse_scenario(kSmall);
  auto repo = build_repository(sc, CostTable::defaults());
  // Budget fits a or b alone but not both.
  Scenario tight = sc;
  tight.budget_mib = 900;
  const auto run = replay_mode(tight, *repo, ExecMode::kFused, ExecMode::kFused, CostTable::defaults());
  ASSERT_FALSE(run.log.cycles.empty());
  EXPECT_EQ(run.log.cycles[0].members, std::vector<std::string>{"b"});
}

TEST(Replay, ArrivalOrderOracle) {
  // Requests fed out of order replay as if sorted by arrival time.
  const char* text = R"(scenario shuffled
model a family=vgg seed=1 mem=300 latency_ms=2
request at=2000 model=a iterations=5 id=third
request at=0 model=a iterations=5 id=first
request at=1000 model=a iterations=5 id=second
)";
  const Scenario sc = parse_scenario(text);
  auto repo = build_repository(sc, CostTable::defaults());
  const auto run = replay_mode(sc, *repo, ExecMode::kFused, ExecMode::kFused, CostTable::defaults());
  std::vector<std::string> order;
  for (const auto* e : run.log.of_kind(EventKind::kComplete)) order.push_back(e->request_id);
  EXPECT_EQ(order, (std::vector<std::string>{"first", "second", "third"}));
  EXPECT_EQ(run.epochs, 3);
  EXPECT_GE(run.log.of_kind(EventKind::kComplete).back()->time_s, 2000);
}

TEST(Server, AckThenDoneAndRejections) {
  const Scenario sc = parse_scenario(kSmall);
  auto repo = build_repository(sc, CostTable::defaults());
  Server server(*repo, ServerOptions{});
  server.start();
  Collector out;
  std::istringstream in(
      "REQ a 10 long zeros\n"
      "REQ ghost 1 long zeros\n"
      "this is not a request\n"
      "REQ a 0 long zeros\n"
      "REQ b 3 short seed:2\n");
  server.serve_stream(in, out.writer());
  server.drain_and_stop();
  const auto& l = out.lines;
  ASSERT_EQ(l.size(), 7u);
  EXPECT_EQ(l[0], "ACK r1");
  EXPECT_EQ(l[1], "REJ unknown-model");
  EXPECT_EQ(l[2], "ERR parse");
  EXPECT_EQ(l[3], "REJ zero-iterations");
  EXPECT_EQ(l[4], "ACK r4");
  std::set<std::string> done(l.begin() + 5, l.end());
  const auto outs = server.outputs();
  EXPECT_TRUE(done.count("DONE r1 " + outs.at("r1")));
  EXPECT_TRUE(done.count("DONE r4 " + outs.at("r4")));
  const auto b = repo->load_bundle("b");
  EXPECT_EQ(outs.at("r4"), output_digest(run(*b.graph, *b.weights, seeded_tensor(b.graph->input_spec(), 2))));
}

TEST(Server, OutDirWritesTensors) {
  const Scenario sc = parse_scenario(kSmall);
  auto repo = build_repository(sc, CostTable::defaults());
  const auto dir = scratch_dir("server_out");
  ServerOptions opts;
  opts.out_dir = dir.string();
  Server server(*repo, opts);
  server.start();
  Collector out;
  std::istringstream in("REQ a 2 long seed:9\n");
  server.serve_stream(in, out.writer());
  server.drain_and_stop();
  ASSERT_EQ(out.lines.size(), 2u);
  EXPECT_EQ(out.lines[1], "DONE r1 " + (dir / "r1.fiwt").string());
  const auto a = repo->load_bundle("a");
  const WeightStore ws = load_weights(dir / "r1.fiwt");
  const Tensor expect = run(*a.graph, *a.weights, seeded_tensor(a.graph->input_spec(), 9));
  EXPECT_EQ(ws.find("output")->values, expect.values);
}

TEST(Server, UnixSocketRoundTrip) {
  const Scenario sc = parse_scenario(kSmall);
  auto repo = build_repository(sc, CostTable::defaults());
  const auto dir = scratch_dir("server_sock");
  const std::string path = (dir / "s.sock").string();
  Server server(*repo, ServerOptions{});
  server.start();
  std::thread acceptor([&] { server.serve_unix(path); });
  int fd = -1;
  for (int i = 0; i < 200 && fd < 0; ++i) {
    fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    std::strncpy(addr.sun_path, path.c_str(), sizeof(addr.sun_path) - 1);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      ::close(fd);
      fd = -1;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
  ASSERT_GE(fd, 0);
  const std::string msg = "garbage\nREQ a 3 long zeros\n";
  ASSERT_EQ(::write(fd, msg.data(), msg.size()), static_cast<ssize_t>(msg.size()));
  ::shutdown(fd, SHUT_WR);
  std::string got;
  char buf[256];
  for (ssize_t n; (n = ::read(fd, buf, sizeof(buf))) > 0;) got.append(buf, static_cast<size_t>(n));
  ::close(fd);
  server.stop();
  acceptor.join();
  const auto l = lines_of(got);
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(l[0], "ERR parse");
  EXPECT_EQ(l[1], "ACK r1");
  EXPECT_EQ(l[2].rfind("DONE r1 fnv1a:", 0), 0u);
}
