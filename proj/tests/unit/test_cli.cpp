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
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fusedinf/model_io.hpp"
#include "fusedinf/zoo.hpp"
#include "test_util.hpp"

using namespace fusedinf;
using namespace fusedinf::testing;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(const std::filesystem::path& dir, const std::string& args, const std::string& stdin_text = "") {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  std::string cmd = std::string(FUSEDINF_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  if (!stdin_text.empty()) {
    write_file(dir / "stdin.txt", stdin_text);
    cmd += " <" + (dir / "stdin.txt").string();
  }
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(out), read_file(err)};
}

std::string write_model(const std::filesystem::path& dir, const std::string& family,
                        const std::string& id, uint64_t seed) {
  auto m = make_family_model(family, id, seed);
  save_model(*m.graph, dir / (id + ".json"));
  save_weights(*m.weights, dir / (id + ".fiwt"));
  return (dir / (id + ".json")).string() + " " + (dir / (id + ".fiwt")).string();
}

const std::string kScenarios = std::string(FUSEDINF_SOURCE_DIR) + "/scenario/";

}  // namespace

TEST(Cli, RegisterExitCodes) {
  const auto dir = scratch_dir("cli_register");
  const std::string repo = "--repo " + (dir / "repo").string() + " ";
  const std::string files = write_model(dir, "vgg", "tiny", 1);

  auto r = cli(dir, repo + "register " + files);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("mem_required_mib="), std::string::npos);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1);

  EXPECT_EQ(cli(dir, repo + "register " + files).code, 3);

  // Oracle for corruption: flip the magic bytes of a valid file.
  write_model(dir, "resnet", "other", 2);
  std::string bytes = read_file(dir / "other.fiwt");
  bytes[0] = 'X';
  bytes[1] = 'X';
  write_file(dir / "other.fiwt", bytes);
  r = cli(dir, repo + "register " + (dir / "other.json").string() + " " + (dir / "other.fiwt").string());
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("other.fiwt"), std::string::npos);

  // A graph whose weights do not match its declared shapes.
  write_model(dir, "mobilenet", "mob", 3);
  r = cli(dir, repo + "register " + (dir / "mob.json").string() + " " + (dir / "tiny.fiwt").string());
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, ReplayPhase1CsvAndSummary) {
  const auto dir = scratch_dir("cli_replay");
  const auto csv = dir / "p1.csv";
  auto r = cli(dir, "replay " + kScenarios + "phase1_scaling --mode both --out " + csv.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("outputs identical"), std::string::npos);
  const std::string text = read_file(csv);
  EXPECT_NE(text.find("phase1_scaling,7,unfused,7,2016.00,67.440,10.02,4.27"), std::string::npos) << text;
  EXPECT_NE(text.find("phase1_scaling,7,fused,7,1814.00,64.560,10.02,4.27"), std::string::npos);
  // Byte-stable across runs.
  const auto csv2 = dir / "p1b.csv";
  ASSERT_EQ(cli(dir, "replay " + kScenarios + "phase1_scaling --mode both --out " + csv2.string()).code, 0);
  EXPECT_EQ(read_file(csv2), text);
}

TEST(Cli, ReplayEmptyAndBadScenario) {
  const auto dir = scratch_dir("cli_replay_empty");
  write_file(dir / "empty.scn", "scenario empty\nbudget 100\n");
  auto r = cli(dir, "replay " + (dir / "empty.scn").string());
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "scenario,cycle,mode,model_count,peak_mem_mib,total_time_s,saving_mem_pct,saving_time_pct\n");

  write_file(dir / "bad.scn", "scenario bad\nrequest model=x\n");
  r = cli(dir, "replay " + (dir / "bad.scn").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
  EXPECT_EQ(cli(dir, "replay " + (dir / "nope.scn").string()).code, 4);
}

TEST(Cli, InspectModelAndDag) {
  const auto dir = scratch_dir("cli_inspect");
  std::string pairs;
  size_t total = 0;
  const char* fams[] = {"vgg", "resnet", "densenet", "mobilenet", "squeezenet", "inception", "random"};
  for (int i = 0; i < 7; ++i) {
    const std::string id = std::string("m") + std::to_string(i);
    pairs += " " + write_model(dir, fams[i], id, 10 + i);
    total += load_model(dir / (id + ".json")).nodes().size();
  }
  auto r = cli(dir, "inspect " + (dir / "m0.json").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("subgraphs=1"), std::string::npos);

  ASSERT_EQ(cli(dir, "fuse" + pairs + " --out " + (dir / "dag.json").string()).code, 0);
  r = cli(dir, "inspect " + (dir / "dag.json").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("nodes=" + std::to_string(total) + " "), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("cross_edges=0"), std::string::npos);
  EXPECT_NE(r.out.find("subgraphs=7"), std::string::npos);
  auto pre = r.out.substr(r.out.find("preamble"));
  pre = pre.substr(0, pre.find('\n'));
  EXPECT_EQ(pre.find("=2"), std::string::npos);
  EXPECT_NE(pre.find("cudaMalloc=1"), std::string::npos);

  write_file(dir / "broken.json", "{ not json");
  EXPECT_EQ(cli(dir, "inspect " + (dir / "broken.json").string()).code, 2);
}

TEST(Cli, ProfileAndRunModel) {
  const auto dir = scratch_dir("cli_profile");
  const std::string files = write_model(dir, "densenet", "dn", 4);
  auto r = cli(dir, "profile " + files);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("mem_required_mib="), std::string::npos);
  r = cli(dir, "run-model " + files + " --input seed:3");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("fnv1a:"), std::string::npos);
}

TEST(Cli, ServeStdin) {
  const auto dir = scratch_dir("cli_serve");
  const std::string repo = "--repo " + (dir / "repo").string() + " ";
  ASSERT_EQ(cli(dir, repo + "register " + write_model(dir, "vgg", "v", 1)).code, 0);
  auto r = cli(dir, repo + "--quantum 10 serve --stdin", "REQ v 25 long zeros\nREQ nope 1 long zeros\nhello\n");
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 4u) << r.out;
  EXPECT_EQ(lines[0], "ACK r1");
  EXPECT_EQ(lines[1], "REJ unknown-model");
  EXPECT_EQ(lines[2], "ERR parse");
  EXPECT_EQ(lines[3].rfind("DONE r1 fnv1a:", 0), 0u);
}
