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
#include <cmath>
#include <sstream>

#include "fusedinf/cost_model.hpp"
#include "fusedinf/errors.hpp"
#include "fusedinf/model_io.hpp"

namespace fusedinf {

namespace {

constexpr const char* kDefaultText =
#include "default_cost_table.inc"
    ;

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// "740 ns" parses as the literal 740e-9 rather than 740 * 1e-9, so table
// values round-trip exactly.
double parse_quantity(std::string_view raw, const std::string& where) {
  std::string_view v = trim(raw);
  struct Unit {
    std::string_view suffix;
    std::string_view exponent;
  };
  static constexpr Unit kUnits[] = {
      {"GiB/s", ""}, {"MiB", ""}, {"ns", "e-9"}, {"us", "e-6"},
      {"ms", "e-3"}, {"s", ""},
  };
  std::string number(v);
  for (const auto& u : kUnits) {
    if (ends_with(v, u.suffix)) {
      std::string_view mantissa = trim(v.substr(0, v.size() - u.suffix.size()));
      if (!u.exponent.empty() && mantissa.find_first_of("eE") != std::string_view::npos) {
        throw ParseError(where + ": exponent not allowed with a unit suffix");
      }
      number = std::string(mantissa) + std::string(u.exponent);
      break;
    }
  }
  double out = 0;
  const char* first = number.data();
  const char* last = number.data() + number.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last || number.empty()) {
    throw ParseError(where + ": bad number '" + std::string(v) + "'");
  }
  return out;
}

}  // namespace

double decrease_pct(const InitCallCost& cost) {
  if (cost.unfused_s <= 0) return 0.0;
  return (cost.unfused_s - cost.fused_s) / cost.unfused_s * 100.0;
}

std::string_view CostTable::default_text() { return kDefaultText; }

const CostTable& CostTable::defaults() {
  static const CostTable table = parse(kDefaultText, "calibration/paper_tableIV.cfg");
  return table;
}

CostTable CostTable::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

CostTable CostTable::parse(std::string_view text, const std::string& source) {
  CostTable ct;
  std::optional<double> gain;
  std::string section;
  InitCallCost* current_call = nullptr;
  std::istringstream in{std::string(text)};
  std::string line_buf;
  int line_no = 0;
  while (std::getline(in, line_buf)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    std::string_view line = line_buf;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(where + ": unterminated section");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      current_call = nullptr;
      constexpr std::string_view kFn = "function.";
      if (section.rfind(kFn, 0) == 0) {
        const std::string name = section.substr(kFn.size());
        if (name.empty()) throw ParseError(where + ": empty function name");
        if (ct.find(name)) throw ParseError(where + ": function '" + name + "' repeated");
        ct.init_calls.push_back(InitCallCost{name, Phase::kInit, 0, 0});
        current_call = &ct.init_calls.back();
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(where + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    auto num = [&] { return parse_quantity(value, where); };

    if (current_call) {
      if (key == "phase") {
        auto p = parse_phase(value);
        if (!p || (*p != Phase::kInit && *p != Phase::kMalloc && *p != Phase::kMemcpy)) {
          throw ParseError(where + ": phase must be init, malloc or memcpy");
        }
        current_call->phase = *p;
      } else if (key == "unfused") {
        current_call->unfused_s = num();
      } else if (key == "fused") {
        current_call->fused_s = num();
      } else {
        throw ParseError(where + ": unknown key '" + key + "'");
      }
    } else if (section == "calibration") {
      if (key == "models") {
        ct.calibration_models = static_cast<int>(num());
      } else if (key == "weight_mib") {
        ct.calibration_weight_mib = num();
      } else {
        throw ParseError(where + ": unknown key '" + key + "'");
      }
    } else if (section == "memory") {
      if (key == "context_base_mib") {
        ct.context_base_mib = num();
      } else if (key == "per_model_overhead_mib") {
        ct.per_model_overhead_mib = num();
      } else if (key == "dedup_saving_mib_per_extra_model") {
        ct.dedup_saving_mib_per_extra_model = num();
      } else {
        throw ParseError(where + ": unknown key '" + key + "'");
      }
    } else if (section == "memcpy") {
      if (key == "throughput_gain") {
        gain = num();
      } else if (key == "unfused_throughput") {
        ct.memcpy_unfused_gibps = num();
      } else if (key == "fused_throughput") {
        ct.memcpy_fused_gibps = num();
      } else {
        throw ParseError(where + ": unknown key '" + key + "'");
      }
    } else if (section == "iterate") {
      if (key == "transfer_fraction") {
        ct.transfer_fraction = num();
      } else {
        throw ParseError(where + ": unknown key '" + key + "'");
      }
    } else if (section == "op_latency") {
      if (key == "node_dispatch") {
        ct.node_dispatch_ms = num() * 1e3;
      } else if (auto kind = parse_op_kind(key)) {
        ct.op_ms_per_mflop[*kind] = num();
      } else {
        throw ParseError(where + ": unknown op kind '" + key + "'");
      }
    } else {
      throw ParseError(where + ": key outside a known section");
    }
  }

  // Without explicit throughputs, derive them from the memcpy row: the rates
  // differ by `gain` and their ratio equals the row's time ratio.
  if (ct.memcpy_unfused_gibps <= 0 && gain) {
    const InitCallCost* row = nullptr;
    for (const auto& c : ct.init_calls) {
      if (c.phase == Phase::kMemcpy) row = &c;
    }
    if (!row || row->unfused_s <= row->fused_s) {
      throw ParseError(source + ": throughput_gain needs a memcpy row with fused < unfused");
    }
    ct.memcpy_unfused_gibps = row->fused_s * *gain / (row->unfused_s - row->fused_s);
  }
  if (ct.memcpy_fused_gibps <= 0 && gain) ct.memcpy_fused_gibps = ct.memcpy_unfused_gibps + *gain;
  ct.validate();
  return ct;
}

void CostTable::validate() const {
  auto fail = [](const std::string& what) { throw Error("invalid cost table: " + what); };
  if (calibration_models < 1) fail("calibration models must be >= 1");
  if (calibration_weight_mib <= 0) fail("calibration weight_mib must be > 0");
  if (context_base_mib < 0 || per_model_overhead_mib < 0 || dedup_saving_mib_per_extra_model < 0) {
    fail("memory constants must be >= 0");
  }
  if (memcpy_unfused_gibps <= 0 || memcpy_fused_gibps <= 0) fail("memcpy throughputs must be > 0");
  if (transfer_fraction < 0 || transfer_fraction > 1) fail("transfer_fraction must be in [0,1]");
  if (node_dispatch_ms < 0) fail("node_dispatch must be >= 0");
  for (const auto& [kind, v] : op_ms_per_mflop) {
    if (v < 0) fail("op_latency for " + std::string(to_string(kind)) + " is negative");
  }
  int mallocs = 0, memcpys = 0;
  for (const auto& c : init_calls) {
    if (c.unfused_s < 0 || c.fused_s < 0) fail(c.function + " has a negative duration");
    if (c.fused_s > c.unfused_s) fail(c.function + " fused time exceeds unfused time");
    mallocs += c.phase == Phase::kMalloc;
    memcpys += c.phase == Phase::kMemcpy;
  }
  if (mallocs != 1 || memcpys != 1) fail("need exactly one malloc and one memcpy function");
}

const InitCallCost* CostTable::find(std::string_view function) const {
  for (const auto& c : init_calls) {
    if (c.function == function) return &c;
  }
  return nullptr;
}

const InitCallCost& CostTable::phase_cost(Phase phase) const {
  for (const auto& c : init_calls) {
    if (c.phase == phase) return c;
  }
  throw Error("cost table has no " + std::string(to_string(phase)) + " function");
}

double CostTable::op_latency_ms(OpKind kind, double flops) const {
  auto it = op_ms_per_mflop.find(kind);
  const double per = it == op_ms_per_mflop.end() ? 0.0 : it->second;
  return node_dispatch_ms + per * flops / 1e6;
}

}  // namespace fusedinf
