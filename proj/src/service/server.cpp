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
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <istream>
#include <limits>
#include <set>
#include <sstream>

#include "fusedinf/errors.hpp"
#include "fusedinf/model_io.hpp"
#include "fusedinf/service.hpp"

namespace fusedinf {

Server::Server(const Repository& repo, ServerOptions opts)
    : repo_(repo), opts_(std::move(opts)), queue_(repo) {}

Server::~Server() { stop(); }

void Server::start() {
  if (lane_.joinable()) return;
  stopping_ = false;
  lane_ = std::thread([this] { lane(); });
}

void Server::stop() {
  stopping_ = true;
  queue_.close();
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  if (lane_.joinable()) lane_.join();
}

void Server::drain_and_stop() {
  wait_idle();
  stop();
}

void Server::wait_idle() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [&] { return outstanding_ == 0; });
}

std::vector<InferenceRequest> Server::captured() const {
  std::lock_guard lock(mu_);
  return captured_;
}

RunLog Server::log() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::map<std::string, std::string> Server::outputs() const {
  std::lock_guard lock(mu_);
  return outputs_;
}

void Server::handle_line(const std::string& line, const std::shared_ptr<Connection>& conn) {
  std::istringstream in(line);
  std::vector<std::string> tok;
  for (std::string t; in >> t;) tok.push_back(t);
  if (tok.empty()) return;

  std::lock_guard reply_lock(conn->mu);
  auto reply = [&](const std::string& s) { conn->write(s); };
  if (tok.size() != 5 || tok[0] != "REQ") return reply("ERR parse");
  long iterations = 0;
  {
    const std::string& s = tok[2];
    size_t used = 0;
    try {
      iterations = std::stol(s, &used);
    } catch (const std::exception&) {
      return reply("ERR parse");
    }
    if (used != s.size() || iterations < 0) return reply("ERR parse");
  }
  auto cls = parse_uptime_class(tok[3]);
  if (!cls) return reply("ERR parse");

  InferenceRequest req;
  req.model_id = tok[1];
  req.iterations_requested = iterations;
  req.uptime_class = *cls;
  req.input_ref = tok[4];
  req.arrival_time_s = sim_now_.load();
  {
    std::lock_guard lock(mu_);
    req.request_id = "r" + std::to_string(++next_id_);
    owners_[req.request_id] = conn;
    ++outstanding_;
  }
  // The connection lock is held until ACK is written, so DONE cannot
  // overtake it.
  const IngestResult r = queue_.ingest(req);
  if (!r.accepted) {
    {
      std::lock_guard lock(mu_);
      owners_.erase(req.request_id);
      --outstanding_;
    }
    idle_cv_.notify_all();
    return reply("REJ " + r.reason);
  }
  req.seq = r.seq;
  {
    std::lock_guard lock(mu_);
    auto at = std::upper_bound(captured_.begin(), captured_.end(), req,
                               [](const InferenceRequest& a, const InferenceRequest& b) { return a.seq < b.seq; });
    captured_.insert(at, req);
  }
  ++conn->pending;
  reply("ACK " + req.request_id);
}

void Server::finish_request(const std::string& id, const std::string& ref) {
  std::shared_ptr<Connection> conn;
  {
    std::lock_guard lock(mu_);
    auto it = owners_.find(id);
    if (it == owners_.end()) return;
    conn = it->second;
    owners_.erase(it);
    outputs_[id] = ref;
  }
  {
    std::lock_guard reply_lock(conn->mu);
    conn->write("DONE " + id + " " + ref);
    --conn->pending;
  }
  conn->cv.notify_all();
  {
    std::lock_guard lock(mu_);
    --outstanding_;
  }
  idle_cv_.notify_all();
}

void Server::lane() {
  const CostTable& ct = opts_.cost_table;
  constexpr double kAll = std::numeric_limits<double>::infinity();
  while (!stopping_) {
    if (!queue_.wait_for_pending(std::chrono::milliseconds(20))) {
      if (queue_.closed()) break;
      continue;
    }
    std::vector<InferenceRequest> reqs = queue_.take_arrived(kAll);
    if (reqs.empty()) continue;

    std::map<std::string, UptimeClass> cls;
    std::vector<std::string> order;
    for (const auto& r : reqs) {
      auto [it, fresh] = cls.emplace(r.model_id, r.uptime_class);
      if (fresh) order.push_back(r.model_id);
      if (r.uptime_class == UptimeClass::kShort) it->second = UptimeClass::kShort;
    }
    std::vector<PlanItem> items;
    for (const auto& id : order) items.push_back({repo_.lookup(id), cls[id]});
    PlanOptions po;
    po.quantum_iterations = opts_.quantum;
    po.planning_mode = opts_.mode;
    po.throw_unschedulable = false;
    const SchedulePlan plan = plan_batches(items, opts_.budget_mib, ct, po);
    std::set<std::string> planned;
    for (const auto& b : plan.batches) planned.insert(b.model_ids.begin(), b.model_ids.end());
    std::vector<InferenceRequest> runnable;
    for (auto& r : reqs) {
      if (planned.count(r.model_id)) {
        runnable.push_back(std::move(r));
      } else {
        finish_request(r.request_id, "error:unschedulable");
      }
    }

    RunContext ctx;
    ctx.repo = &repo_;
    ctx.ct = &ct;
    ctx.mode = opts_.mode;
    ctx.start_time_s = sim_now_.load();
    {
      std::lock_guard lock(mu_);
      ctx.first_cycle = cycle_;
    }
    ctx.admit = [&](double) { return queue_.take_arrived_for(kAll, planned); };
    ctx.on_advance = [&](double from, double to) {
      if (opts_.time_scale > 0) {
        std::this_thread::sleep_for(std::chrono::duration<double>((to - from) * opts_.time_scale));
      }
      sim_now_.store(to);
    };
    ctx.on_complete = [&](const InferenceRequest& r, const Tensor& out, double) {
      std::string ref = output_digest(out);
      if (!opts_.out_dir.empty()) {
        const auto path = std::filesystem::path(opts_.out_dir) / (r.request_id + ".fiwt");
        WeightStore ws;
        ws.add("output", out.spec, out.values);
        save_weights(ws, path);
        ref = path.string();
      }
      finish_request(r.request_id, ref);
    };
    RunResult res = run_plan(plan, std::move(runnable), ctx);
    for (auto& r : res.requeued) queue_.requeue(std::move(r));
    for (const auto& [r, why] : res.failed) finish_request(r.request_id, "error:" + why);
    std::lock_guard lock(mu_);
    cycle_ += static_cast<int>(res.log.cycles.size());
    log_.append(res.log);
  }
}

void Server::serve_stream(std::istream& in, Writer write) {
  auto conn = std::make_shared<Connection>();
  conn->write = std::move(write);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    handle_line(line, conn);
  }
}

namespace {

bool write_all(int fd, const std::string& s) {
  size_t off = 0;
  while (off < s.size()) {
    const ssize_t n = ::write(fd, s.data() + off, s.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    off += static_cast<size_t>(n);
  }
  return true;
}

}  // namespace

void Server::serve_fd(int fd) {
  auto conn = std::make_shared<Connection>();
  conn->write = [fd](const std::string& line) { write_all(fd, line + "\n"); };
  std::string buf;
  char chunk[4096];
  while (true) {
    const ssize_t n = ::read(fd, chunk, sizeof(chunk));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buf.append(chunk, static_cast<size_t>(n));
    size_t pos;
    while ((pos = buf.find('\n')) != std::string::npos) {
      std::string line = buf.substr(0, pos);
      buf.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      handle_line(line, conn);
    }
  }
  if (!buf.empty()) handle_line(buf, conn);
  // Replies for this connection may still be pending; keep the fd open
  // until they are written.
  {
    std::unique_lock lock(conn->mu);
    while (conn->pending > 0 && !stopping_) conn->cv.wait_for(lock, std::chrono::milliseconds(50));
  }
  ::close(fd);
}

void Server::serve_unix(const std::string& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof(addr.sun_path)) throw IoError(path, "socket path too long");
  std::strncpy(addr.sun_path, path.c_str(), sizeof(addr.sun_path) - 1);
  const int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
  if (fd < 0) throw IoError(path, std::strerror(errno));
  ::unlink(path.c_str());
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd, 16) != 0) {
    const std::string err = std::strerror(errno);
    ::close(fd);
    throw IoError(path, err);
  }
  listen_fd_ = fd;
  std::vector<std::thread> conns;
  while (!stopping_) {
    const int c = ::accept(fd, nullptr, nullptr);
    if (c < 0) {
      if (errno == EINTR) continue;
      break;
    }
    conns.emplace_back([this, c] { serve_fd(c); });
  }
  for (auto& t : conns) t.join();
  ::unlink(path.c_str());
}

}  // namespace fusedinf
