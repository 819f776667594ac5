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

#include "fusedinf/errors.hpp"
#include "fusedinf/model_io.hpp"
#include "fusedinf/scheduler.hpp"
#include "fusedinf/zoo.hpp"

namespace fusedinf {

std::string_view to_string(UptimeClass c) { return c == UptimeClass::kShort ? "short" : "long"; }

std::optional<UptimeClass> parse_uptime_class(std::string_view name) {
  if (name == "short") return UptimeClass::kShort;
  if (name == "long") return UptimeClass::kLong;
  return std::nullopt;
}

Tensor resolve_input(const std::string& input_ref, const TensorSpec& spec) {
  if (input_ref == "zeros") return Tensor::zeros(spec);
  if (input_ref.rfind("seed:", 0) == 0) {
    const std::string digits = input_ref.substr(5);
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
      throw Error("bad seed in input ref '" + input_ref + "'");
    }
    return seeded_tensor(spec, std::stoull(digits));
  }
  if (input_ref.rfind("file:", 0) == 0) {
    const WeightStore store = load_weights(input_ref.substr(5));
    if (store.size() != 1) throw Error(input_ref + ": expected exactly one tensor");
    const WeightTensor& t = store.tensors().begin()->second;
    return Tensor{t.spec, t.values};
  }
  throw Error("unknown input ref '" + input_ref + "'");
}

Tensor default_input_source(const InferenceRequest& req, const ModelManifest& manifest) {
  return resolve_input(req.input_ref, manifest.input_spec);
}

namespace {

bool before(const InferenceRequest& a, const InferenceRequest& b) {
  if (a.arrival_time_s != b.arrival_time_s) return a.arrival_time_s < b.arrival_time_s;
  return a.seq < b.seq;
}

size_t slot(UptimeClass c) { return c == UptimeClass::kShort ? 0 : 1; }

}  // namespace

void RequestQueue::insert_locked(InferenceRequest req) {
  auto& q = pending_[slot(req.uptime_class)];
  auto at = std::upper_bound(q.begin(), q.end(), req, before);
  q.insert(at, std::move(req));
}

IngestResult RequestQueue::ingest(InferenceRequest req) {
  IngestResult r;
  std::optional<ModelManifest> manifest;
  if (repo_.contains(req.model_id)) manifest = repo_.lookup(req.model_id);
  if (!manifest) {
    r.reason = "unknown-model";
  } else if (req.iterations_requested < 1) {
    r.reason = "zero-iterations";
  } else {
    try {
      if (resolve_input(req.input_ref, manifest->input_spec).spec != manifest->input_spec) {
        r.reason = "input-shape-mismatch";
      }
    } catch (const Error&) {
      r.reason = "bad-input";
    }
  }
  std::lock_guard lock(mu_);
  req.seq = next_seq_++;
  r.seq = req.seq;
  if (!r.reason.empty()) {
    rejected_.emplace_back(std::move(req), r.reason);
    return r;
  }
  r.accepted = true;
  insert_locked(std::move(req));
  cv_.notify_all();
  return r;
}

void RequestQueue::requeue(InferenceRequest req) {
  std::lock_guard lock(mu_);
  insert_locked(std::move(req));
  cv_.notify_all();
}

namespace {

// Both classes merged back into stream order.
void stream_order(std::vector<InferenceRequest>& rs) {
  std::sort(rs.begin(), rs.end(), [](const InferenceRequest& a, const InferenceRequest& b) {
    return a.arrival_time_s != b.arrival_time_s ? a.arrival_time_s < b.arrival_time_s : a.seq < b.seq;
  });
}

}  // namespace

std::vector<InferenceRequest> RequestQueue::take_arrived(double now) {
  std::lock_guard lock(mu_);
  std::vector<InferenceRequest> out;
  for (auto& q : pending_) {
    auto end = std::find_if(q.begin(), q.end(),
                            [&](const InferenceRequest& r) { return r.arrival_time_s > now; });
    out.insert(out.end(), std::make_move_iterator(q.begin()), std::make_move_iterator(end));
    q.erase(q.begin(), end);
  }
  stream_order(out);
  return out;
}

std::vector<InferenceRequest> RequestQueue::take_arrived_for(double now,
                                                             const std::set<std::string>& models) {
  std::lock_guard lock(mu_);
  std::vector<InferenceRequest> out;
  for (auto& q : pending_) {
    std::vector<InferenceRequest> keep;
    for (auto& r : q) {
      if (r.arrival_time_s <= now && models.count(r.model_id)) {
        out.push_back(std::move(r));
      } else {
        keep.push_back(std::move(r));
      }
    }
    q = std::move(keep);
  }
  stream_order(out);
  return out;
}

std::optional<double> RequestQueue::next_arrival() const {
  std::lock_guard lock(mu_);
  std::optional<double> t;
  for (const auto& q : pending_) {
    if (!q.empty() && (!t || q.front().arrival_time_s < *t)) t = q.front().arrival_time_s;
  }
  return t;
}

size_t RequestQueue::pending(UptimeClass c) const {
  std::lock_guard lock(mu_);
  return pending_[slot(c)].size();
}

size_t RequestQueue::pending_total() const {
  std::lock_guard lock(mu_);
  return pending_[0].size() + pending_[1].size();
}

std::vector<InferenceRequest> RequestQueue::snapshot(UptimeClass c) const {
  std::lock_guard lock(mu_);
  return pending_[slot(c)];
}

std::vector<std::pair<InferenceRequest, std::string>> RequestQueue::rejected() const {
  std::lock_guard lock(mu_);
  return rejected_;
}

bool RequestQueue::wait_for_pending(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return closed_ || !pending_[0].empty() || !pending_[1].empty(); });
  return !pending_[0].empty() || !pending_[1].empty();
}

void RequestQueue::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  cv_.notify_all();
}

bool RequestQueue::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

}  // namespace fusedinf
