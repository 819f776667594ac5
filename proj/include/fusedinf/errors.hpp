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

#include <stdexcept>
#include <string>

namespace fusedinf {

// Base of every error raised by the library. Each subclass maps to one of the
// failure kinds a caller is expected to distinguish (CLI exit codes, protocol
// replies).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeMismatch : public Error {
 public:
  ShapeMismatch(std::string node_id, const std::string& detail)
      : Error("shape mismatch at '" + node_id + "': " + detail),
        node_id_(std::move(node_id)) {}
  const std::string& node_id() const noexcept { return node_id_; }

 private:
  std::string node_id_;
};

class CycleDetected : public Error {
 public:
  CycleDetected() : Error("cycle detected") {}
};

class MissingWeight : public Error {
 public:
  explicit MissingWeight(const std::string& name)
      : Error("missing weight '" + name + "'") {}
};

class DuplicateModelId : public Error {
 public:
  explicit DuplicateModelId(std::string model_id)
      : Error("duplicate model id '" + model_id + "'"),
        model_id_(std::move(model_id)) {}
  const std::string& model_id() const noexcept { return model_id_; }

 private:
  std::string model_id_;
};

class ValidationFailed : public Error {
 public:
  ValidationFailed(std::string model_id, const std::string& detail)
      : Error("validation failed for '" + model_id + "': " + detail),
        model_id_(std::move(model_id)) {}
  const std::string& model_id() const noexcept { return model_id_; }

 private:
  std::string model_id_;
};

class NotFound : public Error {
 public:
  explicit NotFound(const std::string& model_id)
      : Error("model not found '" + model_id + "'") {}
};

class UnknownSubgraph : public Error {
 public:
  explicit UnknownSubgraph(const std::string& model_id)
      : Error("unknown sub-graph '" + model_id + "'") {}
};

class MissingInput : public Error {
 public:
  explicit MissingInput(const std::string& model_id)
      : Error("missing input for '" + model_id + "'") {}
};

class BudgetExceeded : public Error {
 public:
  BudgetExceeded(double needed_mib, double budget_mib)
      : Error("budget exceeded: needs " + std::to_string(needed_mib) +
              " MiB, budget " + std::to_string(budget_mib) + " MiB") {}
};

class Unschedulable : public Error {
 public:
  explicit Unschedulable(const std::string& model_id)
      : Error("unschedulable model '" + model_id + "'") {}
};

// Malformed file content (model JSON, DAG JSON, cost table, scenario).
class ParseError : public Error {
 public:
  using Error::Error;
};

class ScenarioParse : public ParseError {
 public:
  ScenarioParse(int line, const std::string& detail)
      : ParseError("scenario line " + std::to_string(line) + ": " + detail),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

// Filesystem failures and corrupt binary containers.
class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& detail)
      : Error(path + ": " + detail) {}
};

}  // namespace fusedinf
