// Copyright 2026 The snapml Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <tuple>
#include <vector>

#include "snapml/dynamics.hpp"
#include "snapml/operators.hpp"
#include "snapml/pulses.hpp"

namespace snapml {

struct Record {
  double alpha = 0.0;
  ParamVector theta{};
  double infidelity = 0.0;

  bool operator==(const Record&) const = default;
};

/// Provenance carried next to the records.
struct DatasetMeta {
  SystemSpec system{};
  int level = 2;
  int steps = PropagationConfig{}.steps;
  double duration = kDefaultDuration;
  std::uint64_t seed = 0;
  double scale = 0.0;       // target normalization, 0 when unset
  std::string source;       // e.g. "optimize", "distill", "smooth(50)"
  std::string options;      // JSON snapshot of generation options

  bool operator==(const DatasetMeta&) const = default;
};

struct Dataset {
  std::vector<Record> records;
  DatasetMeta meta;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  bool operator==(const Dataset&) const = default;

  /// Throws std::invalid_argument unless angles are strictly increasing.
  void check_sorted() const;
};

/// alpha_i = -pi + (i + 0.5) * 2 pi / n.
std::vector<double> angle_grid(int n);

Dataset filter_by_infidelity(const Dataset& ds, double threshold = 1e-4);

/// Index-centred moving average of theta over `window` records. Even windows
/// are widened by one to stay centred; windows are truncated at the edges.
/// Angles are kept and infidelities recomputed with `sim`.
Dataset smooth(const Dataset& ds, int window, const GateSimulator& sim);

/// Same averaging without recomputing infidelities (stored values are kept).
Dataset smooth_parameters(const Dataset& ds, int window);

/// Random disjoint split. Validation and test sizes are round(f*n), at least
/// one each; training takes the remainder. Each part keeps ascending angle
/// order.
std::tuple<Dataset, Dataset, Dataset> split(const Dataset& ds, double train = 0.8,
                                            double val = 0.1, double test = 0.1,
                                            std::uint64_t seed = 0);

/// max |theta| over all records.
double max_abs_theta(const Dataset& ds);

/// Writes `path` (CSV table) and `path` + ".meta.json".
void save(const Dataset& ds, const std::filesystem::path& path);
Dataset load(const std::filesystem::path& path);

std::filesystem::path meta_path(const std::filesystem::path& path);

/// Shortest decimal that parses back to exactly `v`.
std::string format_double(double v);
double parse_double(const std::string& text);

}  // namespace snapml
