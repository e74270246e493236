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
#include <functional>
#include <string>
#include <vector>

#include "snapml/networks.hpp"

namespace snapml {

enum class Stage { kTrained, kFinetuned, kDistilled };

std::string to_string(Stage s);
Stage parse_stage(const std::string& s);

struct DsePoint {
  std::string name;
  MlpConfig config;  // empty widths for composite models
  std::string descriptor;  // free-form description of composite models
  std::size_t params = 0;
  double test_mse = 0.0;
  double mean_infidelity = 0.0;
  double max_infidelity = 0.0;
  Stage stage = Stage::kTrained;
};

/// Hidden depth and width bounds; widths are drawn log-uniformly.
struct ConfigRanges {
  int min_depth = 2;
  int max_depth = 10;
  int min_width = 4;
  int max_width = 64;

  void validate() const;
};

std::vector<MlpConfig> random_configs(int n, std::uint64_t seed, const ConfigRanges& ranges = {});

enum class ParetoObjective { kMeanInfidelity, kMaxInfidelity };

/// True when a is no worse than b in both parameter count and infidelity and
/// strictly better in at least one.
bool dominates(const DsePoint& a, const DsePoint& b,
               ParetoObjective objective = ParetoObjective::kMeanInfidelity);

/// Undominated points sorted by parameter count (ties kept).
std::vector<DsePoint> pareto_front(const std::vector<DsePoint>& points,
                                   ParetoObjective objective = ParetoObjective::kMeanInfidelity);

struct ExploreOptions {
  TrainOptions train;
  int eval_grid = 256;
  int level = 2;
  int jobs = 1;
};

using ExploreProgress = std::function<void(std::size_t done, std::size_t total, const DsePoint&)>;

/// Trains and evaluates each configuration. Trainings run concurrently; the
/// result order follows `configs`.
std::vector<DsePoint> explore(const std::vector<MlpConfig>& configs, const Dataset& train,
                              const Dataset& val, const Dataset& test, const GateSimulator& sim,
                              const ExploreOptions& opts, const ExploreProgress& progress = {});

/// CSV: name,params,test_mse,mean_infidelity,max_infidelity,stage,widths
void save_results(const std::vector<DsePoint>& points, const std::filesystem::path& path);
std::vector<DsePoint> load_results(const std::filesystem::path& path);

}  // namespace snapml
