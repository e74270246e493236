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

// Shared helpers for the test binaries.

#pragma once

#include <filesystem>
#include <random>

#include "snapml/control.hpp"
#include "snapml/datasets.hpp"

namespace snapml::testing {

inline std::filesystem::path cache_dir() { return SNAPML_TEST_CACHE; }

/// Continuation sweep over n grid angles for SNAP on level 2, cached on disk
/// so that test binaries share one optimization run.
inline Dataset sweep_dataset(int n) {
  const auto path = cache_dir() / ("sweep" + std::to_string(n) + ".csv");
  if (std::filesystem::exists(path) && std::filesystem::exists(meta_path(path))) {
    try {
      return load(path);
    } catch (const std::exception&) {
      // Regenerate below.
    }
  }
  const GateSimulator sim(SystemSpec{});
  const Dataset ds = generate_dataset(sim, n, 2, OptimizeOptions{});
  save(ds, path);
  return ds;
}

inline PulseParams random_pulse(std::mt19937_64& rng, double scale = 0.05) {
  std::uniform_real_distribution<double> u(-scale, scale);
  ParamVector p;
  for (double& v : p) v = u(rng);
  return PulseParams::from_flat(p);
}

}  // namespace snapml::testing
