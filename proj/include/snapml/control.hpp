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
#include <functional>
#include <string>
#include <vector>

#include "snapml/datasets.hpp"
#include "snapml/dynamics.hpp"

namespace snapml {

enum class InitMode { kContinuation, kRandom, kExplicit };
enum class OptimizerKind { kLbfgs, kAdam };

InitMode parse_init_mode(const std::string& s);
std::string to_string(InitMode m);

struct OptimizeOptions {
  int max_iters = 500;
  double grad_tol = 1e-7;
  double target_infidelity = 1e-5;
  int restarts = 3;
  InitMode init_mode = InitMode::kContinuation;
  OptimizerKind optimizer = OptimizerKind::kLbfgs;
  std::uint64_t seed = 0;
  double init_scale = 0.05;      // random init ~ U(-init_scale, init_scale) rad/ns
  double jitter = 1e-3;          // perturbation applied to a stationary start
  double amplitude_bound = 0.0;  // box constraint on coefficients, 0 = none
  double adam_learning_rate = 1e-3;

  void validate() const;
  std::string to_json() const;
};

struct OptimizedSample {
  double alpha = 0.0;
  PulseParams params{};
  double infidelity = 1.0;
  bool converged = false;
  int iters = 0;
  int attempts = 0;
  std::vector<double> trace;  // best-so-far infidelity per iteration of the kept attempt
};

/// Minimizes the infidelity of SNAP(spec) starting from `init`. When the
/// result is above target, up to `restarts` further attempts start from
/// seeded random coefficients; the best attempt is returned.
OptimizedSample optimize_pulse(const GateSimulator& sim, const SnapSpec& spec,
                               const PulseParams& init, const OptimizeOptions& opts);

OptimizedSample optimize_pulse(const SystemSpec& sys, const SnapSpec& spec,
                               const PulseParams& init, const OptimizeOptions& opts,
                               const PropagationConfig& cfg = {});

using ProgressFn = std::function<void(int done, int total, const OptimizedSample&)>;

/// Optimizes `n` grid angles for SNAP on `level`. Continuation mode sweeps
/// outward from alpha = 0 reusing each solution as the next start; random
/// mode solves angles independently on `jobs` threads.
Dataset generate_dataset(const GateSimulator& sim, int n, int level, const OptimizeOptions& opts,
                         int jobs = 1, const ProgressFn& progress = {});

}  // namespace snapml
