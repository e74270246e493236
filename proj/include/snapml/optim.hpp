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

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace snapml::optim {

/// Writes the gradient into `grad` and returns the objective value.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

enum class StopReason { kTarget, kGradient, kMaxIters, kLineSearch, kStalled, kNonFinite };

std::string to_string(StopReason r);

struct LbfgsOptions {
  int memory = 10;
  int max_iters = 500;
  double grad_tol = 1e-7;       // infinity norm
  double f_target = -1e300;     // stop once f <= f_target
  int max_backtracks = 40;
  double armijo = 1e-4;
  double initial_step = 1e-2;   // infinity-norm length of the first steepest-descent step
  double bound = 0.0;           // |x_i| <= bound when positive
  int stall_iters = 5;          // stop after this many iterations without strict decrease
};

struct MinimizeResult {
  std::vector<double> x;
  double f = 0.0;
  double grad_inf = 0.0;
  int iters = 0;
  int evaluations = 0;
  StopReason reason = StopReason::kMaxIters;
  std::vector<double> trace;  // best objective after each iteration, starting with f(x0)
};

/// Limited-memory BFGS with Armijo backtracking. With a positive bound every
/// trial point is projected onto the box and the memory is reset whenever the
/// projection is active.
MinimizeResult minimize_lbfgs(const Objective& fn, std::vector<double> x0,
                              const LbfgsOptions& opts = {});

struct AdamOptions {
  int max_iters = 2000;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_tol = 1e-7;
  double f_target = -1e300;
  double bound = 0.0;
};

/// Adaptive-moment descent returning the best iterate seen.
MinimizeResult minimize_adam(const Objective& fn, std::vector<double> x0,
                             const AdamOptions& opts = {});

/// Adam update state for a flat parameter vector.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(std::span<double> params, std::span<const double> grad, double lr);
  long steps() const { return t_; }

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
};

}  // namespace snapml::optim
