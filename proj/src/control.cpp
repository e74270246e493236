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

#include "snapml/control.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <stdexcept>

#include "json.hpp"

#include "snapml/errors.hpp"
#include "snapml/optim.hpp"
#include "snapml/parallel.hpp"

namespace snapml {
namespace {

PulseParams random_pulse(std::uint64_t seed, double scale, double duration) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  ParamVector v{};
  for (double& x : v) x = dist(rng);
  return PulseParams::from_flat(v, duration);
}

struct Attempt {
  optim::MinimizeResult result;
  double grad_inf = 0.0;
};

Attempt run_attempt(const GateSimulator& sim, const SnapSpec& spec, const PulseParams& start,
                    const OptimizeOptions& opts, std::uint64_t jitter_seed) {
  const double duration = start.duration;
  optim::Objective fn = [&](std::span<const double> x, std::span<double> grad) {
    try {
      const auto r = sim.infidelity_gradient(PulseParams::from_flat(x, duration), spec);
      std::copy(r.gradient.begin(), r.gradient.end(), grad.begin());
      return r.value;
    } catch (const InputError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  const ParamVector flat = start.flat();
  std::vector<double> x0(flat.begin(), flat.end());

  // A stationary start that is not at target (e.g. the zero pulse for
  // alpha != 0) would stop immediately on the gradient test.
  {
    std::vector<double> g(x0.size());
    const double f0 = fn(x0, g);
    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::abs(v));
    if (std::isfinite(f0) && f0 > opts.target_infidelity && gmax <= opts.grad_tol) {
      std::mt19937_64 rng(jitter_seed);
      std::uniform_real_distribution<double> dist(-opts.jitter, opts.jitter);
      for (double& v : x0) v += dist(rng);
    }
  }

  Attempt a;
  if (opts.optimizer == OptimizerKind::kLbfgs) {
    optim::LbfgsOptions lo;
    lo.max_iters = opts.max_iters;
    lo.grad_tol = opts.grad_tol;
    lo.f_target = opts.target_infidelity;
    lo.bound = opts.amplitude_bound;
    a.result = optim::minimize_lbfgs(fn, std::move(x0), lo);
  } else {
    optim::AdamOptions ao;
    ao.max_iters = opts.max_iters;
    ao.grad_tol = opts.grad_tol;
    ao.f_target = opts.target_infidelity;
    ao.bound = opts.amplitude_bound;
    ao.learning_rate = opts.adam_learning_rate;
    a.result = optim::minimize_adam(fn, std::move(x0), ao);
  }
  a.grad_inf = a.result.grad_inf;
  return a;
}

}  // namespace

InitMode parse_init_mode(const std::string& s) {
  if (s == "continuation") return InitMode::kContinuation;
  if (s == "random") return InitMode::kRandom;
  if (s == "explicit") return InitMode::kExplicit;
  throw std::invalid_argument("unknown init mode '" + s + "'");
}

std::string to_string(InitMode m) {
  switch (m) {
    case InitMode::kContinuation: return "continuation";
    case InitMode::kRandom: return "random";
    case InitMode::kExplicit: return "explicit";
  }
  return "unknown";
}

void OptimizeOptions::validate() const {
  if (max_iters < 1) throw std::invalid_argument("OptimizeOptions: max_iters must be >= 1");
  if (!(grad_tol > 0.0) || !(target_infidelity > 0.0)) {
    throw std::invalid_argument("OptimizeOptions: tolerances must be positive");
  }
  if (restarts < 0) throw std::invalid_argument("OptimizeOptions: restarts must be >= 0");
  if (amplitude_bound < 0.0) throw std::invalid_argument("OptimizeOptions: negative bound");
}

std::string OptimizeOptions::to_json() const {
  nlohmann::json j{
      {"max_iters", max_iters},
      {"grad_tol", grad_tol},
      {"target_infidelity", target_infidelity},
      {"restarts", restarts},
      {"init_mode", to_string(init_mode)},
      {"optimizer", optimizer == OptimizerKind::kLbfgs ? "lbfgs" : "adam"},
      {"seed", seed},
      {"init_scale", init_scale},
      {"jitter", jitter},
      {"amplitude_bound", amplitude_bound},
  };
  return j.dump();
}

OptimizedSample optimize_pulse(const GateSimulator& sim, const SnapSpec& spec,
                               const PulseParams& init, const OptimizeOptions& opts) {
  opts.validate();
  const std::uint64_t base = mix_seed(opts.seed, std::bit_cast<std::uint64_t>(spec.alpha));

  OptimizedSample best;
  best.alpha = spec.alpha;
  double best_grad = std::numeric_limits<double>::infinity();
  bool have_best = false;
  const int total = 1 + opts.restarts;
  for (int k = 0; k < total; ++k) {
    PulseParams start = init;
    if (k > 0 || opts.init_mode == InitMode::kRandom) {
      start = random_pulse(mix_seed(base, 2 * k + 1), opts.init_scale, init.duration);
    }
    const Attempt a = run_attempt(sim, spec, start, opts, mix_seed(base, 2 * k + 2));
    best.attempts = k + 1;
    if (a.result.reason == optim::StopReason::kNonFinite && !std::isfinite(a.result.f)) continue;
    if (!have_best || a.result.f < best.infidelity) {
      have_best = true;
      best.params = PulseParams::from_flat(a.result.x, init.duration);
      best.infidelity = a.result.f;
      best.iters = a.result.iters;
      best.trace = a.result.trace;
      best_grad = a.grad_inf;
    }
    if (best.infidelity <= opts.target_infidelity) break;
  }
  if (!have_best) {
    best.params = init;
    best.infidelity = sim.infidelity(init, spec);
  }
  best.converged = best.infidelity <= opts.target_infidelity || best_grad <= opts.grad_tol;
  return best;
}

OptimizedSample optimize_pulse(const SystemSpec& sys, const SnapSpec& spec,
                               const PulseParams& init, const OptimizeOptions& opts,
                               const PropagationConfig& cfg) {
  return optimize_pulse(GateSimulator(sys, cfg, init.duration), spec, init, opts);
}

Dataset generate_dataset(const GateSimulator& sim, int n, int level, const OptimizeOptions& opts,
                         int jobs, const ProgressFn& progress) {
  if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
  if (level < 0 || level >= sim.system().d) {
    throw IndexError("generate_dataset: level outside the qudit");
  }
  opts.validate();
  const std::vector<double> alphas = angle_grid(n);
  std::vector<OptimizedSample> solved(n);
  PulseParams zero;
  zero.duration = sim.duration();

  if (opts.init_mode == InitMode::kContinuation) {
    const int first_right = static_cast<int>(
        std::lower_bound(alphas.begin(), alphas.end(), 0.0) - alphas.begin());
    int done = 0;
    auto sweep = [&](int begin, int end, int step) {
      PulseParams start = zero;
      for (int i = begin; i != end; i += step) {
        solved[i] = optimize_pulse(sim, SnapSpec{alphas[i], level}, start, opts);
        start = solved[i].params;
        if (progress) progress(++done, n, solved[i]);
      }
    };
    sweep(first_right, n, 1);
    sweep(first_right - 1, -1, -1);
  } else {
    std::atomic<int> done{0};
    std::mutex mu;
    parallel_for(alphas.size(), jobs, [&](std::size_t i) {
      solved[i] = optimize_pulse(sim, SnapSpec{alphas[i], level}, zero, opts);
      const int d = ++done;
      if (progress) {
        std::lock_guard lock(mu);
        progress(d, n, solved[i]);
      }
    });
  }

  Dataset ds;
  ds.meta.system = sim.system();
  ds.meta.level = level;
  ds.meta.steps = sim.config().steps;
  ds.meta.duration = sim.duration();
  ds.meta.seed = opts.seed;
  ds.meta.source = "optimize";
  ds.meta.options = opts.to_json();
  ds.records.reserve(n);
  for (int i = 0; i < n; ++i) {
    ds.records.push_back(Record{alphas[i], solved[i].params.flat(), solved[i].infidelity});
  }
  return ds;
}

}  // namespace snapml
