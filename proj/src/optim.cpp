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

#include "snapml/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace snapml::optim {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double inf_norm(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

bool project(std::vector<double>& x, double bound) {
  if (!(bound > 0.0)) return false;
  bool active = false;
  for (double& v : x) {
    if (v > bound) {
      v = bound;
      active = true;
    } else if (v < -bound) {
      v = -bound;
      active = true;
    }
  }
  return active;
}

struct Pair {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

// Two-loop recursion: returns -H g.
std::vector<double> direction(const std::deque<Pair>& mem, const std::vector<double>& g) {
  std::vector<double> q = g;
  std::vector<double> alpha(mem.size());
  for (std::size_t i = mem.size(); i-- > 0;) {
    alpha[i] = mem[i].rho * dot(mem[i].s, q);
    for (std::size_t j = 0; j < q.size(); ++j) q[j] -= alpha[i] * mem[i].y[j];
  }
  const Pair& last = mem.back();
  const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
  for (double& v : q) v *= gamma;
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const double beta = mem[i].rho * dot(mem[i].y, q);
    for (std::size_t j = 0; j < q.size(); ++j) q[j] += (alpha[i] - beta) * mem[i].s[j];
  }
  for (double& v : q) v = -v;
  return q;
}

}  // namespace

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::kTarget: return "target";
    case StopReason::kGradient: return "gradient";
    case StopReason::kMaxIters: return "max_iters";
    case StopReason::kLineSearch: return "line_search";
    case StopReason::kStalled: return "stalled";
    case StopReason::kNonFinite: return "non_finite";
  }
  return "unknown";
}

MinimizeResult minimize_lbfgs(const Objective& fn, std::vector<double> x0,
                              const LbfgsOptions& opts) {
  const std::size_t n = x0.size();
  MinimizeResult res;
  project(x0, opts.bound);
  res.x = std::move(x0);
  std::vector<double> g(n);
  res.f = fn(res.x, g);
  res.evaluations = 1;
  res.grad_inf = inf_norm(g);
  res.trace.push_back(res.f);
  if (!std::isfinite(res.f)) {
    res.reason = StopReason::kNonFinite;
    return res;
  }
  if (res.f <= opts.f_target) {
    res.reason = StopReason::kTarget;
    return res;
  }
  if (res.grad_inf <= opts.grad_tol) {
    res.reason = StopReason::kGradient;
    return res;
  }

  std::deque<Pair> mem;
  int stalled = 0;
  std::vector<double> x_new(n);
  std::vector<double> g_new(n);
  res.reason = StopReason::kMaxIters;
  while (res.iters < opts.max_iters) {
    std::vector<double> d;
    if (!mem.empty()) d = direction(mem, g);
    if (mem.empty() || dot(d, g) >= 0.0) {
      mem.clear();
      d = g;
      const double scale = opts.initial_step / std::max(inf_norm(g), 1e-300);
      for (double& v : d) v *= -scale;
    }

    double step = 1.0;
    bool accepted = false;
    bool saw_nonfinite = false;
    bool clipped = false;
    double f_new = 0.0;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = res.x[i] + step * d[i];
      clipped = project(x_new, opts.bound);
      f_new = fn(x_new, g_new);
      ++res.evaluations;
      if (!std::isfinite(f_new)) {
        saw_nonfinite = true;
        step *= 0.1;
        continue;
      }
      double decrease = 0.0;
      for (std::size_t i = 0; i < n; ++i) decrease += g[i] * (x_new[i] - res.x[i]);
      if (f_new <= res.f + opts.armijo * decrease) {
        accepted = true;
        break;
      }
      // Quadratic interpolation of the step, safeguarded to [0.1, 0.5].
      const double slope = dot(g, d);
      const double denom = 2.0 * (f_new - res.f - step * slope);
      double next = denom > 0.0 ? -slope * step * step / denom : 0.5 * step;
      step = std::clamp(next, 0.1 * step, 0.5 * step);
    }
    if (!accepted) {
      if (!mem.empty()) {
        // Retry once from steepest descent before giving up.
        mem.clear();
        continue;
      }
      res.reason = saw_nonfinite ? StopReason::kNonFinite : StopReason::kLineSearch;
      break;
    }

    Pair p{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      p.s[i] = x_new[i] - res.x[i];
      p.y[i] = g_new[i] - g[i];
    }
    const double sy = dot(p.s, p.y);
    if (clipped) mem.clear();
    if (sy > 1e-12 * std::sqrt(dot(p.s, p.s) * dot(p.y, p.y)) && !clipped) {
      p.rho = 1.0 / sy;
      mem.push_back(std::move(p));
      if (static_cast<int>(mem.size()) > opts.memory) mem.pop_front();
    }

    stalled = f_new < res.f ? 0 : stalled + 1;
    res.x = x_new;
    g = g_new;
    res.f = f_new;
    res.grad_inf = inf_norm(g);
    ++res.iters;
    res.trace.push_back(res.f);
    if (res.f <= opts.f_target) {
      res.reason = StopReason::kTarget;
      break;
    }
    if (res.grad_inf <= opts.grad_tol) {
      res.reason = StopReason::kGradient;
      break;
    }
    if (opts.stall_iters > 0 && stalled >= opts.stall_iters) {
      res.reason = StopReason::kStalled;
      break;
    }
  }
  return res;
}

AdamState::AdamState(std::size_t n, double beta1, double beta2, double eps)
    : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamState::step(std::span<double> params, std::span<const double> grad, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

MinimizeResult minimize_adam(const Objective& fn, std::vector<double> x0,
                             const AdamOptions& opts) {
  const std::size_t n = x0.size();
  project(x0, opts.bound);
  std::vector<double> x = std::move(x0);
  std::vector<double> g(n);
  AdamState adam(n, opts.beta1, opts.beta2, opts.epsilon);

  MinimizeResult res;
  res.reason = StopReason::kMaxIters;
  double f = fn(x, g);
  res.evaluations = 1;
  res.x = x;
  res.f = f;
  res.grad_inf = inf_norm(g);
  res.trace.push_back(f);
  for (int it = 0;; ++it) {
    if (!std::isfinite(f)) {
      res.reason = StopReason::kNonFinite;
      break;
    }
    if (f < res.f) {
      res.x = x;
      res.f = f;
      res.grad_inf = inf_norm(g);
    }
    if (it > 0) res.trace.push_back(res.f);
    if (res.f <= opts.f_target) {
      res.reason = StopReason::kTarget;
      break;
    }
    if (inf_norm(g) <= opts.grad_tol) {
      res.reason = StopReason::kGradient;
      break;
    }
    if (it >= opts.max_iters) break;
    adam.step(x, g, opts.learning_rate);
    project(x, opts.bound);
    f = fn(x, g);
    ++res.evaluations;
    res.iters = it + 1;
  }
  return res;
}

}  // namespace snapml::optim
