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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "fixtures.hpp"
#include "snapml/dynamics.hpp"
#include "snapml/errors.hpp"

namespace snapml {
namespace {

using std::numbers::pi;

ComplexOperator full_hamiltonian(const SystemSpec& sys, const PulseParams& p,
                                 const SplineBasis& basis, double t) {
  const auto [bx, by] = control_operators(sys);
  return static_hamiltonian(sys) + eval_envelope(p.theta_i, basis, t) * bx +
         eval_envelope(p.theta_q, basis, t) * by;
}

// Dense 15x15 midpoint products exp(-j H(t_m) dt), no block structure.
ComplexOperator dense_midpoint(const SystemSpec& sys, const PulseParams& p, int steps) {
  const SplineBasis basis = make_basis(kCoeffsPerChannel, p.duration);
  const double dt = p.duration / steps;
  ComplexOperator u = ComplexOperator::Identity(sys.dim(), sys.dim());
  for (int m = 0; m < steps; ++m) {
    const ComplexOperator h = full_hamiltonian(sys, p, basis, (m + 0.5) * dt);
    u = ComplexOperator((Complex(0.0, -dt) * h).exp()) * u;
  }
  return u;
}

// Dense sixth-order Magnus on the full space over uniform steps split at the
// spline knots, with the general matrix exponential.
ComplexOperator dense_magnus(const SystemSpec& sys, const PulseParams& p, int steps) {
  const SplineBasis basis = make_basis(kCoeffsPerChannel, p.duration);
  std::vector<double> edges;
  for (int m = 0; m <= steps; ++m) edges.push_back(p.duration * m / steps);
  for (double k : basis.knots()) edges.push_back(k);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [&](double a, double b) { return b - a < 1e-9 * p.duration / steps; }),
              edges.end());
  const auto com = [](const ComplexOperator& a, const ComplexOperator& b) -> ComplexOperator {
    return a * b - b * a;
  };
  const Complex mj(0.0, -1.0);
  const double r = std::sqrt(15.0) / 10.0;
  ComplexOperator u = ComplexOperator::Identity(sys.dim(), sys.dim());
  for (std::size_t j = 0; j + 1 < edges.size(); ++j) {
    const double t0 = edges[j], h = edges[j + 1] - edges[j];
    const ComplexOperator A1 = mj * full_hamiltonian(sys, p, basis, t0 + (0.5 - r) * h);
    const ComplexOperator A2 = mj * full_hamiltonian(sys, p, basis, t0 + 0.5 * h);
    const ComplexOperator A3 = mj * full_hamiltonian(sys, p, basis, t0 + (0.5 + r) * h);
    const ComplexOperator a1 = h * A2;
    const ComplexOperator a2 = (std::sqrt(15.0) * h / 3.0) * (A3 - A1);
    const ComplexOperator a3 = (10.0 * h / 3.0) * (A3 - 2.0 * A2 + A1);
    const ComplexOperator c1 = com(a1, a2);
    const ComplexOperator c2 = (-1.0 / 60.0) * com(a1, 2.0 * a3 + c1);
    const ComplexOperator omega =
        a1 + a3 / 12.0 + (1.0 / 240.0) * com(-20.0 * a1 - a3 + c1, a2 + c2);
    u = ComplexOperator(omega.exp()) * u;
  }
  return u;
}

double fd_relative_error(const GateSimulator& sim, const PulseParams& p, const SnapSpec& spec) {
  const ParamVector grad = sim.infidelity_gradient(p, spec).gradient;
  const ParamVector x = p.flat();
  const double h = 1e-6;
  double norm = 0.0, err = 0.0;
  for (int k = 0; k < kPulseParams; ++k) {
    ParamVector plus = x, minus = x;
    plus[k] += h;
    minus[k] -= h;
    const double fd = (sim.infidelity(PulseParams::from_flat(plus), spec) -
                       sim.infidelity(PulseParams::from_flat(minus), spec)) /
                      (2 * h);
    norm = std::max(norm, std::abs(grad[k]));
    err = std::max(err, std::abs(fd - grad[k]));
  }
  return err / norm;
}

TEST(PropagationConfig, Validation) {
  EXPECT_NO_THROW(PropagationConfig{}.validate());
  EXPECT_THROW(PropagationConfig{15}.validate(), std::invalid_argument);
}

TEST(Propagate, MatchesDenseMagnusOracle) {
  const SystemSpec sys;
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 3; ++trial) {
    const PulseParams p = testing::random_pulse(rng);
    const ComplexOperator fast = propagate(sys, p, {100});
    const ComplexOperator ref = dense_magnus(sys, p, 100);
    EXPECT_LT((fast - ref).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Propagate, AgreesWithFineMidpointReference) {
  // Richardson-extrapolated dense midpoint products converge to the exact
  // propagator independently of the Magnus construction.
  const SystemSpec sys;
  std::mt19937_64 rng(12);
  const PulseParams p = testing::random_pulse(rng);
  const ComplexOperator coarse = dense_midpoint(sys, p, 8192);
  const ComplexOperator fine = dense_midpoint(sys, p, 16384);
  const ComplexOperator ref = (4.0 * fine - coarse) / 3.0;
  const ComplexOperator fast = propagate(sys, p);
  EXPECT_LT((fast - ref).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(std::abs(trace_fidelity(fast, {0.9, 2}, sys) - trace_fidelity(ref, {0.9, 2}, sys)), 1e-8);
  const ComplexOperator finer = propagate(sys, p, {4 * PropagationConfig{}.steps});
  EXPECT_LT((finer - ref).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Propagate, ZeroPulseFixesGroundSubspace) {
  const SystemSpec sys;
  const ComplexOperator u = propagate(sys, PulseParams{});
  for (int k = 0; k < sys.d; ++k) {
    const int idx = k * sys.qubit_levels;
    for (int r = 0; r < sys.dim(); ++r) {
      EXPECT_NEAR(std::abs(u(r, idx) - Complex(r == idx ? 1.0 : 0.0, 0.0)), 0.0, 1e-14);
    }
  }
}

TEST(Propagate, Unitary) {
  const SystemSpec sys;
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    EXPECT_LE(unitarity_defect(propagate(sys, testing::random_pulse(rng, 0.2))), 1e-9);
  }
}

TEST(Propagate, StepDoublingConvergence) {
  const SystemSpec sys;
  const int steps = PropagationConfig{}.steps;
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const PulseParams p = testing::random_pulse(rng);
    const SnapSpec spec{0.9, 2};
    const double coarse = infidelity(sys, p, spec, {steps});
    const double fine = infidelity(sys, p, spec, {2 * steps});
    EXPECT_LT(std::abs(coarse - fine), 1e-8);
  }
}

TEST(Propagate, SixthOrderConvergence) {
  // Halving the step shrinks the error about 64-fold.
  const SystemSpec sys;
  std::mt19937_64 rng(13);
  const PulseParams p = testing::random_pulse(rng);
  const SnapSpec spec{-1.2, 2};
  const double f1 = infidelity(sys, p, spec, {160});
  const double f2 = infidelity(sys, p, spec, {320});
  const double f3 = infidelity(sys, p, spec, {640});
  const double ratio = (f1 - f2) / (f2 - f3);
  EXPECT_GT(ratio, 40.0);
  EXPECT_LT(ratio, 90.0);
}

TEST(Propagate, NonFinitePulse) {
  PulseParams p;
  p.theta_q[4] = std::numeric_limits<double>::infinity();
  const GateSimulator sim(SystemSpec{});
  EXPECT_THROW(sim.propagate(p), InputError);
  EXPECT_THROW(sim.infidelity(p, {0.0, 2}), InputError);
  EXPECT_THROW(sim.infidelity_gradient(p, {0.0, 2}), InputError);
}

TEST(Infidelity, ZeroPulseExamples) {
  const GateSimulator sim(SystemSpec{});
  EXPECT_LE(sim.infidelity(PulseParams{}, {0.0, 2}), 1e-12);
  EXPECT_NEAR(sim.infidelity(PulseParams{}, {pi, 2}), 0.64, 1e-12);
}

TEST(Infidelity, InRange) {
  const GateSimulator sim(SystemSpec{});
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const double v = sim.infidelity(testing::random_pulse(rng, 0.1), {trial * 0.6 - 3.0, 2});
    EXPECT_GE(v, -1e-12);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Infidelity, BitIdenticalOnRepeat) {
  const GateSimulator sim(SystemSpec{});
  std::mt19937_64 rng(6);
  const PulseParams p = testing::random_pulse(rng);
  const double a = sim.infidelity(p, {1.3, 2});
  const double b = sim.infidelity(p, {1.3, 2});
  EXPECT_EQ(a, b);
  EXPECT_EQ(sim.infidelity_gradient(p, {1.3, 2}).gradient,
            sim.infidelity_gradient(p, {1.3, 2}).gradient);
}

TEST(Gradient, ValueMatchesInfidelity) {
  const GateSimulator sim(SystemSpec{});
  std::mt19937_64 rng(7);
  const PulseParams p = testing::random_pulse(rng);
  EXPECT_NEAR(sim.infidelity_gradient(p, {-0.4, 2}).value, sim.infidelity(p, {-0.4, 2}), 1e-14);
}

TEST(Gradient, MatchesCentralDifferencesOnRandomPulses) {
  const GateSimulator sim(SystemSpec{});
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> angle(-pi, pi);
  for (int trial = 0; trial < 20; ++trial) {
    const PulseParams p = testing::random_pulse(rng);
    const SnapSpec spec{angle(rng), 2};
    EXPECT_LE(fd_relative_error(sim, p, spec), 1e-5) << "trial " << trial;
  }
}

TEST(Gradient, OtherLevelsAndSizes) {
  SystemSpec sys;
  sys.d = 4;
  sys.qubit_levels = 2;
  const GateSimulator sim(sys);
  std::mt19937_64 rng(9);
  for (int n = 0; n < sys.d; ++n) {
    EXPECT_LE(fd_relative_error(sim, testing::random_pulse(rng), {0.8, n}), 1e-5);
  }
}

TEST(Gradient, StationaryAtIdentity) {
  const GateSimulator sim(SystemSpec{});
  const auto g = sim.infidelity_gradient(PulseParams{}, {0.0, 2});
  double norm = 0.0;
  for (double v : g.gradient) norm += v * v;
  EXPECT_LE(std::sqrt(norm), 1e-9);
}

TEST(GateSimulator, RejectsMismatchedDuration) {
  const GateSimulator sim(SystemSpec{});
  PulseParams p;
  p.duration = 200.0;
  EXPECT_THROW(sim.infidelity(p, {0.0, 2}), std::invalid_argument);
  // The free functions build a simulator for the pulse's own duration.
  EXPECT_LE(infidelity(SystemSpec{}, p, {0.0, 2}), 1e-12);
}

TEST(GateSimulator, EnvelopesAtMidpoints) {
  const GateSimulator sim(SystemSpec{}, {64});
  std::mt19937_64 rng(10);
  const PulseParams p = testing::random_pulse(rng);
  const auto [i_env, q_env] = sim.envelopes(p);
  const SplineBasis basis = make_basis(16, 290.0);
  ASSERT_EQ(i_env.size(), 64);
  for (int m = 0; m < 64; ++m) {
    const double t = (m + 0.5) * 290.0 / 64;
    EXPECT_NEAR(i_env[m], eval_envelope(p.theta_i, basis, t), 1e-15);
    EXPECT_NEAR(q_env[m], eval_envelope(p.theta_q, basis, t), 1e-15);
  }
}

}  // namespace
}  // namespace snapml
