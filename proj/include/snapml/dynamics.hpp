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

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "snapml/operators.hpp"
#include "snapml/pulses.hpp"

namespace snapml {

/// Fixed-step propagation U(T) = prod_j exp(Omega_j). Steps of equal length
/// are split at spline knots; Omega_j is the sixth-order Magnus expansion
/// from H at three Gauss-Legendre nodes of the interval.
struct PropagationConfig {
  int steps = 640;

  void validate() const;
};

struct InfidelityGradient {
  double value = 0.0;
  ParamVector gradient{};
};

/// Time evolution for one system, pulse duration and step count.
///
/// H(t) commutes with the cavity photon number, so the evolution is carried
/// out on the d independent qubit blocks H_k = -chi k b'b - xi b'^2 b^2 +
/// I(t)(b+b') + jQ(t)(b-b'). Each interval exponentiates the block's Magnus
/// generator through its Hermitian eigendecomposition. Gradients use the exact derivative of each
/// step exponential (divided differences in the eigenbasis) with an adjoint
/// sweep, so they match finite differences of the discretized objective.
///
/// Instances are immutable after construction and may be shared across threads.
class GateSimulator {
 public:
  GateSimulator(SystemSpec sys, PropagationConfig cfg = {}, double duration = kDefaultDuration);

  const SystemSpec& system() const { return sys_; }
  const PropagationConfig& config() const { return cfg_; }
  double duration() const { return duration_; }

  /// Dense propagator on the full d*qubit_levels space.
  ComplexOperator propagate(const PulseParams& pulse) const;

  double infidelity(const PulseParams& pulse, const SnapSpec& spec) const;

  /// Infidelity and its gradient with respect to the 32 flat coefficients.
  InfidelityGradient infidelity_gradient(const PulseParams& pulse, const SnapSpec& spec) const;

  /// Envelope samples (I, Q) at the step midpoints.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> envelopes(const PulseParams& pulse) const;

 private:
  void check_pulse(const PulseParams& pulse) const;

  SystemSpec sys_;
  PropagationConfig cfg_;
  double duration_;
  Eigen::MatrixXd samples_;                // steps x kCoeffsPerChannel, step midpoints
  std::vector<double> widths_;             // interval lengths
  std::array<Eigen::MatrixXd, 3> nodes_;   // basis values at the Gauss nodes of each interval
  ComplexOperator bx_;       // qubit factor
  ComplexOperator by_;
  std::vector<Eigen::VectorXd> block_diag_;  // static energies of each qudit block
};

ComplexOperator propagate(const SystemSpec& sys, const PulseParams& pulse,
                          const PropagationConfig& cfg = {});

double infidelity(const SystemSpec& sys, const PulseParams& pulse, const SnapSpec& spec,
                  const PropagationConfig& cfg = {});

ParamVector infidelity_gradient(const SystemSpec& sys, const PulseParams& pulse,
                                const SnapSpec& spec, const PropagationConfig& cfg = {});

}  // namespace snapml
