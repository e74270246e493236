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
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace snapml {

inline constexpr int kCoeffsPerChannel = 16;
inline constexpr int kPulseParams = 2 * kCoeffsPerChannel;
inline constexpr double kDefaultDuration = 290.0;

using ParamVector = std::array<double, kPulseParams>;

/// Quadratic B-spline coefficients (rad/ns) for the in-phase and quadrature
/// envelopes. Flat layout is [theta_i..., theta_q...].
struct PulseParams {
  std::array<double, kCoeffsPerChannel> theta_i{};
  std::array<double, kCoeffsPerChannel> theta_q{};
  double duration = kDefaultDuration;

  ParamVector flat() const;
  static PulseParams from_flat(std::span<const double> values, double duration = kDefaultDuration);

  bool all_finite() const;
  bool operator==(const PulseParams&) const = default;
};

/// Clamped uniform B-spline basis of degree 2 on [0, duration].
class SplineBasis {
 public:
  static constexpr int kDegree = 2;

  SplineBasis(int n_basis, double duration);

  int degree() const { return kDegree; }
  int size() const { return n_basis_; }
  double duration() const { return duration_; }
  const std::vector<double>& knots() const { return knots_; }

  /// Values of all basis functions at t. Throws DomainError outside [0, duration].
  std::vector<double> values(double t) const;

  /// Index of the knot span [knots[s], knots[s+1]) containing t; the final
  /// point t == duration belongs to the last non-empty span.
  int span_index(double t) const;

  /// Row m holds the basis values at time (m + offset) * duration / steps,
  /// offset in [0, 1].
  Eigen::MatrixXd sample_steps(int steps, double offset) const;

  /// Row m holds the basis values at the midpoint of step m of `steps` equal steps.
  Eigen::MatrixXd sample_midpoints(int steps) const { return sample_steps(steps, 0.5); }

 private:
  int n_basis_;
  double duration_;
  std::vector<double> knots_;
};

SplineBasis make_basis(int n_basis, double duration);

/// sum_k coeffs[k] * B_k(t).
double eval_envelope(std::span<const double> coeffs, const SplineBasis& basis, double t);

}  // namespace snapml
