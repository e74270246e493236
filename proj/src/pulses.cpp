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

#include "snapml/pulses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "snapml/errors.hpp"

namespace snapml {

ParamVector PulseParams::flat() const {
  ParamVector out{};
  std::copy(theta_i.begin(), theta_i.end(), out.begin());
  std::copy(theta_q.begin(), theta_q.end(), out.begin() + kCoeffsPerChannel);
  return out;
}

PulseParams PulseParams::from_flat(std::span<const double> values, double duration) {
  if (values.size() != kPulseParams) {
    throw InvalidDimension("PulseParams: expected " + std::to_string(kPulseParams) +
                           " values, got " + std::to_string(values.size()));
  }
  if (!(duration > 0.0)) throw std::invalid_argument("PulseParams: duration must be positive");
  PulseParams p;
  std::copy_n(values.begin(), kCoeffsPerChannel, p.theta_i.begin());
  std::copy_n(values.begin() + kCoeffsPerChannel, kCoeffsPerChannel, p.theta_q.begin());
  p.duration = duration;
  return p;
}

bool PulseParams::all_finite() const {
  auto finite = [](double v) { return std::isfinite(v); };
  return std::all_of(theta_i.begin(), theta_i.end(), finite) &&
         std::all_of(theta_q.begin(), theta_q.end(), finite) && std::isfinite(duration);
}

SplineBasis::SplineBasis(int n_basis, double duration) : n_basis_(n_basis), duration_(duration) {
  if (n_basis < kDegree + 1) {
    throw InvalidDimension("SplineBasis: need at least 3 basis functions, got " +
                           std::to_string(n_basis));
  }
  if (!(duration > 0.0)) throw std::invalid_argument("SplineBasis: duration must be positive");
  const int spans = n_basis - kDegree;
  knots_.reserve(n_basis + kDegree + 1);
  for (int i = 0; i < kDegree; ++i) knots_.push_back(0.0);
  for (int i = 0; i <= spans; ++i) knots_.push_back(duration * i / spans);
  for (int i = 0; i < kDegree; ++i) knots_.push_back(duration);
}

int SplineBasis::span_index(double t) const {
  // Non-empty spans are kDegree .. n_basis-1.
  if (t >= duration_) return n_basis_ - 1;
  auto it = std::upper_bound(knots_.begin() + kDegree, knots_.begin() + n_basis_ + 1, t);
  return static_cast<int>(it - knots_.begin()) - 1;
}

std::vector<double> SplineBasis::values(double t) const {
  if (!(t >= 0.0 && t <= duration_)) {
    throw DomainError("SplineBasis: t=" + std::to_string(t) + " outside [0, " +
                      std::to_string(duration_) + "]");
  }
  std::vector<double> out(n_basis_, 0.0);
  const int s = span_index(t);
  // Cox-de Boor triangle on the kDegree+1 functions supported on span s.
  std::array<double, kDegree + 1> n{};
  std::array<double, kDegree + 1> left{};
  std::array<double, kDegree + 1> right{};
  n[0] = 1.0;
  for (int j = 1; j <= kDegree; ++j) {
    left[j] = t - knots_[s + 1 - j];
    right[j] = knots_[s + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = n[r] / (right[r + 1] + left[j - r]);
      n[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    n[j] = saved;
  }
  for (int r = 0; r <= kDegree; ++r) out[s - kDegree + r] = n[r];
  return out;
}

Eigen::MatrixXd SplineBasis::sample_steps(int steps, double offset) const {
  Eigen::MatrixXd m(steps, n_basis_);
  const double dt = duration_ / steps;
  for (int i = 0; i < steps; ++i) {
    const auto v = values(std::min((i + offset) * dt, duration_));
    for (int k = 0; k < n_basis_; ++k) m(i, k) = v[k];
  }
  return m;
}

SplineBasis make_basis(int n_basis, double duration) { return SplineBasis(n_basis, duration); }

double eval_envelope(std::span<const double> coeffs, const SplineBasis& basis, double t) {
  if (static_cast<int>(coeffs.size()) != basis.size()) {
    throw InvalidDimension("eval_envelope: " + std::to_string(coeffs.size()) +
                           " coefficients for a basis of " + std::to_string(basis.size()));
  }
  const auto v = basis.values(t);
  double sum = 0.0;
  for (int k = 0; k < basis.size(); ++k) sum += coeffs[k] * v[k];
  return sum;
}

}  // namespace snapml
