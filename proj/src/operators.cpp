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

#include "snapml/operators.hpp"

#include <cmath>
#include <string>

#include "snapml/errors.hpp"

namespace snapml {

void SystemSpec::validate() const {
  if (d < 2) throw InvalidDimension("SystemSpec: d must be >= 2, got " + std::to_string(d));
  if (qubit_levels < 2) {
    throw InvalidDimension("SystemSpec: qubit_levels must be >= 2, got " +
                           std::to_string(qubit_levels));
  }
  if (!(chi_mhz > 0.0) || !(xi_mhz > 0.0)) {
    throw std::invalid_argument("SystemSpec: chi and xi must be positive");
  }
}

ComplexOperator annihilation(int levels) {
  if (levels < 2) {
    throw InvalidDimension("annihilation: levels must be >= 2, got " + std::to_string(levels));
  }
  ComplexOperator a = ComplexOperator::Zero(levels, levels);
  for (int k = 0; k + 1 < levels; ++k) a(k, k + 1) = std::sqrt(static_cast<double>(k + 1));
  return a;
}

ComplexOperator identity(int levels) { return ComplexOperator::Identity(levels, levels); }

ComplexOperator kron(const ComplexOperator& a, const ComplexOperator& b) {
  ComplexOperator out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

ComplexOperator static_hamiltonian(const SystemSpec& sys) {
  sys.validate();
  const ComplexOperator a = annihilation(sys.d);
  const ComplexOperator b = annihilation(sys.qubit_levels);
  const ComplexOperator n_a = a.adjoint() * a;
  const ComplexOperator n_b = b.adjoint() * b;
  const ComplexOperator b2 = b * b;
  const ComplexOperator kerr = b2.adjoint() * b2;
  return -sys.chi() * kron(n_a, n_b) - sys.xi() * kron(identity(sys.d), kerr);
}

std::pair<ComplexOperator, ComplexOperator> qubit_control_operators(int qubit_levels) {
  const ComplexOperator b = annihilation(qubit_levels);
  const Complex j{0.0, 1.0};
  ComplexOperator bx = b + b.adjoint();
  ComplexOperator by = j * (b - b.adjoint());
  return {std::move(bx), std::move(by)};
}

std::pair<ComplexOperator, ComplexOperator> control_operators(const SystemSpec& sys) {
  sys.validate();
  auto [bx, by] = qubit_control_operators(sys.qubit_levels);
  const ComplexOperator id = identity(sys.d);
  return {kron(id, bx), kron(id, by)};
}

ComplexOperator snap_unitary(const SnapSpec& spec, int d) {
  if (d < 1) throw InvalidDimension("snap_unitary: d must be positive");
  if (spec.n < 0 || spec.n >= d) {
    throw IndexError("snap_unitary: level " + std::to_string(spec.n) + " outside [0, " +
                     std::to_string(d) + ")");
  }
  ComplexOperator s = identity(d);
  s(spec.n, spec.n) = std::polar(1.0, spec.alpha);
  return s;
}

ComplexOperator embedded_snap(const SnapSpec& spec, const SystemSpec& sys) {
  sys.validate();
  return kron(snap_unitary(spec, sys.d), identity(sys.qubit_levels));
}

double trace_fidelity(const ComplexOperator& u, const SnapSpec& spec, const SystemSpec& sys) {
  sys.validate();
  if (u.rows() != sys.dim() || u.cols() != sys.dim()) {
    throw InvalidDimension("trace_fidelity: operator is " + std::to_string(u.rows()) + "x" +
                           std::to_string(u.cols()) + ", expected " + std::to_string(sys.dim()));
  }
  const ComplexOperator target = snap_unitary(spec, sys.d);
  Complex overlap{0.0, 0.0};
  for (int k = 0; k < sys.d; ++k) {
    const int idx = k * sys.qubit_levels;
    overlap += std::conj(target(k, k)) * u(idx, idx);
  }
  return std::norm(overlap) / static_cast<double>(sys.d * sys.d);
}

double unitarity_defect(const ComplexOperator& u) {
  const ComplexOperator e = u.adjoint() * u - identity(static_cast<int>(u.rows()));
  return e.cwiseAbs().maxCoeff();
}

}  // namespace snapml
