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

#include <complex>
#include <numbers>
#include <utility>

#include <Eigen/Dense>

namespace snapml {

using Complex = std::complex<double>;

/// Dense square complex matrix on the qudit (x) qubit space, or on one factor.
using ComplexOperator = Eigen::MatrixXcd;

/// Physical constants of the cavity/ancilla system.
///
/// Frequencies are given in MHz. With `two_pi_units` set they are read as
/// linear frequencies and converted to angular frequency (rad/ns); otherwise
/// the MHz figures are taken as angular already and only rescaled to 1/ns.
/// Product-space index of (qudit level k, qubit level q) is k*qubit_levels+q.
struct SystemSpec {
  int d = 5;
  int qubit_levels = 3;
  double chi_mhz = 5.0;
  double xi_mhz = 200.0;
  bool two_pi_units = true;

  void validate() const;

  /// Dispersive coupling in rad/ns.
  double chi() const { return to_rad_per_ns(chi_mhz); }
  /// Qubit anharmonicity in rad/ns.
  double xi() const { return to_rad_per_ns(xi_mhz); }
  int dim() const { return d * qubit_levels; }

  bool operator==(const SystemSpec&) const = default;

 private:
  double to_rad_per_ns(double mhz) const {
    return (two_pi_units ? 2.0 * std::numbers::pi : 1.0) * mhz * 1e-3;
  }
};

/// SNAP target: phase `alpha` on qudit level `n` (0-based).
struct SnapSpec {
  double alpha = 0.0;
  int n = 2;

  bool operator==(const SnapSpec&) const = default;
};

ComplexOperator annihilation(int levels);
ComplexOperator identity(int levels);
ComplexOperator kron(const ComplexOperator& a, const ComplexOperator& b);

/// H0 = -chi a'a (x) b'b - xi I (x) b'^2 b^2. Diagonal.
ComplexOperator static_hamiltonian(const SystemSpec& sys);

/// Bx = I (x) (b + b'), By = I (x) j(b - b'). Both Hermitian.
std::pair<ComplexOperator, ComplexOperator> control_operators(const SystemSpec& sys);

/// Qubit-only factors of the control operators (qubit_levels x qubit_levels).
std::pair<ComplexOperator, ComplexOperator> qubit_control_operators(int qubit_levels);

ComplexOperator snap_unitary(const SnapSpec& spec, int d);

/// SNAP on the qudit, identity on the qubit.
ComplexOperator embedded_snap(const SnapSpec& spec, const SystemSpec& sys);

/// |Tr(P V' U P)|^2 / d^2 where P projects onto qudit (x) |0>_qubit.
double trace_fidelity(const ComplexOperator& u, const SnapSpec& spec, const SystemSpec& sys);

/// Largest entry magnitude of U'U - I.
double unitarity_defect(const ComplexOperator& u);

}  // namespace snapml
