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

#include "snapml/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "snapml/errors.hpp"

namespace snapml {
namespace {

// Blocks never exceed a handful of qubit levels. The common truncations get
// fixed-size kernels; others use a bounded dynamic size.
constexpr int kMaxQubitLevels = 8;

const double kSqrt15 = std::sqrt(15.0);

// (exp(z) - 1) / z, stable near z = 0.
Complex phi1(Complex z) {
  if (std::abs(z) < 1e-5) return 1.0 + z * (0.5 + z / 6.0);
  return (std::exp(z) - 1.0) / z;
}

// Read-only view of the simulator's interval grid and block operators.
struct Grid {
  const std::vector<double>& widths;
  const std::array<Eigen::MatrixXd, 3>& nodes;
  const ComplexOperator& bx;
  const ComplexOperator& by;
  const std::vector<Eigen::VectorXd>& block_diag;
};

// Envelope values at the three nodes of every interval.
struct NodeEnvelopes {
  std::array<Eigen::VectorXd, 3> i, q;
};

NodeEnvelopes node_envelopes(const PulseParams& pulse, const std::array<Eigen::MatrixXd, 3>& nodes) {
  const Eigen::Map<const Eigen::VectorXd> ci(pulse.theta_i.data(), kCoeffsPerChannel);
  const Eigen::Map<const Eigen::VectorXd> cq(pulse.theta_q.data(), kCoeffsPerChannel);
  NodeEnvelopes env;
  for (int n = 0; n < 3; ++n) {
    env.i[n] = nodes[n] * ci;
    env.q[n] = nodes[n] * cq;
  }
  return env;
}

template <int N>
struct Kernel {
  static constexpr int kMax = N == Eigen::Dynamic ? kMaxQubitLevels : N;
  using Matrix = Eigen::Matrix<Complex, N, N, 0, kMax, kMax>;
  using Vector = Eigen::Matrix<Complex, N, 1, 0, kMax, 1>;
  using RealVector = Eigen::Matrix<double, N, 1, 0, kMax, 1>;

  struct Decomposition {
    Matrix vectors;
    RealVector energies;
  };

  // Sixth-order Magnus generator of one interval of length h from
  // A_n = -j H(t_n) at the three Gauss-Legendre nodes. Intermediate terms
  // are kept for the reverse sweep.
  struct Step {
    double h = 0.0;
    Matrix a1, a2, a3, c1, s, x, y;
    Matrix omega;  // anti-Hermitian
  };

  static Matrix comm(const Matrix& a, const Matrix& b) { return a * b - b * a; }

  static Step magnus(const Matrix& A1, const Matrix& A2, const Matrix& A3, double h) {
    Step m;
    m.h = h;
    m.a1 = h * A2;
    m.a2 = (kSqrt15 * h / 3.0) * (A3 - A1);
    m.a3 = (10.0 * h / 3.0) * (A3 - 2.0 * A2 + A1);
    m.c1 = comm(m.a1, m.a2);
    m.s = 2.0 * m.a3 + m.c1;
    const Matrix c2 = (-1.0 / 60.0) * comm(m.a1, m.s);
    m.x = -20.0 * m.a1 - m.a3 + m.c1;
    m.y = m.a2 + c2;
    m.omega = m.a1 + m.a3 / 12.0 + (1.0 / 240.0) * comm(m.x, m.y);
    return m;
  }

  // Cotangents of A1, A2, A3 given the cotangent of omega, where a linear
  // functional is written L(dOmega) = Tr(dOmega * bar).
  static std::array<Matrix, 3> magnus_adjoint(const Step& m, const Matrix& omega_bar) {
    Matrix a1b = omega_bar;
    Matrix a3b = omega_bar / 12.0;
    const Matrix zb = omega_bar / 240.0;
    const Matrix xb = comm(m.y, zb);
    const Matrix yb = comm(zb, m.x);
    a1b -= 20.0 * xb;
    a3b -= xb;
    Matrix c1b = xb;
    Matrix a2b = yb;
    const Matrix tb = (-1.0 / 60.0) * yb;
    a1b += comm(m.s, tb);
    const Matrix sb = comm(tb, m.a1);
    a3b += 2.0 * sb;
    c1b += sb;
    a1b += comm(m.a2, c1b);
    a2b += comm(c1b, m.a1);
    const double k2 = kSqrt15 * m.h / 3.0, k3 = 10.0 * m.h / 3.0;
    return {k3 * a3b - k2 * a2b, m.h * a1b - 2.0 * k3 * a3b, k3 * a3b + k2 * a2b};
  }

  // exp(Omega) = exp(-j G) with G = j Omega Hermitian.
  static Decomposition decompose(const Matrix& omega) {
    Matrix g = Complex{0.0, 1.0} * omega;
    g = (0.5 * (g + g.adjoint())).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(g);
    return {solver.eigenvectors(), solver.eigenvalues()};
  }

  static Vector phases(const RealVector& energies) {
    Vector p(energies.size());
    for (Eigen::Index i = 0; i < energies.size(); ++i) p(i) = std::polar(1.0, -energies(i));
    return p;
  }

  static Vector apply(const Decomposition& d, const Vector& v) {
    return d.vectors * phases(d.energies).cwiseProduct(d.vectors.adjoint() * v);
  }

  // Calls visit(j, step) for every interval of qudit block k.
  template <typename Visit>
  static void for_each_step(const Grid& grid, const NodeEnvelopes& env, int k, Visit&& visit) {
    const Matrix bx = grid.bx;
    const Matrix by = grid.by;
    const Vector energies = grid.block_diag[k].cast<Complex>();
    const auto node = [&](int n, std::size_t j) -> Matrix {
      Matrix h = env.i[n](j) * bx + env.q[n](j) * by;
      h.diagonal() += energies;
      return Complex{0.0, -1.0} * h;
    };
    for (std::size_t j = 0; j < grid.widths.size(); ++j) {
      visit(static_cast<int>(j), magnus(node(0, j), node(1, j), node(2, j), grid.widths[j]));
    }
  }

  static ComplexOperator propagate(const Grid& grid, const PulseParams& pulse, int d, int ql) {
    const NodeEnvelopes env = node_envelopes(pulse, grid.nodes);
    ComplexOperator u = ComplexOperator::Zero(d * ql, d * ql);
    for (int k = 0; k < d; ++k) {
      Matrix block = Matrix::Identity(ql, ql);
      for_each_step(grid, env, k, [&](int, const Step& m) {
        const auto step = decompose(m.omega);
        block = (step.vectors * phases(step.energies).asDiagonal() * step.vectors.adjoint() * block)
                    .eval();
      });
      u.block(k * ql, k * ql, ql, ql) = block;
    }
    return u;
  }

  static double infidelity(const Grid& grid, const PulseParams& pulse,
                           const ComplexOperator& target, int ql) {
    const NodeEnvelopes env = node_envelopes(pulse, grid.nodes);
    const int d = static_cast<int>(target.rows());
    Complex overlap{0.0, 0.0};
    for (int k = 0; k < d; ++k) {
      Vector psi = Vector::Zero(ql);
      psi(0) = 1.0;
      for_each_step(grid, env, k, [&](int, const Step& m) { psi = apply(decompose(m.omega), psi); });
      overlap += std::conj(target(k, k)) * psi(0);
    }
    return 1.0 - std::norm(overlap) / (static_cast<double>(d) * d);
  }

  static InfidelityGradient gradient(const Grid& grid, const PulseParams& pulse,
                                     const ComplexOperator& target, int ql) {
    const NodeEnvelopes env = node_envelopes(pulse, grid.nodes);
    const int d = static_cast<int>(target.rows());
    const int n = static_cast<int>(grid.widths.size());
    const Matrix mjbx = Complex{0.0, -1.0} * Matrix(grid.bx);
    const Matrix mjby = Complex{0.0, -1.0} * Matrix(grid.by);

    Complex overlap{0.0, 0.0};
    // d(overlap) with respect to I and Q at each node of each interval.
    std::array<Eigen::VectorXcd, 3> d_i, d_q;
    for (int q = 0; q < 3; ++q) {
      d_i[q] = Eigen::VectorXcd::Zero(n);
      d_q[q] = Eigen::VectorXcd::Zero(n);
    }

    std::vector<Step> steps(n);
    std::vector<Decomposition> decomps(n);
    std::vector<Vector> states(n + 1);
    for (int k = 0; k < d; ++k) {
      const Complex weight = std::conj(target(k, k));
      states[0] = Vector::Zero(ql);
      states[0](0) = 1.0;
      for_each_step(grid, env, k, [&](int j, const Step& m) {
        steps[j] = m;
        decomps[j] = decompose(m.omega);
        states[j + 1] = apply(decomps[j], states[j]);
      });
      overlap += weight * states[n](0);

      // costate holds <0| P_n ... P_{j+1} as a column vector of its conjugate.
      Vector costate = Vector::Zero(ql);
      costate(0) = 1.0;
      for (int j = n - 1; j >= 0; --j) {
        const auto& step = decomps[j];
        const Vector ph = phases(step.energies);
        const Vector a = step.vectors.adjoint() * costate;
        const Vector b = step.vectors.adjoint() * states[j];
        // d<costate|exp(-jG)|state> = Tr(dG W) with W = V K V', where K holds
        // the divided differences of the exponential in the eigenbasis.
        Matrix kmat(ql, ql);
        for (int r = 0; r < ql; ++r) {
          for (int c = 0; c < ql; ++c) {
            const Complex z{0.0, -(step.energies(r) - step.energies(c))};
            kmat(c, r) = Complex{0.0, -1.0} * ph(c) * phi1(z) * b(c) * std::conj(a(r));
          }
        }
        // G = j Omega, so the cotangent of Omega is j W.
        const Matrix omega_bar =
            (Complex{0.0, 1.0} * weight) * (step.vectors * kmat * step.vectors.adjoint());
        const auto bars = magnus_adjoint(steps[j], omega_bar);
        for (int q = 0; q < 3; ++q) {
          d_i[q](j) += mjbx.cwiseProduct(bars[q].transpose()).sum();
          d_q[q](j) += mjby.cwiseProduct(bars[q].transpose()).sum();
        }
        // costate' <- costate' P_j, i.e. costate <- P_j' costate.
        costate = step.vectors * (ph.conjugate().cwiseProduct(a));
      }
    }

    const double d2 = static_cast<double>(d) * d;
    InfidelityGradient out;
    out.value = 1.0 - std::norm(overlap) / d2;
    const auto real_part = [&](const Eigen::VectorXcd& dv) {
      Eigen::VectorXd r(n);
      for (int j = 0; j < n; ++j) r(j) = -2.0 * std::real(std::conj(overlap) * dv(j)) / d2;
      return r;
    };
    Eigen::VectorXd c_i = Eigen::VectorXd::Zero(kCoeffsPerChannel);
    Eigen::VectorXd c_q = Eigen::VectorXd::Zero(kCoeffsPerChannel);
    for (int q = 0; q < 3; ++q) {
      c_i += grid.nodes[q].transpose() * real_part(d_i[q]);
      c_q += grid.nodes[q].transpose() * real_part(d_q[q]);
    }
    for (int k = 0; k < kCoeffsPerChannel; ++k) {
      out.gradient[k] = c_i(k);
      out.gradient[k + kCoeffsPerChannel] = c_q(k);
    }
    return out;
  }
};

// Runs fn with the kernel matching the block size.
template <typename Fn>
auto dispatch(int ql, Fn&& fn) {
  switch (ql) {
    case 2: return fn(Kernel<2>{});
    case 3: return fn(Kernel<3>{});
    case 4: return fn(Kernel<4>{});
    default: return fn(Kernel<Eigen::Dynamic>{});
  }
}

}  // namespace

void PropagationConfig::validate() const {
  if (steps < 16) {
    throw std::invalid_argument("PropagationConfig: steps must be >= 16, got " +
                                std::to_string(steps));
  }
}

GateSimulator::GateSimulator(SystemSpec sys, PropagationConfig cfg, double duration)
    : sys_(sys), cfg_(cfg), duration_(duration) {
  sys_.validate();
  cfg_.validate();
  if (sys_.qubit_levels > kMaxQubitLevels) {
    throw InvalidDimension("GateSimulator: at most " + std::to_string(kMaxQubitLevels) +
                           " qubit levels supported");
  }
  if (!(duration_ > 0.0)) throw std::invalid_argument("GateSimulator: duration must be positive");
  const double dt = duration_ / cfg_.steps;
  const SplineBasis basis(kCoeffsPerChannel, duration_);
  samples_ = basis.sample_midpoints(cfg_.steps);

  // Step edges, with steps that straddle a knot split at the knot so the
  // envelope is a single polynomial on every interval.
  std::vector<double> edges;
  for (int m = 0; m <= cfg_.steps; ++m) edges.push_back(m == cfg_.steps ? duration_ : m * dt);
  for (double k : basis.knots()) {
    if (k > 0.0 && k < duration_) edges.push_back(k);
  }
  std::sort(edges.begin(), edges.end());
  std::vector<double> unique_edges;
  for (double e : edges) {
    if (unique_edges.empty() || e - unique_edges.back() > 1e-9 * dt) unique_edges.push_back(e);
  }
  const int n = static_cast<int>(unique_edges.size()) - 1;
  widths_.resize(n);
  const double offsets[3] = {0.5 - kSqrt15 / 10.0, 0.5, 0.5 + kSqrt15 / 10.0};
  for (auto& m : nodes_) m.resize(n, kCoeffsPerChannel);
  for (int j = 0; j < n; ++j) {
    widths_[j] = unique_edges[j + 1] - unique_edges[j];
    for (int q = 0; q < 3; ++q) {
      const auto v = basis.values(unique_edges[j] + offsets[q] * widths_[j]);
      for (int c = 0; c < kCoeffsPerChannel; ++c) nodes_[q](j, c) = v[c];
    }
  }

  std::tie(bx_, by_) = qubit_control_operators(sys_.qubit_levels);
  const ComplexOperator h0 = static_hamiltonian(sys_);
  const int ql = sys_.qubit_levels;
  for (int k = 0; k < sys_.d; ++k) {
    Eigen::VectorXd diag(ql);
    for (int q = 0; q < ql; ++q) diag(q) = h0(k * ql + q, k * ql + q).real();
    block_diag_.push_back(std::move(diag));
  }
}

void GateSimulator::check_pulse(const PulseParams& pulse) const {
  if (!pulse.all_finite()) throw InputError("GateSimulator: pulse has non-finite coefficients");
  if (pulse.duration != duration_) {
    throw std::invalid_argument("GateSimulator: pulse duration " + std::to_string(pulse.duration) +
                                " does not match simulator duration " + std::to_string(duration_));
  }
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> GateSimulator::envelopes(
    const PulseParams& pulse) const {
  const Eigen::Map<const Eigen::VectorXd> ci(pulse.theta_i.data(), kCoeffsPerChannel);
  const Eigen::Map<const Eigen::VectorXd> cq(pulse.theta_q.data(), kCoeffsPerChannel);
  return {samples_ * ci, samples_ * cq};
}

ComplexOperator GateSimulator::propagate(const PulseParams& pulse) const {
  check_pulse(pulse);
  const Grid grid{widths_, nodes_, bx_, by_, block_diag_};
  return dispatch(sys_.qubit_levels, [&](auto kernel) {
    return decltype(kernel)::propagate(grid, pulse, sys_.d, sys_.qubit_levels);
  });
}

double GateSimulator::infidelity(const PulseParams& pulse, const SnapSpec& spec) const {
  check_pulse(pulse);
  const ComplexOperator target = snap_unitary(spec, sys_.d);
  const Grid grid{widths_, nodes_, bx_, by_, block_diag_};
  return dispatch(sys_.qubit_levels, [&](auto kernel) {
    return decltype(kernel)::infidelity(grid, pulse, target, sys_.qubit_levels);
  });
}

InfidelityGradient GateSimulator::infidelity_gradient(const PulseParams& pulse,
                                                      const SnapSpec& spec) const {
  check_pulse(pulse);
  const ComplexOperator target = snap_unitary(spec, sys_.d);
  const Grid grid{widths_, nodes_, bx_, by_, block_diag_};
  return dispatch(sys_.qubit_levels, [&](auto kernel) {
    return decltype(kernel)::gradient(grid, pulse, target, sys_.qubit_levels);
  });
}

ComplexOperator propagate(const SystemSpec& sys, const PulseParams& pulse,
                          const PropagationConfig& cfg) {
  return GateSimulator(sys, cfg, pulse.duration).propagate(pulse);
}

double infidelity(const SystemSpec& sys, const PulseParams& pulse, const SnapSpec& spec,
                  const PropagationConfig& cfg) {
  return GateSimulator(sys, cfg, pulse.duration).infidelity(pulse, spec);
}

ParamVector infidelity_gradient(const SystemSpec& sys, const PulseParams& pulse,
                                const SnapSpec& spec, const PropagationConfig& cfg) {
  return GateSimulator(sys, cfg, pulse.duration).infidelity_gradient(pulse, spec).gradient;
}

}  // namespace snapml
