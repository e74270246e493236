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

#include "snapml/networks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "snapml/errors.hpp"

namespace snapml {

// ---------------------------------------------------------------------------
// MlpConfig / Mlp

void MlpConfig::validate() const {
  if (widths.size() < 2) throw InvalidDimension("MlpConfig: need input and output widths");
  for (int w : widths) {
    if (w < 1) throw InvalidDimension("MlpConfig: widths must be positive");
  }
}

void MlpConfig::validate_regressor() const {
  validate();
  if (widths.front() != 1 || widths.back() != kPulseParams || widths.size() < 3) {
    throw InvalidDimension("MlpConfig: regressors map 1 input to 32 outputs through >= 1 hidden layer");
  }
}

std::size_t count_params(std::span<const int> widths) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    n += static_cast<std::size_t>(widths[l]) * widths[l + 1] + widths[l + 1];
  }
  return n;
}

std::size_t MlpConfig::param_count() const { return count_params(widths); }

std::string MlpConfig::name() const { return "mlp_" + std::to_string(param_count()); }

MlpConfig reference_config() { return {{1, 8, 8, 8, 8, 8, 8, 16, 16, 16, 32}}; }

Mlp::Mlp(MlpConfig config) : config_(std::move(config)) {
  config_.validate();
  for (std::size_t l = 0; l + 1 < config_.widths.size(); ++l) {
    weights_.push_back(Eigen::MatrixXd::Zero(config_.widths[l + 1], config_.widths[l]));
    biases_.push_back(Eigen::VectorXd::Zero(config_.widths[l + 1]));
  }
}

void Mlp::initialize(std::mt19937_64& rng) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(weights_[l].cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index j = 0; j < weights_[l].cols(); ++j) {
      for (Eigen::Index i = 0; i < weights_[l].rows(); ++i) weights_[l](i, j) = dist(rng);
    }
    biases_[l].setZero();
  }
}

void Mlp::get_params(std::span<double> out) const {
  std::size_t p = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    std::copy_n(weights_[l].data(), weights_[l].size(), out.begin() + p);
    p += weights_[l].size();
    std::copy_n(biases_[l].data(), biases_[l].size(), out.begin() + p);
    p += biases_[l].size();
  }
}

void Mlp::set_params(std::span<const double> in) {
  if (in.size() < param_count()) throw InvalidDimension("Mlp::set_params: too few values");
  std::size_t p = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    std::copy_n(in.begin() + p, weights_[l].size(), weights_[l].data());
    p += weights_[l].size();
    std::copy_n(in.begin() + p, biases_[l].size(), biases_[l].data());
    p += biases_[l].size();
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Tape* tape) const {
  if (x.rows() != inputs()) throw InvalidDimension("Mlp::forward: input width mismatch");
  if (tape) tape->inputs.clear();
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = weights_[l] * a;
    z.colwise() += biases_[l];
    if (l + 1 < weights_.size()) z = z.cwiseMax(0.0);
    if (tape) tape->inputs.push_back(std::move(a));
    a = std::move(z);
  }
  return a;
}

void Mlp::backward(const Tape& tape, const Eigen::MatrixXd& d_out, std::span<double> grad,
                   Eigen::MatrixXd* d_in) const {
  // Offsets of each layer in the flat layout.
  std::vector<std::size_t> offset(weights_.size());
  std::size_t p = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    offset[l] = p;
    p += weights_[l].size() + biases_[l].size();
  }
  Eigen::MatrixXd delta = d_out;
  for (std::size_t l = weights_.size(); l-- > 0;) {
    const Eigen::MatrixXd& a = tape.inputs[l];
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + offset[l], weights_[l].rows(), weights_[l].cols());
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + offset[l] + weights_[l].size(), biases_[l].size());
    gw.noalias() += delta * a.transpose();
    gb += delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = weights_[l].transpose() * delta;
      delta = (a.array() > 0.0).select(back, 0.0);
    } else if (d_in) {
      *d_in = weights_[l].transpose() * delta;
    }
  }
}

bool Mlp::operator==(const Mlp& o) const {
  if (!(config_ == o.config_)) return false;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l] != o.weights_[l] || biases_[l] != o.biases_[l]) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Models

ParamVector Model::forward(double alpha) const {
  Eigen::MatrixXd x(1, 1);
  x(0, 0) = alpha / std::numbers::pi;
  const Eigen::MatrixXd y = predict(x);
  ParamVector out{};
  for (int k = 0; k < kPulseParams; ++k) out[k] = scale_ * y(k, 0);
  return out;
}

std::vector<double> Model::params() const {
  std::vector<double> p(param_count());
  get_params(p);
  return p;
}

MlpModel::MlpModel(MlpConfig config, double scale, std::uint64_t seed) : net_(std::move(config)) {
  net_.config().validate_regressor();
  scale_ = scale;
  seed_ = seed;
  std::mt19937_64 rng(seed);
  net_.initialize(rng);
}

MlpModel::MlpModel(Mlp net, double scale, std::uint64_t seed) : net_(std::move(net)) {
  scale_ = scale;
  seed_ = seed;
}

Eigen::MatrixXd MlpModel::predict_backward(const Eigen::MatrixXd& x,
                                           const OutputGradient& loss_grad,
                                           std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  Mlp::Tape tape;
  Eigen::MatrixXd y = net_.forward(x, &tape);
  net_.backward(tape, loss_grad(y), grad);
  return y;
}

namespace {

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double m = logits.col(c).maxCoeff();
    Eigen::VectorXd e = (logits.col(c).array() - m).exp();
    out.col(c) = e / e.sum();
  }
  return out;
}

}  // namespace

MoeModel::MoeModel(const MlpConfig& expert_config, int experts, std::vector<int> gate_hidden,
                   double scale, std::uint64_t seed) {
  expert_config.validate_regressor();
  if (experts < 1) throw InvalidDimension("MoeModel: need at least one expert");
  scale_ = scale;
  seed_ = seed;
  std::mt19937_64 rng(seed);
  for (int e = 0; e < experts; ++e) {
    experts_.emplace_back(expert_config);
    experts_.back().initialize(rng);
  }
  std::vector<int> gw{1};
  gw.insert(gw.end(), gate_hidden.begin(), gate_hidden.end());
  gw.push_back(experts);
  gate_ = Mlp(MlpConfig{gw});
  gate_.initialize(rng);
}

MoeModel::MoeModel(std::vector<Mlp> experts, Mlp gate, double scale, std::uint64_t seed)
    : experts_(std::move(experts)), gate_(std::move(gate)) {
  if (experts_.empty() || gate_.outputs() != static_cast<int>(experts_.size())) {
    throw InvalidDimension("MoeModel: gate outputs must equal the expert count");
  }
  scale_ = scale;
  seed_ = seed;
}

std::size_t MoeModel::param_count() const {
  std::size_t n = gate_.param_count();
  for (const auto& e : experts_) n += e.param_count();
  return n;
}

void MoeModel::get_params(std::span<double> out) const {
  std::size_t p = 0;
  for (const auto& e : experts_) {
    e.get_params(out.subspan(p, e.param_count()));
    p += e.param_count();
  }
  gate_.get_params(out.subspan(p, gate_.param_count()));
}

void MoeModel::set_params(std::span<const double> in) {
  std::size_t p = 0;
  for (auto& e : experts_) {
    e.set_params(in.subspan(p, e.param_count()));
    p += e.param_count();
  }
  gate_.set_params(in.subspan(p, gate_.param_count()));
}

Eigen::MatrixXd MoeModel::gate_weights(const Eigen::MatrixXd& x) const {
  return softmax_columns(gate_.forward(x));
}

Eigen::MatrixXd MoeModel::predict(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd g = gate_weights(x);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(kPulseParams, x.cols());
  for (std::size_t e = 0; e < experts_.size(); ++e) {
    y += experts_[e].forward(x) * g.row(e).asDiagonal();
  }
  return y;
}

Eigen::MatrixXd MoeModel::predict_backward(const Eigen::MatrixXd& x,
                                           const OutputGradient& loss_grad,
                                           std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  const std::size_t n_exp = experts_.size();
  Mlp::Tape gate_tape;
  const Eigen::MatrixXd g = softmax_columns(gate_.forward(x, &gate_tape));
  std::vector<Mlp::Tape> tapes(n_exp);
  std::vector<Eigen::MatrixXd> outs(n_exp);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(kPulseParams, x.cols());
  for (std::size_t e = 0; e < n_exp; ++e) {
    outs[e] = experts_[e].forward(x, &tapes[e]);
    y += outs[e] * g.row(e).asDiagonal();
  }
  const Eigen::MatrixXd dy = loss_grad(y);

  Eigen::MatrixXd dg(n_exp, x.cols());
  std::size_t p = 0;
  for (std::size_t e = 0; e < n_exp; ++e) {
    const Eigen::MatrixXd d_exp = dy * g.row(e).asDiagonal();
    experts_[e].backward(tapes[e], d_exp, grad.subspan(p, experts_[e].param_count()));
    p += experts_[e].param_count();
    dg.row(e) = (dy.array() * outs[e].array()).colwise().sum();
  }
  // Softmax Jacobian: dz = g * (dg - <g, dg>).
  Eigen::MatrixXd dz(n_exp, x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double inner = g.col(c).dot(dg.col(c));
    dz.col(c) = g.col(c).array() * (dg.col(c).array() - inner);
  }
  gate_.backward(gate_tape, dz, grad.subspan(p, gate_.param_count()));
  return y;
}

MrModel::MrModel(const MlpConfig& config, std::vector<double> boundaries, double scale,
                 std::uint64_t seed)
    : boundaries_(std::move(boundaries)) {
  config.validate_regressor();
  for (std::size_t i = 1; i < boundaries_.size(); ++i) {
    if (!(boundaries_[i] > boundaries_[i - 1])) {
      throw std::invalid_argument("MrModel: boundaries must be strictly increasing");
    }
  }
  scale_ = scale;
  seed_ = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k <= boundaries_.size(); ++k) {
    regressors_.emplace_back(config);
    regressors_.back().initialize(rng);
  }
}

MrModel::MrModel(std::vector<Mlp> regressors, std::vector<double> boundaries, double scale,
                 std::uint64_t seed)
    : regressors_(std::move(regressors)), boundaries_(std::move(boundaries)) {
  if (regressors_.size() != boundaries_.size() + 1) {
    throw InvalidDimension("MrModel: need one more regressor than boundaries");
  }
  scale_ = scale;
  seed_ = seed;
}

std::size_t MrModel::param_count() const {
  std::size_t n = 0;
  for (const auto& r : regressors_) n += r.param_count();
  return n;
}

void MrModel::get_params(std::span<double> out) const {
  std::size_t p = 0;
  for (const auto& r : regressors_) {
    r.get_params(out.subspan(p, r.param_count()));
    p += r.param_count();
  }
}

void MrModel::set_params(std::span<const double> in) {
  std::size_t p = 0;
  for (auto& r : regressors_) {
    r.set_params(in.subspan(p, r.param_count()));
    p += r.param_count();
  }
}

int MrModel::region(double alpha) const {
  return static_cast<int>(std::upper_bound(boundaries_.begin(), boundaries_.end(), alpha) -
                          boundaries_.begin());
}

namespace {

std::vector<std::vector<Eigen::Index>> group_by_region(const MrModel& m, const Eigen::MatrixXd& x) {
  std::vector<std::vector<Eigen::Index>> groups(m.regions());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    groups[m.region(x(0, c) * std::numbers::pi)].push_back(c);
  }
  return groups;
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(m.rows(), cols.size());
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(i) = m.col(cols[i]);
  return out;
}

}  // namespace

Eigen::MatrixXd MrModel::predict(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd y(kPulseParams, x.cols());
  const auto groups = group_by_region(*this, x);
  for (int k = 0; k < regions(); ++k) {
    if (groups[k].empty()) continue;
    const Eigen::MatrixXd yk = regressors_[k].forward(gather_columns(x, groups[k]));
    for (std::size_t i = 0; i < groups[k].size(); ++i) y.col(groups[k][i]) = yk.col(i);
  }
  return y;
}

Eigen::MatrixXd MrModel::predict_backward(const Eigen::MatrixXd& x,
                                          const OutputGradient& loss_grad,
                                          std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  const auto groups = group_by_region(*this, x);
  std::vector<Mlp::Tape> tapes(regions());
  Eigen::MatrixXd y(kPulseParams, x.cols());
  for (int k = 0; k < regions(); ++k) {
    if (groups[k].empty()) continue;
    const Eigen::MatrixXd yk = regressors_[k].forward(gather_columns(x, groups[k]), &tapes[k]);
    for (std::size_t i = 0; i < groups[k].size(); ++i) y.col(groups[k][i]) = yk.col(i);
  }
  const Eigen::MatrixXd dy = loss_grad(y);
  std::size_t p = 0;
  for (int k = 0; k < regions(); ++k) {
    const std::size_t n = regressors_[k].param_count();
    if (!groups[k].empty()) {
      regressors_[k].backward(tapes[k], gather_columns(dy, groups[k]), grad.subspan(p, n));
    }
    p += n;
  }
  return y;
}

}  // namespace snapml
