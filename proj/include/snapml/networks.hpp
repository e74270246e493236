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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "snapml/datasets.hpp"
#include "snapml/dynamics.hpp"
#include "snapml/pulses.hpp"

namespace snapml {

/// Layer widths from input to output, e.g. {1, 8, 8, 32}.
struct MlpConfig {
  std::vector<int> widths;

  /// Any stack with at least an input and an output layer.
  void validate() const;
  /// Pulse regressors: input 1, output 32, at least one hidden layer.
  void validate_regressor() const;

  std::size_t param_count() const;
  std::string name() const;  // "mlp_<params>"
  bool operator==(const MlpConfig&) const = default;
};

/// Hidden widths 8,8,8,8,8,8,16,16,16 and a 32-wide output: 1608 parameters.
MlpConfig reference_config();

/// Parameter count of an affine stack: sum of n_in*n_out + n_out.
std::size_t count_params(std::span<const int> widths);

/// Fully connected stack with ReLU on hidden layers and a linear output.
/// Inputs and outputs are column batches (features x samples).
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(MlpConfig config);

  /// Uniform fan-in initialization U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
  void initialize(std::mt19937_64& rng);

  const MlpConfig& config() const { return config_; }
  int layers() const { return static_cast<int>(weights_.size()); }
  int inputs() const { return config_.widths.front(); }
  int outputs() const { return config_.widths.back(); }

  Eigen::MatrixXd& weight(int l) { return weights_[l]; }
  const Eigen::MatrixXd& weight(int l) const { return weights_[l]; }
  Eigen::VectorXd& bias(int l) { return biases_[l]; }
  const Eigen::VectorXd& bias(int l) const { return biases_[l]; }

  std::size_t param_count() const { return config_.param_count(); }
  void get_params(std::span<double> out) const;
  void set_params(std::span<const double> in);

  /// Per-layer inputs recorded by forward for use in backward.
  struct Tape {
    std::vector<Eigen::MatrixXd> inputs;
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Tape* tape = nullptr) const;

  /// Accumulates dLoss/dparams into `grad` (flat layout of get_params) and
  /// optionally returns dLoss/dx.
  void backward(const Tape& tape, const Eigen::MatrixXd& d_out, std::span<double> grad,
                Eigen::MatrixXd* d_in = nullptr) const;

  bool operator==(const Mlp& o) const;

 private:
  MlpConfig config_;
  std::vector<Eigen::MatrixXd> weights_;  // out x in
  std::vector<Eigen::VectorXd> biases_;
};

/// Output gradient callback: given normalized outputs (32 x N), return
/// dLoss/doutputs of the same shape.
using OutputGradient = std::function<Eigen::MatrixXd(const Eigen::MatrixXd& outputs)>;

/// A trainable map from the normalized angle alpha/pi to normalized pulse
/// coefficients theta/scale.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string kind() const = 0;
  virtual std::unique_ptr<Model> clone() const = 0;

  virtual std::size_t param_count() const = 0;
  virtual void get_params(std::span<double> out) const = 0;
  virtual void set_params(std::span<const double> in) = 0;

  /// Normalized inputs (1 x N) to normalized outputs (32 x N).
  virtual Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const = 0;

  /// Runs predict, asks `loss_grad` for dLoss/doutputs and backpropagates
  /// into `grad` (overwritten). Returns the outputs.
  virtual Eigen::MatrixXd predict_backward(const Eigen::MatrixXd& x, const OutputGradient& loss_grad,
                                           std::span<double> grad) const = 0;

  double scale() const { return scale_; }
  void set_scale(double s) { scale_ = s; }
  std::uint64_t seed() const { return seed_; }

  /// De-normalized pulse coefficients for one angle in radians.
  ParamVector forward(double alpha) const;

  std::vector<double> params() const;

 protected:
  double scale_ = 1.0;
  std::uint64_t seed_ = 0;
};

class MlpModel final : public Model {
 public:
  MlpModel(MlpConfig config, double scale, std::uint64_t seed);
  MlpModel(Mlp net, double scale, std::uint64_t seed);

  std::string kind() const override { return "mlp"; }
  std::unique_ptr<Model> clone() const override { return std::make_unique<MlpModel>(*this); }
  std::size_t param_count() const override { return net_.param_count(); }
  void get_params(std::span<double> out) const override { net_.get_params(out); }
  void set_params(std::span<const double> in) override { net_.set_params(in); }
  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const override { return net_.forward(x); }
  Eigen::MatrixXd predict_backward(const Eigen::MatrixXd& x, const OutputGradient& loss_grad,
                                   std::span<double> grad) const override;

  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }

 private:
  Mlp net_;
};

/// Softmax-gated mixture: y = sum_e softmax(gate(x))_e * expert_e(x).
class MoeModel final : public Model {
 public:
  MoeModel(const MlpConfig& expert_config, int experts, std::vector<int> gate_hidden, double scale,
           std::uint64_t seed);
  MoeModel(std::vector<Mlp> experts, Mlp gate, double scale, std::uint64_t seed);

  std::string kind() const override { return "moe"; }
  std::unique_ptr<Model> clone() const override { return std::make_unique<MoeModel>(*this); }
  std::size_t param_count() const override;
  void get_params(std::span<double> out) const override;
  void set_params(std::span<const double> in) override;
  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const override;
  Eigen::MatrixXd predict_backward(const Eigen::MatrixXd& x, const OutputGradient& loss_grad,
                                   std::span<double> grad) const override;

  /// Softmax gate weights (experts x N).
  Eigen::MatrixXd gate_weights(const Eigen::MatrixXd& x) const;

  const std::vector<Mlp>& experts() const { return experts_; }
  const Mlp& gate() const { return gate_; }

 private:
  std::vector<Mlp> experts_;
  Mlp gate_;
};

inline constexpr std::array<double, 4> kDefaultRegionBoundaries = {
    -0.490 * std::numbers::pi, -0.426 * std::numbers::pi, 0.0, 0.682 * std::numbers::pi};

/// Hard-switched regressors over half-open angle regions [b_{k-1}, b_k),
/// with the outer regions capped at -pi and pi.
class MrModel final : public Model {
 public:
  MrModel(const MlpConfig& config, std::vector<double> boundaries, double scale,
          std::uint64_t seed);
  MrModel(std::vector<Mlp> regressors, std::vector<double> boundaries, double scale,
          std::uint64_t seed);

  std::string kind() const override { return "mr"; }
  std::unique_ptr<Model> clone() const override { return std::make_unique<MrModel>(*this); }
  std::size_t param_count() const override;
  void get_params(std::span<double> out) const override;
  void set_params(std::span<const double> in) override;
  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const override;
  Eigen::MatrixXd predict_backward(const Eigen::MatrixXd& x, const OutputGradient& loss_grad,
                                   std::span<double> grad) const override;

  /// Region index of an angle in radians.
  int region(double alpha) const;
  int regions() const { return static_cast<int>(regressors_.size()); }
  const std::vector<double>& boundaries() const { return boundaries_; }
  const std::vector<Mlp>& regressors() const { return regressors_; }
  Mlp& regressor(int k) { return regressors_[k]; }

 private:
  std::vector<Mlp> regressors_;
  std::vector<double> boundaries_;
};

// ---------------------------------------------------------------------------
// Training.

/// Normalized training pairs: x = alpha/pi (1 x N), y = theta/scale (32 x N).
struct TrainingData {
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;

  Eigen::Index size() const { return x.cols(); }
};

TrainingData make_training_data(const Dataset& ds, double scale);

struct TrainOptions {
  int epochs = 50;
  int batch_size = 64;
  double lr_start = 1e-3;
  double lr_end = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
  /// lr_start * (lr_end / lr_start)^(epoch / (epochs - 1)).
  double learning_rate(int epoch) const;
};

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  double best_val_loss = 0.0;
};

/// Mean over all entries of (prediction - target)^2.
double mse(const Model& model, const TrainingData& data);

/// Adam on minibatch MSE with the exponential learning-rate schedule. The
/// model is left at the checkpoint with the lowest validation MSE. MrModel
/// regressors are trained independently on the records of their region.
TrainHistory train_mse(Model& model, const TrainingData& train, const TrainingData& val,
                       const TrainOptions& opts);

struct FinetuneOptions {
  int rounds = 5;
  int batches_per_round = 25;
  int angles_per_batch = 16;
  double lr = 1e-3;
  int eval_grid = 256;
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;
  /// Sampling exponent of round r: decreases linearly from 1 to 0.
  double gamma(int round) const;
};

struct FinetuneRound {
  int round = 0;       // -1 for the starting model
  double gamma = 0.0;
  double mean_infidelity = 0.0;
  double max_infidelity = 0.0;
  int skipped_angles = 0;
};

struct FinetuneHistory {
  std::vector<FinetuneRound> rounds;
  int best_round = -1;
};

/// Angle sampling weights p_i proportional to infidelity_i^gamma, normalized.
std::vector<double> sampling_weights(std::span<const double> infidelities, double gamma);

/// Mean infidelity over `alphas` and its gradient with respect to the model
/// parameters (network backpropagation with the simulator gradient injected
/// at the output layer).
std::pair<double, std::vector<double>> infidelity_loss_gradient(const Model& model,
                                                                const GateSimulator& sim,
                                                                int level,
                                                                std::span<const double> alphas,
                                                                int jobs = 1);

/// Direct minimization of mean infidelity with Adam. Returns with the model
/// at the best evaluated round (the starting model included); MrModel keeps
/// the best regressor per region across rounds.
FinetuneHistory finetune_infidelity(Model& model, const GateSimulator& sim, int level,
                                    const FinetuneOptions& opts);

struct Evaluation {
  double mean = 0.0;
  double max = 0.0;
  std::vector<double> alphas;
  std::vector<double> profile;
};

Evaluation evaluate(const Model& model, const GateSimulator& sim, int level, int grid,
                    int jobs = 1);

/// Teacher outputs over angle_grid(n); infidelities recomputed with `sim`.
Dataset distill(const Model& teacher, const GateSimulator& sim, int level, int n, int jobs = 1);

// ---------------------------------------------------------------------------
// Persistence: JSON document with kind, scale, seed and per-layer arrays.

void save_model(const Model& model, const std::filesystem::path& path);
std::unique_ptr<Model> load_model(const std::filesystem::path& path);

std::string model_to_json(const Model& model);
std::unique_ptr<Model> model_from_json(const std::string& text);

}  // namespace snapml
