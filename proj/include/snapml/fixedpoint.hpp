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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "snapml/networks.hpp"

namespace snapml {

/// Fixed-point format <W, I>: W total bits, I integer bits. Signed formats
/// carry the sign bit in addition to I, so frac_bits = W - I - 1 and the
/// range is [-2^I, 2^I - 2^-frac]. Rounding is to nearest with ties to even;
/// overflow saturates.
struct FixedFormat {
  int total_bits = 16;
  int int_bits = 6;
  bool is_signed = true;

  /// Words are held in 64-bit integers, so total_bits is capped at 32.
  static constexpr int kMaxBits = 32;

  void validate() const;
  int frac_bits() const { return total_bits - int_bits - (is_signed ? 1 : 0); }
  std::int64_t min_word() const;
  std::int64_t max_word() const;
  double step() const;
  double min_value() const { return static_cast<double>(min_word()) * step(); }
  double max_value() const { return static_cast<double>(max_word()) * step(); }
  std::string to_string() const;  // "<W,I>" or "u<W,I>"

  bool operator==(const FixedFormat&) const = default;
};

/// Nearest word to x * 2^frac, ties to even, saturated. Throws DomainError
/// for non-finite x.
std::int64_t quantize_word(double x, const FixedFormat& fmt, bool* saturated = nullptr);
double quantize_value(double x, const FixedFormat& fmt);

/// Rounds an exact value v * 2^-from_frac to a word with to_frac fractional
/// bits (ties to even) and saturates it into fmt.
std::int64_t requantize(__int128 v, int from_frac, const FixedFormat& fmt, bool* saturated = nullptr);

struct QuantConfig {
  FixedFormat weight{9, 0, true};
  FixedFormat bias{9, 0, true};
  FixedFormat activation{9, 0, true};
  FixedFormat result{16, 6, true};
  /// Optional per-layer result formats; empty means `result` everywhere.
  std::vector<FixedFormat> layer_results;

  /// Signed weights, biases and activations with 0 integer bits and the
  /// given fractional bits; results at <16,6>.
  static QuantConfig uniform(int frac_bits);

  void validate() const;
  const FixedFormat& result_format(int layer) const;
};

struct QuantLayer {
  int n_in = 0;
  int n_out = 0;
  FixedFormat weight_format;
  FixedFormat bias_format;
  FixedFormat result_format;
  std::vector<std::int64_t> weights;  // row-major n_out x n_in
  std::vector<std::int64_t> bias;

  std::int64_t weight(int o, int i) const { return weights[static_cast<std::size_t>(o) * n_in + i]; }
  bool operator==(const QuantLayer&) const = default;
};

/// Integer-word network: ReLU hidden layers, linear output, inputs alpha/pi.
struct QuantizedModel {
  MlpConfig config;
  FixedFormat activation_format;
  std::vector<QuantLayer> layers;
  double scale = 1.0;

  /// Checks shapes and that every word is representable in its format.
  void validate() const;
  bool operator==(const QuantizedModel&) const = default;
};

/// Post-training quantization of a float network (no retraining).
QuantizedModel quantize_model(const Mlp& net, const QuantConfig& quant, double scale);

/// Per-layer result words recorded by forward_words.
struct QuantTrace {
  std::vector<std::vector<std::int64_t>> results;  // per layer, n_out words
  std::vector<int> saturations;                    // result saturations per layer
};

/// Integer inference from an input word in the activation format. Products
/// are accumulated at full width; each layer result is rounded into its
/// result format, hidden results pass through ReLU and are rounded into the
/// activation format.
std::vector<std::int64_t> forward_words(const QuantizedModel& qm, std::int64_t input_word,
                                        QuantTrace* trace = nullptr);

/// De-normalized pulse coefficients for one angle in radians.
ParamVector quantized_forward(const QuantizedModel& qm, double alpha);

/// Fake-quantized float network used during quantization-aware training.
/// Forward rounds weights, biases, layer results and activations like the
/// integer path; backward is the straight-through estimator with gradients
/// cleared where a value saturated.
class FakeQuantMlp {
 public:
  FakeQuantMlp(Mlp net, QuantConfig quant);

  struct Tape {
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::ArrayXXd> pass;  // per layer: 1 where the gradient flows
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Tape* tape = nullptr) const;
  void backward(const Tape& tape, const Eigen::MatrixXd& d_out, std::span<double> grad) const;

  /// Clamps shadow weights and biases into their representable ranges.
  void clamp();
  QuantizedModel materialize(double scale) const;

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  const QuantConfig& quant() const { return quant_; }

 private:
  Mlp net_;
  QuantConfig quant_;
};

struct QatResult {
  QuantizedModel model;
  Mlp shadow;  // float weights at the best checkpoint
  TrainHistory history;
};

/// Quantization-aware MSE training starting from the weights of `model`.
/// Returns the best-validation checkpoint materialized as integer words.
QatResult qat_train(const MlpModel& model, const QuantConfig& quant, const TrainingData& train,
                    const TrainingData& val, const TrainOptions& opts);

/// MSE of the integer model on normalized data.
double quantized_mse(const QuantizedModel& qm, const TrainingData& data);

Evaluation evaluate_quantized(const QuantizedModel& qm, const GateSimulator& sim, int level,
                              int grid, int jobs = 1);

struct LayerTrace {
  int layer = 0;
  std::vector<double> reference;  // float pre-activations, flattened
  std::vector<double> quantized;  // integer results as reals
  double slope = 0.0;             // least-squares fit quantized ~ a + slope * reference
  double intercept = 0.0;
  double residual_rms = 0.0;
  int saturations = 0;
  double step = 0.0;  // result quantization step
  bool low_int = false;
  bool low_frac = false;
};

struct TraceReport {
  std::vector<LayerTrace> layers;
};

/// Pairs each layer's float pre-activations with the integer results over the
/// given angles (radians).
TraceReport trace_compare(const Mlp& reference, const QuantizedModel& qm,
                          std::span<const double> alphas, int jobs = 1);

/// Relative cost model: lut = sum n_in*n_out*w_bits*a_bits,
/// ff = sum n_out*result_bits. Not calibrated to any device.
struct ResourceEstimate {
  std::uint64_t lut_units = 0;
  std::uint64_t ff_units = 0;
};

ResourceEstimate resource_estimate(const QuantizedModel& qm);

std::string quantized_to_json(const QuantizedModel& qm);
QuantizedModel quantized_from_json(const std::string& text);
void export_weights(const QuantizedModel& qm, const std::filesystem::path& path);
QuantizedModel import_weights(const std::filesystem::path& path);

}  // namespace snapml
