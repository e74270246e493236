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

#include "snapml/fixedpoint.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "json.hpp"

#include "snapml/errors.hpp"
#include "snapml/io.hpp"
#include "snapml/optim.hpp"
#include "snapml/parallel.hpp"

namespace snapml {

void FixedFormat::validate() const {
  if (total_bits < 1 || total_bits > kMaxBits) {
    throw std::invalid_argument("FixedFormat: total_bits must be in [1, 32], got " +
                                std::to_string(total_bits));
  }
  if (int_bits < 0) throw std::invalid_argument("FixedFormat: int_bits must be >= 0");
  if (is_signed ? int_bits >= total_bits : int_bits > total_bits) {
    throw std::invalid_argument("FixedFormat: too many integer bits for " + to_string());
  }
}

std::int64_t FixedFormat::min_word() const {
  return is_signed ? -(std::int64_t{1} << (total_bits - 1)) : 0;
}

std::int64_t FixedFormat::max_word() const {
  return is_signed ? (std::int64_t{1} << (total_bits - 1)) - 1 : (std::int64_t{1} << total_bits) - 1;
}

double FixedFormat::step() const { return std::ldexp(1.0, -frac_bits()); }

std::string FixedFormat::to_string() const {
  return std::string(is_signed ? "" : "u") + "<" + std::to_string(total_bits) + "," +
         std::to_string(int_bits) + ">";
}

std::int64_t quantize_word(double x, const FixedFormat& fmt, bool* saturated) {
  if (!std::isfinite(x)) throw DomainError("quantize: non-finite value");
  const double scaled = std::ldexp(x, fmt.frac_bits());
  // nearbyint honours the current rounding mode, which defaults to ties-to-even.
  const double r = std::nearbyint(scaled);
  bool sat = false;
  std::int64_t w = 0;
  if (r < static_cast<double>(fmt.min_word())) {
    w = fmt.min_word();
    sat = true;
  } else if (r > static_cast<double>(fmt.max_word())) {
    w = fmt.max_word();
    sat = true;
  } else {
    w = static_cast<std::int64_t>(r);
  }
  if (saturated) *saturated = sat;
  return w;
}

double quantize_value(double x, const FixedFormat& fmt) {
  return std::ldexp(static_cast<double>(quantize_word(x, fmt)), -fmt.frac_bits());
}

std::int64_t requantize(__int128 v, int from_frac, const FixedFormat& fmt, bool* saturated) {
  const int shift = from_frac - fmt.frac_bits();
  __int128 q = v;
  if (shift > 0) {
    const __int128 unit = static_cast<__int128>(1) << shift;
    q = v >> shift;  // arithmetic shift: floor division
    const __int128 rem = v - q * unit;
    const __int128 half = unit >> 1;
    if (rem > half || (rem == half && (q & 1) != 0)) ++q;
  } else if (shift < 0) {
    q = v * (static_cast<__int128>(1) << -shift);
  }
  bool sat = false;
  if (q < fmt.min_word()) {
    q = fmt.min_word();
    sat = true;
  } else if (q > fmt.max_word()) {
    q = fmt.max_word();
    sat = true;
  }
  if (saturated) *saturated = sat;
  return static_cast<std::int64_t>(q);
}

QuantConfig QuantConfig::uniform(int frac_bits) {
  if (frac_bits < 1 || frac_bits > FixedFormat::kMaxBits - 1) {
    throw std::invalid_argument("QuantConfig: fractional bits out of range");
  }
  QuantConfig q;
  q.weight = q.bias = q.activation = FixedFormat{frac_bits + 1, 0, true};
  return q;
}

void QuantConfig::validate() const {
  weight.validate();
  bias.validate();
  activation.validate();
  result.validate();
  for (const auto& f : layer_results) f.validate();
}

const FixedFormat& QuantConfig::result_format(int layer) const {
  if (layer_results.empty()) return result;
  if (layer < 0 || layer >= static_cast<int>(layer_results.size())) {
    throw IndexError("QuantConfig: no result format for layer " + std::to_string(layer));
  }
  return layer_results[layer];
}

void QuantizedModel::validate() const {
  activation_format.validate();
  if (layers.size() + 1 != config.widths.size() && !(layers.empty() && config.widths.empty())) {
    throw InvalidDimension("QuantizedModel: layer count does not match config");
  }
  auto check = [](const std::vector<std::int64_t>& words, const FixedFormat& f,
                  const std::string& what) {
    for (auto w : words) {
      if (w < f.min_word() || w > f.max_word()) {
        throw std::out_of_range("QuantizedModel: " + what + " word " + std::to_string(w) +
                                " outside " + f.to_string());
      }
    }
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& q = layers[l];
    q.weight_format.validate();
    q.bias_format.validate();
    q.result_format.validate();
    if (q.n_in != config.widths[l] || q.n_out != config.widths[l + 1] ||
        q.weights.size() != static_cast<std::size_t>(q.n_in) * q.n_out ||
        q.bias.size() != static_cast<std::size_t>(q.n_out)) {
      throw InvalidDimension("QuantizedModel: layer " + std::to_string(l) + " has the wrong shape");
    }
    check(q.weights, q.weight_format, "weight");
    check(q.bias, q.bias_format, "bias");
  }
}

QuantizedModel quantize_model(const Mlp& net, const QuantConfig& quant, double scale) {
  quant.validate();
  QuantizedModel qm;
  qm.config = net.config();
  qm.activation_format = quant.activation;
  qm.scale = scale;
  for (int l = 0; l < net.layers(); ++l) {
    QuantLayer q;
    const auto& w = net.weight(l);
    q.n_in = static_cast<int>(w.cols());
    q.n_out = static_cast<int>(w.rows());
    q.weight_format = quant.weight;
    q.bias_format = quant.bias;
    q.result_format = quant.result_format(l);
    q.weights.resize(w.size());
    for (int o = 0; o < q.n_out; ++o) {
      for (int i = 0; i < q.n_in; ++i) q.weights[o * q.n_in + i] = quantize_word(w(o, i), q.weight_format);
    }
    q.bias.resize(q.n_out);
    for (int o = 0; o < q.n_out; ++o) q.bias[o] = quantize_word(net.bias(l)(o), q.bias_format);
    qm.layers.push_back(std::move(q));
  }
  return qm;
}

std::vector<std::int64_t> forward_words(const QuantizedModel& qm, std::int64_t input_word,
                                        QuantTrace* trace) {
  const int fa = qm.activation_format.frac_bits();
  std::vector<std::int64_t> act{input_word};
  if (trace) {
    trace->results.clear();
    trace->saturations.clear();
  }
  for (std::size_t l = 0; l < qm.layers.size(); ++l) {
    const QuantLayer& q = qm.layers[l];
    const int fw = q.weight_format.frac_bits();
    const int fb = q.bias_format.frac_bits();
    const int acc_frac = std::max(fw + fa, fb);
    const int prod_shift = acc_frac - (fw + fa);
    const int bias_shift = acc_frac - fb;
    std::vector<std::int64_t> out(q.n_out);
    int sats = 0;
    for (int o = 0; o < q.n_out; ++o) {
      __int128 acc = static_cast<__int128>(q.bias[o]) << bias_shift;
      for (int i = 0; i < q.n_in; ++i) {
        acc += (static_cast<__int128>(q.weight(o, i)) * act[i]) << prod_shift;
      }
      bool sat = false;
      out[o] = requantize(acc, acc_frac, q.result_format, &sat);
      sats += sat ? 1 : 0;
    }
    if (trace) {
      trace->results.push_back(out);
      trace->saturations.push_back(sats);
    }
    if (l + 1 < qm.layers.size()) {
      const int fr = q.result_format.frac_bits();
      for (auto& v : out) v = requantize(std::max<std::int64_t>(v, 0), fr, qm.activation_format);
    }
    act = std::move(out);
  }
  return act;
}

ParamVector quantized_forward(const QuantizedModel& qm, double alpha) {
  if (qm.layers.empty() || qm.layers.back().n_out != kPulseParams) {
    throw InvalidDimension("quantized_forward: model must emit " + std::to_string(kPulseParams) +
                           " outputs");
  }
  const auto in = quantize_word(alpha / std::numbers::pi, qm.activation_format);
  const auto words = forward_words(qm, in);
  const int fr = qm.layers.back().result_format.frac_bits();
  ParamVector theta{};
  for (int k = 0; k < kPulseParams; ++k) {
    theta[k] = std::ldexp(static_cast<double>(words[k]), -fr) * qm.scale;
  }
  return theta;
}

double quantized_mse(const QuantizedModel& qm, const TrainingData& data) {
  if (data.size() == 0) return 0.0;
  const int fr = qm.layers.back().result_format.frac_bits();
  double sum = 0.0;
  for (Eigen::Index c = 0; c < data.size(); ++c) {
    const auto words = forward_words(qm, quantize_word(data.x(0, c), qm.activation_format));
    for (Eigen::Index k = 0; k < data.y.rows(); ++k) {
      const double d = std::ldexp(static_cast<double>(words[k]), -fr) - data.y(k, c);
      sum += d * d;
    }
  }
  return sum / static_cast<double>(data.y.size());
}

Evaluation evaluate_quantized(const QuantizedModel& qm, const GateSimulator& sim, int level,
                              int grid, int jobs) {
  if (grid < 2) throw std::invalid_argument("evaluate: grid must be >= 2");
  Evaluation ev;
  ev.alphas = angle_grid(grid);
  ev.profile.assign(grid, 0.0);
  parallel_for(ev.alphas.size(), jobs, [&](std::size_t i) {
    const ParamVector theta = quantized_forward(qm, ev.alphas[i]);
    ev.profile[i] = sim.infidelity(PulseParams::from_flat(theta, sim.duration()),
                                   SnapSpec{ev.alphas[i], level});
  });
  ev.mean = std::accumulate(ev.profile.begin(), ev.profile.end(), 0.0) / grid;
  ev.max = *std::max_element(ev.profile.begin(), ev.profile.end());
  return ev;
}

// ---------------------------------------------------------------------------
// Quantization-aware training

namespace {

Eigen::MatrixXd fake_quant(const Eigen::MatrixXd& m, const FixedFormat& f) {
  return m.unaryExpr([&](double v) { return quantize_value(v, f); });
}

}  // namespace

FakeQuantMlp::FakeQuantMlp(Mlp net, QuantConfig quant) : net_(std::move(net)), quant_(std::move(quant)) {
  quant_.validate();
}

Eigen::MatrixXd FakeQuantMlp::forward(const Eigen::MatrixXd& x, Tape* tape) const {
  if (tape) {
    tape->inputs.clear();
    tape->pass.clear();
  }
  const FixedFormat& fa = quant_.activation;
  Eigen::MatrixXd a = fake_quant(x, fa);
  for (int l = 0; l < net_.layers(); ++l) {
    const FixedFormat& fr = quant_.result_format(l);
    Eigen::MatrixXd z = fake_quant(net_.weight(l), quant_.weight) * a;
    z.colwise() += fake_quant(net_.bias(l), quant_.bias).col(0);
    Eigen::ArrayXXd pass = ((z.array() >= fr.min_value()) && (z.array() <= fr.max_value())).cast<double>();
    Eigen::MatrixXd r = fake_quant(z, fr);
    if (l + 1 < net_.layers()) {
      r = r.cwiseMax(0.0);
      pass *= ((r.array() > 0.0) && (r.array() <= fa.max_value())).cast<double>();
      r = fake_quant(r, fa);
    }
    if (tape) {
      tape->inputs.push_back(std::move(a));
      tape->pass.push_back(std::move(pass));
    }
    a = std::move(r);
  }
  return a;
}

void FakeQuantMlp::backward(const Tape& tape, const Eigen::MatrixXd& d_out, std::span<double> grad) const {
  std::vector<std::size_t> offset(net_.layers());
  std::size_t p = 0;
  for (int l = 0; l < net_.layers(); ++l) {
    offset[l] = p;
    p += net_.weight(l).size() + net_.bias(l).size();
  }
  Eigen::MatrixXd delta = d_out;
  for (int l = net_.layers(); l-- > 0;) {
    delta.array() *= tape.pass[l];
    const auto& w = net_.weight(l);
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + offset[l], w.rows(), w.cols());
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + offset[l] + w.size(), w.rows());
    gw.noalias() += delta * tape.inputs[l].transpose();
    gb += delta.rowwise().sum();
    if (l > 0) delta = fake_quant(w, quant_.weight).transpose() * delta;
  }
}

void FakeQuantMlp::clamp() {
  for (int l = 0; l < net_.layers(); ++l) {
    net_.weight(l) = net_.weight(l).cwiseMax(quant_.weight.min_value()).cwiseMin(quant_.weight.max_value());
    net_.bias(l) = net_.bias(l).cwiseMax(quant_.bias.min_value()).cwiseMin(quant_.bias.max_value());
  }
}

QuantizedModel FakeQuantMlp::materialize(double scale) const {
  return quantize_model(net_, quant_, scale);
}

QatResult qat_train(const MlpModel& model, const QuantConfig& quant, const TrainingData& train,
                    const TrainingData& val, const TrainOptions& opts) {
  opts.validate();
  if (train.size() == 0) throw std::invalid_argument("qat_train: empty training split");
  const TrainingData& selection = val.size() > 0 ? val : train;
  FakeQuantMlp fq(model.net(), quant);
  fq.clamp();

  const std::size_t n = fq.net().param_count();
  std::vector<double> params(n);
  std::vector<double> grad(n);
  fq.net().get_params(params);
  optim::AdamState adam(n, opts.beta1, opts.beta2, opts.epsilon);
  std::mt19937_64 rng(opts.seed);
  std::vector<Eigen::Index> order(train.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  auto val_mse = [&] {
    const Eigen::MatrixXd y = fq.forward(selection.x);
    return (y - selection.y).squaredNorm() / static_cast<double>(selection.y.size());
  };

  QatResult res;
  res.history.best_val_loss = val_mse();
  res.history.best_epoch = -1;
  res.shadow = fq.net();
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    const double lr = opts.learning_rate(epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < train.size(); start += opts.batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(opts.batch_size, train.size() - start);
      Eigen::MatrixXd bx(1, count), by(train.y.rows(), count);
      for (Eigen::Index i = 0; i < count; ++i) {
        bx.col(i) = train.x.col(order[start + i]);
        by.col(i) = train.y.col(order[start + i]);
      }
      FakeQuantMlp::Tape tape;
      const Eigen::MatrixXd diff = fq.forward(bx, &tape) - by;
      const double loss = diff.squaredNorm() / static_cast<double>(diff.size());
      if (!std::isfinite(loss)) {
        throw DivergenceError("qat_train: non-finite loss at epoch " + std::to_string(epoch));
      }
      loss_sum += loss * count;
      std::fill(grad.begin(), grad.end(), 0.0);
      fq.backward(tape, 2.0 * diff / static_cast<double>(diff.size()), grad);
      adam.step(params, grad, lr);
      fq.net().set_params(params);
      fq.clamp();
      fq.net().get_params(params);
    }
    const double v = val_mse();
    res.history.epochs.push_back({epoch, lr, loss_sum / train.size(), v});
    if (v < res.history.best_val_loss) {
      res.history.best_val_loss = v;
      res.history.best_epoch = epoch;
      res.shadow = fq.net();
    }
  }
  res.model = quantize_model(res.shadow, quant, model.scale());
  return res;
}

// ---------------------------------------------------------------------------
// Trace comparison

TraceReport trace_compare(const Mlp& reference, const QuantizedModel& qm,
                          std::span<const double> alphas, int jobs) {
  if (reference.config() != qm.config) {
    throw InvalidDimension("trace_compare: architectures differ");
  }
  const int layers = reference.layers();
  const std::size_t n = alphas.size();
  // Per-input traces, reduced in input order afterwards.
  std::vector<std::vector<Eigen::VectorXd>> ref(n);
  std::vector<QuantTrace> qt(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    Eigen::VectorXd a(1);
    a(0) = alphas[i] / std::numbers::pi;
    for (int l = 0; l < layers; ++l) {
      Eigen::VectorXd z = reference.weight(l) * a + reference.bias(l);
      ref[i].push_back(z);
      a = l + 1 < layers ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
    }
    forward_words(qm, quantize_word(alphas[i] / std::numbers::pi, qm.activation_format), &qt[i]);
  });

  TraceReport report;
  for (int l = 0; l < layers; ++l) {
    LayerTrace t;
    t.layer = l;
    const FixedFormat& fr = qm.layers[l].result_format;
    t.step = fr.step();
    for (std::size_t i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < ref[i][l].size(); ++k) {
        t.reference.push_back(ref[i][l](k));
        t.quantized.push_back(std::ldexp(static_cast<double>(qt[i].results[l][k]), -fr.frac_bits()));
      }
      t.saturations += qt[i].saturations[l];
    }
    const std::size_t m = t.reference.size();
    if (m > 0) {
      const double mx = std::accumulate(t.reference.begin(), t.reference.end(), 0.0) / m;
      const double my = std::accumulate(t.quantized.begin(), t.quantized.end(), 0.0) / m;
      double sxx = 0.0, sxy = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        sxx += (t.reference[j] - mx) * (t.reference[j] - mx);
        sxy += (t.reference[j] - mx) * (t.quantized[j] - my);
      }
      t.slope = sxx > 0.0 ? sxy / sxx : 0.0;
      t.intercept = my - t.slope * mx;
      double ss = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double r = t.quantized[j] - (t.intercept + t.slope * t.reference[j]);
        ss += r * r;
      }
      t.residual_rms = std::sqrt(ss / m);
    }
    t.low_int = t.saturations > 0;
    t.low_frac = t.residual_rms > t.step;
    report.layers.push_back(std::move(t));
  }
  return report;
}

ResourceEstimate resource_estimate(const QuantizedModel& qm) {
  ResourceEstimate r;
  const auto a_bits = static_cast<std::uint64_t>(qm.activation_format.total_bits);
  for (const auto& q : qm.layers) {
    r.lut_units += static_cast<std::uint64_t>(q.n_in) * q.n_out * q.weight_format.total_bits * a_bits;
    r.ff_units += static_cast<std::uint64_t>(q.n_out) * q.result_format.total_bits;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Export

namespace {

using nlohmann::json;

json format_json(const FixedFormat& f) {
  return {{"total_bits", f.total_bits}, {"int_bits", f.int_bits}, {"signed", f.is_signed}};
}

FixedFormat format_from(const json& j) {
  FixedFormat f{j.at("total_bits").get<int>(), j.at("int_bits").get<int>(),
                j.at("signed").get<bool>()};
  f.validate();
  return f;
}

}  // namespace

std::string quantized_to_json(const QuantizedModel& qm) {
  qm.validate();
  json layers = json::array();
  for (const auto& q : qm.layers) {
    json rows = json::array();
    for (int o = 0; o < q.n_out; ++o) {
      rows.push_back(std::vector<std::int64_t>(q.weights.begin() + o * q.n_in,
                                               q.weights.begin() + (o + 1) * q.n_in));
    }
    layers.push_back({{"n_in", q.n_in},
                      {"n_out", q.n_out},
                      {"weight_format", format_json(q.weight_format)},
                      {"bias_format", format_json(q.bias_format)},
                      {"result_format", format_json(q.result_format)},
                      {"weights", rows},
                      {"bias", q.bias}});
  }
  json j{{"format", "snapml-quantized"},
         {"version", 1},
         {"widths", qm.config.widths},
         {"scale", qm.scale},
         {"activation_format", format_json(qm.activation_format)},
         {"layers", layers}};
  return j.dump(1) + "\n";
}

QuantizedModel quantized_from_json(const std::string& text) {
  QuantizedModel qm;
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "snapml-quantized") {
      throw SchemaError("quantized model: unexpected format tag");
    }
    qm.config.widths = j.at("widths").get<std::vector<int>>();
    qm.scale = j.at("scale").get<double>();
    qm.activation_format = format_from(j.at("activation_format"));
    for (const auto& l : j.at("layers")) {
      QuantLayer q;
      q.n_in = l.at("n_in").get<int>();
      q.n_out = l.at("n_out").get<int>();
      q.weight_format = format_from(l.at("weight_format"));
      q.bias_format = format_from(l.at("bias_format"));
      q.result_format = format_from(l.at("result_format"));
      for (const auto& row : l.at("weights")) {
        const auto r = row.get<std::vector<std::int64_t>>();
        if (static_cast<int>(r.size()) != q.n_in) throw SchemaError("quantized model: ragged weights");
        q.weights.insert(q.weights.end(), r.begin(), r.end());
      }
      q.bias = l.at("bias").get<std::vector<std::int64_t>>();
      qm.layers.push_back(std::move(q));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("quantized model: ") + e.what());
  }
  try {
    qm.validate();
  } catch (const std::exception& e) {
    throw SchemaError(e.what());
  }
  return qm;
}

void export_weights(const QuantizedModel& qm, const std::filesystem::path& path) {
  write_file_atomic(path, quantized_to_json(qm));
}

QuantizedModel import_weights(const std::filesystem::path& path) {
  return quantized_from_json(read_file(path));
}

}  // namespace snapml
