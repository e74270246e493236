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

// snapml command-line driver.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "snapml/control.hpp"
#include "snapml/datasets.hpp"
#include "snapml/errors.hpp"
#include "snapml/explorer.hpp"
#include "snapml/fixedpoint.hpp"
#include "snapml/io.hpp"
#include "snapml/networks.hpp"
#include "svg.hpp"

#ifndef SNAPML_VERSION
#define SNAPML_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace snapml::cli {
namespace {

struct Common {
  std::uint64_t seed = 0;
  int steps = PropagationConfig{}.steps;
  int grid = 256;
  int jobs = 1;
  int level = 2;
  std::string out = "out";
  SystemSpec system;
  double duration = kDefaultDuration;
};

enum Flags : unsigned {
  kSeed = 1u << 0,
  kSteps = 1u << 1,
  kGrid = 1u << 2,
  kJobs = 1u << 3,
  kLevel = 1u << 4,
  kPhysics = 1u << 5,
};

void add_common(CLI::App* sub, Common& c, unsigned flags) {
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  if (flags & kSeed) sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  if (flags & kSteps) {
    sub->add_option("--steps", c.steps, "Propagation time steps")->capture_default_str()->check(CLI::Range(16, 1 << 20));
  }
  if (flags & kGrid) {
    sub->add_option("--grid", c.grid, "Evaluation grid size")->capture_default_str()->check(CLI::Range(2, 1 << 24));
  }
  if (flags & kJobs) {
    sub->add_option("--jobs", c.jobs, "Worker threads (1 = serial)")->capture_default_str()->check(CLI::Range(1, 1024));
  }
  if (flags & kLevel) {
    sub->add_option("--level", c.level, "Qudit level receiving the SNAP phase")->capture_default_str();
  }
  if (flags & kPhysics) {
    sub->add_option("--d", c.system.d, "Qudit dimension")->capture_default_str();
    sub->add_option("--qubit-levels", c.system.qubit_levels, "Ancilla levels")->capture_default_str();
    sub->add_option("--chi", c.system.chi_mhz, "Dispersive shift (MHz)")->capture_default_str();
    sub->add_option("--xi", c.system.xi_mhz, "Ancilla anharmonicity (MHz)")->capture_default_str();
    sub->add_option("--duration", c.duration, "Pulse duration (ns)")->capture_default_str();
  }
}

GateSimulator make_simulator(const Common& c) {
  return GateSimulator(c.system, PropagationConfig{c.steps}, c.duration);
}

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Collects inputs and outputs of one command and writes manifest.json.
class Manifest {
 public:
  Manifest(const CLI::App& sub, const Common& c, std::vector<std::string> argv)
      : argv_(std::move(argv)), out_(c.out), started_(now_iso()) {
    for (const CLI::App* a = &sub; a && a->get_parent(); a = a->get_parent()) {
      command_ = a->get_name() + (command_.empty() ? "" : " " + command_);
    }
    config_ = sub.config_to_str(true, false);
    seeds_["seed"] = c.seed;
  }

  void input(const fs::path& p) { inputs_.push_back(p.string()); }
  fs::path output(const std::string& name) {
    const fs::path p = fs::path(out_) / name;
    outputs_.push_back(p.string());
    return p;
  }
  void seed(const std::string& name, std::uint64_t v) { seeds_[name] = v; }
  void summary(const std::string& key, json value) { summary_[key] = std::move(value); }

  void write() {
    const fs::path path = fs::path(out_) / "manifest.json";
    outputs_.push_back(path.string());
    json j{{"tool", "snapml"},
           {"version", SNAPML_VERSION},
           {"command", command_},
           {"argv", argv_},
           {"config", config_},
           {"seeds", seeds_},
           {"inputs", inputs_},
           {"outputs", outputs_},
           {"summary", summary_},
           {"started", started_},
           {"finished", now_iso()}};
    write_file_atomic(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::string out_;
  std::string started_;
  std::string config_;
  json seeds_ = json::object();
  json summary_ = json::object();
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
};

fs::path require(const fs::path& p) {
  if (!fs::exists(p)) throw FileNotFound("no such file: " + p.string());
  return p;
}

fs::path dataset_file(const fs::path& p) {
  return require(fs::is_directory(p) ? p / "dataset.csv" : p);
}

fs::path model_file(const fs::path& p, const char* name = "model.json") {
  return require(fs::is_directory(p) ? p / name : p);
}

struct Splits {
  Dataset train, val, test;
  double scale = 0.0;
};

/// Uses train/val/test tables from a preprocessed directory, otherwise splits
/// a single dataset with `seed`.
Splits load_splits(const fs::path& p, std::uint64_t seed, Manifest& m) {
  Splits s;
  if (fs::is_directory(p) && fs::exists(p / "train.csv")) {
    for (auto* name : {"train.csv", "val.csv", "test.csv"}) m.input(require(p / name));
    s.train = load(p / "train.csv");
    s.val = load(p / "val.csv");
    s.test = load(p / "test.csv");
  } else {
    const fs::path f = dataset_file(p);
    m.input(f);
    std::tie(s.train, s.val, s.test) = split(load(f), 0.8, 0.1, 0.1, seed);
  }
  s.scale = s.train.meta.scale > 0.0 ? s.train.meta.scale : max_abs_theta(s.train);
  return s;
}

void write_csv(const fs::path& path, const std::string& header, const std::vector<std::vector<double>>& rows) {
  std::ostringstream o;
  o << header << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) o << (i ? "," : "") << format_double(r[i]);
    o << '\n';
  }
  write_file_atomic(path, o.str());
}

/// Numeric CSV with a header line.
std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_csv(const fs::path& path) {
  std::istringstream in(read_file(require(path)));
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  if (std::getline(in, line)) {
    std::istringstream h(line);
    std::string tok;
    while (std::getline(h, tok, ',')) header.push_back(tok);
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    std::vector<double> row;
    while (std::getline(ls, tok, ',')) {
      try {
        row.push_back(parse_double(tok));
      } catch (const std::invalid_argument& e) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    rows.push_back(std::move(row));
  }
  return {header, rows};
}

void write_history(const fs::path& path, const TrainHistory& h) {
  std::vector<std::vector<double>> rows;
  for (const auto& e : h.epochs) rows.push_back({double(e.epoch), e.lr, e.train_loss, e.val_loss});
  write_csv(path, "epoch,lr,train_loss,val_loss", rows);
}

void write_profile(const fs::path& path, const Evaluation& ev) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < ev.alphas.size(); ++i) rows.push_back({ev.alphas[i], ev.profile[i]});
  write_csv(path, "alpha,infidelity", rows);
}

void print_eval(const Evaluation& ev) {
  std::printf("mean=%.6e max=%.6e\n", ev.mean, ev.max);
}

TrainOptions train_options(CLI::App* sub, TrainOptions& t) {
  sub->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--batch-size", t.batch_size, "Minibatch size")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--lr-start", t.lr_start, "Initial learning rate")->capture_default_str();
  sub->add_option("--lr-end", t.lr_end, "Final learning rate")->capture_default_str();
  return t;
}

void progress_line(const std::string& text) {
  std::cerr << text << '\n';
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  int angles = 64;
  OptimizeOptions opt;
  std::string init = "continuation";
};

void run_generate(const Common& c, GenerateArgs& a, Manifest& m) {
  a.opt.init_mode = parse_init_mode(a.init);
  a.opt.seed = c.seed;
  const GateSimulator sim = make_simulator(c);
  const Dataset ds = generate_dataset(sim, a.angles, c.level, a.opt, c.jobs,
                                      [](int done, int total, const OptimizedSample& s) {
                                        if (done % 16 == 0 || done == total) {
                                          progress_line("generate: " + std::to_string(done) + "/" +
                                                        std::to_string(total) + " alpha=" +
                                                        std::to_string(s.alpha) + " infidelity=" +
                                                        std::to_string(s.infidelity));
                                        }
                                      });
  const fs::path path = m.output("dataset.csv");
  save(ds, path);
  m.output("dataset.csv.meta.json");
  int below = 0;
  double mean = 0.0;
  for (const auto& r : ds.records) {
    below += r.infidelity <= 1e-4 ? 1 : 0;
    mean += r.infidelity;
  }
  mean /= std::max<std::size_t>(ds.size(), 1);
  std::printf("angles=%zu below_1e-4=%d mean_infidelity=%.6e\n", ds.size(), below, mean);
  m.summary("below_1e-4", below);
  m.summary("mean_infidelity", mean);
}

struct PreprocessArgs {
  std::string data;
  double threshold = 1e-4;
  int window = 50;
  double val = 0.1;
  double test = 0.1;
};

void run_preprocess(const Common& c, PreprocessArgs& a, Manifest& m) {
  const fs::path in = dataset_file(a.data);
  m.input(in);
  const Dataset raw = load(in);
  Common phys = c;
  phys.system = raw.meta.system;
  phys.duration = raw.meta.duration;
  const GateSimulator sim = make_simulator(phys);
  const Dataset filtered = filter_by_infidelity(raw, a.threshold);
  if (filtered.size() < 3) {
    throw std::runtime_error("preprocess: only " + std::to_string(filtered.size()) +
                             " records pass the infidelity filter");
  }
  Dataset smoothed = smooth(filtered, a.window, sim);
  auto [train, val, test] = split(smoothed, 1.0 - a.val - a.test, a.val, a.test, c.seed);
  const double scale = max_abs_theta(train);
  for (Dataset* d : {&smoothed, &train, &val, &test}) d->meta.scale = scale;

  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < filtered.size(); ++i) {
    rows.push_back({filtered.records[i].alpha, filtered.records[i].infidelity, smoothed.records[i].infidelity});
  }
  write_csv(m.output("smoothing.csv"), "alpha,infidelity_before,infidelity_after", rows);
  for (auto [name, ds] : {std::pair{"dataset.csv", &smoothed}, {"train.csv", &train},
                          {"val.csv", &val}, {"test.csv", &test}}) {
    save(*ds, m.output(name));
    m.output(std::string(name) + ".meta.json");
  }
  std::printf("kept=%zu of %zu train=%zu val=%zu test=%zu scale=%.6g\n", filtered.size(), raw.size(),
              train.size(), val.size(), test.size(), scale);
  m.summary("kept", filtered.size());
  m.summary("scale", scale);
}

struct TrainArgs {
  std::string data;
  std::vector<int> widths = reference_config().widths;
  TrainOptions train;
};

void finish_model(const Common& c, const Model& model, const Splits& s, const TrainHistory& h,
                  Manifest& m) {
  save_model(model, m.output("model.json"));
  write_history(m.output("history.csv"), h);
  const double test_mse = mse(model, make_training_data(s.test, model.scale()));
  const GateSimulator sim = make_simulator(c);
  const Evaluation ev = evaluate(model, sim, c.level, c.grid, c.jobs);
  write_profile(m.output("profile.csv"), ev);
  std::printf("params=%zu best_epoch=%d val_mse=%.6e test_mse=%.6e ", model.param_count(),
              h.best_epoch, h.best_val_loss, test_mse);
  print_eval(ev);
  m.summary("test_mse", test_mse);
  m.summary("mean_infidelity", ev.mean);
  m.summary("max_infidelity", ev.max);
}

void run_train(const Common& c, TrainArgs& a, Manifest& m) {
  const Splits s = load_splits(a.data, c.seed, m);
  MlpConfig cfg{a.widths};
  cfg.validate_regressor();
  a.train.seed = c.seed;
  MlpModel model(cfg, s.scale, c.seed);
  const auto h = train_mse(model, make_training_data(s.train, s.scale),
                           make_training_data(s.val, s.scale), a.train);
  finish_model(c, model, s, h, m);
}

struct MoeArgs {
  TrainArgs base;
  int experts = 5;
  std::vector<int> gate_hidden = {16, 16};
};

void run_moe(const Common& c, MoeArgs& a, Manifest& m) {
  const Splits s = load_splits(a.base.data, c.seed, m);
  MlpConfig cfg{a.base.widths};
  cfg.validate_regressor();
  a.base.train.seed = c.seed;
  MoeModel model(cfg, a.experts, a.gate_hidden, s.scale, c.seed);
  const auto h = train_mse(model, make_training_data(s.train, s.scale),
                           make_training_data(s.val, s.scale), a.base.train);
  finish_model(c, model, s, h, m);
}

struct MrArgs {
  TrainArgs base;
  std::vector<double> boundaries = {-0.490, -0.426, 0.0, 0.682};  // multiples of pi
};

void run_mr(const Common& c, MrArgs& a, Manifest& m) {
  const Splits s = load_splits(a.base.data, c.seed, m);
  MlpConfig cfg{a.base.widths};
  cfg.validate_regressor();
  a.base.train.seed = c.seed;
  std::vector<double> b;
  for (double v : a.boundaries) b.push_back(v * std::numbers::pi);
  MrModel model(cfg, b, s.scale, c.seed);
  const auto h = train_mse(model, make_training_data(s.train, s.scale),
                           make_training_data(s.val, s.scale), a.base.train);
  finish_model(c, model, s, h, m);
}

struct FinetuneArgs {
  std::string model;
  FinetuneOptions ft;
};

void run_finetune(const Common& c, FinetuneArgs& a, Manifest& m) {
  const fs::path in = model_file(a.model);
  m.input(in);
  auto model = load_model(in);
  a.ft.seed = c.seed;
  a.ft.jobs = c.jobs;
  a.ft.eval_grid = c.grid;
  const GateSimulator sim = make_simulator(c);
  const FinetuneHistory h = finetune_infidelity(*model, sim, c.level, a.ft);
  std::vector<std::vector<double>> rows;
  for (const auto& r : h.rounds) {
    rows.push_back({double(r.round), r.gamma, r.mean_infidelity, r.max_infidelity, double(r.skipped_angles)});
    progress_line("finetune: round " + std::to_string(r.round) + " mean=" + std::to_string(r.mean_infidelity));
  }
  write_csv(m.output("finetune.csv"), "round,gamma,mean_infidelity,max_infidelity,skipped", rows);
  save_model(*model, m.output("model.json"));
  const Evaluation ev = evaluate(*model, sim, c.level, c.grid, c.jobs);
  write_profile(m.output("profile.csv"), ev);
  std::printf("best_round=%d ", h.best_round);
  print_eval(ev);
  m.summary("mean_infidelity", ev.mean);
  m.summary("max_infidelity", ev.max);
}

struct DistillArgs {
  std::string model;
  int angles = 10000;
};

void run_distill(const Common& c, DistillArgs& a, Manifest& m) {
  const fs::path in = model_file(a.model);
  m.input(in);
  const auto teacher = load_model(in);
  const GateSimulator sim = make_simulator(c);
  Dataset ds = distill(*teacher, sim, c.level, a.angles, c.jobs);
  ds.meta.scale = teacher->scale();
  save(ds, m.output("dataset.csv"));
  m.output("dataset.csv.meta.json");
  double mean = 0.0;
  for (const auto& r : ds.records) mean += r.infidelity;
  std::printf("records=%zu mean_infidelity=%.6e\n", ds.size(), mean / ds.size());
}

struct DseArgs {
  std::string data;
  int configs = 100;
  ConfigRanges ranges;
  TrainOptions train{.epochs = 10};
  std::string objective = "mean";
};

void run_dse(const Common& c, DseArgs& a, Manifest& m) {
  const Splits s = load_splits(a.data, c.seed, m);
  const auto configs = random_configs(a.configs, c.seed, a.ranges);
  ExploreOptions eo;
  eo.train = a.train;
  eo.train.seed = c.seed;
  eo.eval_grid = c.grid;
  eo.level = c.level;
  eo.jobs = c.jobs;
  const GateSimulator sim = make_simulator(c);
  const auto points = explore(configs, s.train, s.val, s.test, sim, eo,
                              [](std::size_t done, std::size_t total, const DsePoint& p) {
                                progress_line("dse: " + std::to_string(done) + "/" + std::to_string(total) +
                                              " " + p.name + " mean=" + std::to_string(p.mean_infidelity));
                              });
  const auto obj = a.objective == "max" ? ParetoObjective::kMaxInfidelity : ParetoObjective::kMeanInfidelity;
  const auto front = pareto_front(points, obj);
  save_results(points, m.output("results.csv"));
  save_results(front, m.output("pareto.csv"));
  std::printf("configs=%zu pareto=%zu\n", points.size(), front.size());
  for (const auto& p : front) std::printf("  %s mean=%.6e max=%.6e\n", p.name.c_str(), p.mean_infidelity, p.max_infidelity);
}

struct QuantizeArgs {
  std::string model;
  std::string data;
  std::vector<int> frac_bits = {8};
  std::vector<int> result = {16, 6};
  TrainOptions train{.epochs = 20};
  bool post_training = false;
};

QuantConfig quant_config(int frac, const std::vector<int>& result) {
  QuantConfig q = QuantConfig::uniform(frac);
  if (result.size() != 2) throw std::invalid_argument("--result expects W,I");
  q.result = FixedFormat{result[0], result[1], true};
  q.validate();
  return q;
}

const MlpModel& as_mlp(const Model& m) {
  const auto* mlp = dynamic_cast<const MlpModel*>(&m);
  if (!mlp) throw std::invalid_argument("quantization needs a plain MLP model, got '" + m.kind() + "'");
  return *mlp;
}

void run_quantize(const Common& c, QuantizeArgs& a, Manifest& m) {
  const fs::path in = model_file(a.model);
  m.input(in);
  const auto loaded = load_model(in);
  const MlpModel& model = as_mlp(*loaded);
  Splits s;
  if (!a.post_training) {
    s = load_splits(a.data, c.seed, m);
  }
  const GateSimulator sim = make_simulator(c);
  std::vector<std::vector<double>> rows;
  for (int f : a.frac_bits) {
    const QuantConfig q = quant_config(f, a.result);
    QuantizedModel qm;
    double val_mse = 0.0;
    if (a.post_training) {
      qm = quantize_model(model.net(), q, model.scale());
    } else {
      TrainOptions t = a.train;
      t.seed = c.seed;
      const auto r = qat_train(model, q, make_training_data(s.train, model.scale()),
                               make_training_data(s.val, model.scale()), t);
      qm = r.model;
      val_mse = r.history.best_val_loss;
    }
    export_weights(qm, m.output("quantized_f" + std::to_string(f) + ".json"));
    const Evaluation ev = evaluate_quantized(qm, sim, c.level, c.grid, c.jobs);
    const ResourceEstimate re = resource_estimate(qm);
    rows.push_back({double(f), val_mse, ev.mean, ev.max, double(re.lut_units), double(re.ff_units)});
    std::printf("frac_bits=%d lut_units=%llu ff_units=%llu ", f,
                static_cast<unsigned long long>(re.lut_units), static_cast<unsigned long long>(re.ff_units));
    print_eval(ev);
  }
  write_csv(m.output("quantization.csv"), "frac_bits,val_mse,mean_infidelity,max_infidelity,lut_units,ff_units", rows);
}

struct TraceArgs {
  std::string model;
  std::string quantized;
};

void run_trace(const Common& c, TraceArgs& a, Manifest& m) {
  const fs::path fin = model_file(a.model);
  const fs::path qin = require(a.quantized);
  m.input(fin);
  m.input(qin);
  const auto loaded = load_model(fin);
  const QuantizedModel qm = import_weights(qin);
  const auto alphas = angle_grid(c.grid);
  const TraceReport rep = trace_compare(as_mlp(*loaded).net(), qm, alphas, c.jobs);
  std::vector<std::vector<double>> pairs, summary;
  for (const auto& l : rep.layers) {
    for (std::size_t i = 0; i < l.reference.size(); ++i) pairs.push_back({double(l.layer), l.reference[i], l.quantized[i]});
    summary.push_back({double(l.layer), l.slope, l.intercept, l.residual_rms, double(l.saturations), l.step,
                       double(l.low_int), double(l.low_frac)});
    std::printf("layer=%d slope=%.6f residual_rms=%.3e saturations=%d%s%s\n", l.layer, l.slope, l.residual_rms,
                l.saturations, l.low_int ? " low_int" : "", l.low_frac ? " low_frac" : "");
  }
  write_csv(m.output("trace.csv"), "layer,reference,quantized", pairs);
  write_csv(m.output("trace_summary.csv"), "layer,slope,intercept,residual_rms,saturations,step,low_int,low_frac",
            summary);
}

struct EvaluateArgs {
  std::string model;
};

void run_evaluate(const Common& c, EvaluateArgs& a, Manifest& m) {
  const fs::path in = model_file(a.model);
  m.input(in);
  const std::string text = read_file(in);
  const GateSimulator sim = make_simulator(c);
  Evaluation ev;
  if (text.find("\"snapml-quantized\"") != std::string::npos) {
    ev = evaluate_quantized(quantized_from_json(text), sim, c.level, c.grid, c.jobs);
  } else {
    ev = evaluate(*model_from_json(text), sim, c.level, c.grid, c.jobs);
  }
  write_profile(m.output("profile.csv"), ev);
  print_eval(ev);
  m.summary("mean_infidelity", ev.mean);
  m.summary("max_infidelity", ev.max);
}

struct ExportArgs {
  std::string model;
  int frac_bits = 8;
  std::vector<int> result = {16, 6};
};

std::string c_header(const QuantizedModel& qm) {
  std::ostringstream o;
  o << "// Generated by snapml " << SNAPML_VERSION << ". Integer weight words.\n#pragma once\n#include <stdint.h>\n\n";
  o << "static const double snapml_scale = " << format_double(qm.scale) << ";\n";
  o << "static const int snapml_activation_frac = " << qm.activation_format.frac_bits() << ";\n";
  for (std::size_t l = 0; l < qm.layers.size(); ++l) {
    const auto& q = qm.layers[l];
    o << "\n// layer " << l << ": " << q.n_out << "x" << q.n_in << ", weights " << q.weight_format.to_string()
      << ", bias " << q.bias_format.to_string() << ", result " << q.result_format.to_string() << "\n";
    o << "static const int32_t snapml_w" << l << "[" << q.weights.size() << "] = {";
    for (std::size_t i = 0; i < q.weights.size(); ++i) o << (i ? ", " : "") << q.weights[i];
    o << "};\nstatic const int32_t snapml_b" << l << "[" << q.bias.size() << "] = {";
    for (std::size_t i = 0; i < q.bias.size(); ++i) o << (i ? ", " : "") << q.bias[i];
    o << "};\n";
  }
  return o.str();
}

void run_export(const Common&, ExportArgs& a, Manifest& m) {
  const fs::path in = model_file(a.model);
  m.input(in);
  const std::string text = read_file(in);
  QuantizedModel qm;
  if (text.find("\"snapml-quantized\"") != std::string::npos) {
    qm = quantized_from_json(text);
  } else {
    const auto model = model_from_json(text);
    qm = quantize_model(as_mlp(*model).net(), quant_config(a.frac_bits, a.result), model->scale());
  }
  export_weights(qm, m.output("weights.json"));
  write_file_atomic(m.output("weights.h"), c_header(qm));
  const ResourceEstimate re = resource_estimate(qm);
  std::printf("layers=%zu lut_units=%llu ff_units=%llu\n", qm.layers.size(),
              static_cast<unsigned long long>(re.lut_units), static_cast<unsigned long long>(re.ff_units));
}

// ---------------------------------------------------------------------------
// plot: reads emitted tables only.

struct PlotArgs {
  std::string data;
  std::string profile;
  std::string results;
  std::string trace;
};

void plot_heatmap(PlotArgs& a, Manifest& m) {
  const fs::path in = dataset_file(a.data);
  m.input(in);
  const Dataset ds = load(in);
  std::vector<double> xs;
  std::vector<std::vector<double>> values(kPulseParams);
  std::vector<std::vector<double>> table;
  for (const auto& r : ds.records) {
    xs.push_back(r.alpha / std::numbers::pi);
    for (int k = 0; k < kPulseParams; ++k) {
      values[k].push_back(r.theta[k]);
      table.push_back({r.alpha, double(k), r.theta[k]});
    }
  }
  write_csv(m.output("heatmap.csv"), "alpha,index,value", table);
  write_file_atomic(m.output("heatmap.svg"),
                    svg::heatmap(xs, values, "alpha / pi", "coefficient index", "Pulse coefficients"));
}

void plot_infidelity(PlotArgs& a, Manifest& m) {
  std::vector<double> x, y;
  if (!a.profile.empty()) {
    m.input(require(a.profile));
    const auto [header, rows] = read_csv(a.profile);
    if (header.size() < 2 || header[0] != "alpha") throw SchemaError(a.profile + ": expected alpha,infidelity table");
    for (const auto& r : rows) {
      x.push_back(r[0]);
      y.push_back(r[1]);
    }
  } else {
    const fs::path in = dataset_file(a.data);
    m.input(in);
    for (const auto& r : load(in).records) {
      x.push_back(r.alpha);
      y.push_back(r.infidelity);
    }
  }
  std::vector<std::vector<double>> table;
  for (std::size_t i = 0; i < x.size(); ++i) table.push_back({x[i], y[i]});
  write_csv(m.output("infidelity.csv"), "alpha,infidelity", table);
  for (double& v : x) v /= std::numbers::pi;
  svg::Series s{"infidelity", x, y};
  write_file_atomic(m.output("infidelity.svg"),
                    svg::chart({s}, {"alpha / pi"}, {"infidelity", true}, "Infidelity vs angle"));
}

void plot_pareto(PlotArgs& a, Manifest& m) {
  m.input(require(a.results));
  const auto points = load_results(a.results);
  const auto front = pareto_front(points);
  svg::Series all{"all", {}, {}, "#9a9a9a", false, true};
  svg::Series pf{"pareto", {}, {}, "#d62728", true, true};
  std::vector<std::vector<double>> table;
  for (const auto& p : points) {
    all.x.push_back(double(p.params));
    all.y.push_back(p.mean_infidelity);
  }
  for (const auto& p : front) {
    pf.x.push_back(double(p.params));
    pf.y.push_back(p.mean_infidelity);
  }
  for (const auto& p : points) {
    bool on_front = false;
    for (const auto& q : front) on_front = on_front || (q.name == p.name && q.params == p.params &&
                                                         q.mean_infidelity == p.mean_infidelity);
    table.push_back({double(p.params), p.mean_infidelity, p.max_infidelity, double(on_front)});
  }
  write_csv(m.output("pareto.csv"), "params,mean_infidelity,max_infidelity,pareto", table);
  write_file_atomic(m.output("pareto.svg"), svg::chart({all, pf}, {"parameters", true},
                                                       {"mean infidelity", true}, "Design space"));
}

void plot_trace(PlotArgs& a, Manifest& m) {
  m.input(require(a.trace));
  const auto [header, rows] = read_csv(a.trace);
  if (header.size() != 3 || header[0] != "layer") throw SchemaError(a.trace + ": expected layer,reference,quantized table");
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::vector<svg::Series> series;
  for (const auto& r : rows) {
    const auto layer = static_cast<std::size_t>(r[0]);
    while (series.size() <= layer) {
      series.push_back({"layer " + std::to_string(series.size()), {}, {}, palette[series.size() % 10], false, true});
    }
    series[layer].x.push_back(r[1]);
    series[layer].y.push_back(r[2]);
  }
  write_csv(m.output("trace.csv"), "layer,reference,quantized", rows);
  write_file_atomic(m.output("trace.svg"),
                    svg::chart(series, {"reference output"}, {"quantized output"}, "Layer trace"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pulse-synthesis models for SNAP gates on a cavity qudit"};
  app.set_version_flag("--version", SNAPML_VERSION);
  app.set_config("--config", "", "TOML config file (flags take precedence)");
  app.require_subcommand(1);

  Common common;
  GenerateArgs gen;
  PreprocessArgs pre;
  TrainArgs tr;
  MoeArgs moe;
  MrArgs mr;
  FinetuneArgs ft;
  DistillArgs dist;
  DseArgs dse;
  QuantizeArgs quant;
  TraceArgs trace;
  EvaluateArgs eval;
  ExportArgs exp;
  PlotArgs plot;

  auto* g = app.add_subcommand("generate", "Optimize pulses over an angle grid");
  add_common(g, common, kSeed | kSteps | kJobs | kLevel | kPhysics);
  g->add_option("--angles", gen.angles, "Number of grid angles")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--init", gen.init, "continuation | random")->capture_default_str();
  g->add_option("--restarts", gen.opt.restarts, "Random restarts per angle")->capture_default_str();
  g->add_option("--max-iters", gen.opt.max_iters, "Optimizer iterations")->capture_default_str();
  g->add_option("--target", gen.opt.target_infidelity, "Target infidelity")->capture_default_str();

  auto* p = app.add_subcommand("preprocess", "Filter, smooth and split a dataset");
  add_common(p, common, kSeed | kSteps);
  p->add_option("--data", pre.data, "Dataset file or directory")->required();
  p->add_option("--threshold", pre.threshold, "Infidelity filter")->capture_default_str();
  p->add_option("--window", pre.window, "Smoothing window (records)")->capture_default_str();
  p->add_option("--val", pre.val, "Validation fraction")->capture_default_str();
  p->add_option("--test", pre.test, "Test fraction")->capture_default_str();

  auto* t = app.add_subcommand("train", "Train an MLP on MSE");
  add_common(t, common, kSeed | kSteps | kGrid | kJobs | kLevel | kPhysics);
  t->add_option("--data", tr.data, "Preprocessed directory or dataset")->required();
  t->add_option("--widths", tr.widths, "Layer widths")->delimiter(',')->capture_default_str();
  train_options(t, tr.train);

  auto* mo = app.add_subcommand("moe", "Train a mixture of experts");
  add_common(mo, common, kSeed | kSteps | kGrid | kJobs | kLevel | kPhysics);
  mo->add_option("--data", moe.base.data, "Preprocessed directory or dataset")->required();
  mo->add_option("--widths", moe.base.widths, "Expert layer widths")->delimiter(',')->capture_default_str();
  mo->add_option("--experts", moe.experts, "Number of experts")->capture_default_str()->check(CLI::PositiveNumber);
  mo->add_option("--gate-hidden", moe.gate_hidden, "Gate hidden widths")->delimiter(',')->capture_default_str();
  train_options(mo, moe.base.train);

  auto* r = app.add_subcommand("mr", "Train a multi-region model");
  add_common(r, common, kSeed | kSteps | kGrid | kJobs | kLevel | kPhysics);
  r->add_option("--data", mr.base.data, "Preprocessed directory or dataset")->required();
  r->add_option("--widths", mr.base.widths, "Regressor layer widths")->delimiter(',')->capture_default_str();
  r->add_option("--boundaries", mr.boundaries, "Region boundaries in units of pi")->delimiter(',')->capture_default_str();
  train_options(r, mr.base.train);

  auto* f = app.add_subcommand("finetune", "Minimize model infidelity directly");
  add_common(f, common, kSeed | kSteps | kGrid | kJobs | kLevel | kPhysics);
  f->add_option("--model", ft.model, "Model file or directory")->required();
  f->add_option("--rounds", ft.ft.rounds, "Rounds")->capture_default_str();
  f->add_option("--batches", ft.ft.batches_per_round, "Batches per round")->capture_default_str();
  f->add_option("--angles", ft.ft.angles_per_batch, "Angles per batch")->capture_default_str();
  f->add_option("--lr", ft.ft.lr, "Learning rate")->capture_default_str();

  auto* d = app.add_subcommand("distill", "Sample a teacher model into a dataset");
  add_common(d, common, kSteps | kJobs | kLevel | kPhysics);
  d->add_option("--model", dist.model, "Teacher model")->required();
  d->add_option("--angles", dist.angles, "Grid size")->capture_default_str()->check(CLI::PositiveNumber);

  auto* x = app.add_subcommand("dse", "Random architecture search and Pareto front");
  add_common(x, common, kSeed | kSteps | kGrid | kJobs | kLevel | kPhysics);
  x->add_option("--data", dse.data, "Preprocessed directory or dataset")->required();
  x->add_option("--configs", dse.configs, "Number of random configurations")->capture_default_str();
  x->add_option("--min-depth", dse.ranges.min_depth)->capture_default_str();
  x->add_option("--max-depth", dse.ranges.max_depth)->capture_default_str();
  x->add_option("--min-width", dse.ranges.min_width)->capture_default_str();
  x->add_option("--max-width", dse.ranges.max_width)->capture_default_str();
  x->add_option("--objective", dse.objective, "mean | max")->check(CLI::IsMember({"mean", "max"}))->capture_default_str();
  train_options(x, dse.train);

  auto* q = app.add_subcommand("quantize", "Quantization-aware training to fixed point");
  add_common(q, common, kSeed | kSteps | kGrid | kJobs | kLevel | kPhysics);
  q->add_option("--model", quant.model, "Float MLP model")->required();
  q->add_option("--data", quant.data, "Preprocessed directory or dataset");
  q->add_option("--frac-bits", quant.frac_bits, "Fractional bits (list)")->delimiter(',')->capture_default_str();
  q->add_option("--result", quant.result, "Layer result format W,I")->delimiter(',')->capture_default_str();
  q->add_flag("--post-training", quant.post_training, "Round the float weights without retraining");
  train_options(q, quant.train);

  auto* tc = app.add_subcommand("trace", "Compare float and fixed-point layer outputs");
  add_common(tc, common, kGrid | kJobs);
  tc->add_option("--model", trace.model, "Float MLP model")->required();
  tc->add_option("--quantized", trace.quantized, "Quantized model")->required();

  auto* e = app.add_subcommand("evaluate", "Infidelity profile of a model");
  add_common(e, common, kSteps | kGrid | kJobs | kLevel | kPhysics);
  e->add_option("--model", eval.model, "Float or quantized model")->required();

  auto* ex = app.add_subcommand("export", "Write integer weights");
  add_common(ex, common, 0);
  ex->add_option("--model", exp.model, "Quantized or float MLP model")->required();
  ex->add_option("--frac-bits", exp.frac_bits, "Fractional bits for float models")->capture_default_str();
  ex->add_option("--result", exp.result, "Layer result format W,I")->delimiter(',')->capture_default_str();

  auto* pl = app.add_subcommand("plot", "Render emitted tables as SVG");
  pl->require_subcommand(1);
  auto* ph = pl->add_subcommand("heatmap", "Coefficient heatmap of a dataset");
  add_common(ph, common, 0);
  ph->add_option("--data", plot.data, "Dataset file or directory")->required();
  auto* pi = pl->add_subcommand("infidelity", "Infidelity versus angle");
  add_common(pi, common, 0);
  pi->add_option("--profile", plot.profile, "profile.csv from evaluate");
  pi->add_option("--data", plot.data, "Dataset file or directory");
  auto* pp = pl->add_subcommand("pareto", "Parameter count versus infidelity");
  add_common(pp, common, 0);
  pp->add_option("--results", plot.results, "results.csv from dse")->required();
  auto* pt = pl->add_subcommand("trace", "Layer trace scatter");
  add_common(pt, common, 0);
  pt->add_option("--trace", plot.trace, "trace.csv from trace")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (pi->parsed() && plot.profile.empty() && plot.data.empty()) {
    std::cerr << "plot infidelity: one of --profile or --data is required\n";
    return 2;
  }
  if (q->parsed() && !quant.post_training && quant.data.empty()) {
    std::cerr << "quantize: --data is required unless --post-training is given\n";
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  CLI::App* leaf = sub->get_subcommands().empty() ? sub : sub->get_subcommands().front();
  try {
    common.system.validate();
    Manifest m(*leaf, common, std::vector<std::string>(argv, argv + argc));
    if (g->parsed()) run_generate(common, gen, m);
    else if (p->parsed()) run_preprocess(common, pre, m);
    else if (t->parsed()) run_train(common, tr, m);
    else if (mo->parsed()) run_moe(common, moe, m);
    else if (r->parsed()) run_mr(common, mr, m);
    else if (f->parsed()) run_finetune(common, ft, m);
    else if (d->parsed()) run_distill(common, dist, m);
    else if (x->parsed()) run_dse(common, dse, m);
    else if (q->parsed()) run_quantize(common, quant, m);
    else if (tc->parsed()) run_trace(common, trace, m);
    else if (e->parsed()) run_evaluate(common, eval, m);
    else if (ex->parsed()) run_export(common, exp, m);
    else if (ph->parsed()) plot_heatmap(plot, m);
    else if (pi->parsed()) plot_infidelity(plot, m);
    else if (pp->parsed()) plot_pareto(plot, m);
    else if (pt->parsed()) plot_trace(plot, m);
    m.write();
  } catch (const FileNotFound& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace snapml::cli

int main(int argc, char** argv) { return snapml::cli::main(argc, argv); }
