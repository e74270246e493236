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

#include "snapml/explorer.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>
#include <sstream>

#include "snapml/errors.hpp"
#include "snapml/io.hpp"
#include "snapml/parallel.hpp"

namespace snapml {

std::string to_string(Stage s) {
  switch (s) {
    case Stage::kTrained: return "trained";
    case Stage::kFinetuned: return "finetuned";
    case Stage::kDistilled: return "distilled";
  }
  return "trained";
}

Stage parse_stage(const std::string& s) {
  if (s == "trained") return Stage::kTrained;
  if (s == "finetuned") return Stage::kFinetuned;
  if (s == "distilled") return Stage::kDistilled;
  throw std::invalid_argument("unknown stage '" + s + "'");
}

void ConfigRanges::validate() const {
  if (min_depth < 1 || max_depth < min_depth) throw std::invalid_argument("ConfigRanges: bad depth range");
  if (min_width < 1 || max_width < min_width) throw std::invalid_argument("ConfigRanges: bad width range");
}

std::vector<MlpConfig> random_configs(int n, std::uint64_t seed, const ConfigRanges& ranges) {
  if (n < 0) throw std::invalid_argument("random_configs: n must be >= 0");
  ranges.validate();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> depth(ranges.min_depth, ranges.max_depth);
  std::uniform_real_distribution<double> log_width(std::log(ranges.min_width - 0.5),
                                                   std::log(ranges.max_width + 0.5));
  std::vector<MlpConfig> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    MlpConfig c;
    c.widths.push_back(1);
    const int d = depth(rng);
    for (int k = 0; k < d; ++k) {
      const int w = static_cast<int>(std::lround(std::exp(log_width(rng))));
      c.widths.push_back(std::clamp(w, ranges.min_width, ranges.max_width));
    }
    c.widths.push_back(kPulseParams);
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

double objective_value(const DsePoint& p, ParetoObjective o) {
  return o == ParetoObjective::kMeanInfidelity ? p.mean_infidelity : p.max_infidelity;
}

}  // namespace

bool dominates(const DsePoint& a, const DsePoint& b, ParetoObjective objective) {
  const double fa = objective_value(a, objective);
  const double fb = objective_value(b, objective);
  return a.params <= b.params && fa <= fb && (a.params < b.params || fa < fb);
}

std::vector<DsePoint> pareto_front(const std::vector<DsePoint>& points, ParetoObjective objective) {
  if (points.empty()) throw std::invalid_argument("pareto_front: no points");
  std::vector<std::size_t> idx(points.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].params != points[b].params) return points[a].params < points[b].params;
    return objective_value(points[a], objective) < objective_value(points[b], objective);
  });
  // Sweep by increasing parameter count keeping the running best objective.
  std::vector<DsePoint> front;
  double best = std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    const std::size_t params = points[idx[i]].params;
    while (j < idx.size() && points[idx[j]].params == params) ++j;
    // Within a parameter group only the minimal objective (and its ties) can survive.
    const double group_min = objective_value(points[idx[i]], objective);
    if (group_min < best) {
      for (std::size_t k = i; k < j && objective_value(points[idx[k]], objective) == group_min; ++k) {
        front.push_back(points[idx[k]]);
      }
      best = group_min;
    }
    i = j;
  }
  return front;
}

std::vector<DsePoint> explore(const std::vector<MlpConfig>& configs, const Dataset& train,
                              const Dataset& val, const Dataset& test, const GateSimulator& sim,
                              const ExploreOptions& opts, const ExploreProgress& progress) {
  opts.train.validate();
  for (const auto& c : configs) c.validate_regressor();
  const double scale = max_abs_theta(train);
  const TrainingData tr = make_training_data(train, scale);
  const TrainingData va = make_training_data(val, scale);
  const TrainingData te = make_training_data(test, scale);

  std::vector<DsePoint> out(configs.size());
  std::mutex mu;
  std::size_t done = 0;
  parallel_for(configs.size(), opts.jobs, [&](std::size_t i) {
    const std::uint64_t seed = mix_seed(opts.train.seed, i);
    MlpModel model(configs[i], scale, seed);
    TrainOptions to = opts.train;
    to.seed = seed;
    train_mse(model, tr, va, to);
    const Evaluation ev = evaluate(model, sim, opts.level, opts.eval_grid, 1);
    DsePoint p;
    p.name = configs[i].name();
    p.config = configs[i];
    p.params = configs[i].param_count();
    p.test_mse = mse(model, te);
    p.mean_infidelity = ev.mean;
    p.max_infidelity = ev.max;
    p.stage = Stage::kTrained;
    out[i] = p;
    if (progress) {
      std::lock_guard lock(mu);
      progress(++done, configs.size(), p);
    }
  });
  return out;
}

namespace {

std::string widths_string(const MlpConfig& c) {
  std::string s;
  for (std::size_t i = 0; i < c.widths.size(); ++i) {
    if (i) s += '-';
    s += std::to_string(c.widths[i]);
  }
  return s;
}

MlpConfig parse_widths(const std::string& s) {
  MlpConfig c;
  if (s.empty()) return c;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, '-')) c.widths.push_back(std::stoi(tok));
  return c;
}

}  // namespace

void save_results(const std::vector<DsePoint>& points, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "name,params,test_mse,mean_infidelity,max_infidelity,stage,widths\n";
  for (const auto& p : points) {
    out << p.name << ',' << p.params << ',' << format_double(p.test_mse) << ','
        << format_double(p.mean_infidelity) << ',' << format_double(p.max_infidelity) << ','
        << to_string(p.stage) << ',' << (p.config.widths.empty() ? p.descriptor : widths_string(p.config))
        << '\n';
  }
  write_file_atomic(path, out.str());
}

std::vector<DsePoint> load_results(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  if (line != "name,params,test_mse,mean_infidelity,max_infidelity,stage,widths") {
    throw SchemaError(path.string() + ":1: unexpected results header");
  }
  std::vector<DsePoint> points;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) f.push_back(tok);
    if (f.size() == 6) f.emplace_back();
    if (f.size() != 7) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 7 fields");
    }
    try {
      DsePoint p;
      p.name = f[0];
      p.params = std::stoull(f[1]);
      p.test_mse = parse_double(f[2]);
      p.mean_infidelity = parse_double(f[3]);
      p.max_infidelity = parse_double(f[4]);
      p.stage = parse_stage(f[5]);
      if (!f[6].empty() && f[6].find_first_not_of("0123456789-") == std::string::npos) {
        p.config = parse_widths(f[6]);
      } else {
        p.descriptor = f[6];
      }
      points.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return points;
}

}  // namespace snapml
