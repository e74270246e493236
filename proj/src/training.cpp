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

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>

#include "snapml/errors.hpp"
#include "snapml/networks.hpp"
#include "snapml/optim.hpp"
#include "snapml/parallel.hpp"

namespace snapml {

TrainingData make_training_data(const Dataset& ds, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("make_training_data: scale must be positive");
  TrainingData d;
  const auto n = static_cast<Eigen::Index>(ds.size());
  d.x.resize(1, n);
  d.y.resize(kPulseParams, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = ds.records[i];
    d.x(0, i) = r.alpha / std::numbers::pi;
    for (int k = 0; k < kPulseParams; ++k) d.y(k, i) = r.theta[k] / scale;
  }
  return d;
}

void TrainOptions::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainOptions: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("TrainOptions: batch_size must be >= 1");
  if (!(lr_start > 0.0) || !(lr_end > 0.0)) {
    throw std::invalid_argument("TrainOptions: learning rates must be positive");
  }
}

double TrainOptions::learning_rate(int epoch) const {
  if (epochs == 1) return lr_start;
  const double frac = static_cast<double>(epoch) / (epochs - 1);
  return lr_start * std::pow(lr_end / lr_start, frac);
}

double mse(const Model& model, const TrainingData& data) {
  if (data.size() == 0) return 0.0;
  const Eigen::MatrixXd y = model.predict(data.x);
  return (y - data.y).squaredNorm() / static_cast<double>(data.y.size());
}

namespace {

TrainingData subset(const TrainingData& d, std::span<const Eigen::Index> cols) {
  TrainingData out;
  out.x.resize(d.x.rows(), cols.size());
  out.y.resize(d.y.rows(), cols.size());
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out.x.col(i) = d.x.col(cols[i]);
    out.y.col(i) = d.y.col(cols[i]);
  }
  return out;
}

TrainHistory train_generic(Model& model, const TrainingData& train, const TrainingData& val,
                           const TrainOptions& opts) {
  opts.validate();
  if (train.size() == 0) throw std::invalid_argument("train_mse: empty training split");
  const TrainingData& selection = val.size() > 0 ? val : train;

  const std::size_t n_params = model.param_count();
  std::vector<double> params = model.params();
  std::vector<double> grad(n_params);
  std::vector<double> best = params;
  optim::AdamState adam(n_params, opts.beta1, opts.beta2, opts.epsilon);
  std::mt19937_64 rng(opts.seed);

  std::vector<Eigen::Index> order(train.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  TrainHistory hist;
  hist.best_val_loss = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    const double lr = opts.learning_rate(epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    Eigen::Index seen = 0;
    for (Eigen::Index start = 0; start < train.size(); start += opts.batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(opts.batch_size, train.size() - start);
      const TrainingData batch = subset(train, std::span(order).subspan(start, count));
      double batch_loss = 0.0;
      model.predict_backward(
          batch.x,
          [&](const Eigen::MatrixXd& y) {
            const Eigen::MatrixXd diff = y - batch.y;
            batch_loss = diff.squaredNorm() / static_cast<double>(diff.size());
            return Eigen::MatrixXd(2.0 * diff / static_cast<double>(diff.size()));
          },
          grad);
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError("train_mse: non-finite loss at epoch " + std::to_string(epoch));
      }
      loss_sum += batch_loss * count;
      seen += count;
      adam.step(params, grad, lr);
      model.set_params(params);
    }
    const double val_loss = mse(model, selection);
    if (!std::isfinite(val_loss)) {
      throw DivergenceError("train_mse: non-finite validation loss at epoch " +
                            std::to_string(epoch));
    }
    hist.epochs.push_back({epoch, lr, loss_sum / seen, val_loss});
    if (val_loss < hist.best_val_loss) {
      hist.best_val_loss = val_loss;
      hist.best_epoch = epoch;
      best = params;
    }
  }
  model.set_params(best);
  return hist;
}

}  // namespace

TrainHistory train_mse(Model& model, const TrainingData& train, const TrainingData& val,
                       const TrainOptions& opts) {
  auto* mr = dynamic_cast<MrModel*>(&model);
  if (!mr) return train_generic(model, train, val, opts);

  // Independent per-region training; history entries are summed over regions.
  TrainHistory total;
  auto columns_in = [&](const TrainingData& d, int k) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index c = 0; c < d.size(); ++c) {
      if (mr->region(d.x(0, c) * std::numbers::pi) == k) cols.push_back(c);
    }
    return cols;
  };
  double weighted_val = 0.0;
  for (int k = 0; k < mr->regions(); ++k) {
    const auto tc = columns_in(train, k);
    if (tc.empty()) continue;
    const auto vc = columns_in(val, k);
    MlpModel part(mr->regressor(k), mr->scale(), mr->seed());
    TrainOptions region_opts = opts;
    region_opts.seed = mix_seed(opts.seed, static_cast<std::uint64_t>(k));
    const TrainingData region_val = vc.empty() ? subset(train, tc) : subset(val, vc);
    const TrainHistory h = train_generic(part, subset(train, tc), region_val, region_opts);
    mr->regressor(k) = part.net();
    if (total.epochs.empty()) total.epochs.resize(h.epochs.size());
    for (std::size_t e = 0; e < h.epochs.size(); ++e) {
      total.epochs[e].epoch = h.epochs[e].epoch;
      total.epochs[e].lr = h.epochs[e].lr;
      total.epochs[e].train_loss += h.epochs[e].train_loss * tc.size() / train.size();
      total.epochs[e].val_loss += h.epochs[e].val_loss * region_val.size();
    }
    weighted_val += static_cast<double>(region_val.size());
  }
  if (weighted_val > 0.0) {
    for (auto& e : total.epochs) e.val_loss /= weighted_val;
  }
  total.best_val_loss = mse(*mr, val.size() > 0 ? val : train);
  total.best_epoch = static_cast<int>(total.epochs.size()) - 1;
  return total;
}

// ---------------------------------------------------------------------------
// Infidelity evaluation and fine-tuning

Evaluation evaluate(const Model& model, const GateSimulator& sim, int level, int grid, int jobs) {
  if (grid < 2) throw std::invalid_argument("evaluate: grid must be >= 2");
  Evaluation ev;
  ev.alphas = angle_grid(grid);
  ev.profile.assign(grid, 0.0);
  parallel_for(ev.alphas.size(), jobs, [&](std::size_t i) {
    const ParamVector theta = model.forward(ev.alphas[i]);
    ev.profile[i] = sim.infidelity(PulseParams::from_flat(theta, sim.duration()),
                                   SnapSpec{ev.alphas[i], level});
  });
  ev.mean = std::accumulate(ev.profile.begin(), ev.profile.end(), 0.0) / grid;
  ev.max = *std::max_element(ev.profile.begin(), ev.profile.end());
  return ev;
}

Dataset distill(const Model& teacher, const GateSimulator& sim, int level, int n, int jobs) {
  Dataset ds;
  const auto alphas = angle_grid(n);
  ds.records.resize(n);
  parallel_for(alphas.size(), jobs, [&](std::size_t i) {
    Record& r = ds.records[i];
    r.alpha = alphas[i];
    r.theta = teacher.forward(alphas[i]);
    r.infidelity =
        sim.infidelity(PulseParams::from_flat(r.theta, sim.duration()), SnapSpec{r.alpha, level});
  });
  ds.meta.system = sim.system();
  ds.meta.level = level;
  ds.meta.steps = sim.config().steps;
  ds.meta.duration = sim.duration();
  ds.meta.seed = teacher.seed();
  ds.meta.source = "distill(" + teacher.kind() + ")";
  return ds;
}

void FinetuneOptions::validate() const {
  if (rounds < 0 || batches_per_round < 1 || angles_per_batch < 1 || eval_grid < 2) {
    throw std::invalid_argument("FinetuneOptions: counts must be positive");
  }
  if (!(lr > 0.0)) throw std::invalid_argument("FinetuneOptions: lr must be positive");
}

double FinetuneOptions::gamma(int round) const {
  if (rounds <= 1) return 1.0;
  return 1.0 - static_cast<double>(round) / (rounds - 1);
}

std::vector<double> sampling_weights(std::span<const double> infidelities, double gamma) {
  std::vector<double> w(infidelities.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double x = std::max(infidelities[i], 0.0);
    w[i] = gamma == 0.0 ? 1.0 : std::pow(x, gamma);
    total += w[i];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
    return w;
  }
  for (double& v : w) v /= total;
  return w;
}

namespace {

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad;
  int skipped = 0;
};

LossGradient loss_gradient(const Model& model, const GateSimulator& sim, int level,
                           std::span<const double> alphas, int jobs) {
  const auto n = static_cast<Eigen::Index>(alphas.size());
  Eigen::MatrixXd x(1, n);
  for (Eigen::Index i = 0; i < n; ++i) x(0, i) = alphas[i] / std::numbers::pi;
  LossGradient out;
  out.grad.assign(model.param_count(), 0.0);
  const double s = model.scale();
  model.predict_backward(
      x,
      [&](const Eigen::MatrixXd& y) {
        Eigen::MatrixXd dy = Eigen::MatrixXd::Zero(y.rows(), y.cols());
        std::vector<double> values(n, 0.0);
        std::vector<char> ok(n, 0);
        parallel_for(static_cast<std::size_t>(n), jobs, [&](std::size_t i) {
          ParamVector theta{};
          for (int k = 0; k < kPulseParams; ++k) theta[k] = s * y(k, i);
          try {
            const auto r = sim.infidelity_gradient(PulseParams::from_flat(theta, sim.duration()),
                                                   SnapSpec{alphas[i], level});
            values[i] = r.value;
            for (int k = 0; k < kPulseParams; ++k) dy(k, i) = s * r.gradient[k];
            ok[i] = 1;
          } catch (const InputError&) {
            ok[i] = 0;
          }
        });
        int used = 0;
        double sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (ok[i]) {
            ++used;
            sum += values[i];
          } else {
            ++out.skipped;
            dy.col(i).setZero();
          }
        }
        if (used > 0) {
          out.loss = sum / used;
          dy /= static_cast<double>(used);
        }
        return dy;
      },
      out.grad);
  if (out.skipped > 0) {
    std::cerr << "finetune: skipped " << out.skipped << " angle(s) with non-finite pulses\n";
  }
  return out;
}

}  // namespace

std::pair<double, std::vector<double>> infidelity_loss_gradient(const Model& model,
                                                                const GateSimulator& sim,
                                                                int level,
                                                                std::span<const double> alphas,
                                                                int jobs) {
  auto r = loss_gradient(model, sim, level, alphas, jobs);
  return {r.loss, std::move(r.grad)};
}

FinetuneHistory finetune_infidelity(Model& model, const GateSimulator& sim, int level,
                                    const FinetuneOptions& opts) {
  opts.validate();
  FinetuneHistory hist;
  Evaluation ev = evaluate(model, sim, level, opts.eval_grid, opts.jobs);
  hist.rounds.push_back({-1, 0.0, ev.mean, ev.max, 0});
  if (opts.rounds == 0) return hist;

  auto* mr = dynamic_cast<MrModel*>(&model);
  std::vector<double> params = model.params();
  std::vector<double> best = params;
  double best_mean = ev.mean;
  hist.best_round = -1;

  // Per-region bookkeeping for hard-switched models.
  std::vector<int> region_of;
  std::vector<double> region_best;
  std::vector<Mlp> region_models;
  auto region_means = [&](const Evaluation& e) {
    std::vector<double> sum(mr->regions(), 0.0);
    std::vector<int> cnt(mr->regions(), 0);
    for (std::size_t i = 0; i < e.alphas.size(); ++i) {
      sum[region_of[i]] += e.profile[i];
      ++cnt[region_of[i]];
    }
    for (int k = 0; k < mr->regions(); ++k) {
      sum[k] = cnt[k] ? sum[k] / cnt[k] : std::numeric_limits<double>::infinity();
    }
    return sum;
  };
  if (mr) {
    for (double a : ev.alphas) region_of.push_back(mr->region(a));
    region_best = region_means(ev);
    region_models = mr->regressors();
  }

  optim::AdamState adam(params.size());
  std::mt19937_64 rng(opts.seed);
  const double cell = 2.0 * std::numbers::pi / opts.eval_grid;
  std::uniform_real_distribution<double> jitter(-0.5 * cell, 0.5 * cell);
  std::vector<double> alphas(opts.angles_per_batch);

  for (int r = 0; r < opts.rounds; ++r) {
    const double g = opts.gamma(r);
    const auto weights = sampling_weights(ev.profile, g);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    int skipped = 0;
    for (int b = 0; b < opts.batches_per_round; ++b) {
      for (auto& a : alphas) {
        a = std::clamp(ev.alphas[pick(rng)] + jitter(rng), -std::numbers::pi, std::numbers::pi);
      }
      const auto lg = loss_gradient(model, sim, level, alphas, opts.jobs);
      skipped += lg.skipped;
      adam.step(params, lg.grad, opts.lr);
      model.set_params(params);
    }
    ev = evaluate(model, sim, level, opts.eval_grid, opts.jobs);
    hist.rounds.push_back({r, g, ev.mean, ev.max, skipped});
    if (ev.mean < best_mean) {
      best_mean = ev.mean;
      best = params;
      hist.best_round = r;
    }
    if (mr) {
      const auto means = region_means(ev);
      for (int k = 0; k < mr->regions(); ++k) {
        if (means[k] < region_best[k]) {
          region_best[k] = means[k];
          region_models[k] = mr->regressors()[k];
        }
      }
    }
  }

  if (mr) {
    for (int k = 0; k < mr->regions(); ++k) mr->regressor(k) = region_models[k];
    const Evaluation composed = evaluate(model, sim, level, opts.eval_grid, opts.jobs);
    hist.rounds.push_back({opts.rounds, 0.0, composed.mean, composed.max, 0});
    hist.best_round = opts.rounds;
  } else {
    model.set_params(best);
  }
  return hist;
}

}  // namespace snapml
