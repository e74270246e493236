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
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "snapml/errors.hpp"
#include "snapml/networks.hpp"

namespace snapml {
namespace {

constexpr double kPi = std::numbers::pi;

const GateSimulator& sim() {
  static const GateSimulator s(SystemSpec{});
  return s;
}

Eigen::MatrixXd angles_row(std::initializer_list<double> alphas) {
  Eigen::MatrixXd x(1, static_cast<Eigen::Index>(alphas.size()));
  Eigen::Index i = 0;
  for (double a : alphas) x(0, i++) = a / kPi;
  return x;
}

/// Returns the stored pulse of the record nearest to the requested angle.
class LookupModel final : public Model {
 public:
  explicit LookupModel(Dataset ds) : ds_(std::move(ds)) {}
  std::string kind() const override { return "lookup"; }
  std::unique_ptr<Model> clone() const override { return std::make_unique<LookupModel>(*this); }
  std::size_t param_count() const override { return 0; }
  void get_params(std::span<double>) const override {}
  void set_params(std::span<const double>) override {}
  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const override {
    Eigen::MatrixXd y(kPulseParams, x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double a = x(0, c) * kPi;
      const auto it = std::min_element(ds_.records.begin(), ds_.records.end(),
                                       [a](const Record& p, const Record& q) {
                                         return std::abs(p.alpha - a) < std::abs(q.alpha - a);
                                       });
      for (int k = 0; k < kPulseParams; ++k) y(k, c) = it->theta[k];
    }
    return y;
  }
  Eigen::MatrixXd predict_backward(const Eigen::MatrixXd& x, const OutputGradient& g,
                                   std::span<double>) const override {
    Eigen::MatrixXd y = predict(x);
    (void)g(y);
    return y;
  }

 private:
  Dataset ds_;
};

/// Relative error of `analytic` against central differences of `loss` on the
/// listed parameter indices, normalized by the analytic infinity norm.
template <class Loss>
double fd_check(Model& model, const Loss& loss, const std::vector<double>& analytic,
                const std::vector<std::size_t>& indices, double h) {
  std::vector<double> p = model.params();
  double ginf = 0.0;
  for (double v : analytic) ginf = std::max(ginf, std::abs(v));
  double worst = 0.0;
  for (std::size_t i : indices) {
    const double keep = p[i];
    p[i] = keep + h;
    model.set_params(p);
    const double fp = loss(model);
    p[i] = keep - h;
    model.set_params(p);
    const double fm = loss(model);
    p[i] = keep;
    model.set_params(p);
    worst = std::max(worst, std::abs((fp - fm) / (2 * h) - analytic[i]) / ginf);
  }
  return worst;
}

TEST(MlpConfig, ReferenceArchitectureCount) {
  const MlpConfig c = reference_config();
  EXPECT_EQ(c.param_count(), 1608u);
  EXPECT_EQ(c.name(), "mlp_1608");
  EXPECT_NO_THROW(c.validate_regressor());
}

TEST(MlpConfig, SingleHiddenFormula) {
  for (int h : {1, 4, 14, 64}) {
    const MlpConfig c{{1, h, 32}};
    EXPECT_EQ(c.param_count(), static_cast<std::size_t>(1 * h + h + h * 32 + 32));
  }
}

TEST(MlpConfig, Validation) {
  EXPECT_THROW((MlpConfig{{1}}.validate()), InvalidDimension);
  EXPECT_THROW((MlpConfig{{1, 0, 32}}.validate()), InvalidDimension);
  EXPECT_THROW((MlpConfig{{1, 32}}.validate_regressor()), InvalidDimension);
  EXPECT_THROW((MlpConfig{{2, 8, 32}}.validate_regressor()), InvalidDimension);
  EXPECT_THROW((MlpConfig{{1, 8, 31}}.validate_regressor()), InvalidDimension);
}

TEST(MlpModel, ZeroWeightsGiveScaledBias) {
  MlpModel m(MlpConfig{{1, 8, 8, 32}}, 0.37, 1);
  std::vector<double> p(m.param_count(), 0.0);
  m.set_params(p);
  for (int k = 0; k < 32; ++k) m.net().bias(2)(k) = 0.01 * (k - 16);
  for (double a : {-3.0, 0.0, 1.7}) {
    const ParamVector y = m.forward(a);
    for (int k = 0; k < 32; ++k) EXPECT_DOUBLE_EQ(y[k], 0.37 * 0.01 * (k - 16));
  }
}

TEST(MlpModel, ParamsRoundTrip) {
  MlpModel m(reference_config(), 1.0, 3);
  const auto p = m.params();
  MlpModel n(reference_config(), 1.0, 4);
  EXPECT_NE(n.params(), p);
  n.set_params(p);
  EXPECT_EQ(n.params(), p);
  EXPECT_TRUE(n.net() == m.net());
}

TEST(MlpModel, InitializationIsSeeded) {
  EXPECT_EQ(MlpModel(reference_config(), 1.0, 9).params(),
            MlpModel(reference_config(), 1.0, 9).params());
}

TEST(MoeModel, SingleExpertMatchesExpert) {
  const MoeModel moe(MlpConfig{{1, 8, 8, 32}}, 1, {16, 16}, 0.5, 11);
  const MlpModel expert(moe.experts()[0], 0.5, 11);
  for (double a : {-3.1, -1.0, 0.0, 0.4, 3.14}) {
    const auto ym = moe.forward(a);
    const auto ye = expert.forward(a);
    for (int k = 0; k < 32; ++k) EXPECT_NEAR(ym[k], ye[k], 1e-15);
  }
}

TEST(MoeModel, GateIsProbabilityVector) {
  const MoeModel moe(MlpConfig{{1, 8, 32}}, 5, {16, 16}, 1.0, 2);
  Eigen::MatrixXd x(1, 201);
  for (int i = 0; i < 201; ++i) x(0, i) = -1.0 + 2.0 * i / 200.0;
  const Eigen::MatrixXd g = moe.gate_weights(x);
  ASSERT_EQ(g.rows(), 5);
  for (Eigen::Index c = 0; c < g.cols(); ++c) {
    EXPECT_NEAR(g.col(c).sum(), 1.0, 1e-9);
    EXPECT_GE(g.col(c).minCoeff(), 0.0);
  }
}

TEST(MrModel, RegionsAreHalfOpen) {
  const MrModel mr(MlpConfig{{1, 4, 32}}, {kDefaultRegionBoundaries.begin(),
                                           kDefaultRegionBoundaries.end()}, 1.0, 0);
  ASSERT_EQ(mr.regions(), 5);
  EXPECT_EQ(mr.region(-0.45 * kPi), 1);
  EXPECT_EQ(mr.region(-kPi), 0);
  EXPECT_EQ(mr.region(kPi), 4);
  EXPECT_EQ(mr.region(kDefaultRegionBoundaries[1]), 2);
  EXPECT_EQ(mr.region(std::nextafter(kDefaultRegionBoundaries[1], -4.0)), 1);
  EXPECT_EQ(mr.region(0.0), 3);
  EXPECT_EQ(mr.region(0.5 * kPi), 3);
  EXPECT_EQ(mr.region(0.7 * kPi), 4);
}

TEST(MrModel, PiecewiseEqualToOneRegressor) {
  MrModel mr(MlpConfig{{1, 6, 32}}, {kDefaultRegionBoundaries.begin(),
                                     kDefaultRegionBoundaries.end()}, 0.8, 5);
  const auto before = mr;
  for (double a = -kPi + 0.01; a <= kPi; a += 0.05) {
    const MlpModel part(mr.regressors()[mr.region(a)], 0.8, 0);
    const auto y = mr.forward(a);
    const auto z = part.forward(a);
    for (int k = 0; k < 32; ++k) EXPECT_EQ(y[k], z[k]);
  }
  // Perturbing regressor 2 leaves every other region untouched.
  mr.regressor(2).bias(1).array() += 1.0;
  for (double a = -kPi + 0.01; a <= kPi; a += 0.05) {
    const bool inside = mr.region(a) == 2;
    const auto y = mr.forward(a);
    const auto z = before.forward(a);
    EXPECT_EQ(y == z, !inside) << a;
  }
}

TEST(MrModel, RejectsUnsortedBoundaries) {
  EXPECT_THROW(MrModel(MlpConfig{{1, 4, 32}}, {0.5, 0.1}, 1.0, 0), std::invalid_argument);
}

TEST(Backprop, MatchesFiniteDifferences) {
  MlpModel m(MlpConfig{{1, 5, 4, 32}}, 1.0, 21);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  TrainingData d;
  d.x.resize(1, 7);
  d.y.resize(32, 7);
  for (int c = 0; c < 7; ++c) {
    d.x(0, c) = u(rng);
    for (int k = 0; k < 32; ++k) d.y(k, c) = u(rng);
  }
  std::vector<double> grad(m.param_count());
  m.predict_backward(
      d.x,
      [&](const Eigen::MatrixXd& y) {
        return Eigen::MatrixXd(2.0 * (y - d.y) / static_cast<double>(d.y.size()));
      },
      grad);
  std::vector<std::size_t> all(m.param_count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const double err = fd_check(m, [&](const Model& mm) { return mse(mm, d); }, grad, all, 1e-6);
  EXPECT_LE(err, 1e-5);
}

TEST(Backprop, MoeMatchesFiniteDifferences) {
  MoeModel m(MlpConfig{{1, 4, 32}}, 3, {5}, 1.0, 8);
  TrainingData d;
  d.x = angles_row({-2.0, -0.3, 0.9, 2.5});
  d.y = Eigen::MatrixXd::Constant(32, 4, 0.2);
  std::vector<double> grad(m.param_count());
  m.predict_backward(
      d.x,
      [&](const Eigen::MatrixXd& y) {
        return Eigen::MatrixXd(2.0 * (y - d.y) / static_cast<double>(d.y.size()));
      },
      grad);
  std::vector<std::size_t> all(m.param_count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  EXPECT_LE(fd_check(m, [&](const Model& mm) { return mse(mm, d); }, grad, all, 1e-6), 1e-5);
}

TEST(Finetune, ChainRuleMatchesFiniteDifferences) {
  MlpModel m(MlpConfig{{1, 6, 6, 32}}, 0.02, 13);
  const std::vector<double> alphas{-2.2, -0.7, 0.4, 1.9};
  const auto [loss, grad] = infidelity_loss_gradient(m, sim(), 2, alphas);
  EXPECT_NEAR(loss, [&] {
    double s = 0.0;
    for (double a : alphas) {
      s += sim().infidelity(PulseParams::from_flat(m.forward(a)), {a, 2});
    }
    return s / 4.0;
  }(), 1e-14);
  std::mt19937_64 rng(1);
  std::vector<std::size_t> sample;
  std::uniform_int_distribution<std::size_t> pick(0, m.param_count() - 1);
  for (int i = 0; i < 24; ++i) sample.push_back(pick(rng));
  const double err = fd_check(
      m, [&](const Model& mm) { return infidelity_loss_gradient(mm, sim(), 2, alphas).first; },
      grad, sample, 1e-4);
  EXPECT_LE(err, 1e-3);
}

TEST(TrainOptions, LearningRateEndpoints) {
  const TrainOptions o;
  EXPECT_EQ(o.epochs, 50);
  EXPECT_NEAR(o.learning_rate(0), 1e-3, 1e-12);
  EXPECT_NEAR(o.learning_rate(49), 1e-5, 1e-12);
  EXPECT_NEAR(o.learning_rate(24), 1e-3 * std::pow(1e-2, 24.0 / 49.0), 1e-15);
  TrainOptions bad;
  bad.epochs = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(TrainMse, LinearModelFitsLinearData) {
  // Single affine layer; the least-squares optimum is exact.
  MlpModel m(Mlp(MlpConfig{{1, 32}}), 1.0, 0);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Eigen::VectorXd slope(32), offset(32);
  for (int k = 0; k < 32; ++k) {
    slope(k) = u(rng);
    offset(k) = u(rng);
  }
  auto make = [&](int n) {
    TrainingData d;
    d.x.resize(1, n);
    d.y.resize(32, n);
    for (int c = 0; c < n; ++c) {
      d.x(0, c) = -1.0 + (c + 0.5) * 2.0 / n;
      d.y.col(c) = slope * d.x(0, c) + offset;
    }
    return d;
  };
  const TrainingData train = make(400), val = make(37);
  TrainOptions o;
  o.epochs = 300;
  o.batch_size = 16;
  o.lr_start = 1e-2;
  o.lr_end = 1e-4;
  const TrainHistory h = train_mse(m, train, val, o);
  EXPECT_LE(mse(m, val), 1e-6);
  EXPECT_EQ(h.epochs.size(), 300u);
}

TEST(TrainMse, ReturnsBestCheckpoint) {
  const Dataset ds = testing::sweep_dataset(64);
  const double s = max_abs_theta(ds);
  const auto [train, val, test] = split(ds, 0.8, 0.1, 0.1, 1);
  const TrainingData tr = make_training_data(train, s), va = make_training_data(val, s);
  MlpModel m(reference_config(), s, 4);
  TrainOptions o;
  o.epochs = 40;
  o.batch_size = 8;
  o.lr_start = 3e-2;  // noisy on purpose so the last epoch is rarely the best
  const TrainHistory h = train_mse(m, tr, va, o);
  ASSERT_EQ(h.epochs.size(), 40u);
  EXPECT_EQ(mse(m, va), h.best_val_loss);
  EXPECT_LE(h.best_val_loss, h.epochs.back().val_loss);
  for (const auto& e : h.epochs) EXPECT_GE(e.val_loss, h.best_val_loss);
  EXPECT_EQ(h.epochs[h.best_epoch].val_loss, h.best_val_loss);
}

TEST(TrainMse, Deterministic) {
  const Dataset ds = testing::sweep_dataset(64);
  const double s = max_abs_theta(ds);
  const TrainingData d = make_training_data(ds, s);
  TrainOptions o;
  o.epochs = 5;
  MlpModel a(reference_config(), s, 1), b(reference_config(), s, 1);
  train_mse(a, d, d, o);
  train_mse(b, d, d, o);
  EXPECT_EQ(a.params(), b.params());
}

TEST(TrainMse, DivergenceIsReported) {
  MlpModel m(MlpConfig{{1, 4, 32}}, 1.0, 0);
  TrainingData d;
  d.x = Eigen::MatrixXd::Zero(1, 4);
  d.y = Eigen::MatrixXd::Zero(32, 4);
  d.y(3, 2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(train_mse(m, d, d, TrainOptions{}), DivergenceError);
}

TEST(TrainMse, MrTrainsRegionsIndependently) {
  const Dataset ds = testing::sweep_dataset(64);
  const double s = max_abs_theta(ds);
  const TrainingData d = make_training_data(ds, s);
  MrModel mr(MlpConfig{{1, 8, 32}}, {kDefaultRegionBoundaries.begin(),
                                     kDefaultRegionBoundaries.end()}, s, 3);
  // Training on region 3's records alone gives the same regressor 3 and
  // leaves regions without records at their initialization.
  TrainOptions o;
  o.epochs = 10;
  MrModel solo = mr;
  train_mse(mr, d, d, o);
  TrainingData only;
  std::vector<Eigen::Index> cols;
  for (Eigen::Index c = 0; c < d.size(); ++c) {
    if (solo.region(d.x(0, c) * kPi) == 3) cols.push_back(c);
  }
  only.x.resize(1, static_cast<Eigen::Index>(cols.size()));
  only.y.resize(32, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    only.x.col(i) = d.x.col(cols[i]);
    only.y.col(i) = d.y.col(cols[i]);
  }
  train_mse(solo, only, only, o);
  EXPECT_TRUE(solo.regressors()[3] == mr.regressors()[3]);
  EXPECT_TRUE(solo.regressors()[0] == MrModel(MlpConfig{{1, 8, 32}},
                                              {kDefaultRegionBoundaries.begin(),
                                               kDefaultRegionBoundaries.end()},
                                              s, 3)
                                          .regressors()[0]);
}

TEST(Sampling, GammaZeroIsUniform) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(1e-6, 1e-1);
  std::vector<double> inf(16);
  for (double& v : inf) v = u(rng);
  const auto w = sampling_weights(inf, 0.0);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::vector<int> counts(16, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[pick(rng)];
  double chi2 = 0.0;
  const double expected = draws / 16.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 99th percentile of chi-square with 15 degrees of freedom.
  EXPECT_LT(chi2, 30.578);
}

TEST(Sampling, ProportionalAtGammaOne) {
  const std::vector<double> inf{1e-3, 3e-3, 0.0, 6e-3};
  const auto w = sampling_weights(inf, 1.0);
  EXPECT_NEAR(w[0], 0.1, 1e-15);
  EXPECT_NEAR(w[1], 0.3, 1e-15);
  EXPECT_EQ(w[2], 0.0);
  EXPECT_NEAR(w[3], 0.6, 1e-15);
}

TEST(FinetuneOptions, GammaDecreasesLinearly) {
  FinetuneOptions o;
  o.rounds = 5;
  EXPECT_EQ(o.gamma(0), 1.0);
  EXPECT_EQ(o.gamma(2), 0.5);
  EXPECT_EQ(o.gamma(4), 0.0);
  EXPECT_EQ(o.batches_per_round, 25);
  EXPECT_EQ(o.angles_per_batch, 16);
}

TEST(Finetune, ZeroRoundsLeavesModelUnchanged) {
  MlpModel m(MlpConfig{{1, 4, 32}}, 0.02, 6);
  const auto before = m.params();
  FinetuneOptions o;
  o.rounds = 0;
  o.eval_grid = 16;
  const auto h = finetune_infidelity(m, sim(), 2, o);
  EXPECT_EQ(m.params(), before);
  ASSERT_EQ(h.rounds.size(), 1u);
  EXPECT_EQ(h.rounds[0].round, -1);
}

TEST(Finetune, Mlp514ImprovesOverTenRounds) {
  const MlpConfig cfg{{1, 18, 4, 10, 32}};
  ASSERT_EQ(cfg.param_count(), 514u);
  const Dataset ds = testing::sweep_dataset(64);
  const double s = max_abs_theta(ds);
  const TrainingData d = make_training_data(ds, s);
  MlpModel m(cfg, s, 514);
  TrainOptions t;
  t.epochs = 300;
  t.batch_size = 16;
  train_mse(m, d, d, t);
  FinetuneOptions o;
  o.rounds = 10;
  o.seed = 5;
  const auto h = finetune_infidelity(m, sim(), 2, o);
  const double before = h.rounds.front().mean_infidelity;
  const double after = evaluate(m, sim(), 2, o.eval_grid).mean;
  EXPECT_LT(after, before);
  EXPECT_EQ(h.rounds.size(), 11u);
  if (h.best_round >= 0) {
    EXPECT_EQ(after, h.rounds[h.best_round + 1].mean_infidelity);
  }
}

TEST(Evaluate, ExactPulsesReproduceDatasetInfidelities) {
  const Dataset ds = testing::sweep_dataset(64);
  const LookupModel m(ds);
  const Evaluation ev = evaluate(m, sim(), 2, 64);
  ASSERT_EQ(ev.profile.size(), 64u);
  for (std::size_t i = 0; i < 64; ++i) {
    EXPECT_EQ(ev.alphas[i], ds.records[i].alpha);
    EXPECT_EQ(ev.profile[i], ds.records[i].infidelity);
  }
  EXPECT_LE(ev.mean, ev.max);
  EXPECT_THROW(evaluate(m, sim(), 2, 1), std::invalid_argument);
}

TEST(Evaluate, MeanAtMostMax) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const MlpModel m(MlpConfig{{1, 4, 32}}, 0.03, seed);
    const Evaluation ev = evaluate(m, sim(), 2, 8);
    EXPECT_LE(ev.mean, ev.max);
  }
}

TEST(Distill, GridAndBitExactOutputs) {
  const MoeModel teacher(MlpConfig{{1, 6, 32}}, 3, {16, 16}, 0.05, 7);
  const Dataset two = distill(teacher, sim(), 2, 2);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_DOUBLE_EQ(two.records[0].alpha, -0.5 * kPi);
  EXPECT_DOUBLE_EQ(two.records[1].alpha, 0.5 * kPi);
  const Dataset ds = distill(teacher, sim(), 2, 33);
  ASSERT_EQ(ds.size(), 33u);
  EXPECT_NO_THROW(ds.check_sorted());
  for (const auto& r : ds.records) {
    EXPECT_EQ(r.theta, teacher.forward(r.alpha));
    EXPECT_EQ(r.infidelity, sim().infidelity(PulseParams::from_flat(r.theta), {r.alpha, 2}));
  }
}

TEST(ModelIo, JsonRoundTripIsExact) {
  std::vector<std::unique_ptr<Model>> models;
  models.push_back(std::make_unique<MlpModel>(reference_config(), 0.0123, 1));
  models.push_back(std::make_unique<MoeModel>(MlpConfig{{1, 6, 32}}, 3, std::vector<int>{16, 16},
                                              0.5, 2));
  models.push_back(std::make_unique<MrModel>(
      MlpConfig{{1, 5, 32}},
      std::vector<double>(kDefaultRegionBoundaries.begin(), kDefaultRegionBoundaries.end()), 0.7,
      3));
  const auto dir = std::filesystem::temp_directory_path() / "snapml_test_networks";
  std::filesystem::create_directories(dir);
  for (const auto& m : models) {
    const auto back = model_from_json(model_to_json(*m));
    EXPECT_EQ(back->kind(), m->kind());
    EXPECT_EQ(back->params(), m->params());
    EXPECT_EQ(back->scale(), m->scale());
    EXPECT_EQ(back->seed(), m->seed());
    for (double a : {-2.9, -1.5, 0.0, 2.2}) EXPECT_EQ(back->forward(a), m->forward(a));
    const auto path = dir / (m->kind() + ".json");
    save_model(*m, path);
    EXPECT_EQ(load_model(path)->params(), m->params());
  }
}

TEST(ModelIo, MalformedDocuments) {
  EXPECT_THROW(model_from_json("{not json"), ParseError);
  EXPECT_THROW(model_from_json(R"({"format":"other"})"), SchemaError);
}

}  // namespace
}  // namespace snapml
