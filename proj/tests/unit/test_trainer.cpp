/*
 Copyright 2026 The dwknode Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "dwknode/trainer.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace dwknode;

namespace {

FlowParams plant_flow() {
  FlowParams fp;
  fp.b_const = 100.0;
  return fp;
}

FlowParams controller_flow() {
  FlowParams fp = plant_flow();
  fp.c_d = 1.18;
  fp.spreading_s = 0.0997;
  return fp;
}

TrainingModel training_model() {
  TrainingModel m;
  m.ctx.grid = std::make_shared<QuadratureGrid>(25, 0.1);
  m.flow = controller_flow();
  return m;
}

// Open-loop pass under a static top vehicle, generated by `truth`, with a slowly varying
// input so the attitude and rates are excited.
Dataset synthetic_dataset(const ModelVariant& truth, const ModelContext& ctx, int samples, int segments = 1) {
  Dataset d;
  d.dt = 0.005;
  d.samples.clear();
  d.segment_starts.clear();
  for (int seg = 0; seg < segments; ++seg) {
    d.segment_starts.push_back(d.samples.size());
    const StateVec top = hover_state(Eigen::Vector3d(0, 0, 1.0));
    StateVec x = make_state(Eigen::Vector3d(-0.04 + 0.01 * seg, 0.005, 0.7 - 0.05 * seg), Eigen::Vector3d(0.4, 0, 0),
                            Eigen::Vector4d(1, 0, 0, 0), Eigen::Vector3d::Zero());
    for (int i = 0; i < samples; ++i) {
      InputVec u = ctx.body.hover_input();
      u(0) *= 1.0 + 0.05 * std::sin(0.3 * i);
      u(1) = 2e-6 * std::sin(0.2 * i);
      u(2) = 2e-6 * std::cos(0.25 * i);
      d.samples.push_back({x, top, u});
      x = predict_one_step(truth, x, u, top, d.dt, ctx);
    }
  }
  return d;
}

}  // namespace

TEST(Dataset, PairsNeverStraddleSegments) {
  const TrainingModel m = training_model();
  const Dataset d = synthetic_dataset(ModelVariant::nominal(), m.ctx, 5, 3);
  EXPECT_EQ(d.size(), 15u);
  EXPECT_EQ(d.pair_count(), d.size() - 3);
  for (std::size_t i : d.pair_targets()) EXPECT_TRUE(i != 5 && i != 10 && i != 0);
}

TEST(Dataset, CsvRoundTripIsBitExact) {
  const TrainingModel m = training_model();
  const Dataset d = synthetic_dataset(ModelVariant::dw(plant_flow()), m.ctx, 20, 2);
  std::stringstream ss;
  write_dataset_csv(d, ss);
  const Dataset back = read_dataset_csv(ss);
  ASSERT_EQ(back.size(), d.size());
  EXPECT_EQ(back.segment_starts, d.segment_starts);
  EXPECT_EQ(back.dt, d.dt);
  for (std::size_t i = 0; i < d.size(); ++i) {
    ASSERT_EQ(back.samples[i].x, d.samples[i].x);
    ASSERT_EQ(back.samples[i].x_top, d.samples[i].x_top);
    ASSERT_EQ(back.samples[i].u, d.samples[i].u);
  }
  std::stringstream again;
  write_dataset_csv(back, again);
  EXPECT_EQ(again.str(), ss.str());
}

TEST(Dataset, CorruptHeaderNamesColumn) {
  std::stringstream ss("t,px,py,pz,vx,vy,vz,qw,qx,qy,qz,wx,wy,wq\n");
  try {
    read_dataset_csv(ss);
    FAIL() << "expected a parse error";
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("wz"), std::string::npos) << e.what();
  }
}

TEST(Dataset, BadValueNamesColumn) {
  const TrainingModel m = training_model();
  const Dataset d = synthetic_dataset(ModelVariant::nominal(), m.ctx, 3);
  std::stringstream ss;
  write_dataset_csv(d, ss);
  std::string text = ss.str();
  const auto pos = text.find('\n', text.find('\n') + 1) + 1;  // third line
  const auto comma = text.find(',', text.find(',', pos) + 1);  // second field of that line is px
  text.insert(comma, "x");
  std::stringstream bad(text);
  try {
    read_dataset_csv(bad);
    FAIL() << "expected a parse error";
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("'px'"), std::string::npos) << e.what();
  }
}

TEST(Loss, ZeroForSelfGeneratedData) {
  const TrainingModel m = training_model();
  auto theta = std::make_shared<KnodeParams>(KnodeParams::initialize(Architecture::simulation_preset(), 4));
  const Dataset d = synthetic_dataset(m.variant(ModelTag::kKnodeDw, theta), m.ctx, 30);
  TrainConfig cfg;
  EXPECT_LT(loss(*theta, d, cfg, m), 1e-16);
  const Eigen::VectorXd g = loss_gradient(*theta, d, cfg, m);
  EXPECT_LT(g.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Loss, SingleTermByHand) {
  const TrainingModel m = training_model();
  const KnodeParams theta = KnodeParams::initialize(Architecture::simulation_preset(), 4);
  Dataset d = synthetic_dataset(ModelVariant::nominal(), m.ctx, 2);
  d.samples[1].x(2) += 1e-3;   // position error 1e-3, weight 1
  d.samples[1].x(12) += 2e-2;  // rate error 2e-2, weight 0.1
  TrainConfig cfg;
  cfg.variant = ModelTag::kKnode;
  const auto pred = predict_one_step(m.variant(ModelTag::kKnode, std::make_shared<KnodeParams>(theta)),
                                     d.samples[0].x, d.samples[0].u, d.samples[0].x_top, d.dt, m.ctx);
  const StateVec e = pred - d.samples[1].x;
  double expected = 0.0;
  for (int k = 0; k < 13; ++k) expected += (k >= 10 ? 0.1 : 1.0) * e[k] * e[k];
  EXPECT_DOUBLE_EQ(loss(theta, d, cfg, m), expected);
}

TEST(Loss, ScalesWithWeights) {
  const TrainingModel m = training_model();
  const KnodeParams theta = KnodeParams::initialize(Architecture::simulation_preset(), 4);
  const Dataset d = synthetic_dataset(ModelVariant::dw(plant_flow()), m.ctx, 20);
  TrainConfig cfg;
  const double l1 = loss(theta, d, cfg, m);
  cfg.w_x *= 4.0;
  EXPECT_DOUBLE_EQ(loss(theta, d, cfg, m), 4.0 * l1);
}

TEST(Gradient, MatchesFiniteDifferences) {
  const TrainingModel m = training_model();
  const Dataset d = synthetic_dataset(ModelVariant::dw(plant_flow()), m.ctx, 10);
  for (ModelTag tag : {ModelTag::kKnodeDw, ModelTag::kKnode}) {
    TrainConfig cfg;
    cfg.variant = tag;
    KnodeParams theta = KnodeParams::initialize(Architecture::simulation_preset(), 5);
    fit_normalization(theta, d, tag, m);
    const GradientCheck check = gradient_check(theta, d, cfg, m);
    EXPECT_EQ(check.draws, 10);
    EXPECT_LT(check.max_relative_error, 1e-5) << to_string(tag);
    EXPECT_TRUE(check.passed);
  }
}

TEST(Gradient, FiniteDifferenceConvergesAtSecondOrder) {
  const TrainingModel m = training_model();
  const Dataset d = synthetic_dataset(ModelVariant::dw(plant_flow()), m.ctx, 10);
  TrainConfig cfg;
  KnodeParams theta = KnodeParams::initialize(Architecture::simulation_preset(), 6, 0.5);
  fit_normalization(theta, d, cfg.variant, m);
  const Eigen::VectorXd exact = loss_gradient(theta, d, cfg, m);
  const double e1 = (finite_diff_gradient(theta, d, cfg, m, 1e-2) - exact).norm();
  const double e2 = (finite_diff_gradient(theta, d, cfg, m, 5e-3) - exact).norm();
  EXPECT_NEAR(e1 / e2, 4.0, 0.4);
}

TEST(Gradient, ZeroNetworkOutputBiasByHand) {
  // With all weights zero, the output-bias gradient is the loss gradient with respect to a
  // constant branch output, which equals the chain through M and the RK4 stages; for a short
  // step it is close to dt * M^T dL/dx_hat. Checked here against finite differences and sign.
  const TrainingModel m = training_model();
  const Dataset d = synthetic_dataset(ModelVariant::dw(plant_flow()), m.ctx, 10);
  TrainConfig cfg;
  KnodeParams theta = KnodeParams::initialize(Architecture::simulation_preset(), 7);
  fit_normalization(theta, d, cfg.variant, m);
  theta.assign(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(theta.parameter_count())));
  const Eigen::VectorXd g = loss_gradient(theta, d, cfg, m);
  const Eigen::VectorXd fd = finite_diff_gradient(theta, d, cfg, m, 1e-6);
  EXPECT_LT((g - fd).norm(), 1e-6 * fd.norm());
  // Hidden-layer weight gradients are zero (output weights are zero), output weights see tanh(b)=0 inputs.
  const std::size_t hidden_w = 9 * 3 + 9;
  EXPECT_EQ(g.head(static_cast<Eigen::Index>(hidden_w)).norm(), 0.0);
  // Output biases carry the whole signal for a zero network.
  EXPECT_GT(g.segment(static_cast<Eigen::Index>(hidden_w + 27), 3).norm(), 0.0);
}

TEST(Train, ZeroEpochsReturnsInitialParameters) {
  const TrainingModel m = training_model();
  const Dataset d = synthetic_dataset(ModelVariant::dw(plant_flow()), m.ctx, 10);
  TrainConfig cfg;
  cfg.epochs = 0;
  const TrainReport r = train(d, cfg, Architecture::simulation_preset(), m);
  KnodeParams init = KnodeParams::initialize(Architecture::simulation_preset(), cfg.seed);
  EXPECT_EQ(r.theta.flatten(), init.flatten());
  EXPECT_EQ(r.loss_history.size(), 1u);
}

TEST(Train, DeterministicAndDecreasing) {
  const TrainingModel m = training_model();
  const Dataset d = synthetic_dataset(ModelVariant::dw(plant_flow()), m.ctx, 60, 2);
  TrainConfig cfg;
  cfg.epochs = 150;
  cfg.learning_rate = 1e-2;
  const TrainReport a = train(d, cfg, Architecture::simulation_preset(), m);
  const TrainReport b = train(d, cfg, Architecture::simulation_preset(), m);
  EXPECT_EQ(a.theta.flatten(), b.theta.flatten());
  EXPECT_EQ(a.loss_history, b.loss_history);
  EXPECT_LT(a.loss_history.back(), 0.5 * a.loss_history.front());
  EXPECT_TRUE(a.check.passed);
}

TEST(Train, RecoversPlantedResidual) {
  // Data generated by a known network on top of the DW knowledge model.
  const TrainingModel m = training_model();
  KnodeParams planted = KnodeParams::initialize(Architecture::simulation_preset(), 99, 0.6);
  const Dataset probe = synthetic_dataset(ModelVariant::dw(plant_flow()), m.ctx, 60, 3);
  fit_normalization(planted, probe, ModelTag::kKnodeDw, m);
  for (auto& br : planted.branches()) br.output_gain *= 0.0;
  for (auto& br : planted.branches()) br.output_gain = Eigen::VectorXd::Constant(3, 0.02);
  const auto truth = m.variant(ModelTag::kKnodeDw, std::make_shared<KnodeParams>(planted));
  const Dataset d = synthetic_dataset(truth, m.ctx, 60, 3);

  TrainConfig cfg;
  cfg.epochs = 3000;
  cfg.learning_rate = 1e-2;
  const TrainReport r = train(d, cfg, Architecture::simulation_preset(), m);
  const double scale = [&] {
    double s = 0.0;
    for (std::size_t i : d.pair_targets()) {
      const auto& smp = d.samples[i - 1];
      s += residual_derivative(smp.x, smp.x_top, planted, m.ctx.body).squaredNorm();
    }
    return s / static_cast<double>(d.pair_count());
  }();
  // Compare the learned and planted world-frame force residuals on the covered samples.
  double err = 0.0, ref = 0.0;
  for (std::size_t i : d.pair_targets()) {
    const auto& smp = d.samples[i - 1];
    const StateVec a = residual_derivative(smp.x, smp.x_top, r.theta, m.ctx.body);
    const StateVec b = residual_derivative(smp.x, smp.x_top, planted, m.ctx.body);
    err += (a - b).segment<3>(3).squaredNorm();
    ref += b.segment<3>(3).squaredNorm();
  }
  EXPECT_GT(scale, 0.0);
  EXPECT_LT(std::sqrt(err / ref), 0.05);
  EXPECT_LT(r.loss_history.back(), 1e-2 * r.loss_history.front());
}
