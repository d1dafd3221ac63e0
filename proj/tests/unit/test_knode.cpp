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

#include "dwknode/knode.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dwknode;
using dwknode::testing::random_state;
using dwknode::testing::random_vec;
using dwknode::testing::yaw_quat;

namespace {

StateVec level_at(const Eigen::Vector3d& p, double yaw = 0.0, const Eigen::Vector3d& v = Eigen::Vector3d::Zero()) {
  return make_state(p, v, yaw_quat(yaw), Eigen::Vector3d::Zero());
}

KnodeParams random_params(std::uint64_t seed, double range = 0.5) {
  return KnodeParams::initialize(Architecture::simulation_preset(), seed, range);
}

// Bottom vehicle roughly below a tilted top vehicle, off the axis.
std::pair<StateVec, StateVec> random_scene(std::mt19937_64& rng) {
  std::normal_distribution<double> small(0.0, 0.1);
  StateVec top = make_state(random_vec(rng, 0.5), random_vec(rng, 0.3),
                            Eigen::Vector4d(1, small(rng), small(rng), small(rng)).normalized(), random_vec(rng, 0.3));
  StateVec bottom = random_state(rng);
  position(bottom) = position(top) + Eigen::Vector3d(0.05 + 0.03 * small(rng), 0.04 * small(rng), -0.3);
  return {bottom, top};
}

}  // namespace

TEST(Features, StackedLevel) {
  const Eigen::Vector3d h = feature_vector(level_at(Eigen::Vector3d(0, 0, 0.7)), level_at(Eigen::Vector3d(0, 0, 1)));
  EXPECT_NEAR(h(0), 0.3, 1e-15);
  EXPECT_EQ(h(1), 0.0);
  EXPECT_EQ(h(2), 0.0);
}

TEST(Features, AxisAlignedOffset) {
  const Eigen::Vector3d h = feature_vector(level_at(Eigen::Vector3d(0.05, 0, 0.6)), level_at(Eigen::Vector3d(0, 0, 1)));
  EXPECT_NEAR(h(0), 0.4, 1e-15);
  EXPECT_NEAR(h(1), 0.05, 1e-15);
}

TEST(Features, InvariantUnderSceneYaw) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d pt = random_vec(rng, 1.0);
    const Eigen::Vector3d pb = pt + Eigen::Vector3d(0, 0, -0.3) + random_vec(rng, 0.1);
    const Eigen::Vector3d vb = random_vec(rng, 0.5);
    const double yt = random_vec(rng, 3.0).x(), yb = random_vec(rng, 3.0).x(), psi = random_vec(rng, 3.0).x();
    const Eigen::Matrix3d rz = Eigen::AngleAxisd(psi, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const Eigen::Vector3d a = feature_vector(level_at(pb, yb, vb), level_at(pt, yt));
    const Eigen::Vector3d b = feature_vector(level_at(rz * pb, yb + psi, rz * vb), level_at(rz * pt, yt + psi));
    ASSERT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Mlp, ZeroWeightsGiveZero) {
  KnodeParams theta = random_params(1);
  theta.assign(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(theta.parameter_count())));
  EXPECT_EQ(mlp_forward(theta.branches()[0], Eigen::Vector3d(0.3, 0.1, 0.2)), Eigen::Vector3d::Zero());
}

TEST(Mlp, OneHiddenNeuronByHand) {
  MlpBranch b;
  DenseLayer l0{Eigen::MatrixXd(1, 3), Eigen::VectorXd::Zero(1)};
  l0.weight << 1, 0, 0;
  DenseLayer l1{Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Constant(1, 0.5)};
  b.layers = {l0, l1};
  b.output_gain = Eigen::VectorXd::Ones(1);
  b.validate();
  EXPECT_NEAR(mlp_forward(b, Eigen::Vector3d(0.5, 0, 0))(0), 1.4242343, 5e-8);
  EXPECT_DOUBLE_EQ(mlp_forward(b, Eigen::Vector3d(0.5, 0, 0))(0), 2.0 * std::tanh(0.5) + 0.5);
}

TEST(Mlp, SimulationPresetShape) {
  const KnodeParams theta = random_params(2);
  ASSERT_EQ(theta.branches().size(), 2u);
  for (const auto& b : theta.branches()) {
    ASSERT_EQ(b.layers.size(), 2u);
    EXPECT_EQ(b.layers[0].weight.rows(), 9);
    EXPECT_EQ(b.layers[0].weight.cols(), 3);
    EXPECT_EQ(b.output_dim(), 3);
  }
  EXPECT_EQ(theta.parameter_count(), 2u * (9 * 3 + 9 + 3 * 9 + 3));
  const Eigen::MatrixXd h = theta.selection_matrix();
  EXPECT_EQ(h.rows(), 13);
  EXPECT_EQ(h.cols(), 6);
  EXPECT_EQ(h.sum(), 6.0);
  EXPECT_LE(h.colwise().sum().maxCoeff(), 1.0);
  EXPECT_EQ(h(3, 0), 1.0);
  EXPECT_EQ(h(12, 5), 1.0);
}

TEST(Mlp, DimensionMismatchRejected) {
  KnodeParams theta = random_params(3);
  auto branches = theta.branches();
  branches[0].layers[1].weight = Eigen::MatrixXd::Zero(3, 4);
  EXPECT_THROW(KnodeParams(branches, theta.selection(), ScalingMode::kFull), ConfigError);
  Architecture arch = Architecture::simulation_preset();
  arch.selection.push_back({7, 0});
  EXPECT_THROW(arch.validate(), ConfigError);
}

TEST(Params, FlattenAssignRoundTrip) {
  KnodeParams a = random_params(4);
  KnodeParams b = random_params(5);
  b.assign(a.flatten());
  EXPECT_EQ(a.flatten(), b.flatten());
  EXPECT_EQ(a.branches()[1].layers[0].weight(2, 1), a.flatten()[a.branches()[0].parameter_count() + 2 * 3 + 1]);
}

TEST(Params, DeterministicInitialization) {
  EXPECT_EQ(random_params(9).flatten(), random_params(9).flatten());
  EXPECT_NE(random_params(9).flatten(), random_params(10).flatten());
  EXPECT_LE(KnodeParams::initialize(Architecture::simulation_preset(), 1).flatten().cwiseAbs().maxCoeff(), 0.1);
}

TEST(Scaling, IdentityAttitudeAxisAligned) {
  const RigidBodyParams body;
  const StateVec top = level_at(Eigen::Vector3d(0, 0, 1));
  const StateVec bottom = level_at(Eigen::Vector3d(0.1, 0, 0.7));
  const auto m = scaling_matrix(bottom, top, body, ScalingMode::kFull);
  const FlowFrame f = flow_frame(bottom, top);
  EXPECT_LT((m.block<3, 3>(3, 3) - f.r_fw.transpose() / body.mass()).cwiseAbs().maxCoeff(), 1e-12);
  // R_fw^T for e1 = x, e2 = -y, e3 = -z is diag(1, -1, -1).
  EXPECT_NEAR(m(3, 3), 1.0 / body.mass(), 1e-9);
  EXPECT_NEAR(m(4, 4), -1.0 / body.mass(), 1e-9);
  EXPECT_NEAR(m(5, 5), -1.0 / body.mass(), 1e-9);
  const Eigen::Matrix3d jhat = body.inertia_inv() / body.inertia_inv().norm();
  EXPECT_NEAR(jhat.norm(), 1.0, 1e-15);
  EXPECT_LT((m.block<3, 3>(10, 10) - jhat * f.r_fw.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  for (int r : {0, 1, 2, 6, 7, 8, 9}) EXPECT_EQ(m.row(r).norm(), 0.0) << r;
}

TEST(Scaling, ForceOnlyZeroesTorqueRows) {
  std::mt19937_64 rng(8);
  const auto [bottom, top] = random_scene(rng);
  const auto m = scaling_matrix(bottom, top, RigidBodyParams(), ScalingMode::kForceOnly);
  EXPECT_EQ(m.bottomRows<3>().norm(), 0.0);
  EXPECT_GT((m.block<3, 3>(3, 3)).norm(), 0.0);
}

TEST(Residual, ZeroWeightsAndStructure) {
  const RigidBodyParams body;
  std::mt19937_64 rng(12);
  KnodeParams zero = random_params(1);
  zero.assign(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(zero.parameter_count())));
  const KnodeParams theta = random_params(2);
  for (int i = 0; i < 50; ++i) {
    const auto [bottom, top] = random_scene(rng);
    EXPECT_EQ(residual_derivative(bottom, top, zero, body), StateVec::Zero());
    const StateVec d = residual_derivative(bottom, top, theta, body);
    EXPECT_EQ(d.head<3>(), Eigen::Vector3d::Zero());
    EXPECT_EQ(d.segment<4>(6), Eigen::Vector4d::Zero());
  }
}

TEST(Residual, MatchesExplicitMTimesH) {
  const RigidBodyParams body;
  std::mt19937_64 rng(14);
  const KnodeParams theta = random_params(3);
  const auto [bottom, top] = random_scene(rng);
  const Eigen::Vector3d h0 = feature_vector(bottom, top);
  Eigen::VectorXd stacked(6);
  stacked << mlp_forward(theta.branches()[0], h0), mlp_forward(theta.branches()[1], h0);
  const StateVec expected = scaling_matrix(bottom, top, body, ScalingMode::kFull) * theta.selection_matrix() * stacked;
  EXPECT_LT((residual_derivative(bottom, top, theta, body) - expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Residual, WorldForceEquivariantUnderSceneYaw) {
  const RigidBodyParams body;
  const KnodeParams theta = random_params(6);
  const Eigen::Vector3d pt(0.2, -0.1, 1.0), pb(0.23, -0.08, 0.68), vb(0.3, 0.0, -0.02);
  const Eigen::Vector3d f0 = residual_derivative(level_at(pb, 0.3, vb), level_at(pt, -0.2), theta, body).segment<3>(3);
  for (double psi : {0.5, -1.7, 3.0}) {
    const Eigen::Matrix3d rz = Eigen::AngleAxisd(psi, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const Eigen::Vector3d f1 =
        residual_derivative(level_at(rz * pb, 0.3 + psi, rz * vb), level_at(rz * pt, psi - 0.2), theta, body).segment<3>(3);
    EXPECT_LT((f1 - rz * f0).norm(), 1e-10 * f0.norm());
  }
}

TEST(Residual, StateJacobianMatchesFiniteDifferences) {
  const RigidBodyParams body;
  std::mt19937_64 rng(21);
  for (auto mode : {ScalingMode::kFull, ScalingMode::kForceOnly}) {
    KnodeParams theta = random_params(7);
    theta = KnodeParams(theta.branches(), theta.selection(), mode);
    for (auto& b : theta.branches()) {
      b.input_mean = Eigen::Vector3d(0.3, 0.02, 0.0);
      b.input_std = Eigen::Vector3d(0.05, 0.02, 0.1);
      b.output_gain = Eigen::Vector3d(0.05, 0.02, 0.5);
    }
    for (int i = 0; i < 20; ++i) {
      const auto [bottom, top] = random_scene(rng);
      const ResidualEvaluation ev = evaluate_residual(bottom, top, theta, body);
      const StateMat jac = residual_jacobian(ev, bottom, theta, body);
      const Eigen::MatrixXd num = dwknode::testing::numeric_jacobian(
          [&](const StateVec& s) { return residual_derivative(s, top, theta, body); }, bottom, 1e-7);
      EXPECT_LT((jac - num).cwiseAbs().maxCoeff(), 1e-5 * (1.0 + num.cwiseAbs().maxCoeff())) << i;
    }
  }
}

TEST(Residual, ParameterGradientMatchesFiniteDifferences) {
  const RigidBodyParams body;
  std::mt19937_64 rng(22);
  KnodeParams theta = random_params(8);
  for (auto& b : theta.branches()) {
    b.input_mean = Eigen::Vector3d(0.3, 0.02, 0.0);
    b.input_std = Eigen::Vector3d(0.05, 0.02, 0.1);
    b.output_gain = Eigen::Vector3d(0.05, 0.02, 0.5);
  }
  const auto [bottom, top] = random_scene(rng);
  StateVec g;
  g.setRandom();
  const ResidualEvaluation ev = evaluate_residual(bottom, top, theta, body);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(theta.parameter_count()));
  residual_backward(ev, bottom, theta, body, g, grad);

  const Eigen::VectorXd flat = theta.flatten();
  KnodeParams probe = theta;
  for (Eigen::Index k = 0; k < flat.size(); ++k) {
    Eigen::VectorXd p = flat, m = flat;
    p[k] += 1e-6;
    m[k] -= 1e-6;
    probe.assign(p);
    const double fp = g.dot(residual_derivative(bottom, top, probe, body));
    probe.assign(m);
    const double fm = g.dot(residual_derivative(bottom, top, probe, body));
    EXPECT_NEAR(grad[k], (fp - fm) / 2e-6, 1e-6 * (1.0 + std::abs(grad[k]))) << k;
  }
}

TEST(Residual, FeatureDependenceOnly) {
  // Two scenes with the same (z, r, v_z) give the same branch outputs.
  const KnodeParams theta = random_params(11);
  const StateVec t1 = level_at(Eigen::Vector3d(0, 0, 1));
  const StateVec b1 = level_at(Eigen::Vector3d(0.03, 0.04, 0.7));
  const StateVec t2 = level_at(Eigen::Vector3d(5, 5, 2));
  const StateVec b2 = level_at(Eigen::Vector3d(5.05, 5, 1.7), 1.0);
  const ResidualEvaluation e1 = evaluate_residual(b1, t1, theta, RigidBodyParams());
  const ResidualEvaluation e2 = evaluate_residual(b2, t2, theta, RigidBodyParams());
  EXPECT_LT((e1.features - e2.features).norm(), 1e-12);
  EXPECT_LT((e1.stacked - e2.stacked).norm(), 1e-12);
}

TEST(AxisGate, PresetLeavesOnlyTheAxialForceUngated) {
  const KnodeParams theta = random_params(3);
  ASSERT_EQ(theta.branches().size(), 2u);
  EXPECT_EQ(theta.branches()[0].axis_gate, Eigen::Vector3d(0.01, 0.01, 0.0));
  EXPECT_EQ(theta.branches()[1].axis_gate, Eigen::Vector3d(0.01, 0.01, 0.01));
  EXPECT_EQ(theta.architecture().axis_gate_width, 0.01);
}

TEST(AxisGate, OnAxisResidualIsPurelyAxial) {
  // Any weights: a stacked level pair gets no torque and a force along the wake axis only.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const KnodeParams theta = random_params(seed, 0.8);
    const StateVec top = level_at(Eigen::Vector3d(0.2, -0.1, 1.0), 0.4);
    const StateVec bottom = level_at(Eigen::Vector3d(0.2, -0.1, 0.65), -0.3, Eigen::Vector3d(0.3, 0.1, -0.05));
    const StateVec d = residual_derivative(bottom, top, theta, RigidBodyParams{});
    EXPECT_EQ(d.segment<3>(idx::kRate).norm(), 0.0);
    EXPECT_EQ(d[idx::kVel], 0.0);
    EXPECT_EQ(d[idx::kVel + 1], 0.0);
    EXPECT_NE(d[idx::kVel + 2], 0.0);
  }
}

TEST(AxisGate, GateFollowsTanhOfRadius) {
  const MlpBranch b = random_params(8).branches().front();
  MlpBranch open = b;
  open.axis_gate.resize(0);
  const Eigen::Vector3d h(0.3, 0.013, -0.02);
  const Eigen::VectorXd gated = mlp_forward(b, h), plain = mlp_forward(open, h);
  EXPECT_NEAR(gated[0], plain[0] * std::tanh(1.3), 1e-15);
  EXPECT_NEAR(gated[1], plain[1] * std::tanh(1.3), 1e-15);
  EXPECT_EQ(gated[2], plain[2]);
}

TEST(AxisGate, InputJacobianMatchesFiniteDifferences) {
  const MlpBranch b = random_params(9).branches().back();
  const Eigen::Vector3d h(0.35, 0.004, 0.01);
  const Eigen::MatrixXd jac = mlp_input_jacobian(b, mlp_forward_tape(b, h));
  const double eps = 1e-7;
  for (int k = 0; k < 3; ++k) {
    Eigen::Vector3d hp = h, hm = h;
    hp[k] += eps;
    hm[k] -= eps;
    const Eigen::VectorXd fd = (mlp_forward(b, hp) - mlp_forward(b, hm)) / (2 * eps);
    EXPECT_LE((fd - jac.col(k)).norm(), 1e-7 * (1.0 + fd.norm())) << k;
  }
}

TEST(AxisGate, NegativeWidthRejected) {
  KnodeParams theta = random_params(2);
  theta.branches().front().axis_gate[0] = -0.01;
  EXPECT_THROW(theta.validate(), ConfigError);
}
