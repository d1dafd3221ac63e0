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

#include "dwknode/config.hpp"
#include "dwknode/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

namespace dwknode {
namespace {

KnodeParams awkward_theta() {
  KnodeParams theta = KnodeParams::initialize(Architecture::simulation_preset(), 11, 0.3);
  // Values that do not have short decimal forms.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd flat = theta.flatten();
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] = u(rng) * std::pow(10.0, static_cast<int>(i % 7) - 3);
  theta.assign(flat);
  for (MlpBranch& b : theta.branches()) {
    b.input_mean = Eigen::Vector3d(0.1, -1.0 / 3.0, 2e-17);
    b.input_std = Eigen::Vector3d(0.7, std::sqrt(2.0), 1e5);
    b.output_gain = Eigen::VectorXd::Constant(b.output_dim(), 1.0 / 7.0);
  }
  return theta;
}

TEST(KnodeJson, RoundTripIsBitExact) {
  const KnodeParams theta = awkward_theta();
  ModelTag tag = ModelTag::kNominal;
  const KnodeParams back = knode_from_json(knode_to_json(theta, ModelTag::kKnodeDw), &tag);
  EXPECT_EQ(tag, ModelTag::kKnodeDw);
  const Eigen::VectorXd a = theta.flatten(), b = back.flatten();
  ASSERT_EQ(a.size(), b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]) << i;
  ASSERT_EQ(theta.branches().size(), back.branches().size());
  for (std::size_t k = 0; k < theta.branches().size(); ++k) {
    EXPECT_EQ(theta.branches()[k].input_mean, back.branches()[k].input_mean);
    EXPECT_EQ(theta.branches()[k].input_std, back.branches()[k].input_std);
    EXPECT_EQ(theta.branches()[k].output_gain, back.branches()[k].output_gain);
    EXPECT_EQ(theta.branches()[k].axis_gate, back.branches()[k].axis_gate);
  }
  EXPECT_EQ(theta.selection(), back.selection());
  EXPECT_EQ(theta.scaling_mode(), back.scaling_mode());
  // Serialization is canonical.
  EXPECT_EQ(knode_to_json(theta, ModelTag::kKnodeDw), knode_to_json(back, ModelTag::kKnodeDw));
}

TEST(KnodeJson, PhysicalPresetRoundTrips) {
  const KnodeParams theta = KnodeParams::initialize(Architecture::physical_preset(), 5);
  const KnodeParams back = knode_from_json(knode_to_json(theta, ModelTag::kKnode));
  EXPECT_EQ(theta.flatten(), back.flatten());
  EXPECT_EQ(back.scaling_mode(), ScalingMode::kForceOnly);
}

TEST(KnodeJson, RejectsMalformedDocuments) {
  EXPECT_THROW(knode_from_json("not json"), ConfigError);
  EXPECT_THROW(knode_from_json(R"({"format":"something-else","version":1})"), ConfigError);
  std::string text = knode_to_json(KnodeParams::initialize(Architecture::simulation_preset(), 1), ModelTag::kKnodeDw);
  const auto pos = text.find("\"bias\"");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 6, "\"bias_\"");
  EXPECT_THROW(knode_from_json(text), ConfigError);
}

TEST(KnodeJson, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "dwknode_theta_roundtrip.json";
  const KnodeParams theta = awkward_theta();
  save_knode(theta, ModelTag::kKnode, path.string());
  ModelTag tag = ModelTag::kNominal;
  EXPECT_EQ(load_knode(path.string(), &tag).flatten(), theta.flatten());
  EXPECT_EQ(tag, ModelTag::kKnode);
  std::filesystem::remove(path);
  EXPECT_THROW(load_knode(path.string()), std::runtime_error);
}

TEST(Sha256, KnownDigests) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Config, PaperSimPresetValues) {
  const ExperimentConfig c = ExperimentConfig::paper_sim();
  EXPECT_NO_THROW(c.validate());
  EXPECT_DOUBLE_EQ(c.plant_flow.b_const, 100.0);
  EXPECT_DOUBLE_EQ(c.plant_flow.c_d, 1.3);
  EXPECT_DOUBLE_EQ(c.controller_flow.c_d, 1.18);
  EXPECT_DOUBLE_EQ(c.plant_flow.spreading_s, 0.0697);
  EXPECT_DOUBLE_EQ(c.controller_flow.spreading_s, 0.0997);
  EXPECT_EQ(c.sim.ocp.horizon, 20);
  EXPECT_EQ(c.sim.grid_resolution, 25);
  EXPECT_EQ(c.training_scenarios().size(), 4u);
  EXPECT_FALSE(c.training_model().flow->c_d == c.plant_flow.c_d);
}

TEST(Config, EmptyFileGivesPreset) {
  std::istringstream in("");
  EXPECT_EQ(to_ini(parse_config(in)), to_ini(ExperimentConfig::paper_sim()));
}

TEST(Config, CanonicalFormRoundTrips) {
  std::istringstream in(
      "[experiment]\nseed = 42\n[mpc]\nr_thrust = 10\nhorizon = 15\n[grid]\nspeeds = 0.2, 0.6\n"
      "variants = nominal,omniscient\n[sim]\ntop_mode = nominal-mpc\n[network]\npreset = physical\n");
  const ExperimentConfig c = parse_config(in);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.grid.seed, 42u);
  EXPECT_DOUBLE_EQ(c.sim.ocp.r_diag[0], 10.0);
  EXPECT_EQ(c.sim.ocp.horizon, 15);
  EXPECT_EQ(c.grid.speeds, (std::vector<double>{0.2, 0.6}));
  EXPECT_EQ(c.grid.variants.size(), 2u);
  EXPECT_EQ(c.sim.top_mode, TopVehicleMode::kNominalMpc);
  EXPECT_EQ(c.arch.branches, 1);
  const std::string text = to_ini(c);
  std::istringstream again(text);
  EXPECT_EQ(to_ini(parse_config(again)), text);
}

TEST(Config, OcpWeightsMatchDefaultsWhenUnset) {
  std::istringstream in("[mpc]\n");
  const ExperimentConfig c = parse_config(in);
  const OcpConfig d = OcpConfig::defaults(c.sim.body);
  EXPECT_EQ(c.sim.ocp.q_diag, d.q_diag);
  EXPECT_EQ(c.sim.ocp.r_diag, d.r_diag);
  EXPECT_EQ(c.sim.ocp.p_diag, d.p_diag);
  EXPECT_EQ(c.sim.ocp.u_upper, d.u_upper);
  EXPECT_EQ(c.sim.ocp.x_upper, d.x_upper);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  for (const char* text : {"[mpc]\nhorizn = 3\n", "[mystery]\na = 1\n", "[mpc]\nhorizon = many\n",
                           "[mpc]\ndt = 0.02x\n", "[sim]\ntop_mode = teleport\n", "[grid]\nkinds = sideways\n",
                           "[experiment]\npreset = lab\n", "[mpc]\nhorizon = 0\n", "[plant_flow]\nc_d = -1\n"}) {
    std::istringstream in(text);
    EXPECT_ANY_THROW(parse_config(in)) << text;
  }
}

TEST(Config, MomentumInflowKeyword) {
  std::istringstream in("[plant_flow]\nu_h = momentum\n[controller_flow]\nu_h = 3.0\n");
  const ExperimentConfig c = parse_config(in);
  EXPECT_NEAR(c.plant_flow.u_h, 4.525, 5e-3);
  EXPECT_DOUBLE_EQ(c.controller_flow.u_h, 3.0);
}

}  // namespace
}  // namespace dwknode
