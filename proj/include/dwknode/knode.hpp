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

#pragma once

#include "dwknode/downwash.hpp"
#include "dwknode/quad_dynamics.hpp"
#include "dwknode/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dwknode {

struct DenseLayer {
  Eigen::MatrixXd weight;  // n_out x n_in
  Eigen::VectorXd bias;
};

/// Feed-forward branch: tanh on every layer but the last.
/// Inputs are standardized with fixed (input_mean, input_std) and the linear
/// output is multiplied elementwise by a fixed output_gain. Neither is trained.
///
/// On the wake axis the features are symmetric under any rotation about it or mirror through
/// it, so every output except the axial force must vanish there (off-axis values would also
/// jump as the frame's e1/e2 flip across the axis). Channel j with axis_gate[j] = w > 0 is multiplied by tanh(r / w);
/// w = 0 (or an empty vector) leaves the channel ungated.
struct MlpBranch {
  std::vector<DenseLayer> layers;
  Eigen::Vector3d input_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d input_std = Eigen::Vector3d::Ones();
  Eigen::VectorXd output_gain;
  Eigen::VectorXd axis_gate;

  int input_dim() const;
  int output_dim() const;
  std::size_t parameter_count() const;
  /// Throws ConfigError when layer shapes do not chain or the input is not 3-wide.
  void validate() const;
};

enum class ScalingMode { kFull, kForceOnly };

std::string to_string(ScalingMode mode);
ScalingMode scaling_mode_from_string(const std::string& s);

/// Network shape plus routing of branch outputs into the 13 state rows.
struct Architecture {
  int branches = 2;
  std::vector<int> hidden{9};
  int output_dim = 3;
  /// (state row, stacked-output column) pairs, 0-based, where H is one.
  std::vector<std::pair<int, int>> selection;
  ScalingMode scaling = ScalingMode::kFull;
  /// Width (m) of the on-axis gate on every channel except the axial force; 0 disables.
  double axis_gate_width = 0.01;

  /// Two branches, one hidden layer of 9, force branch -> rows 4..6, torque branch -> rows 11..13.
  static Architecture simulation_preset();
  /// One branch, one hidden layer of 4, force rows only, force-only scaling.
  static Architecture physical_preset();

  void validate() const;
};

class KnodeParams {
 public:
  KnodeParams() = default;
  KnodeParams(std::vector<MlpBranch> branches, std::vector<std::pair<int, int>> selection,
              ScalingMode mode);

  /// Weights uniform in [-init_range, init_range] from a seeded engine.
  static KnodeParams initialize(const Architecture& arch, std::uint64_t seed, double init_range = 0.1);

  const std::vector<MlpBranch>& branches() const { return branches_; }
  std::vector<MlpBranch>& branches() { return branches_; }
  const std::vector<std::pair<int, int>>& selection() const { return selection_; }
  ScalingMode scaling_mode() const { return mode_; }
  int stacked_output_dim() const;
  Eigen::MatrixXd selection_matrix() const;
  Architecture architecture() const;

  std::size_t parameter_count() const;
  /// Flat layout: for each branch, for each layer, weight row-major then bias.
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);

  void validate() const;

 private:
  std::vector<MlpBranch> branches_;
  std::vector<std::pair<int, int>> selection_;
  ScalingMode mode_ = ScalingMode::kFull;
};

/// [z, r, v_z] of the bottom vehicle's centre relative to the top vehicle, in F.
Eigen::Vector3d feature_vector(const StateVec& x, const StateVec& x_top);
Eigen::Vector3d feature_vector(const FlowFrame& frame, const StateVec& x, const StateVec& x_top);

/// Branch output for raw features h0.
Eigen::VectorXd mlp_forward(const MlpBranch& branch, const Eigen::Vector3d& h0);

/// Rows 4..6 carry R_fw^T / m, rows 11..13 carry Jhat^-1 R^T R_fw^T (zero in force-only mode),
/// with Jhat^-1 = J^-1 / |J^-1|_F and R the bottom vehicle's attitude.
Eigen::Matrix<double, 13, 13> scaling_matrix(const StateVec& x, const StateVec& x_top,
                                             const RigidBodyParams& body, ScalingMode mode);

/// d(x, x_top; theta) = M H [h_1; ...; h_U].
StateVec residual_derivative(const StateVec& x, const StateVec& x_top, const KnodeParams& theta,
                             const RigidBodyParams& body);

/// Intermediate values of one branch evaluation, kept for differentiation.
struct BranchTape {
  std::vector<Eigen::VectorXd> activations;  // [normalized input, hidden_1, ..., hidden_{L-1}]
  Eigen::VectorXd output;
  Eigen::VectorXd gate;     // per-channel gate factor (empty when ungated)
  Eigen::VectorXd ungated;  // output before the gate
};

BranchTape mlp_forward_tape(const MlpBranch& branch, const Eigen::Vector3d& h0);
/// d(output)/d(h0), n_out x 3.
Eigen::MatrixXd mlp_input_jacobian(const MlpBranch& branch, const BranchTape& tape);
/// Accumulates d(g . output)/d(params) into `grad` (this branch's slice of the flat vector).
void mlp_backward(const MlpBranch& branch, const BranchTape& tape, const Eigen::VectorXd& g_output,
                  std::span<double> grad);

/// Residual evaluation with everything needed for Jacobians and parameter gradients.
struct ResidualEvaluation {
  FlowFrame frame;
  Eigen::Vector3d features;
  std::vector<BranchTape> tapes;
  Eigen::VectorXd stacked;  // concatenated branch outputs
  StateVec value;
};

ResidualEvaluation evaluate_residual(const StateVec& x, const StateVec& x_top, const KnodeParams& theta,
                                     const RigidBodyParams& body);
ResidualEvaluation evaluate_residual(const FlowFrame& frame, const StateVec& x, const StateVec& x_top,
                                     const KnodeParams& theta, const RigidBodyParams& body);

/// d(residual)/dx. The frame's rotation about e3 contributes terms scaling with 1/r;
/// r is floored at `min_radial` there (use a tiny floor for exact derivatives).
StateMat residual_jacobian(const ResidualEvaluation& ev, const StateVec& x, const KnodeParams& theta,
                           const RigidBodyParams& body, double min_radial = 1e-9);

/// Accumulates d(g . residual)/d(theta) into `grad` (full flat vector).
void residual_backward(const ResidualEvaluation& ev, const StateVec& x, const KnodeParams& theta,
                       const RigidBodyParams& body, const StateVec& g, Eigen::VectorXd& grad);

}  // namespace dwknode
