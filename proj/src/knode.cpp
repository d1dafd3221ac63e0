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

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace dwknode {

namespace {

struct ScalingBlocks {
  Eigen::Matrix3d force;   // acts on rows 4..6
  Eigen::Matrix3d torque;  // acts on rows 11..13
};

ScalingBlocks scaling_blocks(const FlowFrame& frame, const StateVec& x, const RigidBodyParams& body,
                             ScalingMode mode) {
  ScalingBlocks b;
  const Eigen::Matrix3d r_wf = frame.r_fw.transpose();
  b.force = r_wf / body.mass();
  if (mode == ScalingMode::kFull) {
    const Eigen::Matrix3d jhat = body.inertia_inv() / body.inertia_inv().norm();
    b.torque = jhat * rotation_from_quat_unchecked(quaternion(x)).transpose() * r_wf;
  } else {
    b.torque.setZero();
  }
  return b;
}

// Routing y = H * stacked without forming H.
StateVec apply_selection(const KnodeParams& theta, const Eigen::VectorXd& stacked) {
  StateVec y = StateVec::Zero();
  for (const auto& [row, col] : theta.selection()) {
    y[row] += stacked[col];
  }
  return y;
}

}  // namespace

int MlpBranch::input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }

int MlpBranch::output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }

std::size_t MlpBranch::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void MlpBranch::validate() const {
  if (layers.empty()) throw ConfigError("mlp branch: no layers");
  if (input_dim() != 3) throw ConfigError("mlp branch: input dimension must be 3");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].bias.size() != layers[l].weight.rows()) {
      throw ConfigError("mlp branch: bias size does not match layer " + std::to_string(l));
    }
    if (l > 0 && layers[l].weight.cols() != layers[l - 1].weight.rows()) {
      throw ConfigError("mlp branch: layer " + std::to_string(l) + " does not chain");
    }
  }
  if (output_gain.size() != output_dim()) throw ConfigError("mlp branch: output gain size mismatch");
  if (axis_gate.size() != 0 && axis_gate.size() != output_dim()) {
    throw ConfigError("mlp branch: axis gate size mismatch");
  }
  if (!(axis_gate.array() >= 0.0).all() || !axis_gate.allFinite()) {
    throw ConfigError("mlp branch: axis gate widths must be finite and non-negative");
  }
  if (!(input_std.array() > 0.0).all()) throw ConfigError("mlp branch: input_std must be positive");
}

std::string to_string(ScalingMode mode) { return mode == ScalingMode::kFull ? "full" : "force_only"; }

ScalingMode scaling_mode_from_string(const std::string& s) {
  if (s == "full") return ScalingMode::kFull;
  if (s == "force_only") return ScalingMode::kForceOnly;
  throw ConfigError("unknown scaling mode '" + s + "'");
}

Architecture Architecture::simulation_preset() {
  Architecture a;
  a.branches = 2;
  a.hidden = {9};
  a.output_dim = 3;
  a.selection = {{3, 0}, {4, 1}, {5, 2}, {10, 3}, {11, 4}, {12, 5}};
  a.scaling = ScalingMode::kFull;
  return a;
}

Architecture Architecture::physical_preset() {
  Architecture a;
  a.branches = 1;
  a.hidden = {4};
  a.output_dim = 3;
  a.selection = {{3, 0}, {4, 1}, {5, 2}};
  a.scaling = ScalingMode::kForceOnly;
  return a;
}

void Architecture::validate() const {
  if (branches < 1) throw ConfigError("architecture: need at least one branch");
  if (output_dim < 1) throw ConfigError("architecture: output_dim must be positive");
  for (int h : hidden) {
    if (h < 1) throw ConfigError("architecture: hidden sizes must be positive");
  }
  if (!(axis_gate_width >= 0.0) || !std::isfinite(axis_gate_width)) {
    throw ConfigError("architecture: axis gate width must be finite and non-negative");
  }
  const int cols = branches * output_dim;
  std::vector<int> used(static_cast<std::size_t>(cols), 0);
  for (const auto& [r, c] : selection) {
    if (r < 0 || r >= kStateDim || c < 0 || c >= cols) {
      throw ConfigError("architecture: selection entry out of range");
    }
    if (++used[static_cast<std::size_t>(c)] > 1) {
      throw ConfigError("architecture: selection column used twice");
    }
  }
}

KnodeParams::KnodeParams(std::vector<MlpBranch> branches, std::vector<std::pair<int, int>> selection,
                         ScalingMode mode)
    : branches_(std::move(branches)), selection_(std::move(selection)), mode_(mode) {
  validate();
}

KnodeParams KnodeParams::initialize(const Architecture& arch, std::uint64_t seed, double init_range) {
  arch.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-init_range, init_range);
  std::vector<MlpBranch> branches;
  for (int b = 0; b < arch.branches; ++b) {
    MlpBranch br;
    int in = 3;
    std::vector<int> sizes = arch.hidden;
    sizes.push_back(arch.output_dim);
    for (int out : sizes) {
      DenseLayer l;
      l.weight.resize(out, in);
      l.bias.resize(out);
      for (int i = 0; i < out; ++i) {
        for (int j = 0; j < in; ++j) l.weight(i, j) = dist(rng);
      }
      for (int i = 0; i < out; ++i) l.bias[i] = dist(rng);
      br.layers.push_back(std::move(l));
      in = out;
    }
    br.output_gain = Eigen::VectorXd::Ones(arch.output_dim);
    br.axis_gate = Eigen::VectorXd::Zero(arch.output_dim);
    for (const auto& [row, col] : arch.selection) {
      // Everything but the axial force is odd under a mirror through the axis.
      const bool on_axis_zero = row == idx::kVel || row == idx::kVel + 1 || (row >= idx::kRate && row < idx::kRate + 3);
      if (on_axis_zero && col / arch.output_dim == b) br.axis_gate[col % arch.output_dim] = arch.axis_gate_width;
    }
    branches.push_back(std::move(br));
  }
  return KnodeParams(std::move(branches), arch.selection, arch.scaling);
}

int KnodeParams::stacked_output_dim() const {
  int n = 0;
  for (const auto& b : branches_) n += b.output_dim();
  return n;
}

Eigen::MatrixXd KnodeParams::selection_matrix() const {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(kStateDim, stacked_output_dim());
  for (const auto& [r, c] : selection_) h(r, c) = 1.0;
  return h;
}

Architecture KnodeParams::architecture() const {
  Architecture a;
  a.branches = static_cast<int>(branches_.size());
  a.hidden.clear();
  if (!branches_.empty()) {
    const auto& layers = branches_.front().layers;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) a.hidden.push_back(static_cast<int>(layers[l].weight.rows()));
    a.output_dim = branches_.front().output_dim();
  }
  a.selection = selection_;
  a.scaling = mode_;
  a.axis_gate_width = 0.0;
  for (const auto& b : branches_) {
    if (b.axis_gate.size() > 0) a.axis_gate_width = std::max(a.axis_gate_width, b.axis_gate.maxCoeff());
  }
  return a;
}

std::size_t KnodeParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : branches_) n += b.parameter_count();
  return n;
}

Eigen::VectorXd KnodeParams::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (const auto& b : branches_) {
    for (const auto& l : b.layers) {
      for (Eigen::Index i = 0; i < l.weight.rows(); ++i) {
        for (Eigen::Index j = 0; j < l.weight.cols(); ++j) flat[k++] = l.weight(i, j);
      }
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) flat[k++] = l.bias[i];
    }
  }
  return flat;
}

void KnodeParams::assign(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw ConfigError("knode params: flat vector has wrong length");
  }
  Eigen::Index k = 0;
  for (auto& b : branches_) {
    for (auto& l : b.layers) {
      for (Eigen::Index i = 0; i < l.weight.rows(); ++i) {
        for (Eigen::Index j = 0; j < l.weight.cols(); ++j) l.weight(i, j) = flat[k++];
      }
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = flat[k++];
    }
  }
}

void KnodeParams::validate() const {
  if (branches_.empty()) throw ConfigError("knode params: no branches");
  for (const auto& b : branches_) b.validate();
  const int cols = stacked_output_dim();
  std::vector<int> used(static_cast<std::size_t>(cols), 0);
  for (const auto& [r, c] : selection_) {
    if (r < 0 || r >= kStateDim || c < 0 || c >= cols) {
      throw ConfigError("knode params: selection entry out of range");
    }
    if (++used[static_cast<std::size_t>(c)] > 1) {
      throw ConfigError("knode params: selection column has more than one nonzero");
    }
  }
}

Eigen::Vector3d feature_vector(const FlowFrame& frame, const StateVec& x, const StateVec& x_top) {
  const Eigen::Vector3d dp = frame.r_fw * (position(x) - position(x_top));
  return {dp.z(), std::hypot(dp.x(), dp.y()), frame.e3.dot(velocity(x))};
}

Eigen::Vector3d feature_vector(const StateVec& x, const StateVec& x_top) {
  return feature_vector(flow_frame(x, x_top), x, x_top);
}

BranchTape mlp_forward_tape(const MlpBranch& branch, const Eigen::Vector3d& h0) {
  if (branch.layers.empty() || branch.input_dim() != 3) {
    throw ConfigError("mlp_forward: branch input dimension must be 3");
  }
  BranchTape tape;
  tape.activations.reserve(branch.layers.size());
  Eigen::VectorXd a = ((h0 - branch.input_mean).array() / branch.input_std.array()).matrix();
  tape.activations.push_back(a);
  for (std::size_t l = 0; l + 1 < branch.layers.size(); ++l) {
    const auto& layer = branch.layers[l];
    if (layer.weight.cols() != a.size()) throw ConfigError("mlp_forward: dimension mismatch");
    a = (layer.weight * a + layer.bias).array().tanh().matrix();
    tape.activations.push_back(a);
  }
  const auto& last = branch.layers.back();
  if (last.weight.cols() != a.size()) throw ConfigError("mlp_forward: dimension mismatch");
  tape.output = last.weight * a + last.bias;
  if (branch.output_gain.size() == tape.output.size()) {
    tape.output.array() *= branch.output_gain.array();
  }
  if (branch.axis_gate.size() == tape.output.size() && (branch.axis_gate.array() > 0.0).any()) {
    tape.ungated = tape.output;
    tape.gate = Eigen::VectorXd::Ones(tape.output.size());
    for (Eigen::Index j = 0; j < tape.gate.size(); ++j) {
      if (branch.axis_gate[j] > 0.0) tape.gate[j] = std::tanh(h0.y() / branch.axis_gate[j]);
    }
    tape.output.array() *= tape.gate.array();
  }
  return tape;
}

Eigen::VectorXd mlp_forward(const MlpBranch& branch, const Eigen::Vector3d& h0) {
  return mlp_forward_tape(branch, h0).output;
}

Eigen::MatrixXd mlp_input_jacobian(const MlpBranch& branch, const BranchTape& tape) {
  Eigen::MatrixXd j = branch.layers.back().weight;
  if (branch.output_gain.size() == j.rows()) j = branch.output_gain.asDiagonal() * j;
  for (std::size_t l = branch.layers.size() - 1; l-- > 0;) {
    const Eigen::VectorXd& a = tape.activations[l + 1];
    const Eigen::VectorXd dtanh = (1.0 - a.array().square()).matrix();
    j = (j * dtanh.asDiagonal()) * branch.layers[l].weight;
  }
  j = j * branch.input_std.cwiseInverse().asDiagonal();
  if (tape.gate.size() == j.rows()) {
    j = tape.gate.asDiagonal() * j;
    for (Eigen::Index i = 0; i < j.rows(); ++i) {
      const double w = branch.axis_gate[i];
      if (w > 0.0) j(i, 1) += tape.ungated[i] * (1.0 - tape.gate[i] * tape.gate[i]) / w;
    }
  }
  return j;
}

void mlp_backward(const MlpBranch& branch, const BranchTape& tape, const Eigen::VectorXd& g_output,
                  std::span<double> grad) {
  // Offsets of each layer in the branch's flat slice.
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& l : branch.layers) {
    offsets.push_back(off);
    off += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  }
  Eigen::VectorXd g = g_output;
  if (tape.gate.size() == g.size()) g.array() *= tape.gate.array();
  if (branch.output_gain.size() == g.size()) g.array() *= branch.output_gain.array();
  for (std::size_t l = branch.layers.size(); l-- > 0;) {
    const auto& layer = branch.layers[l];
    const Eigen::VectorXd& in = tape.activations[l];
    double* wg = grad.data() + offsets[l];
    const Eigen::Index rows = layer.weight.rows(), cols = layer.weight.cols();
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) wg[i * cols + j] += g[i] * in[j];
    }
    double* bg = wg + rows * cols;
    for (Eigen::Index i = 0; i < rows; ++i) bg[i] += g[i];
    if (l == 0) break;
    Eigen::VectorXd ga = layer.weight.transpose() * g;
    g = (ga.array() * (1.0 - in.array().square())).matrix();
  }
}

Eigen::Matrix<double, 13, 13> scaling_matrix(const StateVec& x, const StateVec& x_top,
                                             const RigidBodyParams& body, ScalingMode mode) {
  const ScalingBlocks b = scaling_blocks(flow_frame(x, x_top), x, body, mode);
  Eigen::Matrix<double, 13, 13> m = Eigen::Matrix<double, 13, 13>::Zero();
  m.block<3, 3>(idx::kVel, idx::kVel) = b.force;
  m.block<3, 3>(idx::kRate, idx::kRate) = b.torque;
  return m;
}

ResidualEvaluation evaluate_residual(const FlowFrame& frame, const StateVec& x, const StateVec& x_top,
                                     const KnodeParams& theta, const RigidBodyParams& body) {
  ResidualEvaluation ev;
  ev.frame = frame;
  ev.features = feature_vector(frame, x, x_top);
  ev.stacked.resize(theta.stacked_output_dim());
  Eigen::Index k = 0;
  for (const auto& br : theta.branches()) {
    ev.tapes.push_back(mlp_forward_tape(br, ev.features));
    const auto& out = ev.tapes.back().output;
    ev.stacked.segment(k, out.size()) = out;
    k += out.size();
  }
  const StateVec y = apply_selection(theta, ev.stacked);
  const ScalingBlocks b = scaling_blocks(frame, x, body, theta.scaling_mode());
  ev.value.setZero();
  ev.value.segment<3>(idx::kVel) = b.force * y.segment<3>(idx::kVel);
  ev.value.segment<3>(idx::kRate) = b.torque * y.segment<3>(idx::kRate);
  return ev;
}

ResidualEvaluation evaluate_residual(const StateVec& x, const StateVec& x_top, const KnodeParams& theta,
                                     const RigidBodyParams& body) {
  return evaluate_residual(flow_frame(x, x_top), x, x_top, theta, body);
}

StateVec residual_derivative(const StateVec& x, const StateVec& x_top, const KnodeParams& theta,
                             const RigidBodyParams& body) {
  return evaluate_residual(x, x_top, theta, body).value;
}

StateMat residual_jacobian(const ResidualEvaluation& ev, const StateVec& x, const KnodeParams& theta,
                           const RigidBodyParams& body, double min_radial) {
  const FlowFrame& f = ev.frame;
  const int n_out = theta.stacked_output_dim();

  // d(stacked)/d(features)
  Eigen::MatrixXd dstack(n_out, 3);
  Eigen::Index k = 0;
  for (std::size_t b = 0; b < theta.branches().size(); ++b) {
    const Eigen::MatrixXd jb = mlp_input_jacobian(theta.branches()[b], ev.tapes[b]);
    dstack.middleRows(k, jb.rows()) = jb;
    k += jb.rows();
  }
  // d(features)/d(p) and d(features)/d(v): z = e3.dp, r = e1.dp, s = e3.v
  Eigen::Matrix3d dfeat_dp;
  dfeat_dp.row(0) = f.e3.transpose();
  dfeat_dp.row(1) = f.e1.transpose();
  dfeat_dp.row(2).setZero();
  Eigen::Matrix3d dfeat_dv = Eigen::Matrix3d::Zero();
  dfeat_dv.row(2) = f.e3.transpose();

  Eigen::Matrix<double, 13, 3> dy_dfeat = Eigen::Matrix<double, 13, 3>::Zero();
  for (const auto& [row, col] : theta.selection()) dy_dfeat.row(row) += dstack.row(col);
  const StateVec y = apply_selection(theta, ev.stacked);

  const ScalingBlocks blocks = scaling_blocks(f, x, body, theta.scaling_mode());
  const double radial = std::max(ev.features.y(), min_radial);
  // d(R_wf y)/dp from the frame turning about e3: de1/dp = e2 e2^T / r, de2/dp = -e1 e2^T / r.
  const auto frame_turn = [&](const Eigen::Vector3d& yf) -> Eigen::Matrix3d {
    if (f.degenerate) return Eigen::Matrix3d::Zero();
    return (yf.x() * f.e2 - yf.y() * f.e1) * f.e2.transpose() / radial;
  };

  StateMat jac = StateMat::Zero();
  const Eigen::Vector3d yv = y.segment<3>(idx::kVel);
  const Eigen::Matrix<double, 3, 3> dyv_dfeat = dy_dfeat.middleRows<3>(idx::kVel);
  jac.block<3, 3>(idx::kVel, idx::kPos) =
      blocks.force * dyv_dfeat * dfeat_dp + frame_turn(yv) / body.mass();
  jac.block<3, 3>(idx::kVel, idx::kVel) = blocks.force * dyv_dfeat * dfeat_dv;

  if (theta.scaling_mode() == ScalingMode::kFull) {
    const Eigen::Vector3d yw = y.segment<3>(idx::kRate);
    const Eigen::Matrix<double, 3, 3> dyw_dfeat = dy_dfeat.middleRows<3>(idx::kRate);
    const Eigen::Matrix3d jhat = body.inertia_inv() / body.inertia_inv().norm();
    const Eigen::Vector4d q = quaternion(x);
    const Eigen::Matrix3d rt = rotation_from_quat_unchecked(q).transpose();
    jac.block<3, 3>(idx::kRate, idx::kPos) =
        blocks.torque * dyw_dfeat * dfeat_dp + jhat * rt * frame_turn(yw);
    jac.block<3, 3>(idx::kRate, idx::kVel) = blocks.torque * dyw_dfeat * dfeat_dv;
    jac.block<3, 4>(idx::kRate, idx::kQuat) = jhat * rotate_transpose_jacobian(q, f.r_fw.transpose() * yw);
  }
  return jac;
}

void residual_backward(const ResidualEvaluation& ev, const StateVec& x, const KnodeParams& theta,
                       const RigidBodyParams& body, const StateVec& g, Eigen::VectorXd& grad) {
  const ScalingBlocks blocks = scaling_blocks(ev.frame, x, body, theta.scaling_mode());
  StateVec gy = StateVec::Zero();
  gy.segment<3>(idx::kVel) = blocks.force.transpose() * g.segment<3>(idx::kVel);
  gy.segment<3>(idx::kRate) = blocks.torque.transpose() * g.segment<3>(idx::kRate);

  Eigen::VectorXd gstack = Eigen::VectorXd::Zero(theta.stacked_output_dim());
  for (const auto& [row, col] : theta.selection()) gstack[col] += gy[row];

  Eigen::Index out_off = 0;
  std::size_t par_off = 0;
  for (std::size_t b = 0; b < theta.branches().size(); ++b) {
    const auto& br = theta.branches()[b];
    const auto n = br.output_dim();
    const std::size_t np = br.parameter_count();
    mlp_backward(br, ev.tapes[b], gstack.segment(out_off, n),
                 std::span<double>(grad.data() + par_off, np));
    out_off += n;
    par_off += np;
  }
}

}  // namespace dwknode
