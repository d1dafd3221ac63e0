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

#include "dwknode/types.hpp"

namespace dwknode {

/// Mass, inertia and gravity of one quadrotor. Gravity acts along world -z.
class RigidBodyParams {
 public:
  /// Crazyflie-class defaults (34 g, 10 cm body).
  RigidBodyParams();
  /// Throws ConfigError unless mass > 0 and inertia is symmetric positive definite.
  RigidBodyParams(double mass, const Eigen::Matrix3d& inertia, double gravity = 9.81);

  double mass() const { return mass_; }
  double gravity() const { return gravity_; }
  const Eigen::Matrix3d& inertia() const { return inertia_; }
  const Eigen::Matrix3d& inertia_inv() const { return inertia_inv_; }
  double hover_thrust() const { return mass_ * gravity_; }
  InputVec hover_input() const;

 private:
  double mass_;
  double gravity_;
  Eigen::Matrix3d inertia_;
  Eigen::Matrix3d inertia_inv_;
};

/// Quaternion rate matrix: q_dot = Omega(omega) * q / 2 for scalar-first q.
Eigen::Matrix4d omega_matrix(const Eigen::Vector3d& omega);

/// World-from-body rotation for a scalar-first Hamilton quaternion.
/// Throws InvalidInput if |q| deviates from 1 by more than 1e-6.
Eigen::Matrix3d rotation_from_quat(const Eigen::Vector4d& q);

/// Same formula with no unit-norm check; used inside integrator stages
/// and derivative code where q is only approximately normalized.
Eigen::Matrix3d rotation_from_quat_unchecked(const Eigen::Vector4d& q);

/// d(R(q) w)/dq, 3x4, using the same polynomial formula as rotation_from_quat_unchecked.
Eigen::Matrix<double, 3, 4> rotate_jacobian(const Eigen::Vector4d& q, const Eigen::Vector3d& w);
/// d(R(q)^T w)/dq, 3x4.
Eigen::Matrix<double, 3, 4> rotate_transpose_jacobian(const Eigen::Vector4d& q,
                                                      const Eigen::Vector3d& w);

/// Rigid-body derivative: p' = v, v' = -g e_z + R [0 0 eta]/m,
/// q' = Omega(omega) q / 2, omega' = J^-1 (alpha - omega x J omega).
StateVec nominal_derivative(const StateVec& x, const InputVec& u, const RigidBodyParams& body);

/// Jacobians of nominal_derivative with respect to state and input.
void nominal_jacobian(const StateVec& x, const InputVec& u, const RigidBodyParams& body,
                      StateMat& dfdx, InputMat& dfdu);

/// Divides the quaternion block by its norm.
void normalize_quaternion(StateVec& x);

/// Jacobian of the quaternion renormalization map at x (identity outside the quaternion block).
StateMat normalization_jacobian(const StateVec& x);

}  // namespace dwknode
