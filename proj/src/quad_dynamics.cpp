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

#include "dwknode/quad_dynamics.hpp"

#include <cmath>

namespace dwknode {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d s;
  s << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return s;
}

// Omega(omega) q == quat_rate_basis(q) omega.
Eigen::Matrix<double, 4, 3> quat_rate_basis(const Eigen::Vector4d& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix<double, 4, 3> m;
  m << -x, -y, -z,
        w, -z,  y,
        z,  w, -x,
       -y,  x,  w;
  return m;
}

}  // namespace

StateVec make_state(const Eigen::Vector3d& p, const Eigen::Vector3d& v, const Eigen::Vector4d& q,
                    const Eigen::Vector3d& omega) {
  StateVec x;
  x << p, v, q, omega;
  return x;
}

StateVec hover_state(const Eigen::Vector3d& p) {
  return make_state(p, Eigen::Vector3d::Zero(), Eigen::Vector4d(1.0, 0.0, 0.0, 0.0),
                    Eigen::Vector3d::Zero());
}

InputVec ControlInput::to_vector() const {
  InputVec u;
  u << eta, alpha;
  return u;
}

ControlInput ControlInput::from_vector(const InputVec& u) {
  return ControlInput{u[0], u.tail<3>()};
}

RigidBodyParams::RigidBodyParams()
    : RigidBodyParams(0.034, Eigen::Vector3d(1.395e-5, 1.436e-5, 2.173e-5).asDiagonal().toDenseMatrix(),
                      9.81) {}

RigidBodyParams::RigidBodyParams(double mass, const Eigen::Matrix3d& inertia, double gravity)
    : mass_(mass), gravity_(gravity), inertia_(inertia) {
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw ConfigError("rigid body: mass must be positive");
  }
  if (!(gravity >= 0.0)) {
    throw ConfigError("rigid body: gravity must be non-negative");
  }
  if ((inertia - inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12 * inertia.cwiseAbs().maxCoeff()) {
    throw ConfigError("rigid body: inertia must be symmetric");
  }
  Eigen::LLT<Eigen::Matrix3d> llt(inertia);
  if (llt.info() != Eigen::Success) {
    throw ConfigError("rigid body: inertia must be positive definite");
  }
  inertia_inv_ = llt.solve(Eigen::Matrix3d::Identity());
}

InputVec RigidBodyParams::hover_input() const {
  InputVec u = InputVec::Zero();
  u[0] = hover_thrust();
  return u;
}

Eigen::Matrix4d omega_matrix(const Eigen::Vector3d& omega) {
  const double wx = omega.x(), wy = omega.y(), wz = omega.z();
  Eigen::Matrix4d m;
  m << 0.0, -wx, -wy, -wz,
       wx, 0.0, wz, -wy,
       wy, -wz, 0.0, wx,
       wz, wy, -wx, 0.0;
  return m;
}

Eigen::Matrix3d rotation_from_quat_unchecked(const Eigen::Vector4d& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d r;
  r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
       2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
       2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
  return r;
}

Eigen::Matrix3d rotation_from_quat(const Eigen::Vector4d& q) {
  if (!q.allFinite() || std::abs(q.norm() - 1.0) > 1e-6) {
    throw InvalidInput("rotation_from_quat: quaternion is not unit length");
  }
  return rotation_from_quat_unchecked(q);
}

Eigen::Matrix<double, 3, 4> rotate_jacobian(const Eigen::Vector4d& q, const Eigen::Vector3d& v) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  const double a = v.x(), b = v.y(), c = v.z();
  Eigen::Matrix<double, 3, 4> j;
  j.col(0) << -2.0 * z * b + 2.0 * y * c, 2.0 * z * a - 2.0 * x * c, -2.0 * y * a + 2.0 * x * b;
  j.col(1) << 2.0 * y * b + 2.0 * z * c, 2.0 * y * a - 4.0 * x * b - 2.0 * w * c,
      2.0 * z * a + 2.0 * w * b - 4.0 * x * c;
  j.col(2) << -4.0 * y * a + 2.0 * x * b + 2.0 * w * c, 2.0 * x * a + 2.0 * z * c,
      -2.0 * w * a + 2.0 * z * b - 4.0 * y * c;
  j.col(3) << -4.0 * z * a - 2.0 * w * b + 2.0 * x * c, 2.0 * w * a - 4.0 * z * b + 2.0 * y * c,
      2.0 * x * a + 2.0 * y * b;
  return j;
}

Eigen::Matrix<double, 3, 4> rotate_transpose_jacobian(const Eigen::Vector4d& q,
                                                      const Eigen::Vector3d& v) {
  // R(w,x,y,z)^T == R(-w,x,y,z)
  const Eigen::Vector4d flipped(-q[0], q[1], q[2], q[3]);
  Eigen::Matrix<double, 3, 4> j = rotate_jacobian(flipped, v);
  j.col(0) = -j.col(0);
  return j;
}

StateVec nominal_derivative(const StateVec& x, const InputVec& u, const RigidBodyParams& body) {
  const Eigen::Vector4d q = quaternion(x);
  const Eigen::Vector3d omega = body_rate(x);
  const Eigen::Matrix3d r = rotation_from_quat_unchecked(q);
  const Eigen::Matrix3d& j = body.inertia();

  StateVec dx;
  dx.segment<3>(idx::kPos) = velocity(x);
  dx.segment<3>(idx::kVel) = r.col(2) * (u[0] / body.mass());
  dx[idx::kVel + 2] -= body.gravity();
  dx.segment<4>(idx::kQuat) = 0.5 * (omega_matrix(omega) * q);
  dx.segment<3>(idx::kRate) = body.inertia_inv() * (u.tail<3>() - omega.cross(j * omega));
  return dx;
}

void nominal_jacobian(const StateVec& x, const InputVec& u, const RigidBodyParams& body,
                      StateMat& dfdx, InputMat& dfdu) {
  const Eigen::Vector4d q = quaternion(x);
  const Eigen::Vector3d omega = body_rate(x);
  const Eigen::Matrix3d& j = body.inertia();
  const Eigen::Matrix3d& jinv = body.inertia_inv();

  dfdx.setZero();
  dfdu.setZero();
  dfdx.block<3, 3>(idx::kPos, idx::kVel).setIdentity();
  dfdx.block<3, 4>(idx::kVel, idx::kQuat) =
      rotate_jacobian(q, Eigen::Vector3d(0.0, 0.0, u[0])) / body.mass();
  dfdx.block<4, 4>(idx::kQuat, idx::kQuat) = 0.5 * omega_matrix(omega);
  dfdx.block<4, 3>(idx::kQuat, idx::kRate) = 0.5 * quat_rate_basis(q);
  dfdx.block<3, 3>(idx::kRate, idx::kRate) = -jinv * (skew(omega) * j - skew(j * omega));

  dfdu.block<3, 1>(idx::kVel, 0) = rotation_from_quat_unchecked(q).col(2) / body.mass();
  dfdu.block<3, 3>(idx::kRate, 1) = jinv;
}

void normalize_quaternion(StateVec& x) {
  const double n = quaternion(x).norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw NumericError("quaternion renormalization: degenerate norm");
  }
  quaternion(x) /= n;
}

StateMat normalization_jacobian(const StateVec& x) {
  StateMat jac = StateMat::Identity();
  const Eigen::Vector4d q = quaternion(x);
  const double n = q.norm();
  const Eigen::Vector4d qh = q / n;
  jac.block<4, 4>(idx::kQuat, idx::kQuat) = (Eigen::Matrix4d::Identity() - qh * qh.transpose()) / n;
  return jac;
}

}  // namespace dwknode
