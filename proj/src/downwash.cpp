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

#include "dwknode/downwash.hpp"

#include "dwknode/kernels/wake_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dwknode {

namespace {

constexpr double kDegenerateTol = 1e-9;
constexpr double kWakeEps = 1e-9;

// Area of [x0,x1]x[y0,y1] intersected with the disk of radius r centred at the origin.
double cell_disk_area(double x0, double x1, double y0, double y1, double r) {
  const double xa = std::max(x0, -r);
  const double xb = std::min(x1, r);
  if (xa >= xb) return 0.0;

  double cuts[6] = {xa, xb, 0, 0, 0, 0};
  int n = 2;
  for (double y : {y0, y1}) {
    if (std::abs(y) < r) {
      const double xc = std::sqrt(r * r - y * y);
      for (double c : {-xc, xc}) {
        if (c > xa && c < xb) cuts[n++] = c;
      }
    }
  }
  std::sort(cuts, cuts + n);

  const auto arc = [r](double x) {
    const double xx = std::clamp(x / r, -1.0, 1.0);
    return 0.5 * (x * std::sqrt(std::max(0.0, r * r - x * x)) + r * r * std::asin(xx));
  };

  double area = 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    const double l = cuts[i], u = cuts[i + 1];
    if (u <= l) continue;
    const double m = 0.5 * (l + u);
    const double s = std::sqrt(std::max(0.0, r * r - m * m));
    const bool upper_is_arc = s < y1;
    const bool lower_is_arc = -s > y0;
    const double hi = upper_is_arc ? s : y1;
    const double lo = lower_is_arc ? -s : y0;
    if (hi <= lo) continue;
    const double arc_int = arc(u) - arc(l);
    const double upper_int = upper_is_arc ? arc_int : y1 * (u - l);
    const double lower_int = lower_is_arc ? -arc_int : y0 * (u - l);
    area += upper_int - lower_int;
  }
  return area;
}

}  // namespace

double FlowParams::momentum_theory_u_h(const RigidBodyParams& body, double d_prop, double rho) {
  const double disk_area = 4.0 * std::numbers::pi * 0.25 * d_prop * d_prop;
  return std::sqrt(body.mass() * body.gravity() / (2.0 * rho * disk_area));
}

void FlowParams::validate() const {
  if (!(spreading_s > 0.0)) throw ConfigError("flow params: spreading_s must be positive");
  if (!(rho > 0.0)) throw ConfigError("flow params: rho must be positive");
  if (!(lambda > 0.0)) throw ConfigError("flow params: lambda must be positive");
  if (!(c_d >= 0.0)) throw ConfigError("flow params: c_d must be non-negative");
  if (!std::isfinite(u_h) || !std::isfinite(b_const) || !std::isfinite(d_prop) || !std::isfinite(z0)) {
    throw ConfigError("flow params: non-finite constant");
  }
}

FlowFrame flow_frame(const StateVec& x, const StateVec& x_top,
                     const std::optional<Eigen::Vector3d>& previous_e2) {
  FlowFrame f;
  const Eigen::Matrix3d r_top = rotation_from_quat_unchecked(quaternion(x_top) / quaternion(x_top).norm());
  f.e3 = -r_top.col(2);
  const Eigen::Vector3d dp = position(x) - position(x_top);
  const Eigen::Vector3d c = f.e3.cross(dp);
  const double n = c.norm();
  if (n >= kDegenerateTol) {
    f.e2 = c / n;
  } else {
    f.degenerate = true;
    Eigen::Vector3d cand = Eigen::Vector3d::Zero();
    if (previous_e2) {
      cand = *previous_e2 - previous_e2->dot(f.e3) * f.e3;
    }
    if (cand.norm() < 1e-6) {
      cand = Eigen::Vector3d::UnitX() - f.e3.x() * f.e3;
      if (cand.norm() < 1e-6) {
        cand = Eigen::Vector3d::UnitY() - f.e3.y() * f.e3;
      }
    }
    f.e2 = cand.normalized();
  }
  f.e1 = f.e2.cross(f.e3);
  f.r_fw.row(0) = f.e1.transpose();
  f.r_fw.row(1) = f.e2.transpose();
  f.r_fw.row(2) = f.e3.transpose();
  return f;
}

double axial_flow_velocity(double z, double r, double v_z_flow, const FlowParams& fp) {
  const double zt = z / fp.lambda - fp.z0;
  if (zt <= kWakeEps) {
    return -v_z_flow;
  }
  const double rt = r / fp.lambda;
  const double ratio = rt / (fp.spreading_s * zt);
  const double den = 1.0 + (std::numbers::sqrt2 - 1.0) * ratio * ratio;
  return fp.u_h * (fp.b_const * fp.d_prop / zt) / (den * den) - v_z_flow;
}

QuadratureGrid::QuadratureGrid(int resolution, double lambda) : resolution_(resolution), lambda_(lambda) {
  if (resolution < 2) throw ConfigError("quadrature grid: resolution must be at least 2");
  if (!(lambda > 0.0)) throw ConfigError("quadrature grid: lambda must be positive");
  const double radius = 0.5 * lambda;
  const double h = 2.0 * radius / (resolution - 1);
  for (int i = 0; i < resolution; ++i) {
    const double x = -radius + i * h;
    for (int j = 0; j < resolution; ++j) {
      const double y = -radius + j * h;
      const double w = cell_disk_area(x - 0.5 * h, x + 0.5 * h, y - 0.5 * h, y + 0.5 * h, radius);
      if (w > 0.0) {
        ox_.push_back(x);
        oy_.push_back(y);
        w_.push_back(w);
      }
    }
  }
  count_ = w_.size();
  while (w_.size() % 4 != 0) {
    ox_.push_back(0.0);
    oy_.push_back(0.0);
    w_.push_back(0.0);
  }
}

double QuadratureGrid::total_weight() const {
  double s = 0.0;
  for (double w : w_) s += w;
  return s;
}

WakeEvaluation evaluate_wake(const StateVec& x, const StateVec& x_top, const FlowParams& fp,
                             const QuadratureGrid& grid, bool partials,
                             const std::optional<Eigen::Vector3d>& previous_e2) {
  WakeEvaluation ev;
  ev.frame = flow_frame(x, x_top, previous_e2);
  ev.dp_flow = ev.frame.r_fw * (position(x) - position(x_top));
  ev.v_z_flow = ev.frame.e3.dot(velocity(x));
  ev.has_partials = partials;

  kernels::WakeParams kp;
  kp.xc = ev.dp_flow.x();
  kp.yc = ev.dp_flow.y();
  kp.s = ev.v_z_flow;
  const double zt = ev.dp_flow.z() / fp.lambda - fp.z0;
  if (zt > kWakeEps) {
    kp.amp = fp.u_h * fp.b_const * fp.d_prop / zt;
    const double sz = fp.spreading_s * zt * fp.lambda;
    kp.kappa = (std::numbers::sqrt2 - 1.0) / (sz * sz);
    kp.dz_factor = 1.0 / (fp.lambda * zt);
  }
  const kernels::WakeSamples samples{grid.ox(), grid.oy(), grid.weights()};
  const kernels::WakeMoments m = kernels::wake_moments(samples, kp, partials);

  const double c = 0.5 * fp.c_d * fp.rho;
  ev.wrench.force = Eigen::Vector3d(0.0, 0.0, c * m.s0);
  ev.wrench.torque = Eigen::Vector3d(c * m.sy, -c * m.sx, 0.0);
  if (partials) {
    ev.dforce = Eigen::Vector3d(2.0 * c * m.dx, 2.0 * c * m.dz, -2.0 * c * m.d0);
    ev.dtorque = Eigen::Vector3d(-2.0 * c * m.exx, -2.0 * c * m.exz, 2.0 * c * m.ex);
  }
  return ev;
}

Wrench disturbance_wrench(const StateVec& x, const StateVec& x_top, const FlowParams& fp,
                          const QuadratureGrid& grid) {
  return evaluate_wake(x, x_top, fp, grid, false).wrench;
}

WorldWrench to_world(const WakeEvaluation& wake, const StateVec& x) {
  const Eigen::Matrix3d r = rotation_from_quat_unchecked(quaternion(x));
  WorldWrench w;
  w.force_world = wake.frame.r_fw.transpose() * wake.wrench.force;
  w.torque_body = r.transpose() * (wake.frame.r_fw.transpose() * wake.wrench.torque);
  return w;
}

StateVec disturbance_derivative(const WakeEvaluation& wake, const StateVec& x,
                                const RigidBodyParams& body) {
  const WorldWrench w = to_world(wake, x);
  StateVec dx = StateVec::Zero();
  dx.segment<3>(idx::kVel) = w.force_world / body.mass();
  dx.segment<3>(idx::kRate) = body.inertia_inv() * w.torque_body;
  return dx;
}

StateVec disturbance_derivative(const StateVec& x, const StateVec& x_top, const FlowParams& fp,
                                const RigidBodyParams& body, const QuadratureGrid& grid) {
  return disturbance_derivative(evaluate_wake(x, x_top, fp, grid, false), x, body);
}

StateMat disturbance_jacobian(const WakeEvaluation& wake, const StateVec& x,
                              const RigidBodyParams& body) {
  if (!wake.has_partials) {
    throw InvalidInput("disturbance_jacobian: wake evaluated without partials");
  }
  const FlowFrame& f = wake.frame;
  const double rho = wake.dp_flow.x();
  const double torque_y = wake.wrench.torque.y();
  const Eigen::Vector4d q = quaternion(x);
  const Eigen::Matrix3d r = rotation_from_quat_unchecked(q);
  const Eigen::Matrix3d jinv_rt = body.inertia_inv() * r.transpose();

  StateMat jac = StateMat::Zero();
  // force_world = F_z(xc, z, s) e3 with d xc/dp = e1^T, dz/dp = e3^T, ds/dv = e3^T.
  jac.block<3, 3>(idx::kVel, idx::kPos) =
      f.e3 * (wake.dforce.x() * f.e1.transpose() + wake.dforce.y() * f.e3.transpose()) / body.mass();
  jac.block<3, 3>(idx::kVel, idx::kVel) = f.e3 * (wake.dforce.z() / body.mass()) * f.e3.transpose();

  // torque_world = T_y(xc, z, s) e2, and e2 turns about e3 as dp moves: de2/dp = -e1 e2^T / xc.
  const double ty_over_rho = std::abs(rho) > 1e-9 ? torque_y / rho : wake.dtorque.x();
  const Eigen::Matrix3d dtorque_dp =
      f.e2 * (wake.dtorque.x() * f.e1.transpose() + wake.dtorque.y() * f.e3.transpose()) -
      ty_over_rho * f.e1 * f.e2.transpose();
  const Eigen::Matrix3d dtorque_dv = f.e2 * wake.dtorque.z() * f.e3.transpose();
  const Eigen::Vector3d torque_world = f.r_fw.transpose() * wake.wrench.torque;

  jac.block<3, 3>(idx::kRate, idx::kPos) = jinv_rt * dtorque_dp;
  jac.block<3, 3>(idx::kRate, idx::kVel) = jinv_rt * dtorque_dv;
  jac.block<3, 4>(idx::kRate, idx::kQuat) =
      body.inertia_inv() * rotate_transpose_jacobian(q, torque_world);
  return jac;
}

}  // namespace dwknode
