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

#include "dwknode/quad_dynamics.hpp"
#include "dwknode/types.hpp"

#include <optional>
#include <vector>

namespace dwknode {

/// Axial wake model constants of the top vehicle.
struct FlowParams {
  double u_h = 4.52;          // characteristic induced velocity, m/s
  double b_const = 1.0;       // near-field decay constant
  double d_prop = 0.046;      // propeller diameter, m
  double z0 = 0.0;            // virtual origin offset (normalized)
  double spreading_s = 0.0697;
  double rho = 1.225;         // kg/m^3
  double c_d = 1.3;
  double lambda = 0.1;        // body length, m

  /// Hover induced velocity sqrt(m g / (2 rho A)) over four rotor disks of diameter d_prop.
  static double momentum_theory_u_h(const RigidBodyParams& body, double d_prop, double rho);

  /// Throws ConfigError when S, rho or lambda are non-positive or C_D is negative.
  void validate() const;
};

/// Orthonormal frame of the top vehicle's wake. R_fw maps world vectors into F.
struct FlowFrame {
  Eigen::Vector3d e1, e2, e3;
  Eigen::Matrix3d r_fw;
  bool degenerate = false;  // bottom vehicle on the wake axis; e2 came from the fallback
};

/// Frame with e3 = -(top body z axis), e2 = e3 x dp / |e3 x dp|, e1 = e2 x e3
/// where dp = p - p_top. When |e3 x dp| < 1e-9 the previous e2 (if given) is
/// reused, otherwise the world x axis projected onto the plane normal to e3.
FlowFrame flow_frame(const StateVec& x, const StateVec& x_top,
                     const std::optional<Eigen::Vector3d>& previous_e2 = std::nullopt);

/// Axial relative flow at vertical separation z and radial separation r (both in F, metres).
/// Points with z/lambda - z0 <= 1e-9 see no induced flow and return -v_z_flow.
double axial_flow_velocity(double z, double r, double v_z_flow, const FlowParams& fp);

/// Force and torque on the bottom vehicle, expressed in F.
struct Wrench {
  Eigen::Vector3d force = Eigen::Vector3d::Zero();
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();
};

/// Cartesian sample grid over the bottom vehicle's disk of diameter lambda.
/// Each node carries the area of its cell clipped to the disk.
class QuadratureGrid {
 public:
  /// `resolution` points per axis over the disk's bounding square (>= 2).
  QuadratureGrid(int resolution, double lambda);

  int resolution() const { return resolution_; }
  double lambda() const { return lambda_; }
  std::size_t size() const { return count_; }
  double total_weight() const;

  const std::vector<double>& ox() const { return ox_; }
  const std::vector<double>& oy() const { return oy_; }
  const std::vector<double>& weights() const { return w_; }

 private:
  int resolution_;
  double lambda_;
  std::size_t count_ = 0;
  // Padded to a multiple of 4 with zero weights.
  std::vector<double> ox_, oy_, w_;
};

/// Wrench together with the flow-frame geometry it was computed in and the
/// partial derivatives needed to linearize it.
struct WakeEvaluation {
  FlowFrame frame;
  Eigen::Vector3d dp_flow = Eigen::Vector3d::Zero();  // R_fw (p - p_top)
  double v_z_flow = 0.0;
  Wrench wrench;
  // d(force_z)/d(xc, z, s) and d(torque_y)/d(xc, z, s), flow-frame scalars.
  Eigen::Vector3d dforce = Eigen::Vector3d::Zero();
  Eigen::Vector3d dtorque = Eigen::Vector3d::Zero();
  bool has_partials = false;
};

WakeEvaluation evaluate_wake(const StateVec& x, const StateVec& x_top, const FlowParams& fp,
                             const QuadratureGrid& grid, bool partials,
                             const std::optional<Eigen::Vector3d>& previous_e2 = std::nullopt);

/// Integrated drag of the wake over the disk, in F.
Wrench disturbance_wrench(const StateVec& x, const StateVec& x_top, const FlowParams& fp,
                          const QuadratureGrid& grid);

/// 13-vector with the wake force in the velocity slots (world, divided by m) and
/// J^-1 R^T (world torque) in the rate slots; all other slots zero.
StateVec disturbance_derivative(const StateVec& x, const StateVec& x_top, const FlowParams& fp,
                                const RigidBodyParams& body, const QuadratureGrid& grid);

/// Same mapping applied to an existing evaluation.
StateVec disturbance_derivative(const WakeEvaluation& wake, const StateVec& x,
                                const RigidBodyParams& body);

/// d(disturbance_derivative)/dx; requires an evaluation made with partials.
StateMat disturbance_jacobian(const WakeEvaluation& wake, const StateVec& x,
                              const RigidBodyParams& body);

/// World-frame force (N) and body-frame torque (N m) of a wrench.
struct WorldWrench {
  Eigen::Vector3d force_world = Eigen::Vector3d::Zero();
  Eigen::Vector3d torque_body = Eigen::Vector3d::Zero();
};

WorldWrench to_world(const WakeEvaluation& wake, const StateVec& x);

}  // namespace dwknode
