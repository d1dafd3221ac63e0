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

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace dwknode {

// State layout: [p(3) v(3) q(4, scalar-first) omega(3)].
inline constexpr int kStateDim = 13;
inline constexpr int kInputDim = 4;

using StateVec = Eigen::Matrix<double, kStateDim, 1>;
using InputVec = Eigen::Matrix<double, kInputDim, 1>;
using StateMat = Eigen::Matrix<double, kStateDim, kStateDim>;
using InputMat = Eigen::Matrix<double, kStateDim, kInputDim>;

namespace idx {
inline constexpr int kPos = 0;
inline constexpr int kVel = 3;
inline constexpr int kQuat = 6;
inline constexpr int kRate = 10;
}  // namespace idx

inline auto position(const StateVec& x) { return x.segment<3>(idx::kPos); }
inline auto velocity(const StateVec& x) { return x.segment<3>(idx::kVel); }
inline auto quaternion(const StateVec& x) { return x.segment<4>(idx::kQuat); }
inline auto body_rate(const StateVec& x) { return x.segment<3>(idx::kRate); }
inline auto position(StateVec& x) { return x.segment<3>(idx::kPos); }
inline auto velocity(StateVec& x) { return x.segment<3>(idx::kVel); }
inline auto quaternion(StateVec& x) { return x.segment<4>(idx::kQuat); }
inline auto body_rate(StateVec& x) { return x.segment<3>(idx::kRate); }

/// Builds a state from its parts. The quaternion is taken as given.
StateVec make_state(const Eigen::Vector3d& p, const Eigen::Vector3d& v,
                    const Eigen::Vector4d& q, const Eigen::Vector3d& omega);

/// Level, motionless state at `p` with identity attitude.
StateVec hover_state(const Eigen::Vector3d& p);

/// Thrust and body torque.
struct ControlInput {
  double eta = 0.0;
  Eigen::Vector3d alpha = Eigen::Vector3d::Zero();

  InputVec to_vector() const;
  static ControlInput from_vector(const InputVec& u);
};

struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IntegrationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dwknode
