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

#include <cmath>
#include <random>

namespace dwknode::testing {

inline Eigen::Vector4d random_unit_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector4d q(n(rng), n(rng), n(rng), n(rng));
  return q / q.norm();
}

inline Eigen::Vector3d random_vec(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

inline StateVec random_state(std::mt19937_64& rng) {
  return make_state(random_vec(rng, 1.0), random_vec(rng, 0.5), random_unit_quat(rng),
                    random_vec(rng, 1.0));
}

inline Eigen::Vector4d yaw_quat(double psi) {
  return {std::cos(0.5 * psi), 0.0, 0.0, std::sin(0.5 * psi)};
}

// Central differences of a vector function of a 13-state.
template <class F>
Eigen::MatrixXd numeric_jacobian(F&& f, const StateVec& x, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), kStateDim);
  for (int j = 0; j < kStateDim; ++j) {
    StateVec xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    jac.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

}  // namespace dwknode::testing
