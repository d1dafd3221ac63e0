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

#include <functional>

namespace dwknode {

using DerivativeFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Classical fourth-order Runge-Kutta step for an arbitrary-dimension state.
/// No renormalization; throws NumericError when a stage goes non-finite.
Eigen::VectorXd rk4_step_raw(const DerivativeFn& f, const Eigen::VectorXd& x, double dt);

/// RK4 step on a 13-state followed by quaternion renormalization.
StateVec rk4_step(const std::function<StateVec(const StateVec&)>& f, const StateVec& x, double dt);

struct Rk45Options {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double min_step = 1e-12;
  int max_steps = 100000;
};

struct Rk45Stats {
  int accepted = 0;
  int rejected = 0;
  int evaluations = 0;
};

/// Dormand-Prince 5(4) with adaptive substeps, advancing exactly `dt_report`.
/// Throws IntegrationFailure on step-size underflow or step budget exhaustion.
Eigen::VectorXd rk45_integrate_raw(const DerivativeFn& f, const Eigen::VectorXd& x, double dt_report,
                                   const Rk45Options& opts = {}, Rk45Stats* stats = nullptr);

/// rk45_integrate_raw on a 13-state, quaternion renormalized at report time.
StateVec rk45_integrate(const std::function<StateVec(const StateVec&)>& f, const StateVec& x,
                        double dt_report, const Rk45Options& opts = {}, Rk45Stats* stats = nullptr);

}  // namespace dwknode
