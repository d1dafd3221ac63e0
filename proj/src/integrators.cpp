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

#include "dwknode/integrators.hpp"

#include "dwknode/quad_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dwknode {

namespace {

void require_finite(const Eigen::VectorXd& v, const char* where, int stage) {
  if (!v.allFinite()) {
    std::ostringstream msg;
    msg << where << ": non-finite value at stage " << stage;
    throw NumericError(msg.str());
  }
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                 b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

}  // namespace

Eigen::VectorXd rk4_step_raw(const DerivativeFn& f, const Eigen::VectorXd& x, double dt) {
  if (!(dt > 0.0)) {
    throw InvalidInput("rk4_step: dt must be positive");
  }
  const Eigen::VectorXd k1 = f(x);
  require_finite(k1, "rk4_step", 1);
  const Eigen::VectorXd k2 = f(x + 0.5 * dt * k1);
  require_finite(k2, "rk4_step", 2);
  const Eigen::VectorXd k3 = f(x + 0.5 * dt * k2);
  require_finite(k3, "rk4_step", 3);
  const Eigen::VectorXd k4 = f(x + dt * k3);
  require_finite(k4, "rk4_step", 4);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

StateVec rk4_step(const std::function<StateVec(const StateVec&)>& f, const StateVec& x, double dt) {
  const DerivativeFn g = [&f](const Eigen::VectorXd& y) -> Eigen::VectorXd {
    return f(StateVec(y));
  };
  StateVec out = rk4_step_raw(g, x, dt);
  normalize_quaternion(out);
  return out;
}

Eigen::VectorXd rk45_integrate_raw(const DerivativeFn& f, const Eigen::VectorXd& x0, double dt_report,
                                   const Rk45Options& opts, Rk45Stats* stats) {
  if (!(dt_report > 0.0)) {
    throw InvalidInput("rk45_integrate: dt_report must be positive");
  }
  if (!(opts.rel_tol > 0.0) || !(opts.abs_tol >= 0.0)) {
    throw InvalidInput("rk45_integrate: tolerances must be positive");
  }
  Rk45Stats local;
  Rk45Stats& st = stats ? *stats : local;

  Eigen::VectorXd x = x0;
  double t = 0.0;
  double h = dt_report;
  Eigen::VectorXd k1 = f(x);
  ++st.evaluations;
  require_finite(k1, "rk45_integrate", 1);

  int steps = 0;
  while (t < dt_report) {
    if (++steps > opts.max_steps) {
      throw IntegrationFailure("rk45_integrate: step budget exhausted");
    }
    const double remaining = dt_report - t;
    bool last = false;
    if (h >= remaining) {
      h = remaining;
      last = true;
    }
    const Eigen::VectorXd k2 = f(x + h * (a21 * k1));
    const Eigen::VectorXd k3 = f(x + h * (a31 * k1 + a32 * k2));
    const Eigen::VectorXd k4 = f(x + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Eigen::VectorXd k5 = f(x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Eigen::VectorXd k6 = f(x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Eigen::VectorXd xn = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Eigen::VectorXd k7 = f(xn);
    st.evaluations += 6;
    require_finite(xn, "rk45_integrate", 6);
    require_finite(k7, "rk45_integrate", 7);

    const Eigen::VectorXd err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const Eigen::VectorXd scale =
        (opts.abs_tol + opts.rel_tol * x.cwiseAbs().cwiseMax(xn.cwiseAbs()).array()).matrix();
    const double err_norm =
        std::sqrt((err.array() / scale.array()).square().mean());

    if (err_norm <= 1.0) {
      x = xn;
      k1 = k7;  // FSAL
      t = last ? dt_report : t + h;
      ++st.accepted;
      const double grow = err_norm == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(err_norm, -0.2));
      h *= std::max(1.0, grow);
    } else {
      ++st.rejected;
      h *= std::max(0.2, 0.9 * std::pow(err_norm, -0.2));
      if (h < opts.min_step) {
        std::ostringstream msg;
        msg << "rk45_integrate: step size underflow at t=" << t;
        throw IntegrationFailure(msg.str());
      }
    }
  }
  return x;
}

StateVec rk45_integrate(const std::function<StateVec(const StateVec&)>& f, const StateVec& x,
                        double dt_report, const Rk45Options& opts, Rk45Stats* stats) {
  const DerivativeFn g = [&f](const Eigen::VectorXd& y) -> Eigen::VectorXd {
    return f(StateVec(y));
  };
  StateVec out = rk45_integrate_raw(g, x, dt_report, opts, stats);
  normalize_quaternion(out);
  return out;
}

}  // namespace dwknode
