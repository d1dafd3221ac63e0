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

#include "dwknode/config.hpp"

#include <string>
#include <vector>

namespace dwknode {

/// Outcome of one self-check: the measured quantity against its threshold.
struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

/// Analytic vs central-difference loss gradient on a short nominal-MPC flight
/// (cfg.train.grad_check_samples samples, cfg.train.grad_check_draws parameter draws).
CheckResult check_gradient(const ExperimentConfig& cfg);

/// Quadrature at the configured resolution n against a 4n reference, worst relative
/// wrench-norm error over stacked and offset geometries (threshold 1%).
CheckResult check_quadrature_accuracy(const ExperimentConfig& cfg);

/// Errors at n, 2n, 4n against a 32n reference must shrink at least by 2x and 4x.
CheckResult check_quadrature_refinement(const ExperimentConfig& cfg);

/// max |R_fw R_fw^T - I| and |det R_fw - 1| over random poses.
CheckResult check_frame_orthonormality(int poses = 10000, std::uint64_t seed = 1);

/// Features invariant and world force equivariant under yawing the whole scene (level vehicles).
CheckResult check_yaw_symmetry(const ExperimentConfig& cfg, int scenes = 200, std::uint64_t seed = 2);

/// Torque on a level vehicle directly beneath a level top vehicle.
CheckResult check_stacked_zero_torque(const ExperimentConfig& cfg);

/// Uncontrolled hover-thrust plant (no wake, yawing) over 10 s: position drift.
CheckResult check_hover_drift(const ExperimentConfig& cfg);

/// Worst |‖q‖ - 1| over the steps of a stacked closed-loop run.
CheckResult check_quaternion_norm(const ExperimentConfig& cfg);

/// Empirical RK4 order on x' = -x.
CheckResult check_rk4_order();

/// Closed loop without wake from an offset start: worst position error over the final second of 5 s.
CheckResult check_hover_regulation(const ExperimentConfig& cfg);

/// The full invariant suite in a fixed order.
std::vector<CheckResult> run_diagnostics(const ExperimentConfig& cfg);

/// "PASS name measured=... threshold=... detail" lines.
std::string format_check(const CheckResult& r);

}  // namespace dwknode
