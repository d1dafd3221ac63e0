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

#include "dwknode/model.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dwknode {

struct OcpConfig {
  int horizon = 20;
  double dt = 0.02;
  StateVec q_diag;
  InputVec r_diag;
  StateVec p_diag;
  StateVec x_lower, x_upper;
  InputVec u_lower, u_upper;
  int max_sqp_iters = 30;
  double kkt_tolerance = 1e-6;
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 20;
  /// Weight of the quadratic penalty on state-box violations.
  double state_bound_weight = 1e4;

  /// Position 100, velocity 10, quaternion 10, rates 1; inputs (0.1, 0.5, 0.5, 0.5); P = 5 Q;
  /// |v| <= 3, |omega| <= 10, eta in [0, 2mg], |alpha| <= 0.01.
  static OcpConfig defaults(const RigidBodyParams& body);
  /// Throws ConfigError when the invariants fail (including hover strictly inside U).
  void validate(const RigidBodyParams& body) const;
};

struct OcpParams {
  StateVec x0;
  std::vector<StateVec> refs;        // N + 1
  std::vector<StateVec> top_states;  // N, the top vehicle at the start of each shooting interval
};

enum class SolveStatus { kConverged, kMaxIterations, kLineSearchFailed };
std::string to_string(SolveStatus s);

struct OcpSolution {
  std::vector<InputVec> controls;  // N
  std::vector<StateVec> states;    // N + 1
  double cost = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  double solve_time_ms = 0.0;
  SolveStatus status = SolveStatus::kConverged;
};

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Constant-velocity prediction: element i sits (i + 1) dt ahead of x_top.
std::vector<StateVec> predict_top_states(const StateVec& x_top, int n, double dt);

/// Cost of a trajectory under cfg (input penalty on u - u_hover, sign-aligned quaternion error,
/// soft state-box penalty).
double trajectory_cost(const OcpConfig& cfg, const OcpParams& params, const std::vector<StateVec>& states,
                       const std::vector<InputVec>& controls, const RigidBodyParams& body);

/// Gauss-Newton multiple-shooting SQP with a Riccati QP solve and exact box handling on inputs.
/// `warm` (already time-shifted) seeds the iterate; otherwise references with hover inputs.
OcpSolution solve_ocp(const OcpConfig& cfg, const OcpParams& params, const ModelVariant& variant,
                      const ModelContext& ctx, const std::optional<OcpSolution>& warm = std::nullopt);

/// Reference source: bottom-vehicle reference state at time t.
using ReferenceFn = std::function<StateVec(double)>;

/// Receding-horizon controller with warm-start memory. Not safe for concurrent calls.
class MpcController {
 public:
  MpcController(OcpConfig cfg, ModelVariant variant, ModelContext ctx);

  /// Solves at time t and returns u0*. The horizon references are sampled at t + i dt.
  InputVec step(const StateVec& x_measured, const StateVec& x_top_measured, const ReferenceFn& reference, double t);

  const OcpSolution& last_solution() const { return *last_; }
  bool has_solution() const { return last_.has_value(); }
  void reset() { last_.reset(); }
  const OcpConfig& config() const { return cfg_; }
  const ModelVariant& variant() const { return variant_; }
  const ModelContext& context() const { return ctx_; }
  /// Number of solves that hit the iteration cap or a failed line search.
  int unconverged_solves() const { return unconverged_; }

 private:
  OcpConfig cfg_;
  ModelVariant variant_;
  ModelContext ctx_;
  std::optional<OcpSolution> last_;
  int unconverged_ = 0;
};

}  // namespace dwknode
