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

#include "dwknode/mpc.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace dwknode {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using InputMat4 = Eigen::Matrix<double, kInputDim, kInputDim>;
using GainMat = Eigen::Matrix<double, kInputDim, kStateDim>;

struct BoxQpResult {
  InputVec x;
  std::array<bool, kInputDim> free{};
};

// min 0.5 x'Hx + g'x  s.t. lo <= x <= hi for a 4x4 positive definite H. The minimizer is
// the minimizer of one face of the box, so enumerating the 3^4 faces is exact.
BoxQpResult solve_box_qp(const InputMat4& h, const InputVec& g, const InputVec& lo, const InputVec& hi) {
  BoxQpResult best;
  const InputVec unconstrained = -h.ldlt().solve(g);
  if ((unconstrained.array() >= lo.array()).all() && (unconstrained.array() <= hi.array()).all()) {
    best.x = unconstrained;
    best.free.fill(true);
    return best;
  }
  double best_val = kInf;
  for (int code = 0; code < 81; ++code) {
    // 0 = free, 1 = at lower, 2 = at upper
    std::array<int, kInputDim> state{};
    int c = code, nfree = 0;
    for (int j = 0; j < kInputDim; ++j) {
      state[j] = c % 3;
      c /= 3;
      if (state[j] == 0) ++nfree;
    }
    InputVec x = InputVec::Zero();
    bool feasible = true;
    for (int j = 0; j < kInputDim; ++j) {
      if (state[j] == 1) x[j] = lo[j];
      if (state[j] == 2) x[j] = hi[j];
      if (state[j] != 0 && !std::isfinite(x[j])) feasible = false;
    }
    if (!feasible) continue;
    if (nfree > 0) {
      Eigen::MatrixXd hff(nfree, nfree);
      Eigen::VectorXd rhs(nfree);
      std::array<int, kInputDim> fi{};
      int k = 0;
      for (int j = 0; j < kInputDim; ++j) {
        if (state[j] == 0) fi[k++] = j;
      }
      for (int a = 0; a < nfree; ++a) {
        rhs[a] = -g[fi[a]];
        for (int j = 0; j < kInputDim; ++j) {
          if (state[j] != 0) rhs[a] -= h(fi[a], j) * x[j];
        }
        for (int b = 0; b < nfree; ++b) hff(a, b) = h(fi[a], fi[b]);
      }
      const Eigen::VectorXd xf = hff.ldlt().solve(rhs);
      for (int a = 0; a < nfree; ++a) {
        const int j = fi[a];
        if (xf[a] < lo[j] - 1e-12 || xf[a] > hi[j] + 1e-12) feasible = false;
        x[j] = std::clamp(xf[a], lo[j], hi[j]);
      }
    }
    if (!feasible) continue;
    const double val = 0.5 * x.dot(h * x) + g.dot(x);
    if (val < best_val) {
      best_val = val;
      best.x = x;
      for (int j = 0; j < kInputDim; ++j) best.free[j] = state[j] == 0;
    }
  }
  if (!std::isfinite(best_val)) throw SolverError("box QP: no feasible face (bounds inconsistent)");
  return best;
}

// Reference quaternions flipped into the hemisphere of the initial attitude.
std::vector<StateVec> aligned_refs(const OcpParams& params) {
  std::vector<StateVec> refs = params.refs;
  const Eigen::Vector4d q0 = quaternion(params.x0);
  for (auto& r : refs) {
    if (quaternion(r).dot(q0) < 0.0) quaternion(r) = -quaternion(r);
  }
  return refs;
}

double box_penalty(const OcpConfig& cfg, const StateVec& x) {
  double p = 0.0;
  for (int j = 0; j < kStateDim; ++j) {
    const double hi = x[j] - cfg.x_upper[j], lo = cfg.x_lower[j] - x[j];
    if (hi > 0.0) p += hi * hi;
    if (lo > 0.0) p += lo * lo;
  }
  return cfg.state_bound_weight * p;
}

void box_penalty_derivs(const OcpConfig& cfg, const StateVec& x, StateVec& g, StateVec& hdiag) {
  for (int j = 0; j < kStateDim; ++j) {
    const double hi = x[j] - cfg.x_upper[j], lo = cfg.x_lower[j] - x[j];
    if (hi > 0.0) {
      g[j] += 2.0 * cfg.state_bound_weight * hi;
      hdiag[j] += 2.0 * cfg.state_bound_weight;
    } else if (lo > 0.0) {
      g[j] -= 2.0 * cfg.state_bound_weight * lo;
      hdiag[j] += 2.0 * cfg.state_bound_weight;
    }
  }
}

double cost_with_refs(const OcpConfig& cfg, const std::vector<StateVec>& refs, const std::vector<StateVec>& xs,
                      const std::vector<InputVec>& us, const InputVec& u_hover) {
  const int n = cfg.horizon;
  double j = 0.0;
  for (int i = 0; i < n; ++i) {
    const StateVec e = xs[i] - refs[i];
    const InputVec du = us[i] - u_hover;
    j += e.dot(cfg.q_diag.cwiseProduct(e)) + du.dot(cfg.r_diag.cwiseProduct(du));
    if (i > 0) j += box_penalty(cfg, xs[i]);
  }
  const StateVec e = xs[n] - refs[n];
  j += e.dot(cfg.p_diag.cwiseProduct(e)) + box_penalty(cfg, xs[n]);
  return j;
}

void check_params(const OcpConfig& cfg, const OcpParams& params) {
  const auto n = static_cast<std::size_t>(cfg.horizon);
  if (params.refs.size() != n + 1) throw InvalidInput("ocp params: need N+1 reference states");
  if (params.top_states.size() != n) throw InvalidInput("ocp params: need N top-vehicle states");
  if (!params.x0.allFinite()) throw InvalidInput("ocp params: non-finite initial state");
}

}  // namespace

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged: return "converged";
    case SolveStatus::kMaxIterations: return "max_iterations";
    case SolveStatus::kLineSearchFailed: return "line_search_failed";
  }
  return "unknown";
}

OcpConfig OcpConfig::defaults(const RigidBodyParams& body) {
  OcpConfig c;
  c.q_diag << 100, 100, 100, 10, 10, 10, 10, 10, 10, 10, 1, 1, 1;
  c.r_diag << 0.1, 0.5, 0.5, 0.5;
  c.p_diag = 5.0 * c.q_diag;
  c.x_lower.setConstant(-kInf);
  c.x_upper.setConstant(kInf);
  c.x_lower.segment<3>(idx::kVel).setConstant(-3.0);
  c.x_upper.segment<3>(idx::kVel).setConstant(3.0);
  c.x_lower.segment<3>(idx::kRate).setConstant(-10.0);
  c.x_upper.segment<3>(idx::kRate).setConstant(10.0);
  c.u_lower << 0.0, -0.01, -0.01, -0.01;
  c.u_upper << 2.0 * body.hover_thrust(), 0.01, 0.01, 0.01;
  return c;
}

void OcpConfig::validate(const RigidBodyParams& body) const {
  if (horizon < 1) throw ConfigError("ocp config: horizon must be at least 1");
  if (!(dt > 0.0)) throw ConfigError("ocp config: dt must be positive");
  if (!(q_diag.array() >= 0.0).all() || !(p_diag.array() >= 0.0).all()) {
    throw ConfigError("ocp config: state weights must be non-negative");
  }
  if (!(r_diag.array() > 0.0).all()) throw ConfigError("ocp config: input weights must be positive");
  if (!(x_lower.array() <= x_upper.array()).all() || !(u_lower.array() <= u_upper.array()).all()) {
    throw ConfigError("ocp config: lower bounds exceed upper bounds");
  }
  const InputVec uh = body.hover_input();
  if (!(uh.array() > u_lower.array()).all() || !(uh.array() < u_upper.array()).all()) {
    throw ConfigError("ocp config: hover input must lie strictly inside the input box");
  }
  if (max_sqp_iters < 1) throw ConfigError("ocp config: max_sqp_iters must be at least 1");
  if (!(kkt_tolerance > 0.0)) throw ConfigError("ocp config: kkt_tolerance must be positive");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw ConfigError("ocp config: backtrack must be in (0, 1)");
  if (!(state_bound_weight >= 0.0)) throw ConfigError("ocp config: state_bound_weight must be non-negative");
}

std::vector<StateVec> predict_top_states(const StateVec& x_top, int n, double dt) {
  if (n < 0) throw InvalidInput("predict_top_states: negative horizon");
  std::vector<StateVec> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.push_back(advance_top(x_top, static_cast<double>(i + 1) * dt));
  }
  return out;
}

double trajectory_cost(const OcpConfig& cfg, const OcpParams& params, const std::vector<StateVec>& states,
                       const std::vector<InputVec>& controls, const RigidBodyParams& body) {
  check_params(cfg, params);
  return cost_with_refs(cfg, aligned_refs(params), states, controls, body.hover_input());
}

OcpSolution solve_ocp(const OcpConfig& cfg, const OcpParams& params, const ModelVariant& variant,
                      const ModelContext& ctx, const std::optional<OcpSolution>& warm) {
  const auto start = std::chrono::steady_clock::now();
  check_params(cfg, params);
  variant.validate();
  const int n = cfg.horizon;
  const double dt = cfg.dt;
  const InputVec u_hover = ctx.body.hover_input();
  const std::vector<StateVec> refs = aligned_refs(params);

  std::vector<StateVec> xs;
  std::vector<InputVec> us;
  if (warm && warm->controls.size() == static_cast<std::size_t>(n) &&
      warm->states.size() == static_cast<std::size_t>(n + 1)) {
    xs = warm->states;
    us = warm->controls;
  } else {
    xs = refs;
    us.assign(static_cast<std::size_t>(n), u_hover);
  }
  xs[0] = params.x0;
  for (auto& u : us) u = u.cwiseMax(cfg.u_lower).cwiseMin(cfg.u_upper);

  const auto step = [&](int i, const StateVec& x, const InputVec& u) {
    return predict_one_step(variant, x, u, params.top_states[static_cast<std::size_t>(i)], dt, ctx);
  };

  std::vector<StateMat> a(static_cast<std::size_t>(n));
  std::vector<InputMat> b(static_cast<std::size_t>(n));
  std::vector<StateVec> gap(static_cast<std::size_t>(n));
  std::vector<GainMat> kfb(static_cast<std::size_t>(n));
  std::vector<InputVec> kff(static_cast<std::size_t>(n));
  std::vector<StateVec> gx(static_cast<std::size_t>(n + 1)), hx(static_cast<std::size_t>(n + 1));
  std::vector<InputVec> gu(static_cast<std::size_t>(n));
  std::vector<StateVec> dx(static_cast<std::size_t>(n + 1));
  std::vector<InputVec> du(static_cast<std::size_t>(n));
  std::vector<StateVec> trial_x(static_cast<std::size_t>(n + 1));
  std::vector<InputVec> trial_u(static_cast<std::size_t>(n));

  OcpSolution sol;
  sol.status = SolveStatus::kMaxIterations;
  double mu = 1.0;
  int iter = 0;
  for (; iter < cfg.max_sqp_iters; ++iter) {
    // Linearize the shooting constraints and the cost.
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const StepLinearization lin =
          linearize_step(variant, xs[k], us[k], params.top_states[k], dt, ctx);
      a[k] = lin.a;
      b[k] = lin.b;
      gap[k] = lin.next - xs[k + 1];
    }
    for (int i = 0; i <= n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const StateVec& w = i < n ? cfg.q_diag : cfg.p_diag;
      gx[k] = 2.0 * w.cwiseProduct(xs[k] - refs[k]);
      hx[k] = 2.0 * w;
      if (i > 0) box_penalty_derivs(cfg, xs[k], gx[k], hx[k]);
      if (i < n) gu[k] = 2.0 * cfg.r_diag.cwiseProduct(us[k] - u_hover);
    }

    // Riccati sweep with exact input-box QPs per stage.
    StateMat vxx = hx[static_cast<std::size_t>(n)].asDiagonal();
    StateVec vx = gx[static_cast<std::size_t>(n)];
    for (int i = n - 1; i >= 0; --i) {
      const auto k = static_cast<std::size_t>(i);
      const StateVec vc = vx + vxx * gap[k];
      const StateMat va = vxx * a[k];
      const StateVec qx = gx[k] + a[k].transpose() * vc;
      const InputVec qu = gu[k] + b[k].transpose() * vc;
      StateMat qxx = a[k].transpose() * va;
      qxx.diagonal() += hx[k];
      InputMat4 quu = b[k].transpose() * vxx * b[k];
      quu.diagonal() += 2.0 * cfg.r_diag;
      quu = 0.5 * (quu + quu.transpose()).eval();
      const GainMat qux = b[k].transpose() * va;

      const BoxQpResult qp = solve_box_qp(quu, qu, cfg.u_lower - us[k], cfg.u_upper - us[k]);
      kff[k] = qp.x;
      kfb[k].setZero();
      int nfree = 0;
      std::array<int, kInputDim> fi{};
      for (int j = 0; j < kInputDim; ++j) {
        if (qp.free[static_cast<std::size_t>(j)]) fi[static_cast<std::size_t>(nfree++)] = j;
      }
      if (nfree > 0) {
        Eigen::MatrixXd hff(nfree, nfree), rhs(nfree, kStateDim);
        for (int r = 0; r < nfree; ++r) {
          rhs.row(r) = -qux.row(fi[static_cast<std::size_t>(r)]);
          for (int c = 0; c < nfree; ++c) hff(r, c) = quu(fi[static_cast<std::size_t>(r)], fi[static_cast<std::size_t>(c)]);
        }
        const Eigen::MatrixXd kf = hff.ldlt().solve(rhs);
        for (int r = 0; r < nfree; ++r) kfb[k].row(fi[static_cast<std::size_t>(r)]) = kf.row(r);
      }
      const GainMat& kk = kfb[k];
      vxx = qxx + kk.transpose() * quu * kk + kk.transpose() * qux + qux.transpose() * kk;
      vxx = 0.5 * (vxx + vxx.transpose()).eval();
      vx = qx + kk.transpose() * (quu * kff[k]) + kk.transpose() * qu + qux.transpose() * kff[k];
    }

    // Linear forward pass through the clipped policy.
    dx[0].setZero();
    double max_gap = 0.0, max_step = 0.0, gap_l1 = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const InputVec unew = (us[k] + kff[k] + kfb[k] * dx[k]).cwiseMax(cfg.u_lower).cwiseMin(cfg.u_upper);
      du[k] = unew - us[k];
      dx[k + 1] = a[k] * dx[k] + b[k] * du[k] + gap[k];
      max_gap = std::max(max_gap, gap[k].cwiseAbs().maxCoeff());
      max_step = std::max(max_step, du[k].cwiseAbs().maxCoeff());
      gap_l1 += gap[k].lpNorm<1>();
    }
    sol.kkt_residual = std::max(max_gap, max_step);
    if (!std::isfinite(sol.kkt_residual)) throw SolverError(fmt::format("ocp: non-finite step at iteration {}", iter));
    if (sol.kkt_residual < cfg.kkt_tolerance) {
      sol.status = SolveStatus::kConverged;
      break;
    }

    // Armijo backtracking on cost + mu * sum |gap|_1.
    double lin_cost = 0.0, quad = 0.0;
    for (int i = 0; i <= n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (i > 0) {
        lin_cost += gx[k].dot(dx[k]);
        quad += dx[k].dot(hx[k].cwiseProduct(dx[k]));
      }
      if (i < n) {
        lin_cost += gu[k].dot(du[k]);
        quad += du[k].dot(2.0 * cfg.r_diag.cwiseProduct(du[k]));
      }
    }
    if (gap_l1 > 0.0) mu = std::max(mu, (lin_cost + 0.5 * quad) / (0.5 * gap_l1) + 1e-6);
    const double dir = lin_cost - mu * gap_l1;
    const double merit0 = cost_with_refs(cfg, refs, xs, us, u_hover) + mu * gap_l1;

    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls <= cfg.max_backtracks; ++ls, alpha *= cfg.backtrack) {
      trial_x[0] = xs[0];
      double trial_gap = 0.0;
      for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        trial_u[k] = us[k] + alpha * du[k];
        trial_x[k + 1] = xs[k + 1] + alpha * dx[k + 1];
      }
      for (auto& x : trial_x) {
        const double qn = quaternion(x).norm();
        if (qn > 0.0) quaternion(x) /= qn;
      }
      for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        trial_gap += (step(i, trial_x[k], trial_u[k]) - trial_x[k + 1]).lpNorm<1>();
      }
      const double merit = cost_with_refs(cfg, refs, trial_x, trial_u, u_hover) + mu * trial_gap;
      // Near convergence the predicted decrease drops below the rounding level of the
      // merit itself; allow that much slack so the last Newton steps are not rejected.
      const double slack = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(merit0));
      if (std::isfinite(merit) && merit <= merit0 + cfg.armijo_c1 * alpha * std::min(dir, 0.0) + slack) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      sol.status = SolveStatus::kLineSearchFailed;
      break;
    }
    xs = trial_x;
    us = trial_u;
  }
  sol.iterations = iter;

  // Close the gaps: states are the model rollout of the returned controls.
  sol.controls = us;
  sol.states.resize(static_cast<std::size_t>(n + 1));
  sol.states[0] = params.x0;
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    sol.states[k + 1] = step(i, sol.states[k], us[k]);
  }
  sol.cost = cost_with_refs(cfg, refs, sol.states, sol.controls, u_hover);
  sol.solve_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return sol;
}

MpcController::MpcController(OcpConfig cfg, ModelVariant variant, ModelContext ctx)
    : cfg_(std::move(cfg)), variant_(std::move(variant)), ctx_(std::move(ctx)) {
  cfg_.validate(ctx_.body);
  variant_.validate();
  if (variant_.uses_flow() && !ctx_.grid) throw ConfigError("mpc: variant requires a quadrature grid");
}

InputVec MpcController::step(const StateVec& x_measured, const StateVec& x_top_measured,
                             const ReferenceFn& reference, double t) {
  const int n = cfg_.horizon;
  OcpParams params;
  params.x0 = x_measured;
  params.refs.reserve(static_cast<std::size_t>(n + 1));
  for (int i = 0; i <= n; ++i) params.refs.push_back(reference(t + i * cfg_.dt));
  // Shooting interval i starts from the top vehicle's state at t + i dt.
  const std::vector<StateVec> ahead = predict_top_states(x_top_measured, n, cfg_.dt);
  params.top_states.reserve(static_cast<std::size_t>(n));
  params.top_states.push_back(x_top_measured);
  for (int i = 0; i + 1 < n; ++i) params.top_states.push_back(ahead[static_cast<std::size_t>(i)]);

  std::optional<OcpSolution> warm;
  if (last_) {
    OcpSolution shifted = *last_;
    std::rotate(shifted.controls.begin(), shifted.controls.begin() + 1, shifted.controls.end());
    shifted.controls.back() = last_->controls.back();
    std::rotate(shifted.states.begin(), shifted.states.begin() + 1, shifted.states.end());
    shifted.states.back() = predict_one_step(variant_, last_->states.back(), last_->controls.back(),
                                             params.top_states.back(), cfg_.dt, ctx_);
    warm = std::move(shifted);
  }
  last_ = solve_ocp(cfg_, params, variant_, ctx_, warm);
  if (last_->status != SolveStatus::kConverged) ++unconverged_;
  return last_->controls.front();
}

}  // namespace dwknode
