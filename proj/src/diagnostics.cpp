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

#include "dwknode/diagnostics.hpp"

#include "dwknode/integrators.hpp"
#include "dwknode/knode.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace dwknode {

namespace {

constexpr double kPi = std::numbers::pi;

struct Geometry {
  double separation;
  double offset;
};

// Stacked (offset 0) and partially overlapping placements across the evaluated separations.
// The offsets stay inside the jet; past the disk rim the wrench is orders of magnitude
// smaller and its relative error is no longer a meaningful accuracy measure.
std::vector<Geometry> quadrature_geometries() {
  std::vector<Geometry> g;
  for (double sep : {0.2, 0.3, 0.35, 0.4}) {
    for (double off : {0.0, 0.01, 0.03}) g.push_back({sep, off});
  }
  return g;
}

// [F; T / lambda]: torque scaled by the body length so both parts carry newtons.
Eigen::Matrix<double, 6, 1> wrench_vector(const Geometry& geo, const FlowParams& fp, const QuadratureGrid& grid) {
  const StateVec top = hover_state(Eigen::Vector3d(0, 0, 1.0 + geo.separation));
  const StateVec x = hover_state(Eigen::Vector3d(geo.offset, 0, 1.0));
  const Wrench w = disturbance_wrench(x, top, fp, grid);
  Eigen::Matrix<double, 6, 1> v;
  v << w.force, w.torque / grid.lambda();
  return v;
}

CheckResult make(std::string name, double measured, double threshold, std::string detail = {}) {
  CheckResult r;
  r.name = std::move(name);
  r.measured = measured;
  r.threshold = threshold;
  r.passed = std::isfinite(measured) && measured < threshold;
  r.detail = std::move(detail);
  return r;
}

}  // namespace

CheckResult check_gradient(const ExperimentConfig& cfg) {
  ExperimentConfig small = cfg;
  small.data.kinds = {ScenarioKind::kStacked};
  small.data.separations = {small.data.separations.front()};
  // A short pass straddling the top vehicle so the network sees a varying wake.
  small.data.duration = 0.005 * static_cast<double>(cfg.train.grad_check_samples + 2);
  Dataset data = collect_training_data(small.training_scenarios(), small.sim);
  data = data.head(std::min(data.size(), cfg.train.grad_check_samples));
  TrainConfig tc = cfg.train;
  const TrainingModel model = cfg.training_model();
  KnodeParams theta = KnodeParams::initialize(cfg.arch, tc.seed, tc.init_range);
  fit_normalization(theta, data, tc.variant, model);
  const GradientCheck gc = gradient_check(theta, data, tc, model);
  CheckResult r = make("gradient", gc.max_relative_error, gc.tolerance,
                       fmt::format("{} draws, {} samples, {:.3f} s", gc.draws, data.size(), gc.seconds));
  r.passed = gc.passed;
  return r;
}

CheckResult check_quadrature_accuracy(const ExperimentConfig& cfg) {
  const int n = cfg.sim.grid_resolution;
  const QuadratureGrid coarse(n, cfg.sim.lambda), fine(4 * n, cfg.sim.lambda);
  double worst = 0.0;
  Geometry worst_geo{0, 0};
  for (const Geometry& g : quadrature_geometries()) {
    const auto ref = wrench_vector(g, cfg.plant_flow, fine);
    const double err = (wrench_vector(g, cfg.plant_flow, coarse) - ref).norm() / ref.norm();
    if (err > worst) {
      worst = err;
      worst_geo = g;
    }
  }
  return make("quadrature_accuracy", worst, 0.01,
              fmt::format("{}x{} vs {}x{}, worst at separation {} m offset {} m", n, n, 4 * n, 4 * n,
                          worst_geo.separation, worst_geo.offset));
}

CheckResult check_quadrature_refinement(const ExperimentConfig& cfg) {
  const int n = cfg.sim.grid_resolution;
  const double lambda = cfg.sim.lambda;
  const QuadratureGrid g1(n, lambda), g2(2 * n, lambda), g4(4 * n, lambda), ref(32 * n, lambda);
  // Worst ratio over geometries; each must satisfy e(2n) <= e(n)/2 and e(4n) <= e(n)/4.
  double worst = 0.0;
  double e1_max = 0.0;
  std::string detail;
  for (const Geometry& g : quadrature_geometries()) {
    const auto w_ref = wrench_vector(g, cfg.plant_flow, ref);
    const double scale = w_ref.norm();
    const double e1 = (wrench_vector(g, cfg.plant_flow, g1) - w_ref).norm() / scale;
    const double e2 = (wrench_vector(g, cfg.plant_flow, g2) - w_ref).norm() / scale;
    const double e4 = (wrench_vector(g, cfg.plant_flow, g4) - w_ref).norm() / scale;
    e1_max = std::max(e1_max, e1);
    // Below round-off there is nothing left to refine.
    if (e1 < 1e-12) continue;
    const double ratio = std::max(2.0 * e2 / e1, 4.0 * e4 / e1);
    if (ratio > worst) {
      worst = ratio;
      detail = fmt::format("separation {} m offset {} m: e({})={:.3g} e({})={:.3g} e({})={:.3g}", g.separation,
                           g.offset, n, e1, 2 * n, e2, 4 * n, e4);
    }
  }
  // The ratio is 1 at exactly first order and about 1/2 at second order.
  CheckResult r = make("quadrature_refinement", worst, 1.0, detail);
  r.passed = r.passed || e1_max < 1e-12;
  // A grid too coarse to resolve the jet fails through the accuracy requirement as well.
  if (e1_max >= 0.01) {
    r.passed = false;
    r.detail += fmt::format("; coarse-grid error {:.3g} exceeds 1%", e1_max);
  }
  return r;
}

CheckResult check_frame_orthonormality(int poses, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < poses; ++i) {
    Eigen::Vector4d q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    const StateVec top = make_state(Eigen::Vector3d(u(rng), u(rng), 1.0 + u(rng)), Eigen::Vector3d::Zero(), q,
                                    Eigen::Vector3d::Zero());
    const StateVec x = hover_state(Eigen::Vector3d(u(rng), u(rng), u(rng)));
    const FlowFrame f = flow_frame(x, top);
    const double orth = (f.r_fw * f.r_fw.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    worst = std::max({worst, orth, std::abs(f.r_fw.determinant() - 1.0)});
  }
  return make("frame_orthonormality", worst, 1e-12, fmt::format("{} random poses", poses));
}

CheckResult check_yaw_symmetry(const ExperimentConfig& cfg, int scenes, std::uint64_t seed) {
  const QuadratureGrid grid(cfg.sim.grid_resolution, cfg.sim.lambda);
  const RigidBodyParams& body = cfg.sim.body;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto yaw = [](double psi) { return Eigen::Vector4d(std::cos(0.5 * psi), 0, 0, std::sin(0.5 * psi)); };
  double worst_feature = 0.0, worst_force = 0.0;
  for (int i = 0; i < scenes; ++i) {
    const double psi_top = kPi * u(rng), psi_bottom = kPi * u(rng), turn = kPi * u(rng);
    const Eigen::Vector3d p_top(0.05 * u(rng), 0.05 * u(rng), 1.3 + 0.1 * u(rng));
    const Eigen::Vector3d p(0.05 * u(rng), 0.05 * u(rng), 1.0);
    const Eigen::Vector3d v(0.4 * u(rng), 0.4 * u(rng), 0.2 * u(rng));
    const Eigen::Vector3d v_top(0.4 * u(rng), 0.4 * u(rng), 0.0);
    const StateVec top = make_state(p_top, v_top, yaw(psi_top), Eigen::Vector3d::Zero());
    const StateVec x = make_state(p, v, yaw(psi_bottom), Eigen::Vector3d::Zero());
    const Eigen::Matrix3d rz = Eigen::AngleAxisd(turn, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const StateVec top_r = make_state(rz * p_top, rz * v_top, yaw(psi_top + turn), Eigen::Vector3d::Zero());
    const StateVec x_r = make_state(rz * p, rz * v, yaw(psi_bottom + turn), Eigen::Vector3d::Zero());

    worst_feature = std::max(worst_feature, (feature_vector(x_r, top_r) - feature_vector(x, top)).cwiseAbs().maxCoeff());
    const Eigen::Vector3d f = body.mass() * disturbance_derivative(x, top, cfg.plant_flow, body, grid).segment<3>(idx::kVel);
    const Eigen::Vector3d f_r =
        body.mass() * disturbance_derivative(x_r, top_r, cfg.plant_flow, body, grid).segment<3>(idx::kVel);
    const double scale = std::max(f.norm(), 1e-12);
    worst_force = std::max(worst_force, (f_r - rz * f).norm() / scale);
  }
  // Features are pure geometry; the force goes through the same quadrature in a rotated frame.
  const double measured = std::max(worst_feature / 1e-12, worst_force / 1e-9);
  CheckResult r = make("yaw_symmetry", measured, 1.0,
                       fmt::format("{} scenes: feature drift {:.2e} (tol 1e-12), relative force drift {:.2e} (tol 1e-9)",
                                   scenes, worst_feature, worst_force));
  return r;
}

CheckResult check_stacked_zero_torque(const ExperimentConfig& cfg) {
  const QuadratureGrid grid(cfg.sim.grid_resolution, cfg.sim.lambda);
  double worst = 0.0;
  for (double sep : {0.08, 0.2, 0.3, 0.4}) {
    const StateVec top = hover_state(Eigen::Vector3d(0.2, -0.1, 1.0 + sep));
    const StateVec x = hover_state(Eigen::Vector3d(0.2, -0.1, 1.0));
    const StateVec d = disturbance_derivative(x, top, cfg.plant_flow, cfg.sim.body, grid);
    worst = std::max(worst, (cfg.sim.body.inertia() * d.segment<3>(idx::kRate)).norm());
  }
  return make("stacked_zero_torque", worst, 1e-12, "N m, level and directly beneath");
}

CheckResult check_hover_drift(const ExperimentConfig& cfg) {
  const RigidBodyParams& body = cfg.sim.body;
  const InputVec u = body.hover_input();
  // Spinning about the yaw axis keeps the thrust vertical, so any drift is integration error.
  StateVec x = hover_state(Eigen::Vector3d(0, 0, 1));
  body_rate(x) = Eigen::Vector3d(0, 0, 1.0);
  const StateVec x0 = x;
  const auto f = [&](const StateVec& s) { return nominal_derivative(s, u, body); };
  const int steps = static_cast<int>(std::llround(10.0 / cfg.sim.plant_dt));
  double worst = 0.0;
  for (int k = 0; k < steps; ++k) {
    x = rk45_integrate(f, x, cfg.sim.plant_dt, cfg.sim.rk45);
    worst = std::max(worst, (position(x) - position(x0)).norm());
  }
  return make("hover_drift", worst, 1e-6, "m over 10 s at hover thrust, yawing at 1 rad/s");
}

CheckResult check_quaternion_norm(const ExperimentConfig& cfg) {
  Scenario s;
  s.kind = ScenarioKind::kStacked;
  s.speed = 0.4;
  s.separation = 0.3;
  s.duration = 2.0;
  s.plant_flow = cfg.plant_flow;
  s.controller_flow = cfg.controller_flow;
  s.controller_variant = ModelTag::kDw;
  const RunLog log = simulate_closed_loop(s, cfg.sim);
  double worst = 0.0;
  for (const StateVec& x : log.bottom) worst = std::max(worst, std::abs(quaternion(x).norm() - 1.0));
  CheckResult r = make("quaternion_norm", worst, 1e-9, fmt::format("{} logged steps", log.size()));
  if (!log.completed) {
    r.passed = false;
    r.detail += "; run failed: " + log.error;
  }
  return r;
}

CheckResult check_rk4_order() {
  const DerivativeFn f = [](const Eigen::VectorXd& y) -> Eigen::VectorXd { return -y; };
  auto error = [&](int steps) {
    Eigen::VectorXd y = Eigen::VectorXd::Ones(1);
    const double h = 1.0 / steps;
    for (int k = 0; k < steps; ++k) y = rk4_step_raw(f, y, h);
    return std::abs(y[0] - std::exp(-1.0));
  };
  const double order = std::log2(error(10) / error(20));
  // Reported as a shortfall so that "measured < threshold" reads as a pass.
  CheckResult r = make("rk4_order", 3.9 - order, 0.0, fmt::format("order {:.4f} (need >= 3.9)", order));
  r.passed = order >= 3.9;
  return r;
}

CheckResult check_hover_regulation(const ExperimentConfig& cfg) {
  Scenario s;
  s.kind = ScenarioKind::kStacked;
  s.speed = 0.0;
  s.separation = 0.3;
  s.duration = 5.0;
  s.plant_flow = cfg.plant_flow;
  s.plant_flow.c_d = 0.0;
  s.controller_flow = cfg.controller_flow;
  s.controller_variant = ModelTag::kNominal;
  s.start_offset = Eigen::Vector3d(0.05, -0.03, 0.04);
  const RunLog log = simulate_closed_loop(s, cfg.sim);
  double worst = 0.0;
  for (std::size_t k = 0; k < log.size(); ++k) {
    if (log.t[k] < 4.0) continue;
    worst = std::max(worst, (position(log.bottom[k]) - position(log.reference[k])).norm());
  }
  CheckResult r = make("hover_regulation", worst, 1e-3, "m, final second of a 5 s hover from a 7 cm offset, no wake");
  if (!log.completed) {
    r.passed = false;
    r.detail += "; run failed: " + log.error;
  }
  return r;
}

std::vector<CheckResult> run_diagnostics(const ExperimentConfig& cfg) {
  return {check_gradient(cfg),
          check_quadrature_accuracy(cfg),
          check_quadrature_refinement(cfg),
          check_frame_orthonormality(),
          check_yaw_symmetry(cfg),
          check_stacked_zero_torque(cfg),
          check_hover_drift(cfg),
          check_quaternion_norm(cfg),
          check_rk4_order(),
          check_hover_regulation(cfg)};
}

std::string format_check(const CheckResult& r) {
  return fmt::format("{} {} measured={:.6g} threshold={:.6g}{}{}", r.passed ? "PASS" : "FAIL", r.name, r.measured,
                     r.threshold, r.detail.empty() ? "" : " ", r.detail);
}

}  // namespace dwknode
