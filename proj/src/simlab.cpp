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

#include "dwknode/simlab.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <thread>

namespace dwknode {

namespace {

constexpr double kPi = std::numbers::pi;

// Arc length of the Gerono lemniscate (A cos phi, A sin phi cos phi) over one period.
double gerono_perimeter(double a) {
  constexpr int n = 4000;  // composite Simpson, even
  auto speed = [a](double phi) { return a * std::hypot(std::sin(phi), std::cos(2.0 * phi)); };
  const double h = 2.0 * kPi / n;
  double s = speed(0.0) + speed(2.0 * kPi);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * speed(i * h);
  return s * h / 3.0;
}

StateVec moving_point(const Eigen::Vector3d& p, const Eigen::Vector3d& v) {
  StateVec x = hover_state(p);
  velocity(x) = v;
  return x;
}

ModelVariant make_variant(ModelTag tag, const FlowParams& plant_flow, const FlowParams& controller_flow,
                          const TrainedModels& models) {
  switch (tag) {
    case ModelTag::kNominal: return ModelVariant::nominal();
    case ModelTag::kDw: return ModelVariant::dw(controller_flow);
    case ModelTag::kOmniscient: return ModelVariant::omniscient(plant_flow);
    case ModelTag::kKnode:
      if (!models.knode) throw ConfigError("knode variant requested but no knode model was loaded");
      return ModelVariant::knode_only(models.knode);
    case ModelTag::kKnodeDw:
      if (!models.knode_dw) throw ConfigError("knode-dw variant requested but no knode-dw model was loaded");
      return ModelVariant::knode_dw(models.knode_dw, controller_flow);
  }
  throw ConfigError("unknown model tag");
}

ModelContext make_context(const SimSettings& settings) {
  ModelContext ctx;
  ctx.body = settings.body;
  ctx.grid = std::make_shared<QuadratureGrid>(settings.grid_resolution, settings.lambda);
  ctx.min_radial = settings.min_radial;
  return ctx;
}

}  // namespace

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kStaticTop: return "static-top";
    case ScenarioKind::kStacked: return "stacked";
    case ScenarioKind::kCrossing: return "crossing";
    case ScenarioKind::kLemniscateStacked: return "lemniscate";
    case ScenarioKind::kTightLine: return "tightline";
  }
  return "unknown";
}

ScenarioKind scenario_kind_from_string(const std::string& s) {
  std::string k = s;
  std::replace(k.begin(), k.end(), '_', '-');
  if (k == "static-top" || k == "statictop") return ScenarioKind::kStaticTop;
  if (k == "stacked") return ScenarioKind::kStacked;
  if (k == "crossing") return ScenarioKind::kCrossing;
  if (k == "lemniscate" || k == "lemniscate-stacked") return ScenarioKind::kLemniscateStacked;
  if (k == "tightline" || k == "tight-line") return ScenarioKind::kTightLine;
  throw ConfigError(fmt::format("unknown scenario kind '{}'", s));
}

void Scenario::validate() const {
  if (!(duration > 0.0)) throw ConfigError("scenario: duration must be positive");
  if (!(separation > 0.0)) throw ConfigError("scenario: separation must be positive");
  if (!(speed >= 0.0) || !std::isfinite(speed)) throw ConfigError("scenario: speed must be non-negative");
  plant_flow.validate();
  controller_flow.validate();
}

SimSettings SimSettings::defaults() {
  SimSettings s;
  s.ocp = OcpConfig::defaults(s.body);
  return s;
}

void SimSettings::validate() const {
  if (grid_resolution < 2) throw ConfigError("sim: grid resolution must be at least 2");
  if (!(plant_dt > 0.0)) throw ConfigError("sim: plant_dt must be positive");
  if (control_period_steps < 1) throw ConfigError("sim: control_period_steps must be at least 1");
  if (!(lambda > 0.0)) throw ConfigError("sim: lambda must be positive");
  if (!(lemniscate_amplitude > 0.0)) throw ConfigError("sim: lemniscate amplitude must be positive");
  ocp.validate(body);
}

ReferencePair reference_at(ScenarioKind kind, double speed, double separation, double duration, double t,
                           const SimSettings& settings) {
  const double z = settings.base_height;
  const Eigen::Vector3d up(0, 0, separation);
  const double tc = t - 0.5 * duration;  // time relative to mid-run
  ReferencePair out;
  switch (kind) {
    case ScenarioKind::kStaticTop: {
      out.bottom = moving_point({speed * tc, 0, z}, {speed, 0, 0});
      out.top = hover_state(Eigen::Vector3d(0, 0, z) + up);
      break;
    }
    case ScenarioKind::kStacked:
    case ScenarioKind::kTightLine: {
      out.bottom = moving_point({speed * tc, 0, z}, {speed, 0, 0});
      out.top = moving_point(Eigen::Vector3d(speed * tc, 0, z) + up, {speed, 0, 0});
      break;
    }
    case ScenarioKind::kCrossing: {
      out.bottom = moving_point({speed * tc, 0, z}, {speed, 0, 0});
      out.top = moving_point(Eigen::Vector3d(0, speed * tc, z) + up, {0, speed, 0});
      break;
    }
    case ScenarioKind::kLemniscateStacked: {
      const double a = settings.lemniscate_amplitude;
      // Constant phase rate; one loop takes perimeter / speed.
      thread_local double cached_a = -1.0, cached_perimeter = 0.0;
      if (a != cached_a) {
        cached_perimeter = gerono_perimeter(a);
        cached_a = a;
      }
      const double w = speed > 0.0 ? 2.0 * kPi * speed / cached_perimeter : 0.0;
      const double phi = 0.5 * kPi + w * t;
      const Eigen::Vector3d p(a * std::cos(phi), 0, z + 0.5 * a * std::sin(2.0 * phi));
      const Eigen::Vector3d v(-a * w * std::sin(phi), 0, a * w * std::cos(2.0 * phi));
      out.bottom = moving_point(p, v);
      out.top = moving_point(p + up, v);
      break;
    }
  }
  return out;
}

ReferencePair reference_trajectory(ScenarioKind kind, double speed, double separation, double duration, double t,
                                   const SimSettings& settings) {
  if (!(t >= 0.0 && t <= duration)) {
    throw InvalidInput(fmt::format("reference query at t = {} outside [0, {}]", t, duration));
  }
  return reference_at(kind, speed, separation, duration, t, settings);
}

ModelVariant controller_variant(const Scenario& scn, const TrainedModels& models) {
  return make_variant(scn.controller_variant, scn.plant_flow, scn.controller_flow, models);
}

Wrench6 wrench_from_derivative(const StateVec& d, const RigidBodyParams& body) {
  Wrench6 w;
  w.head<3>() = body.mass() * d.segment<3>(idx::kVel);
  w.tail<3>() = body.inertia() * d.segment<3>(idx::kRate);
  return w;
}

void RunLog::validate() const {
  const std::size_t n = t.size();
  if (bottom.size() != n || top.size() != n || reference.size() != n || control.size() != n ||
      true_wrench.size() != n || predicted_wrench.size() != n || solver.size() != n) {
    throw InvalidInput("run log: series lengths differ");
  }
}

RunLog simulate_closed_loop(const Scenario& scn, const SimSettings& settings, const TrainedModels& models) {
  scn.validate();
  settings.validate();
  const ModelContext ctx = make_context(settings);
  const ModelVariant variant = controller_variant(scn, models);
  MpcController controller(settings.ocp, variant, ctx);

  auto ref = [&](double t) {
    return reference_at(scn.kind, scn.speed, scn.separation, scn.duration, t, settings);
  };
  const ReferenceFn bottom_ref = [&](double t) { return ref(t).bottom; };

  std::optional<MpcController> top_controller;
  if (settings.top_mode == TopVehicleMode::kNominalMpc) {
    top_controller.emplace(settings.ocp, ModelVariant::nominal(), ctx);
  }
  const ReferenceFn top_ref = [&](double t) { return ref(t).top; };
  // The top vehicle's own controller sees no vehicle above it.
  const StateVec far_away = hover_state(Eigen::Vector3d(1e6, 1e6, 1e6));

  const double dt = settings.plant_dt;
  const auto steps = static_cast<std::size_t>(std::llround(scn.duration / dt));
  RunLog log;
  log.t.reserve(steps + 1);

  StateVec x = ref(0.0).bottom;
  position(x) += scn.start_offset;
  StateVec x_top = ref(0.0).top;
  InputVec u = settings.body.hover_input();
  InputVec u_top = settings.body.hover_input();
  SolverStats stats;

  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (settings.top_mode == TopVehicleMode::kKinematic) x_top = ref(t).top;
    try {
      if (k % static_cast<std::size_t>(settings.control_period_steps) == 0) {
        u = controller.step(x, x_top, bottom_ref, t);
        const OcpSolution& sol = controller.last_solution();
        stats = {sol.iterations, sol.kkt_residual, sol.solve_time_ms, sol.status};
        if (top_controller) u_top = top_controller->step(x_top, far_away, top_ref, t);
      }
    } catch (const std::exception& e) {
      log.completed = false;
      log.error = fmt::format("t = {:.3f}: {}", t, e.what());
      break;
    }

    log.t.push_back(t);
    log.bottom.push_back(x);
    log.top.push_back(x_top);
    log.reference.push_back(ref(t).bottom);
    log.control.push_back(u);
    log.true_wrench.push_back(
        wrench_from_derivative(disturbance_derivative(x, x_top, scn.plant_flow, ctx.body, *ctx.grid), ctx.body));
    log.predicted_wrench.push_back(
        wrench_from_derivative(disturbance_prediction(variant, x, x_top, ctx), ctx.body));
    log.solver.push_back(stats);
    if (k == steps) break;

    // Plant step. The top vehicle keeps moving inside the step, so time rides along as a 14th state.
    try {
      const StateVec top_start = x_top;
      const DerivativeFn plant = [&](const Eigen::VectorXd& y) {
        const StateVec xs = y.head<kStateDim>();
        StateVec xt;
        if (settings.top_mode == TopVehicleMode::kKinematic) {
          xt = ref(y[kStateDim]).top;
        } else {
          // Closed-loop top vehicle: constant-velocity interpolation inside the step.
          xt = top_start;
          position(xt) += (y[kStateDim] - t) * velocity(top_start);
        }
        Eigen::VectorXd dy(kStateDim + 1);
        dy.head<kStateDim>() = nominal_derivative(xs, u, ctx.body) +
                               disturbance_derivative(xs, xt, scn.plant_flow, ctx.body, *ctx.grid);
        dy[kStateDim] = 1.0;
        return dy;
      };
      Eigen::VectorXd y(kStateDim + 1);
      y.head<kStateDim>() = x;
      y[kStateDim] = t;
      y = rk45_integrate_raw(plant, y, dt, settings.rk45);
      x = y.head<kStateDim>();
      normalize_quaternion(x);
      if (!x.allFinite()) throw NumericError("plant state became non-finite");
      if (top_controller) {
        x_top = rk45_integrate([&](const StateVec& s) { return nominal_derivative(s, u_top, ctx.body); }, x_top, dt,
                               settings.rk45);
      }
    } catch (const std::exception& e) {
      log.completed = false;
      log.error = fmt::format("t = {:.3f}: {}", t, e.what());
      break;
    }
  }
  return log;
}

const std::vector<std::string>& runlog_columns() {
  static const std::vector<std::string> cols = [] {
    const char* state[] = {"px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "wx", "wy", "wz"};
    std::vector<std::string> c{"t"};
    for (const char* prefix : {"", "top_", "ref_"}) {
      for (const char* s : state) c.push_back(std::string(prefix) + s);
    }
    for (const char* s : {"eta", "alpha_x", "alpha_y", "alpha_z"}) c.emplace_back(s);
    for (const char* prefix : {"fd_", "pd_"}) {
      for (const char* s : {"fx", "fy", "fz", "tx", "ty", "tz"}) c.push_back(std::string(prefix) + s);
    }
    for (const char* s : {"sqp_iters", "kkt", "solve_ms", "status"}) c.emplace_back(s);
    return c;
  }();
  return cols;
}

void write_runlog_csv(const RunLog& log, std::ostream& out, bool with_timing) {
  log.validate();
  const auto& cols = runlog_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (std::size_t k = 0; k < log.size(); ++k) {
    std::string line = fmt::format("{}", log.t[k]);
    auto put = [&line](const auto& v) {
      for (Eigen::Index j = 0; j < v.size(); ++j) line += fmt::format(",{}", v[j]);
    };
    put(log.bottom[k]);
    put(log.top[k]);
    put(log.reference[k]);
    put(log.control[k]);
    put(log.true_wrench[k]);
    put(log.predicted_wrench[k]);
    const SolverStats& s = log.solver[k];
    line += fmt::format(",{},{},{},{}", s.iterations, s.kkt_residual, with_timing ? s.solve_time_ms : 0.0,
                        static_cast<int>(s.status));
    out << line << '\n';
  }
}

std::vector<Scenario> training_scenarios(const FlowParams& plant_flow, const FlowParams& controller_flow,
                                         double duration, std::uint64_t seed) {
  std::vector<Scenario> out;
  for (ScenarioKind kind : {ScenarioKind::kStaticTop, ScenarioKind::kStacked}) {
    for (double sep : {0.3, 0.4}) {
      Scenario s;
      s.kind = kind;
      s.speed = 0.4;
      s.separation = sep;
      s.duration = duration;
      s.plant_flow = plant_flow;
      s.controller_flow = controller_flow;
      s.controller_variant = ModelTag::kNominal;
      s.seed = seed;
      out.push_back(s);
    }
  }
  return out;
}

Dataset collect_training_data(const std::vector<Scenario>& scenarios, const SimSettings& settings) {
  Dataset data;
  data.dt = settings.plant_dt;
  data.segment_starts.clear();
  for (const Scenario& scn : scenarios) {
    if (scn.controller_variant != ModelTag::kNominal) {
      throw ConfigError("training data must come from the nominal controller");
    }
    const RunLog log = simulate_closed_loop(scn, settings);
    if (!log.completed) throw NumericError(fmt::format("data collection run failed: {}", log.error));
    if (log.size() < 2) continue;
    data.segment_starts.push_back(data.samples.size());
    for (std::size_t k = 0; k < log.size(); ++k) data.samples.push_back({log.bottom[k], log.top[k], log.control[k]});
  }
  if (data.samples.empty()) data.segment_starts = {0};
  data.validate();
  return data;
}

PredictionRmse prediction_rmse(const ModelVariant& variant, const std::vector<RunLog>& logs,
                               const ModelContext& ctx) {
  double ef = 0.0, et = 0.0, nf = 0.0, nt = 0.0;
  std::size_t n = 0;
  for (const RunLog& log : logs) {
    log.validate();
    for (std::size_t k = 0; k < log.size(); ++k) {
      const Wrench6 pred =
          wrench_from_derivative(disturbance_prediction(variant, log.bottom[k], log.top[k], ctx), ctx.body);
      const Wrench6& truth = log.true_wrench[k];
      ef += (pred.head<3>() - truth.head<3>()).squaredNorm();
      et += (pred.tail<3>() - truth.tail<3>()).squaredNorm();
      nf += truth.head<3>().squaredNorm();
      nt += truth.tail<3>().squaredNorm();
      ++n;
    }
  }
  PredictionRmse r;
  r.samples = n;
  if (n == 0) return r;
  const double dn = static_cast<double>(n);
  r.force_rmse = std::sqrt(ef / dn);
  r.torque_rmse = std::sqrt(et / dn);
  // A ratio against a disturbance that is zero up to round-off (the torque on a perfectly
  // stacked pair) measures nothing; report it as undefined.
  constexpr double kNumericalZero = 1e-12;
  const auto ratio = [&](double err, double norm) {
    return std::sqrt(norm / dn) > kNumericalZero ? std::sqrt(err / norm) : std::numeric_limits<double>::quiet_NaN();
  };
  r.force_ratio = ratio(ef, nf);
  r.torque_ratio = ratio(et, nt);
  return r;
}

Metrics tracking_metrics(const RunLog& log) {
  log.validate();
  Metrics m;
  if (log.size() == 0) return m;
  Eigen::Vector3d sq = Eigen::Vector3d::Zero();
  double vsep = 0.0, rsep = 0.0;
  for (std::size_t k = 0; k < log.size(); ++k) {
    const Eigen::Vector3d e = position(log.bottom[k]) - position(log.reference[k]);
    sq += e.cwiseAbs2();
    m.z_max = std::max(m.z_max, std::abs(e.z()));
    const Eigen::Vector3d d = position(log.top[k]) - position(log.bottom[k]);
    vsep += d.z();
    rsep += d.head<2>().norm();
  }
  const double n = static_cast<double>(log.size());
  m.rmse = std::sqrt(sq.sum() / n);
  m.rmse_axis = (sq / n).cwiseSqrt();
  m.mean_vertical_sep = vsep / n;
  m.mean_radial_sep = rsep / n;
  return m;
}

namespace {

bool is_training_cell(const GridSpec& grid, double speed, double separation) {
  if (std::abs(speed - grid.train_speed) > 1e-12) return false;
  return std::any_of(grid.train_separations.begin(), grid.train_separations.end(),
                     [&](double s) { return std::abs(s - separation) < 1e-12; });
}

double mean_of(const HeatmapReport& report, ModelTag variant, double CellResult::*field) {
  double sum = 0.0;
  int n = 0;
  for (const CellResult& c : report.cells) {
    if (c.variant != variant || !c.ok || !std::isfinite(c.*field)) continue;
    sum += c.*field;
    ++n;
  }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double HeatmapReport::mean_norm_rmse(ModelTag variant) const { return mean_of(*this, variant, &CellResult::norm_rmse); }

double HeatmapReport::mean_norm_z_max(ModelTag variant) const {
  return mean_of(*this, variant, &CellResult::norm_z_max);
}

double HeatmapReport::mean_rmse(ModelTag variant) const {
  double sum = 0.0;
  int n = 0;
  for (const CellResult& c : cells) {
    if (c.variant != variant || !c.ok) continue;
    sum += c.metrics.rmse;
    ++n;
  }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

double HeatmapReport::mean_force_ratio(ModelTag variant) const {
  double sum = 0.0;
  int n = 0;
  for (const CellResult& c : cells) {
    if (c.variant != variant || !std::isfinite(c.prediction.force_ratio) || c.prediction.samples == 0) continue;
    sum += c.prediction.force_ratio;
    ++n;
  }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

std::size_t HeatmapReport::failures() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const CellResult& c) { return !c.ok; }));
}

HeatmapReport heatmap_report(const GridSpec& grid, const SimSettings& settings, const FlowParams& plant_flow,
                             const FlowParams& controller_flow, const TrainedModels& models, int jobs) {
  settings.validate();
  HeatmapReport report;
  for (ScenarioKind kind : grid.kinds) {
    for (double speed : grid.speeds) {
      for (double sep : grid.separations) {
        for (ModelTag v : grid.variants) {
          CellResult c;
          c.kind = kind;
          c.speed = speed;
          c.separation = sep;
          c.variant = v;
          c.training_cell = is_training_cell(grid, speed, sep);
          report.cells.push_back(c);
        }
      }
    }
  }

  // Every run is independent; results land in their own slot, so the thread count
  // cannot change the output.
  std::vector<RunLog> logs(report.cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < report.cells.size(); i = next++) {
      CellResult& c = report.cells[i];
      Scenario scn;
      scn.kind = c.kind;
      scn.speed = c.speed;
      scn.separation = c.separation;
      scn.duration = grid.duration;
      scn.plant_flow = plant_flow;
      scn.controller_flow = controller_flow;
      scn.controller_variant = c.variant;
      scn.seed = grid.seed;
      try {
        logs[i] = simulate_closed_loop(scn, settings, models);
        c.ok = logs[i].completed;
        c.error = logs[i].error;
        c.metrics = tracking_metrics(logs[i]);
      } catch (const std::exception& e) {
        c.ok = false;
        c.error = e.what();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(report.cells.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // Normalize against the nominal run of the same cell and score disturbance prediction on it.
  const ModelContext ctx = make_context(settings);
  const std::size_t stride = grid.variants.size();
  const auto nominal_it = std::find(grid.variants.begin(), grid.variants.end(), ModelTag::kNominal);
  for (std::size_t base = 0; base < report.cells.size(); base += stride) {
    const CellResult* nominal = nullptr;
    const RunLog* nominal_log = nullptr;
    if (nominal_it != grid.variants.end()) {
      const std::size_t j = base + static_cast<std::size_t>(nominal_it - grid.variants.begin());
      if (report.cells[j].ok) {
        nominal = &report.cells[j];
        nominal_log = &logs[j];
      }
    }
    for (std::size_t j = base; j < base + stride; ++j) {
      CellResult& c = report.cells[j];
      constexpr double nan = std::numeric_limits<double>::quiet_NaN();
      c.norm_rmse = nominal && c.ok ? c.metrics.rmse / nominal->metrics.rmse : nan;
      c.norm_z_max = nominal && c.ok ? c.metrics.z_max / nominal->metrics.z_max : nan;
      c.prediction.force_ratio = nan;
      c.prediction.torque_ratio = nan;
      if (!nominal_log) continue;
      try {
        c.prediction = prediction_rmse(make_variant(c.variant, plant_flow, controller_flow, models), {*nominal_log}, ctx);
      } catch (const std::exception& e) {
        if (c.error.empty()) c.error = e.what();
      }
    }
  }
  return report;
}

namespace {

std::string fmt_num(double v) { return std::isfinite(v) ? fmt::format("{:.9g}", v) : std::string("nan"); }

}  // namespace

void write_tracking_table(const HeatmapReport& report, std::ostream& out) {
  out << "kind,speed,separation,variant,split,ok,rmse,rmse_x,rmse_y,rmse_z,z_max,mean_vertical_sep,"
         "mean_radial_sep,norm_rmse,norm_z_max\n";
  for (const CellResult& c : report.cells) {
    const Metrics& m = c.metrics;
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", to_string(c.kind), c.speed, c.separation,
                       to_string(c.variant), c.training_cell ? "train" : "held-out", c.ok ? 1 : 0, fmt_num(m.rmse),
                       fmt_num(m.rmse_axis.x()), fmt_num(m.rmse_axis.y()), fmt_num(m.rmse_axis.z()), fmt_num(m.z_max),
                       fmt_num(m.mean_vertical_sep), fmt_num(m.mean_radial_sep), fmt_num(c.norm_rmse),
                       fmt_num(c.norm_z_max));
  }
}

void write_prediction_table(const HeatmapReport& report, std::ostream& out) {
  out << "kind,speed,separation,variant,split,force_rmse,torque_rmse,force_ratio,torque_ratio\n";
  for (const CellResult& c : report.cells) {
    const PredictionRmse& p = c.prediction;
    out << fmt::format("{},{},{},{},{},{},{},{},{}\n", to_string(c.kind), c.speed, c.separation, to_string(c.variant),
                       c.training_cell ? "train" : "held-out", fmt_num(p.force_rmse), fmt_num(p.torque_rmse),
                       fmt_num(p.force_ratio), fmt_num(p.torque_ratio));
  }
}

void write_summary_table(const HeatmapReport& report, std::ostream& out) {
  out << "variant,cells,failures,mean_rmse,mean_norm_rmse,mean_norm_z_max,mean_force_ratio\n";
  std::vector<ModelTag> seen;
  for (const CellResult& c : report.cells) {
    if (std::find(seen.begin(), seen.end(), c.variant) == seen.end()) seen.push_back(c.variant);
  }
  for (ModelTag v : seen) {
    const auto cells = std::count_if(report.cells.begin(), report.cells.end(), [&](const CellResult& c) { return c.variant == v; });
    const auto fails = std::count_if(report.cells.begin(), report.cells.end(),
                                     [&](const CellResult& c) { return c.variant == v && !c.ok; });
    out << fmt::format("{},{},{},{},{},{},{}\n", to_string(v), cells, fails, fmt_num(report.mean_rmse(v)),
                       fmt_num(report.mean_norm_rmse(v)), fmt_num(report.mean_norm_z_max(v)),
                       fmt_num(report.mean_force_ratio(v)));
  }
}

}  // namespace dwknode
