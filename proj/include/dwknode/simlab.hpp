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

#include "dwknode/integrators.hpp"
#include "dwknode/mpc.hpp"
#include "dwknode/trainer.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dwknode {

enum class ScenarioKind { kStaticTop, kStacked, kCrossing, kLemniscateStacked, kTightLine };

std::string to_string(ScenarioKind kind);
/// Accepts static-top, stacked, crossing, lemniscate, tightline (and the underscore forms).
ScenarioKind scenario_kind_from_string(const std::string& s);

struct Scenario {
  ScenarioKind kind = ScenarioKind::kStacked;
  double speed = 0.4;       // m/s
  double separation = 0.3;  // commanded vertical gap, m
  double duration = 4.41;   // s
  FlowParams plant_flow;
  FlowParams controller_flow;
  ModelTag controller_variant = ModelTag::kNominal;
  /// Recorded for provenance; the simulation has no stochastic component.
  std::uint64_t seed = 0;
  /// Bottom vehicle's initial position minus its reference position.
  Eigen::Vector3d start_offset = Eigen::Vector3d::Zero();

  void validate() const;
};

enum class TopVehicleMode { kKinematic, kNominalMpc };

/// Everything about a run that is not scenario-specific.
struct SimSettings {
  RigidBodyParams body;
  int grid_resolution = 25;
  double lambda = 0.1;  // disk diameter of the quadrature grid, m
  double min_radial = 1e-9;
  OcpConfig ocp;
  double plant_dt = 0.005;
  int control_period_steps = 4;
  Rk45Options rk45;
  double base_height = 1.0;           // bottom vehicle's reference altitude, m
  double lemniscate_amplitude = 0.5;  // m
  TopVehicleMode top_mode = TopVehicleMode::kKinematic;

  static SimSettings defaults();
  void validate() const;
};

struct ReferencePair {
  StateVec bottom;
  StateVec top;
};

/// Reference states of both vehicles at time t in [0, duration].
/// Throws InvalidInput outside that range.
ReferencePair reference_trajectory(ScenarioKind kind, double speed, double separation, double duration,
                                   double t, const SimSettings& settings = SimSettings::defaults());

/// Unchecked variant: the paths are continued analytically past the run, which the
/// controller's horizon needs near the end.
ReferencePair reference_at(ScenarioKind kind, double speed, double separation, double duration, double t,
                           const SimSettings& settings);

/// Trained networks for the learning variants.
struct TrainedModels {
  std::shared_ptr<const KnodeParams> knode;
  std::shared_ptr<const KnodeParams> knode_dw;
};

/// The controller's model for a scenario; throws ConfigError when a needed network is missing.
ModelVariant controller_variant(const Scenario& scn, const TrainedModels& models);

struct SolverStats {
  int iterations = 0;
  double kkt_residual = 0.0;
  double solve_time_ms = 0.0;
  SolveStatus status = SolveStatus::kConverged;
};

/// Force in the world frame (N) and torque in the body frame (N m), packed [F; T].
using Wrench6 = Eigen::Matrix<double, 6, 1>;

/// Undoes the derivative scaling of the velocity and rate slots.
Wrench6 wrench_from_derivative(const StateVec& d, const RigidBodyParams& body);

struct RunLog {
  std::vector<double> t;
  std::vector<StateVec> bottom;
  std::vector<StateVec> top;
  std::vector<StateVec> reference;
  std::vector<InputVec> control;
  std::vector<Wrench6> true_wrench;
  std::vector<Wrench6> predicted_wrench;
  std::vector<SolverStats> solver;
  bool completed = true;
  std::string error;

  std::size_t size() const { return t.size(); }
  /// Throws InvalidInput unless all series have equal length.
  void validate() const;
};

/// Runs the bottom vehicle's closed loop: plant = nominal + wake with the plant flow
/// (RK45, settings.plant_dt), MPC every control_period_steps with zero-order hold.
/// Solver failures end the run early with completed = false.
RunLog simulate_closed_loop(const Scenario& scn, const SimSettings& settings, const TrainedModels& models = {});

/// Header: t, bottom state, top_*, ref_*, inputs, fd_* (true), pd_* (predicted), solver stats.
const std::vector<std::string>& runlog_columns();
/// `with_timing` = false writes 0 in the solve-time column so the file is reproducible.
void write_runlog_csv(const RunLog& log, std::ostream& out, bool with_timing = true);

/// Samples (x, x_top, u) of each run, one dataset segment per run.
Dataset collect_training_data(const std::vector<Scenario>& scenarios, const SimSettings& settings);

/// Two static-top and two stacked passes at 0.4 m/s, separations 0.3 and 0.4 m.
std::vector<Scenario> training_scenarios(const FlowParams& plant_flow, const FlowParams& controller_flow,
                                         double duration = 4.41, std::uint64_t seed = 0);

struct PredictionRmse {
  double force_rmse = 0.0;   // N
  double torque_rmse = 0.0;  // N m
  double force_ratio = 1.0;  // vs the nominal (zero) prediction
  double torque_ratio = 1.0;
  std::size_t samples = 0;
};

/// Disturbance-prediction error of `variant` at the logged states against the logged truth.
PredictionRmse prediction_rmse(const ModelVariant& variant, const std::vector<RunLog>& logs,
                               const ModelContext& ctx);

struct Metrics {
  double rmse = 0.0;  // 3-D position
  Eigen::Vector3d rmse_axis = Eigen::Vector3d::Zero();
  double z_max = 0.0;
  double mean_vertical_sep = 0.0;
  double mean_radial_sep = 0.0;
};

Metrics tracking_metrics(const RunLog& log);

struct GridSpec {
  std::vector<double> speeds{0.3, 0.4, 0.5};
  std::vector<double> separations{0.2, 0.3, 0.35, 0.4};
  std::vector<ScenarioKind> kinds{ScenarioKind::kStaticTop, ScenarioKind::kStacked};
  std::vector<ModelTag> variants{ModelTag::kNominal, ModelTag::kKnode, ModelTag::kDw, ModelTag::kKnodeDw,
                                 ModelTag::kOmniscient};
  double duration = 4.41;
  std::uint64_t seed = 0;
  /// Cells whose (speed, separation) appear here are labelled "train".
  double train_speed = 0.4;
  std::vector<double> train_separations{0.3, 0.4};
};

struct CellResult {
  ScenarioKind kind = ScenarioKind::kStacked;
  double speed = 0.0;
  double separation = 0.0;
  ModelTag variant = ModelTag::kNominal;
  bool training_cell = false;
  bool ok = false;
  std::string error;
  Metrics metrics;
  double norm_rmse = 0.0;
  double norm_z_max = 0.0;
  PredictionRmse prediction;
};

struct HeatmapReport {
  std::vector<CellResult> cells;  // ordered kind, speed, separation, variant

  /// Mean over cells of `variant` that succeeded (and whose nominal run succeeded).
  double mean_norm_rmse(ModelTag variant) const;
  double mean_norm_z_max(ModelTag variant) const;
  double mean_rmse(ModelTag variant) const;
  double mean_force_ratio(ModelTag variant) const;
  std::size_t failures() const;
};

/// Runs every (kind, speed, separation, variant) cell, normalizes against the nominal
/// variant of the same cell and evaluates prediction RMSE on the nominal run's log.
/// `jobs` > 1 runs cells on worker threads; results do not depend on it.
HeatmapReport heatmap_report(const GridSpec& grid, const SimSettings& settings, const FlowParams& plant_flow,
                             const FlowParams& controller_flow, const TrainedModels& models, int jobs = 1);

void write_tracking_table(const HeatmapReport& report, std::ostream& out);
void write_prediction_table(const HeatmapReport& report, std::ostream& out);
void write_summary_table(const HeatmapReport& report, std::ostream& out);

}  // namespace dwknode
