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

#include "dwknode/knode.hpp"
#include "dwknode/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dwknode {

struct Sample {
  StateVec x;
  StateVec x_top;
  InputVec u;
};

/// Uniformly sampled closed-loop data, possibly several independent flight segments.
/// A pair (i-1, i) is used for training only when both samples lie in the same segment.
struct Dataset {
  double dt = 0.005;
  std::vector<Sample> samples;
  /// Index of the first sample of each segment; always starts with 0.
  std::vector<std::size_t> segment_starts{0};

  std::size_t size() const { return samples.size(); }
  /// Indices i whose predecessor i-1 is in the same segment.
  std::vector<std::size_t> pair_targets() const;
  std::size_t pair_count() const;
  /// Throws InvalidInput unless dt > 0, there is at least one pair and all states are finite.
  void validate() const;
  /// Appends another dataset as new segments (dt must match).
  void append(const Dataset& other);
  /// The first `n` samples of segment 0.
  Dataset head(std::size_t n) const;
};

/// CSV with header t, 13 bottom-state, 13 top-state and 4 input columns.
/// Time restarts at 0 in each segment; a non-increasing time marks a new segment.
void write_dataset_csv(const Dataset& data, std::ostream& out);
void write_dataset_csv(const Dataset& data, const std::string& path);
/// Throws InvalidInput naming the offending column or line.
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::string& path);
const std::vector<std::string>& dataset_columns();

struct TrainConfig {
  StateVec w_x = default_weights();
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int epochs = 5000;
  bool full_batch = true;
  std::uint64_t seed = 7;
  double init_range = 0.1;
  /// Knode trains the residual alone on top of the nominal model; KnodeDw adds the analytic wake.
  ModelTag variant = ModelTag::kKnodeDw;
  int grad_check_draws = 10;
  std::size_t grad_check_samples = 10;
  double grad_check_step = 1e-6;
  double grad_check_tolerance = 1e-5;

  /// diag(1 x 10, 0.1 x 3)
  static StateVec default_weights();
  void validate() const;
};

/// Knowledge available to training: rigid body, grid and (for KnodeDw) the controller's flow constants.
struct TrainingModel {
  ModelContext ctx;
  std::optional<FlowParams> flow;

  ModelVariant variant(ModelTag tag, std::shared_ptr<const KnodeParams> theta) const;
};

double loss(const KnodeParams& theta, const Dataset& data, const TrainConfig& cfg, const TrainingModel& model);

/// Exact gradient of loss() by reverse mode through the four RK4 stages.
Eigen::VectorXd loss_gradient(const KnodeParams& theta, const Dataset& data, const TrainConfig& cfg,
                              const TrainingModel& model, double* loss_out = nullptr);

Eigen::VectorXd finite_diff_gradient(const KnodeParams& theta, const Dataset& data, const TrainConfig& cfg,
                                     const TrainingModel& model, double step);

struct GradientCheck {
  int draws = 0;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  double seconds = 0.0;
};

/// Analytic vs central-difference gradient on `cfg.grad_check_draws` random parameter draws,
/// each with the normalization of `theta`, over the first cfg.grad_check_samples samples.
GradientCheck gradient_check(const KnodeParams& theta, const Dataset& data, const TrainConfig& cfg,
                             const TrainingModel& model);

/// Fixed input standardization and output gains from the data: feature mean/std over the
/// samples, and the RMS of the one-step residual the knowledge model leaves, mapped into
/// each branch's output coordinates.
void fit_normalization(KnodeParams& theta, const Dataset& data, ModelTag tag, const TrainingModel& model);

struct TrainReport {
  std::vector<double> loss_history;  // loss before each epoch, then the final loss
  KnodeParams theta;
  GradientCheck check;
  double wall_time_s = 0.0;
  ModelTag variant = ModelTag::kKnodeDw;
};

struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Initializes theta from `arch` and the seed, fits the normalization, runs the gradient
/// check (throws NumericError if it fails) and then full-batch Adam.
TrainReport train(const Dataset& data, const TrainConfig& cfg, const Architecture& arch,
                  const TrainingModel& model);

/// Adam from a given starting point; no gradient check.
TrainReport train_from(KnodeParams theta, const Dataset& data, const TrainConfig& cfg,
                       const TrainingModel& model);

/// `with_timing` = false leaves out wall-clock fields so the file is reproducible.
std::string train_report_json(const TrainReport& report, bool with_timing = true);

}  // namespace dwknode
