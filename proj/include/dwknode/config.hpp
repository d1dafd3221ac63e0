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

#include "dwknode/simlab.hpp"
#include "dwknode/trainer.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dwknode {

/// Flight segments that make up the training set.
struct DataSpec {
  std::vector<ScenarioKind> kinds{ScenarioKind::kStaticTop, ScenarioKind::kStacked};
  double speed = 0.4;
  std::vector<double> separations{0.3, 0.4};
  double duration = 4.41;
};

struct TightLineSpec {
  double separation = 0.08;
  double speed = 0.4;
  double duration = 4.41;
};

struct ExperimentConfig {
  std::string name = "paper-sim";
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  SimSettings sim;
  FlowParams plant_flow;
  FlowParams controller_flow;
  TrainConfig train;
  Architecture arch;
  DataSpec data;
  GridSpec grid;
  TightLineSpec tightline;

  /// Every simulation constant of the study: mismatched plant/controller wake constants
  /// (C_D 1.3 / 1.18, S 0.0697 / 0.0997), B = 100, U_H from momentum theory, 25 x 25 quadrature.
  static ExperimentConfig paper_sim();

  void validate() const;
  std::vector<Scenario> training_scenarios() const;
  /// Rigid body, quadrature grid and the controller's (not the plant's) wake constants.
  TrainingModel training_model() const;
  Scenario tightline_scenario(ModelTag variant) const;
};

/// Sectioned key = value file. Keys left out keep the paper-sim value; unknown
/// sections or keys are rejected so typos do not pass silently.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

/// Canonical, fully resolved form (every key), suitable for hashing.
std::string to_ini(const ExperimentConfig& cfg);

}  // namespace dwknode
