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

#include "dwknode/diagnostics.hpp"
#include "dwknode/simlab.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace dwknode {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitRuntime = 2, kExitThreshold = 3 };

/// Entry point behind the executable: args exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Grid-level thresholds checked by `evaluate` when all five variants ran: prediction
/// ratio, normalized RMSE and z_max of knode-dw, omniscient floor, and the knowledge ablation.
std::vector<CheckResult> grid_acceptance(const HeatmapReport& report);

struct TightLineResult {
  ModelTag variant = ModelTag::kNominal;
  bool ok = false;
  std::string error;
  Metrics metrics;
};

/// The 0.08 m stacked line flown by each variant.
std::vector<TightLineResult> run_tightline(const ExperimentConfig& cfg, const std::vector<ModelTag>& variants,
                                           const TrainedModels& models);

}  // namespace dwknode
