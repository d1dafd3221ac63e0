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

#include "dwknode/downwash.hpp"
#include "dwknode/knode.hpp"
#include "dwknode/quad_dynamics.hpp"

#include <memory>
#include <optional>
#include <string>

namespace dwknode {

enum class ModelTag { kNominal, kKnode, kDw, kKnodeDw, kOmniscient };

std::string to_string(ModelTag tag);
/// Accepts nominal, knode, dw, knode-dw, omniscient.
ModelTag model_tag_from_string(const std::string& s);

struct ModelVariant {
  ModelTag tag = ModelTag::kNominal;
  std::shared_ptr<const KnodeParams> knode;
  std::optional<FlowParams> flow;

  static ModelVariant nominal();
  static ModelVariant knode_only(std::shared_ptr<const KnodeParams> theta);
  static ModelVariant dw(const FlowParams& fp);
  static ModelVariant knode_dw(std::shared_ptr<const KnodeParams> theta, const FlowParams& fp);
  static ModelVariant omniscient(const FlowParams& plant_fp);

  bool uses_flow() const;
  bool uses_network() const;
  /// Throws ConfigError when a required component is missing.
  void validate() const;
};

/// Shared, immutable context for model evaluation.
struct ModelContext {
  RigidBodyParams body;
  std::shared_ptr<const QuadratureGrid> grid;
  /// Floor on the radial distance in the network's frame-rotation Jacobian terms.
  double min_radial = 1e-9;
};

/// f_nom + [f_d] + [d(theta)] as selected by the variant.
StateVec model_derivative(const ModelVariant& variant, const StateVec& x, const InputVec& u,
                          const StateVec& x_top, const ModelContext& ctx);

/// f_d + d for the variant; zero for nominal.
StateVec disturbance_prediction(const ModelVariant& variant, const StateVec& x, const StateVec& x_top,
                                const ModelContext& ctx);

struct Linearization {
  StateVec f;
  StateMat dfdx;
  InputMat dfdu;
};

Linearization linearize_derivative(const ModelVariant& variant, const StateVec& x, const InputVec& u,
                                   const StateVec& x_top, const ModelContext& ctx);

/// The top vehicle s seconds later at constant velocity and attitude.
StateVec advance_top(const StateVec& x_top, double s);

/// One RK4 step of the variant's derivative over dt, quaternion renormalized. The top
/// vehicle moves at constant velocity through the stages.
StateVec predict_one_step(const ModelVariant& variant, const StateVec& x, const InputVec& u,
                          const StateVec& x_top, double dt, const ModelContext& ctx);

struct StepLinearization {
  StateVec next;
  StateMat a;  // d next / d x
  InputMat b;  // d next / d u
};

/// predict_one_step together with its exact Jacobians (through all four stages and the renormalization).
StepLinearization linearize_step(const ModelVariant& variant, const StateVec& x, const InputVec& u,
                                 const StateVec& x_top, double dt, const ModelContext& ctx);

}  // namespace dwknode
