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

#include "dwknode/model.hpp"

namespace dwknode {

std::string to_string(ModelTag tag) {
  switch (tag) {
    case ModelTag::kNominal: return "nominal";
    case ModelTag::kKnode: return "knode";
    case ModelTag::kDw: return "dw";
    case ModelTag::kKnodeDw: return "knode-dw";
    case ModelTag::kOmniscient: return "omniscient";
  }
  return "unknown";
}

ModelTag model_tag_from_string(const std::string& s) {
  if (s == "nominal") return ModelTag::kNominal;
  if (s == "knode") return ModelTag::kKnode;
  if (s == "dw") return ModelTag::kDw;
  if (s == "knode-dw" || s == "knode_dw") return ModelTag::kKnodeDw;
  if (s == "omniscient") return ModelTag::kOmniscient;
  throw ConfigError("unknown model variant '" + s + "'");
}

ModelVariant ModelVariant::nominal() { return ModelVariant{}; }

ModelVariant ModelVariant::knode_only(std::shared_ptr<const KnodeParams> theta) {
  ModelVariant v;
  v.tag = ModelTag::kKnode;
  v.knode = std::move(theta);
  return v;
}

ModelVariant ModelVariant::dw(const FlowParams& fp) {
  ModelVariant v;
  v.tag = ModelTag::kDw;
  v.flow = fp;
  return v;
}

ModelVariant ModelVariant::knode_dw(std::shared_ptr<const KnodeParams> theta, const FlowParams& fp) {
  ModelVariant v;
  v.tag = ModelTag::kKnodeDw;
  v.knode = std::move(theta);
  v.flow = fp;
  return v;
}

ModelVariant ModelVariant::omniscient(const FlowParams& plant_fp) {
  ModelVariant v;
  v.tag = ModelTag::kOmniscient;
  v.flow = plant_fp;
  return v;
}

bool ModelVariant::uses_flow() const {
  return tag == ModelTag::kDw || tag == ModelTag::kKnodeDw || tag == ModelTag::kOmniscient;
}

bool ModelVariant::uses_network() const { return tag == ModelTag::kKnode || tag == ModelTag::kKnodeDw; }

void ModelVariant::validate() const {
  if (uses_network() && !knode) {
    throw ConfigError("model variant " + to_string(tag) + " requires network parameters");
  }
  if (uses_flow() && !flow) {
    throw ConfigError("model variant " + to_string(tag) + " requires flow parameters");
  }
}

namespace {

void require_grid(const ModelVariant& variant, const ModelContext& ctx) {
  variant.validate();
  if (variant.uses_flow() && !ctx.grid) {
    throw ConfigError("model variant " + to_string(variant.tag) + " requires a quadrature grid");
  }
}

}  // namespace

StateVec disturbance_prediction(const ModelVariant& variant, const StateVec& x, const StateVec& x_top,
                                const ModelContext& ctx) {
  require_grid(variant, ctx);
  StateVec d = StateVec::Zero();
  if (variant.uses_flow()) {
    d += disturbance_derivative(x, x_top, *variant.flow, ctx.body, *ctx.grid);
  }
  if (variant.uses_network()) {
    d += residual_derivative(x, x_top, *variant.knode, ctx.body);
  }
  return d;
}

StateVec model_derivative(const ModelVariant& variant, const StateVec& x, const InputVec& u,
                          const StateVec& x_top, const ModelContext& ctx) {
  StateVec f = nominal_derivative(x, u, ctx.body);
  if (variant.tag != ModelTag::kNominal) {
    f += disturbance_prediction(variant, x, x_top, ctx);
  }
  return f;
}

Linearization linearize_derivative(const ModelVariant& variant, const StateVec& x, const InputVec& u,
                                   const StateVec& x_top, const ModelContext& ctx) {
  require_grid(variant, ctx);
  Linearization lin;
  lin.f = nominal_derivative(x, u, ctx.body);
  nominal_jacobian(x, u, ctx.body, lin.dfdx, lin.dfdu);
  if (variant.tag == ModelTag::kNominal) return lin;

  const FlowFrame frame = flow_frame(x, x_top);
  if (variant.uses_flow()) {
    const WakeEvaluation wake = evaluate_wake(x, x_top, *variant.flow, *ctx.grid, true);
    lin.f += disturbance_derivative(wake, x, ctx.body);
    lin.dfdx += disturbance_jacobian(wake, x, ctx.body);
  }
  if (variant.uses_network()) {
    const ResidualEvaluation res = evaluate_residual(frame, x, x_top, *variant.knode, ctx.body);
    lin.f += res.value;
    lin.dfdx += residual_jacobian(res, x, *variant.knode, ctx.body, ctx.min_radial);
  }
  return lin;
}

StateVec advance_top(const StateVec& x_top, double s) {
  StateVec out = x_top;
  position(out) += s * velocity(x_top);
  return out;
}

StateVec predict_one_step(const ModelVariant& variant, const StateVec& x, const InputVec& u,
                          const StateVec& x_top, double dt, const ModelContext& ctx) {
  if (!(dt > 0.0)) throw InvalidInput("predict_one_step: dt must be positive");
  const StateVec top_mid = advance_top(x_top, 0.5 * dt);
  const StateVec top_end = advance_top(x_top, dt);
  const StateVec k1 = model_derivative(variant, x, u, x_top, ctx);
  const StateVec k2 = model_derivative(variant, x + 0.5 * dt * k1, u, top_mid, ctx);
  const StateVec k3 = model_derivative(variant, x + 0.5 * dt * k2, u, top_mid, ctx);
  const StateVec k4 = model_derivative(variant, x + dt * k3, u, top_end, ctx);
  StateVec next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) throw NumericError("predict_one_step: non-finite prediction");
  normalize_quaternion(next);
  return next;
}

StepLinearization linearize_step(const ModelVariant& variant, const StateVec& x, const InputVec& u,
                                 const StateVec& x_top, double dt, const ModelContext& ctx) {
  if (!(dt > 0.0)) throw InvalidInput("linearize_step: dt must be positive");
  const StateVec top_mid = advance_top(x_top, 0.5 * dt);
  const StateVec top_end = advance_top(x_top, dt);
  const Linearization l1 = linearize_derivative(variant, x, u, x_top, ctx);
  const Linearization l2 = linearize_derivative(variant, x + 0.5 * dt * l1.f, u, top_mid, ctx);
  const Linearization l3 = linearize_derivative(variant, x + 0.5 * dt * l2.f, u, top_mid, ctx);
  const Linearization l4 = linearize_derivative(variant, x + dt * l3.f, u, top_end, ctx);

  const StateMat id = StateMat::Identity();
  const StateMat dk1x = l1.dfdx;
  const InputMat dk1u = l1.dfdu;
  const StateMat dk2x = l2.dfdx * (id + 0.5 * dt * dk1x);
  const InputMat dk2u = l2.dfdu + l2.dfdx * (0.5 * dt * dk1u);
  const StateMat dk3x = l3.dfdx * (id + 0.5 * dt * dk2x);
  const InputMat dk3u = l3.dfdu + l3.dfdx * (0.5 * dt * dk2u);
  const StateMat dk4x = l4.dfdx * (id + dt * dk3x);
  const InputMat dk4u = l4.dfdu + l4.dfdx * (dt * dk3u);

  const StateVec raw = x + (dt / 6.0) * (l1.f + 2.0 * l2.f + 2.0 * l3.f + l4.f);
  if (!raw.allFinite()) throw NumericError("linearize_step: non-finite prediction");
  const StateMat raw_x = id + (dt / 6.0) * (dk1x + 2.0 * dk2x + 2.0 * dk3x + dk4x);
  const InputMat raw_u = (dt / 6.0) * (dk1u + 2.0 * dk2u + 2.0 * dk3u + dk4u);

  const StateMat norm_jac = normalization_jacobian(raw);
  StepLinearization out;
  out.next = raw;
  normalize_quaternion(out.next);
  out.a = norm_jac * raw_x;
  out.b = norm_jac * raw_u;
  return out;
}

}  // namespace dwknode
