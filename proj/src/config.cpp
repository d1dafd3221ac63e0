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

#include "dwknode/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace dwknode {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const std::string t = trim(v);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError(fmt::format("config: key '{}' expects a number, got '{}'", key, v));
  }
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const std::string t = trim(v);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError(fmt::format("config: key '{}' expects an integer, got '{}'", key, v));
  }
  return out;
}

std::string num(double v) { return fmt::format("{}", v); }

template <typename T, typename F>
std::string join(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + f(v[i]);
  return out;
}

// Reads one section, tracking which keys were consumed.
class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  template <typename F>
  void get(const std::string& key, F&& apply) {
    seen_.insert(key);
    if (!tree_) return;
    if (const auto v = tree_->get_optional<std::string>(pt::ptree::path_type(key, '\0'))) {
      apply(fmt::format("{}.{}", name_, key), *v);
    }
  }
  void real(const std::string& key, double& out) {
    get(key, [&](const std::string& k, const std::string& v) { out = to_double(k, v); });
  }
  void integer(const std::string& key, int& out) {
    get(key, [&](const std::string& k, const std::string& v) { out = static_cast<int>(to_int(k, v)); });
  }
  void reals(const std::string& key, std::vector<double>& out) {
    get(key, [&](const std::string& k, const std::string& v) {
      out.clear();
      for (const auto& s : split_list(v)) out.push_back(to_double(k, s));
    });
  }
  void finish() const {
    if (!tree_) return;
    for (const auto& [key, _] : *tree_) {
      if (!seen_.count(key)) throw ConfigError(fmt::format("config: unknown key '{}.{}'", name_, key));
    }
  }

 private:
  const pt::ptree* tree_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_flow(Section& s, FlowParams& fp, const RigidBodyParams& body) {
  bool momentum = false;
  s.get("u_h", [&](const std::string& k, const std::string& v) {
    if (trim(v) == "momentum") {
      momentum = true;
    } else {
      fp.u_h = to_double(k, v);
    }
  });
  s.real("b_const", fp.b_const);
  s.real("d_prop", fp.d_prop);
  s.real("z0", fp.z0);
  s.real("spreading_s", fp.spreading_s);
  s.real("rho", fp.rho);
  s.real("c_d", fp.c_d);
  s.real("lambda", fp.lambda);
  if (momentum) fp.u_h = FlowParams::momentum_theory_u_h(body, fp.d_prop, fp.rho);
}

void write_flow(std::ostream& out, const char* section, const FlowParams& fp) {
  out << fmt::format("[{}]\nu_h = {}\nb_const = {}\nd_prop = {}\nz0 = {}\nspreading_s = {}\nrho = {}\nc_d = {}\nlambda = {}\n\n",
                     section, num(fp.u_h), num(fp.b_const), num(fp.d_prop), num(fp.z0), num(fp.spreading_s),
                     num(fp.rho), num(fp.c_d), num(fp.lambda));
}

}  // namespace

ExperimentConfig ExperimentConfig::paper_sim() {
  ExperimentConfig c;
  c.sim = SimSettings::defaults();
  const RigidBodyParams& body = c.sim.body;
  c.plant_flow.b_const = 100.0;
  c.plant_flow.u_h = FlowParams::momentum_theory_u_h(body, c.plant_flow.d_prop, c.plant_flow.rho);
  c.plant_flow.c_d = 1.3;
  c.plant_flow.spreading_s = 0.0697;
  c.controller_flow = c.plant_flow;
  c.controller_flow.c_d = 1.18;
  c.controller_flow.spreading_s = 0.0997;
  c.arch = Architecture::simulation_preset();
  c.train.variant = ModelTag::kKnodeDw;
  return c;
}

void ExperimentConfig::validate() const {
  sim.validate();
  plant_flow.validate();
  controller_flow.validate();
  train.validate();
  arch.validate();
  if (data.kinds.empty() || data.separations.empty()) throw ConfigError("config: data needs kinds and separations");
  if (!(data.duration >= 0.0)) throw ConfigError("config: data.duration must be non-negative");
  if (grid.speeds.empty() || grid.separations.empty() || grid.kinds.empty() || grid.variants.empty()) {
    throw ConfigError("config: grid lists must be non-empty");
  }
  if (!(grid.duration > 0.0)) throw ConfigError("config: grid.duration must be positive");
  if (!(tightline.separation > 0.0 && tightline.duration > 0.0)) throw ConfigError("config: bad tightline settings");
}

std::vector<Scenario> ExperimentConfig::training_scenarios() const {
  std::vector<Scenario> out;
  for (ScenarioKind kind : data.kinds) {
    for (double sep : data.separations) {
      Scenario s;
      s.kind = kind;
      s.speed = data.speed;
      s.separation = sep;
      s.duration = data.duration;
      s.plant_flow = plant_flow;
      s.controller_flow = controller_flow;
      s.controller_variant = ModelTag::kNominal;
      s.seed = seed;
      out.push_back(s);
    }
  }
  return out;
}

TrainingModel ExperimentConfig::training_model() const {
  TrainingModel m;
  m.ctx.body = sim.body;
  m.ctx.grid = std::make_shared<QuadratureGrid>(sim.grid_resolution, sim.lambda);
  m.ctx.min_radial = sim.min_radial;
  m.flow = controller_flow;
  return m;
}

Scenario ExperimentConfig::tightline_scenario(ModelTag variant) const {
  Scenario s;
  s.kind = ScenarioKind::kTightLine;
  s.speed = tightline.speed;
  s.separation = tightline.separation;
  s.duration = tightline.duration;
  s.plant_flow = plant_flow;
  s.controller_flow = controller_flow;
  s.controller_variant = variant;
  s.seed = seed;
  return s;
}

ExperimentConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config: line {}: {}", e.line(), e.message()));
  }
  static const std::set<std::string> known{"experiment", "body", "plant_flow", "controller_flow", "mpc", "sim",
                                           "network", "train", "data", "grid", "tightline"};
  for (const auto& [name, _] : tree) {
    if (!known.count(name)) throw ConfigError(fmt::format("config: unknown section '[{}]'", name));
  }
  auto section = [&](const std::string& name) {
    const auto child = tree.get_child_optional(pt::ptree::path_type(name, '\0'));
    return Section(child ? &*child : nullptr, name);
  };

  ExperimentConfig c;
  {
    Section s = section("experiment");
    std::string preset = "paper-sim";
    s.get("preset", [&](const std::string&, const std::string& v) { preset = trim(v); });
    if (preset != "paper-sim") throw ConfigError(fmt::format("config: unknown preset '{}'", preset));
    c = ExperimentConfig::paper_sim();
    s.get("name", [&](const std::string&, const std::string& v) { c.name = trim(v); });
    s.get("seed", [&](const std::string& k, const std::string& v) { c.seed = static_cast<std::uint64_t>(to_int(k, v)); });
    s.get("output_dir", [&](const std::string&, const std::string& v) { c.output_dir = trim(v); });
    s.finish();
  }
  {
    Section s = section("body");
    double mass = c.sim.body.mass(), g = c.sim.body.gravity();
    Eigen::Vector3d inertia = c.sim.body.inertia().diagonal();
    s.real("mass", mass);
    s.real("gravity", g);
    s.real("ixx", inertia.x());
    s.real("iyy", inertia.y());
    s.real("izz", inertia.z());
    s.finish();
    c.sim.body = RigidBodyParams(mass, inertia.asDiagonal(), g);
    // Thrust bounds and the momentum-theory inflow depend on the body.
    c.sim.ocp = OcpConfig::defaults(c.sim.body);
    c.plant_flow.u_h = FlowParams::momentum_theory_u_h(c.sim.body, c.plant_flow.d_prop, c.plant_flow.rho);
    c.controller_flow.u_h = c.plant_flow.u_h;
  }
  {
    Section s = section("plant_flow");
    read_flow(s, c.plant_flow, c.sim.body);
    s.finish();
  }
  {
    Section s = section("controller_flow");
    read_flow(s, c.controller_flow, c.sim.body);
    s.finish();
  }
  {
    Section s = section("mpc");
    OcpConfig& o = c.sim.ocp;
    double qp = o.q_diag[0], qv = o.q_diag[3], qq = o.q_diag[6], qw = o.q_diag[10];
    double rt = o.r_diag[0], ra = o.r_diag[1], terminal = o.p_diag[0] / o.q_diag[0];
    double vmax = o.x_upper[idx::kVel], wmax = o.x_upper[idx::kRate], amax = o.u_upper[1];
    double thrust_factor = o.u_upper[0] / c.sim.body.hover_thrust();
    s.integer("horizon", o.horizon);
    s.real("dt", o.dt);
    s.real("q_position", qp);
    s.real("q_velocity", qv);
    s.real("q_attitude", qq);
    s.real("q_rate", qw);
    s.real("r_thrust", rt);
    s.real("r_torque", ra);
    s.real("terminal_scale", terminal);
    s.real("max_velocity", vmax);
    s.real("max_rate", wmax);
    s.real("max_torque", amax);
    s.real("max_thrust_factor", thrust_factor);
    s.integer("max_sqp_iters", o.max_sqp_iters);
    s.real("kkt_tolerance", o.kkt_tolerance);
    s.real("state_bound_weight", o.state_bound_weight);
    s.finish();
    o.q_diag << qp, qp, qp, qv, qv, qv, qq, qq, qq, qq, qw, qw, qw;
    o.r_diag << rt, ra, ra, ra;
    o.p_diag = terminal * o.q_diag;
    o.x_lower.segment<3>(idx::kVel).setConstant(-vmax);
    o.x_upper.segment<3>(idx::kVel).setConstant(vmax);
    o.x_lower.segment<3>(idx::kRate).setConstant(-wmax);
    o.x_upper.segment<3>(idx::kRate).setConstant(wmax);
    o.u_lower << 0.0, -amax, -amax, -amax;
    o.u_upper << thrust_factor * c.sim.body.hover_thrust(), amax, amax, amax;
  }
  {
    Section s = section("sim");
    s.real("plant_dt", c.sim.plant_dt);
    s.integer("control_period_steps", c.sim.control_period_steps);
    s.integer("grid_resolution", c.sim.grid_resolution);
    s.real("lambda", c.sim.lambda);
    s.real("base_height", c.sim.base_height);
    s.real("lemniscate_amplitude", c.sim.lemniscate_amplitude);
    s.real("rk45_rel_tol", c.sim.rk45.rel_tol);
    s.real("rk45_abs_tol", c.sim.rk45.abs_tol);
    s.get("top_mode", [&](const std::string& k, const std::string& v) {
      const std::string t = trim(v);
      if (t == "kinematic") {
        c.sim.top_mode = TopVehicleMode::kKinematic;
      } else if (t == "nominal-mpc") {
        c.sim.top_mode = TopVehicleMode::kNominalMpc;
      } else {
        throw ConfigError(fmt::format("config: key '{}' expects kinematic or nominal-mpc, got '{}'", k, v));
      }
    });
    s.finish();
  }
  {
    Section s = section("network");
    s.get("preset", [&](const std::string& k, const std::string& v) {
      const std::string t = trim(v);
      if (t == "simulation") {
        c.arch = Architecture::simulation_preset();
      } else if (t == "physical") {
        c.arch = Architecture::physical_preset();
      } else {
        throw ConfigError(fmt::format("config: key '{}' expects simulation or physical, got '{}'", k, v));
      }
    });
    s.finish();
  }
  {
    Section s = section("train");
    TrainConfig& t = c.train;
    s.integer("epochs", t.epochs);
    s.real("learning_rate", t.learning_rate);
    s.real("init_range", t.init_range);
    s.get("seed", [&](const std::string& k, const std::string& v) { t.seed = static_cast<std::uint64_t>(to_int(k, v)); });
    s.get("variant", [&](const std::string&, const std::string& v) { t.variant = model_tag_from_string(trim(v)); });
    s.integer("grad_check_draws", t.grad_check_draws);
    s.get("grad_check_samples", [&](const std::string& k, const std::string& v) {
      t.grad_check_samples = static_cast<std::size_t>(to_int(k, v));
    });
    s.real("grad_check_step", t.grad_check_step);
    s.real("grad_check_tolerance", t.grad_check_tolerance);
    s.finish();
  }
  {
    Section s = section("data");
    s.get("kinds", [&](const std::string&, const std::string& v) {
      c.data.kinds.clear();
      for (const auto& k : split_list(v)) c.data.kinds.push_back(scenario_kind_from_string(k));
    });
    s.real("speed", c.data.speed);
    s.reals("separations", c.data.separations);
    s.real("duration", c.data.duration);
    s.finish();
  }
  {
    Section s = section("grid");
    s.reals("speeds", c.grid.speeds);
    s.reals("separations", c.grid.separations);
    s.get("kinds", [&](const std::string&, const std::string& v) {
      c.grid.kinds.clear();
      for (const auto& k : split_list(v)) c.grid.kinds.push_back(scenario_kind_from_string(k));
    });
    s.get("variants", [&](const std::string&, const std::string& v) {
      c.grid.variants.clear();
      for (const auto& k : split_list(v)) c.grid.variants.push_back(model_tag_from_string(k));
    });
    s.real("duration", c.grid.duration);
    s.real("train_speed", c.grid.train_speed);
    s.reals("train_separations", c.grid.train_separations);
    s.finish();
  }
  {
    Section s = section("tightline");
    s.real("separation", c.tightline.separation);
    s.real("speed", c.tightline.speed);
    s.real("duration", c.tightline.duration);
    s.finish();
  }
  c.grid.seed = c.seed;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("config: cannot open '{}'", path));
  return parse_config(in);
}

std::string to_ini(const ExperimentConfig& c) {
  std::ostringstream out;
  const OcpConfig& o = c.sim.ocp;
  const Eigen::Vector3d inertia = c.sim.body.inertia().diagonal();
  out << fmt::format("[experiment]\npreset = paper-sim\nname = {}\nseed = {}\noutput_dir = {}\n\n", c.name, c.seed,
                     c.output_dir);
  out << fmt::format("[body]\nmass = {}\ngravity = {}\nixx = {}\niyy = {}\nizz = {}\n\n", num(c.sim.body.mass()),
                     num(c.sim.body.gravity()), num(inertia.x()), num(inertia.y()), num(inertia.z()));
  write_flow(out, "plant_flow", c.plant_flow);
  write_flow(out, "controller_flow", c.controller_flow);
  out << fmt::format(
      "[mpc]\nhorizon = {}\ndt = {}\nq_position = {}\nq_velocity = {}\nq_attitude = {}\nq_rate = {}\nr_thrust = {}\n"
      "r_torque = {}\nterminal_scale = {}\nmax_velocity = {}\nmax_rate = {}\nmax_torque = {}\nmax_thrust_factor = {}\n"
      "max_sqp_iters = {}\nkkt_tolerance = {}\nstate_bound_weight = {}\n\n",
      o.horizon, num(o.dt), num(o.q_diag[0]), num(o.q_diag[3]), num(o.q_diag[6]), num(o.q_diag[10]), num(o.r_diag[0]),
      num(o.r_diag[1]), num(o.p_diag[0] / o.q_diag[0]), num(o.x_upper[idx::kVel]), num(o.x_upper[idx::kRate]),
      num(o.u_upper[1]), num(o.u_upper[0] / c.sim.body.hover_thrust()), o.max_sqp_iters, num(o.kkt_tolerance),
      num(o.state_bound_weight));
  out << fmt::format(
      "[sim]\nplant_dt = {}\ncontrol_period_steps = {}\ngrid_resolution = {}\nlambda = {}\nbase_height = {}\n"
      "lemniscate_amplitude = {}\nrk45_rel_tol = {}\nrk45_abs_tol = {}\ntop_mode = {}\n\n",
      num(c.sim.plant_dt), c.sim.control_period_steps, c.sim.grid_resolution, num(c.sim.lambda), num(c.sim.base_height),
      num(c.sim.lemniscate_amplitude), num(c.sim.rk45.rel_tol), num(c.sim.rk45.abs_tol),
      c.sim.top_mode == TopVehicleMode::kKinematic ? "kinematic" : "nominal-mpc");
  out << fmt::format("[network]\npreset = {}\n\n", c.arch.branches == 1 ? "physical" : "simulation");
  out << fmt::format(
      "[train]\nepochs = {}\nlearning_rate = {}\ninit_range = {}\nseed = {}\nvariant = {}\ngrad_check_draws = {}\n"
      "grad_check_samples = {}\ngrad_check_step = {}\ngrad_check_tolerance = {}\n\n",
      c.train.epochs, num(c.train.learning_rate), num(c.train.init_range), c.train.seed, to_string(c.train.variant),
      c.train.grad_check_draws, c.train.grad_check_samples, num(c.train.grad_check_step),
      num(c.train.grad_check_tolerance));
  auto kinds = [](const std::vector<ScenarioKind>& k) { return join(k, [](ScenarioKind x) { return to_string(x); }); };
  out << fmt::format("[data]\nkinds = {}\nspeed = {}\nseparations = {}\nduration = {}\n\n", kinds(c.data.kinds),
                     num(c.data.speed), join(c.data.separations, num), num(c.data.duration));
  out << fmt::format(
      "[grid]\nspeeds = {}\nseparations = {}\nkinds = {}\nvariants = {}\nduration = {}\ntrain_speed = {}\n"
      "train_separations = {}\n\n",
      join(c.grid.speeds, num), join(c.grid.separations, num), kinds(c.grid.kinds),
      join(c.grid.variants, [](ModelTag t) { return to_string(t); }), num(c.grid.duration), num(c.grid.train_speed),
      join(c.grid.train_separations, num));
  out << fmt::format("[tightline]\nseparation = {}\nspeed = {}\nduration = {}\n", num(c.tightline.separation),
                     num(c.tightline.speed), num(c.tightline.duration));
  return out.str();
}

}  // namespace dwknode
