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

// Acceptance harness: runs the full study through the command-line front end, then
// re-derives every criterion from the emitted files and from independent reference
// computations. Prints one PASS/FAIL line per criterion and exits non-zero if any fails.

#include "dwknode/cli.hpp"
#include "dwknode/config.hpp"
#include "dwknode/integrators.hpp"
#include "dwknode/io.hpp"
#include "oracles.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

using namespace dwknode;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Line {
  int id;
  std::string name;
  bool passed;
  std::string detail;
};

std::vector<Line> g_lines;

void report(int id, std::string name, bool passed, std::string detail) {
  g_lines.push_back({id, name, passed, detail});
  std::cout << fmt::format("CRITERION {:>2} {} {}: {}\n", id, passed ? "PASS" : "FAIL", name, detail) << std::flush;
}

void note(const std::string& text) { std::cout << "  note: " << text << '\n' << std::flush; }

int cli(std::vector<std::string> args, std::string* captured = nullptr) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (captured) *captured = out.str();
  if (code != 0 && code != kExitThreshold) std::cerr << err.str();
  return code;
}

// Rows of a CSV table keyed by header name.
std::vector<std::map<std::string, std::string>> read_table(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
  };
  std::getline(in, line);
  header = split(line);
  while (std::getline(in, line)) {
    const auto cells = split(line);
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(row);
  }
  return rows;
}

double num(const std::map<std::string, std::string>& row, const std::string& key) {
  return std::stod(row.at(key));
}

std::string cell_key(const std::map<std::string, std::string>& row) {
  return row.at("kind") + "/" + row.at("speed") + "/" + row.at("separation");
}

// ---------------------------------------------------------------- criteria 1-4

void grid_criteria(const std::string& dir, double eval_seconds) {
  const auto tracking = read_table(dir + "/tracking.csv");
  const auto prediction = read_table(dir + "/prediction.csv");

  std::map<std::string, std::map<std::string, double>> rmse, zmax;  // cell -> variant -> value
  std::map<std::string, bool> all_ok;
  for (const auto& r : tracking) {
    rmse[cell_key(r)][r.at("variant")] = r.at("ok") == "1" ? num(r, "rmse") : NAN;
    zmax[cell_key(r)][r.at("variant")] = r.at("ok") == "1" ? num(r, "z_max") : NAN;
  }
  // Force RMSE of each variant over the nominal model's, averaged over cells.
  std::map<std::string, std::map<std::string, double>> force;
  for (const auto& r : prediction) force[cell_key(r)][r.at("variant")] = num(r, "force_rmse");

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? NAN : s / static_cast<double>(v.size());
  };
  std::vector<double> force_ratio, norm_rmse, norm_zmax;
  std::map<std::string, std::vector<double>> raw;
  double worst_floor = -INFINITY;
  std::string worst_floor_cell;
  int failed_cells = 0;
  for (const auto& [cell, by_variant] : rmse) {
    for (const auto& [v, x] : by_variant) {
      if (std::isnan(x)) ++failed_cells;
      raw[v].push_back(x);
    }
    force_ratio.push_back(force[cell]["knode-dw"] / force[cell]["nominal"]);
    norm_rmse.push_back(by_variant.at("knode-dw") / by_variant.at("nominal"));
    norm_zmax.push_back(zmax[cell]["knode-dw"] / zmax[cell]["nominal"]);
    for (const char* v : {"knode", "knode-dw"}) {
      const double excess = by_variant.at("omniscient") - by_variant.at(v);
      if (!(excess <= worst_floor)) {
        worst_floor = std::isnan(excess) ? INFINITY : excess;
        worst_floor_cell = cell + " vs " + v;
      }
    }
  }
  const double fr = mean(force_ratio);
  report(1, "prediction improvement", fr <= 0.30 && eval_seconds < 7200.0,
         fmt::format("mean knode-dw/nominal force RMSE ratio {:.4f} (<= 0.30) over {} cells; evaluation {:.0f} s "
                     "(< 7200 s)",
                     fr, force_ratio.size(), eval_seconds));
  const double nr = mean(norm_rmse), nz = mean(norm_zmax);
  report(2, "closed-loop improvement", nr <= 0.30 && nz <= 0.30,
         fmt::format("mean normalized RMSE {:.4f} (<= 0.30), mean normalized z_max {:.4f} (<= 0.30)", nr, nz));
  const double m_omni = mean(raw["omniscient"]), m_kdw = mean(raw["knode-dw"]);
  report(3, "baseline ordering", worst_floor <= 1e-6 && m_kdw <= 1.5 * m_omni,
         fmt::format("worst omniscient excess {:.3g} m at {} (<= 1e-6); mean RMSE knode-dw {:.4g} m vs 1.5 x "
                     "omniscient {:.4g} m",
                     worst_floor, worst_floor_cell, m_kdw, 1.5 * m_omni));
  const double m_kn = mean(raw["knode"]), m_dw = mean(raw["dw"]);
  report(4, "knowledge ablation", m_kdw <= m_kn && m_kdw <= m_dw,
         fmt::format("mean RMSE knode-dw {:.4g} m, knode {:.4g} m, dw {:.4g} m, nominal {:.4g} m", m_kdw, m_kn, m_dw,
                     mean(raw["nominal"])));
  if (failed_cells) note(fmt::format("{} grid runs failed", failed_cells));
}

// ---------------------------------------------------------------- criterion 5

void gradient_criterion(const ExperimentConfig& cfg, const Dataset& full) {
  const Dataset data = full.head(10);
  const TrainingModel model = cfg.training_model();
  TrainConfig tc = cfg.train;
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int draw = 0; draw < 10; ++draw) {
    KnodeParams theta = KnodeParams::initialize(cfg.arch, 1000 + static_cast<std::uint64_t>(draw), 0.5);
    fit_normalization(theta, data, tc.variant, model);
    const Eigen::VectorXd w = theta.flatten();
    const Eigen::VectorXd g = loss_gradient(theta, data, tc, model);
    // Central differences written out here rather than borrowed from the library.
    Eigen::VectorXd fd(w.size());
    KnodeParams probe = theta;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(w[i]));
      Eigen::VectorXd wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      probe.assign(wp);
      const double lp = loss(probe, data, tc, model);
      probe.assign(wm);
      const double lm = loss(probe, data, tc, model);
      fd[i] = (lp - lm) / (2.0 * h);
    }
    worst = std::max(worst, (g - fd).norm() / std::max(fd.norm(), 1e-300));
  }
  const double secs = seconds_since(t0);
  report(5, "gradient correctness", worst < 1e-5 && secs < 1.0,
         fmt::format("max relative error {:.3e} (< 1e-5) over 10 draws on 10 samples, {:.3f} s (< 1 s)", worst, secs));
}

// ---------------------------------------------------------------- criterion 6

void quadrature_criterion(const ExperimentConfig& cfg) {
  const double lambda = cfg.sim.lambda;
  const QuadratureGrid g25(25, lambda), g50(50, lambda), g100(100, lambda), g800(800, lambda);
  auto wrench = [&](double sep, double off, const QuadratureGrid& g) {
    const StateVec top = hover_state(Eigen::Vector3d(0, 0, 1.0 + sep));
    const StateVec x = hover_state(Eigen::Vector3d(off, 0, 1.0));
    const Wrench w = disturbance_wrench(x, top, cfg.plant_flow, g);
    Eigen::Matrix<double, 6, 1> v;
    v << w.force, w.torque / lambda;
    return v;
  };
  double worst_vs100 = 0.0, worst_half = 0.0, worst_quarter = 0.0;
  for (double sep : {0.2, 0.3, 0.35, 0.4}) {
    for (double off : {0.0, 0.01, 0.03}) {
      const auto w100 = wrench(sep, off, g100), w800 = wrench(sep, off, g800);
      const auto w25 = wrench(sep, off, g25), w50 = wrench(sep, off, g50);
      worst_vs100 = std::max(worst_vs100, (w25 - w100).norm() / w100.norm());
      const double e25 = (w25 - w800).norm(), e50 = (w50 - w800).norm(), e100 = (w100 - w800).norm();
      worst_half = std::max(worst_half, e50 / e25);
      worst_quarter = std::max(worst_quarter, e100 / e25);
    }
  }
  report(6, "quadrature convergence", worst_vs100 < 0.01 && worst_half <= 0.5 && worst_quarter <= 0.25,
         fmt::format("25x25 vs 100x100 worst relative wrench difference {:.3e} (< 1e-2); vs 800x800 reference "
                     "e(50)/e(25) <= {:.3f} (<= 0.5), e(100)/e(25) <= {:.3f} (<= 0.25)",
                     worst_vs100, worst_half, worst_quarter));
}

// ---------------------------------------------------------------- criterion 7

void integrator_criterion(const ExperimentConfig& cfg, const TrainedModels& models) {
  const RigidBodyParams& body = cfg.sim.body;
  StateVec x = hover_state(Eigen::Vector3d(0, 0, 1));
  body_rate(x) = Eigen::Vector3d(0, 0, 1.0);
  const StateVec x0 = x;
  double drift = 0.0;
  const auto f = [&](const StateVec& s) { return nominal_derivative(s, body.hover_input(), body); };
  for (int k = 0; k < 2000; ++k) {
    x = rk45_integrate(f, x, 0.005, cfg.sim.rk45);
    drift = std::max(drift, (position(x) - position(x0)).norm());
  }

  double qerr = 0.0;
  std::size_t steps = 0;
  for (ScenarioKind kind : {ScenarioKind::kStacked, ScenarioKind::kCrossing, ScenarioKind::kLemniscateStacked}) {
    for (ModelTag v : {ModelTag::kNominal, ModelTag::kKnodeDw}) {
      Scenario s = cfg.tightline_scenario(v);
      s.kind = kind;
      s.separation = 0.3;
      const RunLog log = simulate_closed_loop(s, cfg.sim, models);
      for (const StateVec& b : log.bottom) qerr = std::max(qerr, std::abs(quaternion(b).norm() - 1.0));
      steps += log.size();
    }
  }

  // x' = -x from 1 over [0, 1]; the exact solution is the oracle.
  const DerivativeFn decay = [](const Eigen::VectorXd& y) -> Eigen::VectorXd { return -y; };
  auto err = [&](int n) {
    Eigen::VectorXd y = Eigen::VectorXd::Ones(1);
    for (int k = 0; k < n; ++k) y = rk4_step_raw(decay, y, 1.0 / n);
    return std::abs(y[0] - std::exp(-1.0));
  };
  const double order = std::log2(err(8) / err(16));
  report(7, "integrator and attitude sanity", drift < 1e-6 && qerr <= 1e-9 && order >= 3.9,
         fmt::format("hover drift {:.3g} m over 10 s (< 1e-6); max | |q| - 1 | {:.3g} over {} logged steps (<= 1e-9); "
                     "RK4 order {:.4f} (>= 3.9)",
                     drift, qerr, steps, order));
}

// ---------------------------------------------------------------- criterion 8

void mpc_criterion(const ExperimentConfig& cfg) {
  Scenario s = cfg.tightline_scenario(ModelTag::kNominal);
  s.speed = 0.0;
  s.separation = 0.3;
  s.duration = 5.0;
  s.plant_flow.c_d = 0.0;
  s.start_offset = Eigen::Vector3d(0.02, -0.01, 0.015);
  const RunLog log = simulate_closed_loop(s, cfg.sim);
  double steady = 0.0;
  for (std::size_t k = 0; k < log.size(); ++k) {
    if (log.t[k] >= 4.0) steady = std::max(steady, (position(log.bottom[k]) - position(log.reference[k])).norm());
  }

  ModelContext ctx;
  ctx.body = cfg.sim.body;
  ctx.grid = std::make_shared<QuadratureGrid>(cfg.sim.grid_resolution, cfg.sim.lambda);
  const OcpConfig& ocp = cfg.sim.ocp;
  const StateVec ref = hover_state(Eigen::Vector3d(0, 0, 1));
  const StateVec far_top = hover_state(Eigen::Vector3d(50, 0, 1));
  StateMat a;
  InputMat b;
  oracle::fd_step_jacobians(
      [&](const StateVec& xs, const InputVec& us) {
        return predict_one_step(ModelVariant::nominal(), xs, us, far_top, ocp.dt, ctx);
      },
      ref, ctx.body.hover_input(), a, b);
  double worst = 0.0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    StateVec dx = StateVec::Zero();
    dx.head<6>() << 3e-4 * u(rng), 3e-4 * u(rng), 3e-4 * u(rng), 1e-3 * u(rng), 1e-3 * u(rng), 1e-3 * u(rng);
    OcpParams p;
    p.x0 = ref + dx;
    p.refs.assign(static_cast<std::size_t>(ocp.horizon + 1), ref);
    p.top_states.assign(static_cast<std::size_t>(ocp.horizon), far_top);
    const OcpSolution sol = solve_ocp(ocp, p, ModelVariant::nominal(), ctx);
    const InputVec lqr = oracle::lqr_first_control(a, b, ocp, dx);
    const InputVec mpc = sol.controls[0] - ctx.body.hover_input();
    worst = std::max(worst, (mpc - lqr).cwiseAbs().maxCoeff() / lqr.cwiseAbs().maxCoeff());
  }
  report(8, "MPC regulation and LQR consistency", log.completed && steady < 1e-3 && worst <= 0.02,
         fmt::format("steady hover error {:.3g} m (< 1e-3) after a 2.7 cm offset; worst first-control deviation from "
                     "the dense LQR solution {:.3f}% of its largest component (<= 2%)",
                     steady, 100.0 * worst));
}

// ---------------------------------------------------------------- criterion 9

void symmetry_criterion(const ExperimentConfig& cfg) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double orth = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Eigen::Vector4d q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    const StateVec top = make_state(Eigen::Vector3d(u(rng), u(rng), 1 + u(rng)), Eigen::Vector3d::Zero(), q,
                                    Eigen::Vector3d::Zero());
    const StateVec x = hover_state(Eigen::Vector3d(u(rng), u(rng), u(rng)));
    const Eigen::Matrix3d r = flow_frame(x, top).r_fw;
    orth = std::max({orth, (r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(),
                     std::abs(r.determinant() - 1.0)});
  }

  const QuadratureGrid grid(cfg.sim.grid_resolution, cfg.sim.lambda);
  const RigidBodyParams& body = cfg.sim.body;
  auto yaw = [](double psi) { return Eigen::Vector4d(std::cos(psi / 2), 0, 0, std::sin(psi / 2)); };
  double feat = 0.0, force = 0.0;
  for (int i = 0; i < 500; ++i) {
    const double a = std::numbers::pi * u(rng), b = std::numbers::pi * u(rng), turn = std::numbers::pi * u(rng);
    const Eigen::Vector3d pt(0.04 * u(rng), 0.04 * u(rng), 1.2 + 0.2 * std::abs(u(rng)));
    const Eigen::Vector3d p(0.04 * u(rng), 0.04 * u(rng), 1.0), v(0.5 * u(rng), 0.5 * u(rng), 0.2 * u(rng));
    const Eigen::Matrix3d rz = Eigen::AngleAxisd(turn, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const StateVec top = make_state(pt, Eigen::Vector3d::Zero(), yaw(a), Eigen::Vector3d::Zero());
    const StateVec x = make_state(p, v, yaw(b), Eigen::Vector3d::Zero());
    const StateVec top_r = make_state(rz * pt, Eigen::Vector3d::Zero(), yaw(a + turn), Eigen::Vector3d::Zero());
    const StateVec x_r = make_state(rz * p, rz * v, yaw(b + turn), Eigen::Vector3d::Zero());
    feat = std::max(feat, (feature_vector(x_r, top_r) - feature_vector(x, top)).cwiseAbs().maxCoeff());
    const Eigen::Vector3d f = disturbance_derivative(x, top, cfg.plant_flow, body, grid).segment<3>(idx::kVel);
    const Eigen::Vector3d fr = disturbance_derivative(x_r, top_r, cfg.plant_flow, body, grid).segment<3>(idx::kVel);
    force = std::max(force, (fr - rz * f).norm() / std::max(f.norm(), 1e-300));
  }

  double torque = 0.0;
  for (double sep : {0.08, 0.2, 0.3, 0.4}) {
    const Wrench w = disturbance_wrench(hover_state(Eigen::Vector3d(0.3, 0.1, 1.0)),
                                        hover_state(Eigen::Vector3d(0.3, 0.1, 1.0 + sep)), cfg.plant_flow, grid);
    torque = std::max(torque, w.torque.norm());
  }
  report(9, "symmetry suite", orth <= 1e-12 && feat <= 1e-12 && force <= 1e-9 && torque <= 1e-12,
         fmt::format("frame orthonormality {:.2e} over 1e4 poses (<= 1e-12); yaw invariance of features {:.2e} "
                     "(<= 1e-12); force equivariance {:.2e} relative (<= 1e-9); stacked torque {:.2e} N m (<= 1e-12)",
                     orth, feat, force, torque));
}

// ---------------------------------------------------------------- criterion 10

void tightline_criterion(const ExperimentConfig& cfg, const TrainedModels& models) {
  auto sep = [&](const ExperimentConfig& c, ModelTag v) {
    const RunLog log = simulate_closed_loop(c.tightline_scenario(v), c.sim, models);
    return log.completed ? tracking_metrics(log).mean_vertical_sep : NAN;
  };
  const double nom = sep(cfg, ModelTag::kNominal), kdw = sep(cfg, ModelTag::kKnodeDw);
  const double omni = sep(cfg, ModelTag::kOmniscient);
  const double cmd = cfg.tightline.separation;
  report(10, "tight-formation stress", kdw < 0.55 * nom,
         fmt::format("mean vertical separation knode-dw {:.4f} m vs nominal {:.4f} m, ratio {:.3f} (< 0.55); "
                     "commanded {:.3f} m",
                     kdw, nom, kdw / nom, cmd));
  note(fmt::format("omniscient {:.4f} m; excess over commanded: nominal {:.2f} mm, knode-dw {:.2f} mm, omniscient "
                   "{:.2f} mm",
                   omni, 1e3 * (nom - cmd), 1e3 * (kdw - cmd), 1e3 * (omni - cmd)));
  // The ratio is bounded below by cmd / nominal separation; heavier thrust penalties let the nominal sag grow.
  for (double r_thrust : {10.0, 100.0, 1000.0}) {
    ExperimentConfig c = cfg;
    c.sim.ocp.r_diag[0] = r_thrust;
    const double n2 = sep(c, ModelTag::kNominal), k2 = sep(c, ModelTag::kKnodeDw);
    note(fmt::format("sweep r_thrust={:g}: nominal {:.4f} m, knode-dw {:.4f} m, ratio {:.3f}", r_thrust, n2, k2,
                     k2 / n2));
  }
}

// ---------------------------------------------------------------- criterion 11

void determinism_criterion(const fs::path& root) {
  const std::string cfg_path = (root / "small.ini").string();
  write_text_file(cfg_path,
                  "[experiment]\nseed = 11\n[data]\nduration = 0.5\n[train]\nepochs = 60\n"
                  "[grid]\nspeeds = 0.4\nseparations = 0.2,0.35\nkinds = stacked\nduration = 1.0\n");
  std::vector<std::string> hashes[2];
  bool ran = true;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path d = root / fmt::format("repeat{}", rep);
    fs::remove_all(d);
    fs::create_directories(d);
    const std::string ds = (d / "dataset.csv").string();
    const std::string kn = (d / "knode.json").string(), kdw = (d / "knode-dw.json").string();
    ran = ran && cli({"collect", "--config", cfg_path, "--out", ds}) == 0;
    ran = ran && cli({"train", "--config", cfg_path, "--dataset", ds, "--variant", "knode", "--out", kn}) == 0;
    ran = ran && cli({"train", "--config", cfg_path, "--dataset", ds, "--variant", "knode-dw", "--out", kdw}) == 0;
    const int code = cli({"evaluate", "--config", cfg_path, "--model", kn, "--model", kdw, "--out",
                          (d / "report").string()});
    ran = ran && (code == 0 || code == kExitThreshold);
    if (!ran) break;
    for (const char* f : {"dataset.csv", "knode.json", "knode.report.json", "knode-dw.json", "knode-dw.report.json",
                          "report/tracking.csv", "report/prediction.csv", "report/summary.csv",
                          "report/manifest.json"}) {
      hashes[rep].push_back(sha256_file((d / f).string()));
    }
  }
  const bool same = ran && hashes[0] == hashes[1];
  report(11, "determinism", same,
         ran ? fmt::format("{} files (dataset, two models and reports, four report files) compared by SHA-256 across "
                           "two reduced-size collect/train/evaluate repeats: {}",
                           hashes[0].size(), same ? "identical" : "DIFFERENT")
             : std::string("pipeline did not run"));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  const std::string config = argc > 2 ? argv[2] : DWKNODE_SOURCE_DIR "/configs/paper_sim.ini";
  fs::create_directories(root);
  try {
    const ExperimentConfig cfg = load_config(config);
    const std::string ds = (root / "dataset.csv").string();
    const std::string kn = (root / "model-knode.json").string(), kdw = (root / "model-knode-dw.json").string();
    std::string out;

    auto t0 = Clock::now();
    if (cli({"collect", "--config", config, "--out", ds}, &out) != 0) throw std::runtime_error("collect failed");
    note(fmt::format("collect: {} rows in {:.1f} s", read_dataset_csv(ds).size(), seconds_since(t0)));
    for (const auto& [variant, path] : {std::pair{"knode-dw", kdw}, std::pair{"knode", kn}}) {
      t0 = Clock::now();
      if (cli({"train", "--config", config, "--dataset", ds, "--variant", variant, "--out", path}) != 0) {
        throw std::runtime_error(std::string("training failed: ") + variant);
      }
      const auto rep = nlohmann::json::parse(read_text_file(fs::path(path).replace_extension("").string() + ".report.json"));
      note(fmt::format("train {}: loss {:.4e} -> {:.4e} in {:.0f} s", variant, rep["initial_loss"].get<double>(),
                       rep["final_loss"].get<double>(), seconds_since(t0)));
    }
    t0 = Clock::now();
    const int eval_code = cli({"evaluate", "--config", config, "--model", kn, "--model", kdw, "--out",
                               (root / "report").string()}, &out);
    const double eval_seconds = seconds_since(t0);
    if (eval_code != 0 && eval_code != kExitThreshold) throw std::runtime_error("evaluation failed");

    TrainedModels models;
    models.knode = std::make_shared<const KnodeParams>(load_knode(kn));
    models.knode_dw = std::make_shared<const KnodeParams>(load_knode(kdw));

    grid_criteria((root / "report").string(), eval_seconds);
    gradient_criterion(cfg, read_dataset_csv(ds));
    quadrature_criterion(cfg);
    integrator_criterion(cfg, models);
    mpc_criterion(cfg);
    symmetry_criterion(cfg);
    tightline_criterion(cfg, models);
    determinism_criterion(root);
  } catch (const std::exception& e) {
    std::cout << "acceptance harness aborted: " << e.what() << '\n';
    return 2;
  }
  int failed = 0;
  for (const Line& l : g_lines) failed += l.passed ? 0 : 1;
  std::cout << fmt::format("SUMMARY {} of {} criteria passed\n", g_lines.size() - failed, g_lines.size());
  return failed == 0 ? 0 : 1;
}
