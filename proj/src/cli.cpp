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

#include "dwknode/cli.hpp"

#include "dwknode/io.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dwknode {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string dataset;
  std::vector<std::string> models;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string variant;
  std::string scenario = "grid";
  int jobs = 1;
};

ExperimentConfig load(const Options& o) {
  if (!fs::exists(o.config)) throw UsageError(fmt::format("config file '{}' not found", o.config));
  ExperimentConfig cfg = load_config(o.config);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.grid.seed = *o.seed;
    cfg.train.seed = *o.seed;
  }
  return cfg;
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::string or_default(const std::string& value, const fs::path& fallback) {
  return value.empty() ? fallback.string() : value;
}

int cmd_collect(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = load(o);
  if (cfg.data.duration < cfg.sim.plant_dt) throw std::runtime_error("empty dataset: segment duration below one plant step");
  const Dataset data = collect_training_data(cfg.training_scenarios(), cfg.sim);
  const std::string path = or_default(o.out, fs::path(cfg.output_dir) / "dataset.csv");
  ensure_parent(path);
  write_dataset_csv(data, path);
  out << fmt::format("samples: {}\nsegments: {}\npairs: {}\nwritten: {}\nsha256: {}\n", data.size(),
                     data.segment_starts.size(), data.pair_count(), path, sha256_file(path));
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg = load(o);
  if (!o.variant.empty()) cfg.train.variant = model_tag_from_string(o.variant);
  if (cfg.train.variant != ModelTag::kKnode && cfg.train.variant != ModelTag::kKnodeDw) {
    throw UsageError("train: --variant must be knode or knode-dw");
  }
  if (o.dataset.empty()) throw UsageError("train: --dataset is required");
  const Dataset data = read_dataset_csv(o.dataset);
  const TrainReport report = train(data, cfg.train, cfg.arch, cfg.training_model());

  const std::string path =
      or_default(o.out, fs::path(cfg.output_dir) / fmt::format("model-{}.json", to_string(cfg.train.variant)));
  ensure_parent(path);
  save_knode(report.theta, cfg.train.variant, path);
  const std::string report_path = (fs::path(path).replace_extension("").string()) + ".report.json";
  write_text_file(report_path, train_report_json(report, false));
  out << fmt::format("variant: {}\ngradient check: max relative error {:.3e} (tolerance {:.0e})\n",
                     to_string(report.variant), report.check.max_relative_error, report.check.tolerance);
  out << fmt::format("loss: {:.6e} -> {:.6e} over {} epochs\nmodel: {}\nsha256: {}\nreport: {}\n",
                     report.loss_history.front(), report.loss_history.back(), report.loss_history.size() - 1, path,
                     sha256_file(path), report_path);
  err << fmt::format("training took {:.1f} s\n", report.wall_time_s);
  return kExitOk;
}

struct LoadedModels {
  TrainedModels models;
  nlohmann::json manifest = nlohmann::json::array();
};

LoadedModels load_models(const std::vector<std::string>& paths) {
  LoadedModels out;
  for (const std::string& p : paths) {
    ModelTag tag = ModelTag::kNominal;
    auto theta = std::make_shared<const KnodeParams>(load_knode(p, &tag));
    if (tag == ModelTag::kKnode) {
      out.models.knode = theta;
    } else if (tag == ModelTag::kKnodeDw) {
      out.models.knode_dw = theta;
    } else {
      throw UsageError(fmt::format("model file '{}' records variant {}", p, to_string(tag)));
    }
    out.manifest.push_back(
        {{"file", fs::path(p).filename().string()}, {"variant", to_string(tag)}, {"sha256", sha256_file(p)}});
  }
  return out;
}

void require_models(const std::vector<ModelTag>& variants, const TrainedModels& m) {
  for (ModelTag v : variants) {
    if ((v == ModelTag::kKnode && !m.knode) || (v == ModelTag::kKnodeDw && !m.knode_dw)) {
      throw UsageError(fmt::format("variant {} needs a trained model (--model)", to_string(v)));
    }
  }
}

std::string table(void (*writer)(const HeatmapReport&, std::ostream&), const HeatmapReport& r) {
  std::ostringstream s;
  writer(r, s);
  return s.str();
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  ExperimentConfig cfg = load(o);
  const LoadedModels loaded = load_models(o.models);
  const std::string dir = or_default(o.out, fs::path(cfg.output_dir) / "report");
  fs::create_directories(dir);

  nlohmann::json manifest;
  manifest["format"] = "dwknode-report";
  manifest["version"] = 1;
  const std::string ini = to_ini(cfg);
  manifest["config_sha256"] = sha256_hex(ini);
  manifest["config"] = ini;
  manifest["models"] = loaded.manifest;
  manifest["scenario"] = o.scenario;

  std::map<std::string, std::string> files;
  int code = kExitOk;

  if (o.scenario == "tightline") {
    std::vector<ModelTag> variants{ModelTag::kNominal};
    variants.push_back(o.variant.empty() ? ModelTag::kKnodeDw : model_tag_from_string(o.variant));
    if (variants[1] == ModelTag::kNominal) variants.pop_back();
    require_models(variants, loaded.models);
    const auto results = run_tightline(cfg, variants, loaded.models);
    std::ostringstream csv;
    csv << "variant,ok,mean_vertical_sep,mean_radial_sep,rmse,z_max\n";
    out << fmt::format("tightline: commanded separation {} m, speed {} m/s\n", cfg.tightline.separation,
                       cfg.tightline.speed);
    for (const auto& r : results) {
      csv << fmt::format("{},{},{:.9g},{:.9g},{:.9g},{:.9g}\n", to_string(r.variant), r.ok ? 1 : 0,
                         r.metrics.mean_vertical_sep, r.metrics.mean_radial_sep, r.metrics.rmse, r.metrics.z_max);
      out << fmt::format("  {:<11} mean vertical separation {:.4f} m{}\n", to_string(r.variant),
                         r.metrics.mean_vertical_sep, r.ok ? "" : " (failed: " + r.error + ")");
    }
    files["tightline.csv"] = csv.str();
    if (std::none_of(results.begin(), results.end(), [](const TightLineResult& r) { return r.ok; })) code = kExitRuntime;
  } else {
    if (o.scenario != "grid") cfg.grid.kinds = {scenario_kind_from_string(o.scenario)};
    if (!o.variant.empty()) {
      const ModelTag v = model_tag_from_string(o.variant);
      cfg.grid.variants = {ModelTag::kNominal};
      if (v != ModelTag::kNominal) cfg.grid.variants.push_back(v);
    }
    require_models(cfg.grid.variants, loaded.models);
    const HeatmapReport report =
        heatmap_report(cfg.grid, cfg.sim, cfg.plant_flow, cfg.controller_flow, loaded.models, std::max(1, o.jobs));
    files["tracking.csv"] = table(&write_tracking_table, report);
    files["prediction.csv"] = table(&write_prediction_table, report);
    files["summary.csv"] = table(&write_summary_table, report);
    out << files["summary.csv"];
    nlohmann::json cells = nlohmann::json::array();
    for (const CellResult& c : report.cells) {
      cells.push_back({{"kind", to_string(c.kind)},
                       {"speed", c.speed},
                       {"separation", c.separation},
                       {"variant", to_string(c.variant)},
                       {"split", c.training_cell ? "train" : "held-out"},
                       {"ok", c.ok},
                       {"error", c.error}});
    }
    manifest["cells"] = cells;
    out << fmt::format("cells: {} failed: {}\n", report.cells.size(), report.failures());
    if (report.failures() == report.cells.size()) code = kExitRuntime;

    const auto checks = grid_acceptance(report);
    for (const auto& c : checks) out << format_check(c) << '\n';
    if (code == kExitOk && std::any_of(checks.begin(), checks.end(), [](const CheckResult& c) { return !c.passed; })) {
      code = kExitThreshold;
    }
  }

  nlohmann::json hashes;
  for (const auto& [name, text] : files) {
    write_text_file((fs::path(dir) / name).string(), text);
    hashes[name] = sha256_hex(text);
  }
  manifest["files"] = hashes;
  write_text_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  out << fmt::format("report: {}\n", dir);
  return code;
}

int cmd_check(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = load(o);
  bool ok = true;
  for (const CheckResult& r : run_diagnostics(cfg)) {
    out << format_check(r) << '\n';
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitThreshold;
}

}  // namespace

std::vector<CheckResult> grid_acceptance(const HeatmapReport& report) {
  std::vector<CheckResult> out;
  for (ModelTag v : {ModelTag::kNominal, ModelTag::kKnode, ModelTag::kDw, ModelTag::kKnodeDw, ModelTag::kOmniscient}) {
    if (std::none_of(report.cells.begin(), report.cells.end(), [&](const CellResult& c) { return c.variant == v; })) {
      return out;
    }
  }
  auto check = [&](std::string name, double measured, double threshold, std::string detail = {}) {
    CheckResult r;
    r.name = std::move(name);
    r.measured = measured;
    r.threshold = threshold;
    r.passed = std::isfinite(measured) && measured <= threshold;
    r.detail = std::move(detail);
    out.push_back(r);
  };
  check("prediction_force_ratio", report.mean_force_ratio(ModelTag::kKnodeDw), 0.30, "knode-dw vs nominal");
  check("normalized_rmse", report.mean_norm_rmse(ModelTag::kKnodeDw), 0.30, "knode-dw");
  check("normalized_z_max", report.mean_norm_z_max(ModelTag::kKnodeDw), 0.30, "knode-dw");

  // Omniscient floor, cell by cell, against the learning variants.
  double worst_excess = -std::numeric_limits<double>::infinity();
  for (const CellResult& c : report.cells) {
    if (c.variant != ModelTag::kOmniscient) continue;
    for (const CellResult& d : report.cells) {
      if (d.kind != c.kind || d.speed != c.speed || d.separation != c.separation) continue;
      if (d.variant != ModelTag::kKnode && d.variant != ModelTag::kKnodeDw) continue;
      const double excess = (c.ok && d.ok) ? c.metrics.rmse - d.metrics.rmse
                                           : std::numeric_limits<double>::infinity();
      worst_excess = std::max(worst_excess, excess);
    }
  }
  check("omniscient_floor", worst_excess, 1e-6, "max over cells of rmse(omniscient) - rmse(learning variant), m");
  const double omni = report.mean_rmse(ModelTag::kOmniscient);
  const double kdw = report.mean_rmse(ModelTag::kKnodeDw);
  check("knode_dw_vs_omniscient", kdw / omni, 1.5, fmt::format("{:.4g} m vs {:.4g} m", kdw, omni));
  const double best_single = std::min(report.mean_rmse(ModelTag::kKnode), report.mean_rmse(ModelTag::kDw));
  check("knowledge_ablation", kdw - best_single, 0.0,
        fmt::format("knode-dw {:.4g} m, knode {:.4g} m, dw {:.4g} m", kdw, report.mean_rmse(ModelTag::kKnode),
                    report.mean_rmse(ModelTag::kDw)));
  return out;
}

std::vector<TightLineResult> run_tightline(const ExperimentConfig& cfg, const std::vector<ModelTag>& variants,
                                           const TrainedModels& models) {
  std::vector<TightLineResult> out;
  for (ModelTag v : variants) {
    TightLineResult r;
    r.variant = v;
    try {
      const RunLog log = simulate_closed_loop(cfg.tightline_scenario(v), cfg.sim, models);
      r.ok = log.completed;
      r.error = log.error;
      r.metrics = tracking_metrics(log);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    out.push_back(r);
  }
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Downwash-aware residual dynamics: data collection, training, evaluation and self-checks"};
  app.require_subcommand(1);
  Options o;
  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", o.config, "Experiment INI file")->required(); };
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "Override the experiment and training seed"); };

  CLI::App* collect = app.add_subcommand("collect", "Run the nominal-MPC flights and write the training CSV");
  add_config(collect);
  add_seed(collect);
  collect->add_option("--out", o.out, "Dataset path (default <output_dir>/dataset.csv)");

  CLI::App* train_cmd = app.add_subcommand("train", "Gradient check, then train a residual network");
  add_config(train_cmd);
  add_seed(train_cmd);
  train_cmd->add_option("--dataset", o.dataset, "Training CSV")->required();
  train_cmd->add_option("--out", o.out, "Model path (default <output_dir>/model-<variant>.json)");
  train_cmd->add_option("--variant", o.variant, "knode or knode-dw");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Closed-loop grid or tight-line stress case");
  add_config(evaluate);
  add_seed(evaluate);
  evaluate->add_option("--model", o.models, "Trained model file(s); the file records its variant");
  evaluate->add_option("--out", o.out, "Report directory (default <output_dir>/report)");
  evaluate->add_option("--variant", o.variant, "Compare only this variant against nominal");
  evaluate->add_option("--scenario", o.scenario, "grid (default), tightline, or one scenario kind");
  evaluate->add_option("--jobs", o.jobs, "Worker threads for grid cells")->check(CLI::PositiveNumber);

  CLI::App* check = app.add_subcommand("check", "Run the invariant suite");
  add_config(check);

  CLI::App* show = app.add_subcommand("show-config", "Print the fully resolved configuration");
  add_config(show);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*collect) return cmd_collect(o, out);
    if (*train_cmd) return cmd_train(o, out, err);
    if (*evaluate) return cmd_evaluate(o, out);
    if (*check) return cmd_check(o, out);
    if (*show) {
      out << to_ini(load(o));
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace dwknode
