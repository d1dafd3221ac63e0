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

#include "dwknode/trainer.hpp"

#include <fmt/format.h>
#include "json.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace dwknode {

// ---------------------------------------------------------------- dataset

std::vector<std::size_t> Dataset::pair_targets() const {
  std::vector<std::size_t> out;
  if (samples.size() < 2) return out;
  out.reserve(samples.size());
  std::size_t seg = 0;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    while (seg + 1 < segment_starts.size() && segment_starts[seg + 1] <= i) ++seg;
    if (segment_starts[seg] < i) out.push_back(i);
  }
  return out;
}

std::size_t Dataset::pair_count() const { return pair_targets().size(); }

void Dataset::validate() const {
  if (!(dt > 0.0)) throw InvalidInput("dataset: dt must be positive");
  if (segment_starts.empty() || segment_starts.front() != 0) {
    throw InvalidInput("dataset: segment list must start at sample 0");
  }
  for (std::size_t k = 1; k < segment_starts.size(); ++k) {
    if (segment_starts[k] <= segment_starts[k - 1] || segment_starts[k] > samples.size()) {
      throw InvalidInput("dataset: segment starts must increase within the sample range");
    }
  }
  if (pair_count() == 0) throw InvalidInput("empty dataset");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (!s.x.allFinite() || !s.x_top.allFinite() || !s.u.allFinite()) {
      throw InvalidInput("dataset: non-finite entry in sample " + std::to_string(i));
    }
  }
}

void Dataset::append(const Dataset& other) {
  if (other.samples.empty()) return;
  if (samples.empty()) {
    *this = other;
    return;
  }
  if (std::abs(other.dt - dt) > 1e-15) throw InvalidInput("dataset: cannot append data with a different dt");
  const std::size_t base = samples.size();
  for (std::size_t s : other.segment_starts) segment_starts.push_back(base + s);
  samples.insert(samples.end(), other.samples.begin(), other.samples.end());
}

Dataset Dataset::head(std::size_t n) const {
  Dataset d;
  d.dt = dt;
  const std::size_t end = segment_starts.size() > 1 ? segment_starts[1] : samples.size();
  d.samples.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(std::min(n, end)));
  return d;
}

const std::vector<std::string>& dataset_columns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> c{"t"};
    const char* state[] = {"px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "wx", "wy", "wz"};
    for (const char* s : state) c.emplace_back(s);
    for (const char* s : state) c.push_back(std::string("t") + s);
    for (const char* s : {"eta", "ax", "ay", "az"}) c.emplace_back(s);
    return c;
  }();
  return cols;
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
  const auto& cols = dataset_columns();
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
  out << '\n';
  std::size_t seg = 0;
  std::string line;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    while (seg + 1 < data.segment_starts.size() && data.segment_starts[seg + 1] <= i) ++seg;
    const double t = static_cast<double>(i - data.segment_starts[seg]) * data.dt;
    const Sample& s = data.samples[i];
    line.clear();
    fmt::format_to(std::back_inserter(line), "{}", t);
    for (int k = 0; k < kStateDim; ++k) fmt::format_to(std::back_inserter(line), ",{}", s.x[k]);
    for (int k = 0; k < kStateDim; ++k) fmt::format_to(std::back_inserter(line), ",{}", s.x_top[k]);
    for (int k = 0; k < kInputDim; ++k) fmt::format_to(std::back_inserter(line), ",{}", s.u[k]);
    out << line << '\n';
  }
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  write_dataset_csv(data, out);
  if (!out) throw InvalidInput("failed writing '" + path + "'");
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(std::string_view field, std::size_t line_no, const std::string& column) {
  while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.remove_suffix(1);
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw InvalidInput("line " + std::to_string(line_no) + ": cannot parse column '" + column + "' value '" +
                       std::string(field) + "'");
  }
  return v;
}

}  // namespace

Dataset read_dataset_csv(std::istream& in) {
  const auto& cols = dataset_columns();
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("dataset: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c >= header.size()) throw InvalidInput("dataset header: missing column '" + cols[c] + "'");
    if (header[c] != cols[c]) {
      throw InvalidInput("dataset header: expected column '" + cols[c] + "' but found '" + std::string(header[c]) + "'");
    }
  }
  if (header.size() != cols.size()) throw InvalidInput("dataset header: unexpected extra columns");

  Dataset d;
  d.samples.clear();
  d.segment_starts.clear();
  std::vector<double> times;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split(line);
    if (fields.size() != cols.size()) {
      throw InvalidInput("line " + std::to_string(line_no) + ": expected " + std::to_string(cols.size()) +
                         " columns, found " + std::to_string(fields.size()));
    }
    Sample s;
    const double t = parse_double(fields[0], line_no, cols[0]);
    for (int k = 0; k < kStateDim; ++k) s.x[k] = parse_double(fields[1 + k], line_no, cols[1 + k]);
    for (int k = 0; k < kStateDim; ++k) s.x_top[k] = parse_double(fields[14 + k], line_no, cols[14 + k]);
    for (int k = 0; k < kInputDim; ++k) s.u[k] = parse_double(fields[27 + k], line_no, cols[27 + k]);
    if (times.empty() || t <= times.back()) d.segment_starts.push_back(d.samples.size());
    times.push_back(t);
    d.samples.push_back(s);
  }
  if (d.samples.empty()) throw InvalidInput("empty dataset");

  // Sample period from the first segment with two samples; all steps must match it.
  double dt = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] > times[i - 1]) {
      dt = times[i] - times[i - 1];
      break;
    }
  }
  if (!(dt > 0.0)) throw InvalidInput("empty dataset");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] > times[i - 1] && std::abs(times[i] - times[i - 1] - dt) > 1e-9) {
      throw InvalidInput("dataset: non-uniform time step at data row " + std::to_string(i + 1));
    }
  }
  d.dt = dt;
  d.validate();
  return d;
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open dataset '" + path + "'");
  return read_dataset_csv(in);
}

// ---------------------------------------------------------------- config

StateVec TrainConfig::default_weights() {
  StateVec w = StateVec::Ones();
  w.tail<3>().setConstant(0.1);
  return w;
}

void TrainConfig::validate() const {
  if (!(w_x.array() >= 0.0).all()) throw ConfigError("train config: W_x entries must be non-negative");
  if (!(learning_rate > 0.0)) throw ConfigError("train config: learning_rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("train config: adam_beta1 must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("train config: adam_beta2 must be in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("train config: adam_epsilon must be positive");
  if (epochs < 0) throw ConfigError("train config: epochs must be non-negative");
  if (!full_batch) throw ConfigError("train config: only full-batch training is supported");
  if (variant != ModelTag::kKnode && variant != ModelTag::kKnodeDw) {
    throw ConfigError("train config: variant must be knode or knode-dw");
  }
  if (!(grad_check_step > 0.0)) throw ConfigError("train config: grad_check_step must be positive");
}

ModelVariant TrainingModel::variant(ModelTag tag, std::shared_ptr<const KnodeParams> theta) const {
  if (tag == ModelTag::kKnode) return ModelVariant::knode_only(std::move(theta));
  if (!flow) throw ConfigError("training the knode-dw variant requires flow parameters");
  return ModelVariant::knode_dw(std::move(theta), *flow);
}

// ---------------------------------------------------------------- loss and gradient

namespace {

// Non-owning shared_ptr so the variant can reference a caller's parameters.
std::shared_ptr<const KnodeParams> borrow(const KnodeParams& theta) {
  return std::shared_ptr<const KnodeParams>(&theta, [](const KnodeParams*) {});
}

struct StageEval {
  StateVec f;
  StateMat a;  // df/dx of the full model at the stage state
  ResidualEvaluation res;
};

StageEval eval_stage(const KnodeParams& theta, bool with_flow, const TrainingModel& model, const StateVec& s,
                     const InputVec& u, const StateVec& top) {
  const ModelContext& ctx = model.ctx;
  StageEval st;
  InputMat dfdu;
  st.f = nominal_derivative(s, u, ctx.body);
  nominal_jacobian(s, u, ctx.body, st.a, dfdu);
  const FlowFrame frame = flow_frame(s, top);
  if (with_flow) {
    const WakeEvaluation wake = evaluate_wake(s, top, *model.flow, *ctx.grid, true);
    st.f += disturbance_derivative(wake, s, ctx.body);
    st.a += disturbance_jacobian(wake, s, ctx.body);
  }
  st.res = evaluate_residual(frame, s, top, theta, ctx.body);
  st.f += st.res.value;
  st.a += residual_jacobian(st.res, s, theta, ctx.body, ctx.min_radial);
  return st;
}

void check_model(const TrainConfig& cfg, const TrainingModel& model) {
  if (cfg.variant == ModelTag::kKnodeDw) {
    if (!model.flow) throw ConfigError("training the knode-dw variant requires flow parameters");
    if (!model.ctx.grid) throw ConfigError("training the knode-dw variant requires a quadrature grid");
  }
}

}  // namespace

double loss(const KnodeParams& theta, const Dataset& data, const TrainConfig& cfg, const TrainingModel& model) {
  check_model(cfg, model);
  const ModelVariant variant = model.variant(cfg.variant, borrow(theta));
  const auto targets = data.pair_targets();
  if (targets.empty()) throw InvalidInput("empty dataset");
  double sum = 0.0;
  for (std::size_t i : targets) {
    const Sample& prev = data.samples[i - 1];
    const StateVec pred = predict_one_step(variant, prev.x, prev.u, prev.x_top, data.dt, model.ctx);
    const StateVec e = pred - data.samples[i].x;
    sum += e.dot(cfg.w_x.cwiseProduct(e));
  }
  return sum / static_cast<double>(targets.size());
}

Eigen::VectorXd loss_gradient(const KnodeParams& theta, const Dataset& data, const TrainConfig& cfg,
                              const TrainingModel& model, double* loss_out) {
  check_model(cfg, model);
  const bool with_flow = cfg.variant == ModelTag::kKnodeDw;
  const auto targets = data.pair_targets();
  if (targets.empty()) throw InvalidInput("empty dataset");
  const double h = data.dt;
  const double inv_n = 1.0 / static_cast<double>(targets.size());

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(theta.parameter_count()));
  double sum = 0.0;
  for (std::size_t i : targets) {
    const Sample& prev = data.samples[i - 1];
    const StateVec& x = prev.x;
    const StateVec top_mid = advance_top(prev.x_top, 0.5 * h);
    const StateVec top_end = advance_top(prev.x_top, h);
    const StageEval s1 = eval_stage(theta, with_flow, model, x, prev.u, prev.x_top);
    const StageEval s2 = eval_stage(theta, with_flow, model, x + 0.5 * h * s1.f, prev.u, top_mid);
    const StageEval s3 = eval_stage(theta, with_flow, model, x + 0.5 * h * s2.f, prev.u, top_mid);
    const StageEval s4 = eval_stage(theta, with_flow, model, x + h * s3.f, prev.u, top_end);
    const StateVec raw = x + (h / 6.0) * (s1.f + 2.0 * s2.f + 2.0 * s3.f + s4.f);
    StateVec pred = raw;
    normalize_quaternion(pred);
    const StateVec e = pred - data.samples[i].x;
    const StateVec we = cfg.w_x.cwiseProduct(e);
    sum += e.dot(we);

    // Reverse sweep: adjoint of the prediction, then of each stage derivative.
    const StateVec g = normalization_jacobian(raw).transpose() * (2.0 * inv_n * we);
    const StateVec gk4 = (h / 6.0) * g;
    residual_backward(s4.res, x + h * s3.f, theta, model.ctx.body, gk4, grad);
    const StateVec gk3 = (h / 3.0) * g + h * (s4.a.transpose() * gk4);
    residual_backward(s3.res, x + 0.5 * h * s2.f, theta, model.ctx.body, gk3, grad);
    const StateVec gk2 = (h / 3.0) * g + 0.5 * h * (s3.a.transpose() * gk3);
    residual_backward(s2.res, x + 0.5 * h * s1.f, theta, model.ctx.body, gk2, grad);
    const StateVec gk1 = (h / 6.0) * g + 0.5 * h * (s2.a.transpose() * gk2);
    residual_backward(s1.res, x, theta, model.ctx.body, gk1, grad);
  }
  if (loss_out) *loss_out = sum * inv_n;
  return grad;
}

Eigen::VectorXd finite_diff_gradient(const KnodeParams& theta, const Dataset& data, const TrainConfig& cfg,
                                     const TrainingModel& model, double step) {
  if (!(step > 0.0)) throw InvalidInput("finite_diff_gradient: step must be positive");
  const Eigen::VectorXd flat = theta.flatten();
  Eigen::VectorXd grad(flat.size());
  KnodeParams probe = theta;
  for (Eigen::Index k = 0; k < flat.size(); ++k) {
    Eigen::VectorXd p = flat;
    p[k] = flat[k] + step;
    probe.assign(p);
    const double lp = loss(probe, data, cfg, model);
    p[k] = flat[k] - step;
    probe.assign(p);
    const double lm = loss(probe, data, cfg, model);
    grad[k] = (lp - lm) / (2.0 * step);
  }
  return grad;
}

GradientCheck gradient_check(const KnodeParams& theta, const Dataset& data, const TrainConfig& cfg,
                             const TrainingModel& model) {
  const auto start = std::chrono::steady_clock::now();
  const Dataset small = data.head(cfg.grad_check_samples);
  GradientCheck check;
  check.tolerance = cfg.grad_check_tolerance;
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  KnodeParams draw = theta;
  for (int k = 0; k < cfg.grad_check_draws; ++k) {
    Eigen::VectorXd flat(static_cast<Eigen::Index>(theta.parameter_count()));
    for (Eigen::Index j = 0; j < flat.size(); ++j) flat[j] = dist(rng);
    draw.assign(flat);
    const Eigen::VectorXd ga = loss_gradient(draw, small, cfg, model);
    const Eigen::VectorXd gf = finite_diff_gradient(draw, small, cfg, model, cfg.grad_check_step);
    const double rel = (ga - gf).norm() / std::max(gf.norm(), 1e-300);
    check.max_relative_error = std::max(check.max_relative_error, rel);
    ++check.draws;
  }
  check.passed = check.draws > 0 && check.max_relative_error < check.tolerance;
  check.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return check;
}

// ---------------------------------------------------------------- normalization

void fit_normalization(KnodeParams& theta, const Dataset& data, ModelTag tag, const TrainingModel& model) {
  const auto targets = data.pair_targets();
  if (targets.empty()) throw InvalidInput("empty dataset");
  const ModelVariant knowledge =
      tag == ModelTag::kKnodeDw ? ModelVariant::dw(*model.flow) : ModelVariant::nominal();
  const RigidBodyParams& body = model.ctx.body;
  const Eigen::Matrix3d jhat = body.inertia() * body.inertia_inv().norm();  // inverse of J^-1/|J^-1|

  // Per pair: features and the residual the knowledge model leaves over one step, as a
  // derivative in the network's output coordinates.
  std::vector<Eigen::Vector3d> features;
  std::vector<StateVec> residuals;
  features.reserve(targets.size());
  residuals.reserve(targets.size());
  for (std::size_t i : targets) {
    const Sample& prev = data.samples[i - 1];
    const FlowFrame frame = flow_frame(prev.x, prev.x_top);
    features.push_back(feature_vector(frame, prev.x, prev.x_top));
    const StateVec pred = predict_one_step(knowledge, prev.x, prev.u, prev.x_top, data.dt, model.ctx);
    const StateVec r = (data.samples[i].x - pred) / data.dt;
    StateVec y = StateVec::Zero();
    y.segment<3>(idx::kVel) = body.mass() * frame.r_fw * r.segment<3>(idx::kVel);
    const Eigen::Matrix3d rot = rotation_from_quat_unchecked(quaternion(prev.x));
    y.segment<3>(idx::kRate) = frame.r_fw * rot * jhat * r.segment<3>(idx::kRate);
    residuals.push_back(y);
  }
  const auto n = static_cast<double>(targets.size());
  StateVec target_sq = StateVec::Zero();
  for (const StateVec& y : residuals) target_sq += y.cwiseProduct(y);
  const StateVec rms = (target_sq / n).cwiseSqrt();
  const Eigen::Vector3d floor(1e-3, 1e-3, 1e-2);

  Eigen::Index col = 0;
  for (auto& br : theta.branches()) {
    // State rows this branch drives, in output order.
    std::vector<int> rows;
    for (Eigen::Index j = 0; j < br.output_dim(); ++j) {
      int row = -1;
      for (const auto& [r, c] : theta.selection()) {
        if (c == col + j) row = r;
      }
      rows.push_back(row);
    }
    col += br.output_dim();

    // Standardize over where this branch has something to learn: each pair is weighted by
    // the size of its residual in the branch's channels (relative to the channel RMS).
    Eigen::Vector3d mean = Eigen::Vector3d::Zero(), sq = Eigen::Vector3d::Zero();
    double total = 0.0;
    for (std::size_t k = 0; k < features.size(); ++k) {
      double w = 0.0;
      for (int row : rows) {
        if (row >= 0 && rms[row] > 0.0) w += (residuals[k][row] / rms[row]) * (residuals[k][row] / rms[row]);
      }
      w = std::sqrt(w);
      mean += w * features[k];
      sq += w * features[k].cwiseProduct(features[k]);
      total += w;
    }
    if (!(total > 0.0)) {
      for (const auto& h : features) {
        mean += h;
        sq += h.cwiseProduct(h);
      }
      total = n;
    }
    mean /= total;
    br.input_mean = mean;
    br.input_std = (sq / total - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt().cwiseMax(floor);

    // Output gains follow the residual RMS; channels the data never excites stay near zero.
    double largest = 0.0;
    for (int row : rows) largest = std::max(largest, row >= 0 ? rms[row] : 0.0);
    br.output_gain = Eigen::VectorXd::Ones(br.output_dim());
    if (largest > 0.0) {
      for (Eigen::Index j = 0; j < br.output_dim(); ++j) {
        const int row = rows[static_cast<std::size_t>(j)];
        br.output_gain[j] = std::max(row >= 0 ? rms[row] : 0.0, 1e-6 * largest);
      }
    }
  }
}

// ---------------------------------------------------------------- training

TrainReport train_from(KnodeParams theta, const Dataset& data, const TrainConfig& cfg,
                       const TrainingModel& model) {
  cfg.validate();
  data.validate();
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  report.variant = cfg.variant;

  Eigen::VectorXd w = theta.flatten();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(w.size()), v = Eigen::VectorXd::Zero(w.size());
  Eigen::VectorXd best = w;
  double best_loss = std::numeric_limits<double>::infinity();
  double b1t = 1.0, b2t = 1.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    theta.assign(w);
    double l = 0.0;
    const Eigen::VectorXd g = loss_gradient(theta, data, cfg, model, &l);
    if (!std::isfinite(l) || !g.allFinite()) {
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch));
    }
    report.loss_history.push_back(l);
    if (l < best_loss) {
      best_loss = l;
      best = w;
    }
    b1t *= cfg.adam_beta1;
    b2t *= cfg.adam_beta2;
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
    v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
    const Eigen::VectorXd mhat = m / (1.0 - b1t);
    const Eigen::VectorXd vhat = v / (1.0 - b2t);
    w -= (cfg.learning_rate * mhat.array() / (vhat.array().sqrt() + cfg.adam_epsilon)).matrix();
  }
  theta.assign(w);
  const double final_loss = loss(theta, data, cfg, model);
  if (!std::isfinite(final_loss)) throw TrainingDiverged("training diverged at epoch " + std::to_string(cfg.epochs));
  report.loss_history.push_back(final_loss);
  if (final_loss > best_loss) theta.assign(best);
  report.theta = std::move(theta);
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

TrainReport train(const Dataset& data, const TrainConfig& cfg, const Architecture& arch,
                  const TrainingModel& model) {
  cfg.validate();
  data.validate();
  check_model(cfg, model);
  KnodeParams theta = KnodeParams::initialize(arch, cfg.seed, cfg.init_range);
  fit_normalization(theta, data, cfg.variant, model);
  const GradientCheck check = gradient_check(theta, data, cfg, model);
  if (!check.passed) {
    throw NumericError(fmt::format("gradient check failed: relative error {:.3e} >= {:.1e}",
                                   check.max_relative_error, check.tolerance));
  }
  TrainReport report = train_from(std::move(theta), data, cfg, model);
  report.check = check;
  return report;
}

std::string train_report_json(const TrainReport& report, bool with_timing) {
  nlohmann::json j;
  j["format"] = "dwknode-train-report";
  j["version"] = 1;
  j["variant"] = to_string(report.variant);
  j["epochs"] = report.loss_history.empty() ? 0 : report.loss_history.size() - 1;
  j["initial_loss"] = report.loss_history.empty() ? 0.0 : report.loss_history.front();
  j["final_loss"] = report.loss_history.empty() ? 0.0 : report.loss_history.back();
  j["loss_history"] = report.loss_history;
  j["gradient_check"] = {{"draws", report.check.draws},
                         {"max_relative_error", report.check.max_relative_error},
                         {"tolerance", report.check.tolerance},
                         {"passed", report.check.passed}};
  if (with_timing) {
    j["gradient_check"]["seconds"] = report.check.seconds;
    j["wall_time_s"] = report.wall_time_s;
  }
  j["parameter_count"] = report.theta.parameter_count();
  return j.dump(2);
}

}  // namespace dwknode
