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

#include "dwknode/io.hpp"

#include "json.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <fstream>
#include <memory>
#include <sstream>

namespace dwknode {

namespace {

using nlohmann::json;

json matrix_rows(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from(const json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(fmt::format("model file: '{}' must be an array", what));
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Eigen::MatrixXd matrix_from(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw ConfigError(fmt::format("model file: '{}' must be a non-empty array of rows", what));
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(fmt::format("model file: ragged rows in '{}'", what));
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

std::string knode_to_json(const KnodeParams& theta, ModelTag trained_variant) {
  theta.validate();
  json j;
  j["format"] = "dwknode-model";
  j["version"] = 1;
  j["variant"] = to_string(trained_variant);
  j["scaling"] = to_string(theta.scaling_mode());
  json sel = json::array();
  for (const auto& [row, col] : theta.selection()) sel.push_back({row, col});
  j["selection"] = sel;
  json branches = json::array();
  for (const MlpBranch& b : theta.branches()) {
    json jb;
    jb["input_mean"] = vector_json(b.input_mean);
    jb["input_std"] = vector_json(b.input_std);
    jb["output_gain"] = vector_json(b.output_gain);
    if (b.axis_gate.size() > 0) jb["axis_gate"] = vector_json(b.axis_gate);
    json layers = json::array();
    for (const DenseLayer& l : b.layers) layers.push_back({{"weight", matrix_rows(l.weight)}, {"bias", vector_json(l.bias)}});
    jb["layers"] = layers;
    branches.push_back(jb);
  }
  j["branches"] = branches;
  return j.dump(1) + "\n";
}

KnodeParams knode_from_json(const std::string& text, ModelTag* trained_variant) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("model file: {}", e.what()));
  }
  try {
    if (j.value("format", "") != "dwknode-model") throw ConfigError("model file: not a dwknode model");
    if (trained_variant) *trained_variant = model_tag_from_string(j.at("variant").get<std::string>());
    std::vector<std::pair<int, int>> selection;
    for (const json& p : j.at("selection")) selection.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    std::vector<MlpBranch> branches;
    for (const json& jb : j.at("branches")) {
      MlpBranch b;
      const Eigen::VectorXd mean = vector_from(jb.at("input_mean"), "input_mean");
      const Eigen::VectorXd sd = vector_from(jb.at("input_std"), "input_std");
      if (mean.size() != 3 || sd.size() != 3) throw ConfigError("model file: input normalization must be 3-wide");
      b.input_mean = mean;
      b.input_std = sd;
      b.output_gain = vector_from(jb.at("output_gain"), "output_gain");
      if (jb.contains("axis_gate")) b.axis_gate = vector_from(jb.at("axis_gate"), "axis_gate");
      for (const json& jl : jb.at("layers")) {
        DenseLayer l;
        l.weight = matrix_from(jl.at("weight"), "weight");
        l.bias = vector_from(jl.at("bias"), "bias");
        b.layers.push_back(std::move(l));
      }
      branches.push_back(std::move(b));
    }
    KnodeParams theta(std::move(branches), std::move(selection),
                      scaling_mode_from_string(j.at("scaling").get<std::string>()));
    theta.validate();
    return theta;
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("model file: {}", e.what()));
  }
}

void save_knode(const KnodeParams& theta, ModelTag trained_variant, const std::string& path) {
  write_text_file(path, knode_to_json(theta, trained_variant));
}

KnodeParams load_knode(const std::string& path, ModelTag* trained_variant) {
  return knode_from_json(read_text_file(path), trained_variant);
}

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_text_file(path)); }

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", path));
}

}  // namespace dwknode
