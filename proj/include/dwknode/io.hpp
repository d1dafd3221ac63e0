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

#include <string>
#include <string_view>

namespace dwknode {

/// Network parameters, normalization and routing as JSON. Doubles are written with
/// shortest round-trip formatting, so save -> load reproduces theta bit-for-bit.
std::string knode_to_json(const KnodeParams& theta, ModelTag trained_variant);
/// Throws ConfigError on malformed documents or inconsistent shapes.
KnodeParams knode_from_json(const std::string& text, ModelTag* trained_variant = nullptr);

void save_knode(const KnodeParams& theta, ModelTag trained_variant, const std::string& path);
KnodeParams load_knode(const std::string& path, ModelTag* trained_variant = nullptr);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);
/// Throws std::runtime_error when the file cannot be read.
std::string sha256_file(const std::string& path);

std::string read_text_file(const std::string& path);
/// Truncates and writes; throws std::runtime_error on failure.
void write_text_file(const std::string& path, std::string_view text);

}  // namespace dwknode
