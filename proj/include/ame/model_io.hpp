// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "ame/model.hpp"

namespace ame {

using Json = nlohmann::json;

/// Throws ConfigError if `object` is not a JSON object or carries keys outside `allowed`.
void require_known_keys(const Json& object, std::initializer_list<std::string_view> allowed,
                        std::string_view where);

Json to_json(const diff::OptimizerSettings& settings);
diff::OptimizerSettings optimizer_from_json(const Json& j);

Json to_json(const AmeConfig& config);
/// Strict: unknown keys are rejected, absent keys keep their defaults.
AmeConfig ame_config_from_json(const Json& j);

/// {"format", "seed", "config", "parameters": [{"name", "shape", "values"}]}
Json model_to_json(const AmeModel& model);
AmeModel model_from_json(const Json& j);

void save_model(const AmeModel& model, const std::filesystem::path& path);
AmeModel load_model(const std::filesystem::path& path);

/// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);
/// Hash of the serialized model; identifies the exact parameters that produced a result.
std::string model_hash(const AmeModel& model);

}  // namespace ame
