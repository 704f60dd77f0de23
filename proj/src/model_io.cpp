// Copyright 2026 The ame-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ame/model_io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>

namespace ame {

namespace {

constexpr std::string_view kModelFormat = "ame-model/1";

template <typename T>
T read_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

void require_known_keys(const Json& object, std::initializer_list<std::string_view> allowed,
                        std::string_view where) {
  if (!object.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : object.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError("unknown field '" + key + "' in " + std::string(where));
  }
}

Json to_json(const diff::OptimizerSettings& s) {
  return Json{{"kind", s.kind == diff::OptimizerKind::kSgd ? "sgd" : "adam"},
              {"learning_rate", s.learning_rate},
              {"beta1", s.beta1},
              {"beta2", s.beta2},
              {"epsilon", s.epsilon}};
}

diff::OptimizerSettings optimizer_from_json(const Json& j) {
  require_known_keys(j, {"kind", "learning_rate", "beta1", "beta2", "epsilon"}, "optimizer");
  diff::OptimizerSettings s;
  const auto kind = read_or<std::string>(j, "kind", "adam");
  if (kind == "sgd") {
    s.kind = diff::OptimizerKind::kSgd;
  } else if (kind == "adam") {
    s.kind = diff::OptimizerKind::kAdam;
  } else {
    throw ConfigError("optimizer.kind must be 'sgd' or 'adam', got '" + kind + "'");
  }
  s.learning_rate = read_or(j, "learning_rate", s.learning_rate);
  s.beta1 = read_or(j, "beta1", s.beta1);
  s.beta2 = read_or(j, "beta2", s.beta2);
  s.epsilon = read_or(j, "epsilon", s.epsilon);
  if (!(s.learning_rate > 0.0)) throw ConfigError("optimizer.learning_rate must be positive");
  return s;
}

Json to_json(const AmeConfig& c) {
  return Json{{"feature_partition", c.feature_partition},
              {"expert_hidden", c.expert_hidden},
              {"expert_activation", diff::to_string(c.expert_activation)},
              {"gate_hidden", c.gate_hidden},
              {"aux_hidden", c.aux_hidden},
              {"aux_activation", diff::to_string(c.aux_activation)},
              {"task", to_string(c.task)},
              {"num_classes", c.num_classes},
              {"alpha", c.alpha},
              {"aux_weight", c.aux_weight},
              {"detach_targets", c.detach_targets},
              {"aux_grads_to_experts", c.aux_grads_to_experts},
              {"seed", c.seed},
              {"optimizer", to_json(c.optimizer)}};
}

AmeConfig ame_config_from_json(const Json& j) {
  require_known_keys(j,
                     {"feature_partition", "expert_hidden", "expert_activation", "gate_hidden",
                      "aux_hidden", "aux_activation", "task", "num_classes", "alpha", "aux_weight",
                      "detach_targets", "aux_grads_to_experts", "seed", "optimizer"},
                     "model config");
  AmeConfig c;
  c.feature_partition = read_or(j, "feature_partition", c.feature_partition);
  c.expert_hidden = read_or(j, "expert_hidden", c.expert_hidden);
  try {
    c.expert_activation = diff::parse_activation(
        read_or<std::string>(j, "expert_activation", std::string(diff::to_string(c.expert_activation))));
    c.aux_activation = diff::parse_activation(
        read_or<std::string>(j, "aux_activation", std::string(diff::to_string(c.aux_activation))));
    c.task = parse_task(read_or<std::string>(j, "task", std::string(to_string(c.task))));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.gate_hidden = read_or(j, "gate_hidden", c.gate_hidden);
  c.aux_hidden = read_or(j, "aux_hidden", c.aux_hidden);
  c.num_classes = read_or(j, "num_classes", c.num_classes);
  c.alpha = read_or(j, "alpha", c.alpha);
  c.aux_weight = read_or(j, "aux_weight", c.aux_weight);
  c.detach_targets = read_or(j, "detach_targets", c.detach_targets);
  c.aux_grads_to_experts = read_or(j, "aux_grads_to_experts", c.aux_grads_to_experts);
  c.seed = read_or(j, "seed", c.seed);
  if (j.contains("optimizer")) c.optimizer = optimizer_from_json(j.at("optimizer"));
  return c;
}

Json model_to_json(const AmeModel& model) {
  Json params = Json::array();
  for (const auto& p : model.parameters()) {
    params.push_back(Json{{"name", p.name},
                          {"shape", p.tensor.shape()},
                          {"values", std::vector<double>(p.tensor.data().begin(), p.tensor.data().end())}});
  }
  return Json{{"format", kModelFormat},
              {"seed", model.config().seed},
              {"config", to_json(model.config())},
              {"parameters", std::move(params)}};
}

AmeModel model_from_json(const Json& j) {
  require_known_keys(j, {"format", "seed", "config", "parameters"}, "model document");
  if (j.value("format", std::string()) != kModelFormat) {
    throw ConfigError("model document format must be '" + std::string(kModelFormat) + "'");
  }
  AmeConfig config = ame_config_from_json(j.at("config"));
  if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
  AmeModel model(config);
  auto params = model.parameters();
  const auto& stored = j.at("parameters");
  if (stored.size() != params.size()) {
    throw ConfigError("model document has " + std::to_string(stored.size()) + " parameters, expected " +
                      std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& entry = stored[k];
    require_known_keys(entry, {"name", "shape", "values"}, "model parameter");
    if (entry.at("name").get<std::string>() != params[k].name) {
      throw ConfigError("model parameter " + std::to_string(k) + " is '" +
                        entry.at("name").get<std::string>() + "', expected '" + params[k].name + "'");
    }
    if (entry.at("shape").get<diff::Shape>() != params[k].tensor.shape()) {
      throw ConfigError("model parameter '" + params[k].name + "' has the wrong shape");
    }
    const auto values = entry.at("values").get<std::vector<double>>();
    auto dst = params[k].tensor.mutable_data();
    if (values.size() != dst.size()) {
      throw ConfigError("model parameter '" + params[k].name + "' has the wrong number of values");
    }
    std::copy(values.begin(), values.end(), dst.begin());
  }
  return model;
}

void save_model(const AmeModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << model_to_json(model).dump(1) << '\n';
}

AmeModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string model_hash(const AmeModel& model) { return fnv1a_hex(model_to_json(model).dump()); }

}  // namespace ame
