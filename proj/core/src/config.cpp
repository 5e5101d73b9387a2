// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#include "flexi/config.hpp"

#include <set>

#include <toml.hpp>

#include "flexi/errors.hpp"
#include "flexi/io.hpp"

namespace flexi {

namespace {

nlohmann::json node_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    nlohmann::json obj = nlohmann::json::object();
    for (const auto& [key, value] : *t) obj[std::string(key.str())] = node_to_json(value);
    return obj;
  }
  if (const auto* a = node.as_array()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const toml::node& item : *a) arr.push_back(node_to_json(item));
    return arr;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  throw InvalidConfigError("config: dates and times are not supported");
}

}  // namespace

void to_json(nlohmann::json& j, const SimulatorSettings& s) {
  j = nlohmann::json{{"unet", s.unet},
                     {"sampler", s.sampler},
                     {"extractor_seed", s.extractor_seed},
                     {"feature_dim", s.feature_dim},
                     {"seed_base", s.seed_base},
                     {"state_cache_bytes", s.state_cache_bytes}};
}

void from_json(const nlohmann::json& j, SimulatorSettings& s) {
  static const std::set<std::string> known{"unet", "sampler", "extractor_seed", "feature_dim", "seed_base",
                                           "state_cache_bytes"};
  for (const auto& [key, value] : j.items()) {
    if (known.count(key) == 0) throw InvalidConfigError("simulator config: unknown key '" + key + "'");
  }
  if (j.contains("unet")) s.unet = j.at("unet").get<UNetConfig>();
  if (j.contains("sampler")) s.sampler = j.at("sampler").get<SamplerConfig>();
  s.extractor_seed = j.value("extractor_seed", s.extractor_seed);
  s.feature_dim = j.value("feature_dim", s.feature_dim);
  s.seed_base = j.value("seed_base", s.seed_base);
  s.state_cache_bytes = j.value("state_cache_bytes", s.state_cache_bytes);
}

nlohmann::json toml_to_json(std::string_view text) {
  try {
    return node_to_json(toml::parse(text));
  } catch (const toml::parse_error& e) {
    throw InvalidConfigError(std::string("config: TOML parse error: ") + std::string(e.description()));
  }
}

ExperimentConfig experiment_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  static const std::set<std::string> known{"search", "simulator", "profile", "jobs"};
  if (!j.is_object()) throw InvalidConfigError("config: expected an object");
  for (const auto& [key, value] : j.items()) {
    if (known.count(key) == 0) throw InvalidConfigError("config: unknown key '" + key + "'");
  }
  ExperimentConfig c;
  try {
    c.search = j.at("search").get<SearchConfig>();
    if (j.contains("simulator")) c.simulator = j.at("simulator").get<SimulatorSettings>();
    if (j.contains("profile")) {
      const std::filesystem::path p = j.at("profile").get<std::string>();
      c.profile = p.is_absolute() ? p : base_dir / p;
    }
    c.jobs = j.value("jobs", 1);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfigError(std::string("config: ") + e.what());
  }
  c.search.check();
  c.simulator.unet.check();
  if (c.jobs < 1) throw InvalidConfigError("config: jobs must be >= 1");
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  if (path.extension() == ".toml") return experiment_from_json(toml_to_json(read_text_file(path)), base);
  return experiment_from_json(read_json_file(path), base);
}

std::vector<std::uint64_t> seed_range(std::uint64_t base, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t i = 0; i < count; ++i) seeds[i] = base + i;
  return seeds;
}

SimEvaluatorOptions sim_options(const ExperimentConfig& config) {
  SimEvaluatorOptions o;
  o.unet = config.simulator.unet;
  o.sampler = config.simulator.sampler;
  o.extractor_seed = config.simulator.extractor_seed;
  o.feature_dim = config.simulator.feature_dim;
  o.total_steps = config.search.space.total_steps;
  o.seeds = seed_range(config.simulator.seed_base, static_cast<std::size_t>(config.search.n_images));
  o.jobs = config.jobs;
  o.state_cache_bytes = config.simulator.state_cache_bytes;
  if (config.profile) o.profile = load_profile(*config.profile);
  return o;
}

}  // namespace flexi
