// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

#include <nlohmann/json.hpp>

#include "flexi/search.hpp"
#include "flexi/simulator.hpp"

namespace flexi {

struct SimulatorSettings {
  UNetConfig unet;
  SamplerConfig sampler;
  std::uint64_t extractor_seed = 0;
  int feature_dim = 32;
  /// Search scores use seeds seed_base .. seed_base + n_images - 1.
  std::uint64_t seed_base = 0;
  std::size_t state_cache_bytes = std::size_t{1} << 30;
};

void to_json(nlohmann::json& j, const SimulatorSettings& s);
void from_json(const nlohmann::json& j, SimulatorSettings& s);

/// A search configuration file: {search, simulator, profile, jobs}.
struct ExperimentConfig {
  SearchConfig search;
  SimulatorSettings simulator;
  /// Cost profile file, resolved against the config file's directory.
  std::optional<std::filesystem::path> profile;
  int jobs = 1;
};

nlohmann::json toml_to_json(std::string_view text);

ExperimentConfig experiment_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Reads TOML (.toml) or JSON (anything else).
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Seeds seed_base .. seed_base + count - 1.
std::vector<std::uint64_t> seed_range(std::uint64_t base, std::size_t count);

SimEvaluatorOptions sim_options(const ExperimentConfig& config);

}  // namespace flexi
