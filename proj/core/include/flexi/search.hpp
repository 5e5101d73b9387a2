// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flexi/evaluator.hpp"
#include "flexi/rng.hpp"
#include "flexi/schedule.hpp"

namespace flexi {

struct SearchConfig {
  SearchSpace space;
  /// Absolute MACs budget in G-MACs. Exactly one of budget and
  /// budget_fraction (of the profile's full-step cost) must be set.
  std::optional<double> budget;
  std::optional<double> budget_fraction;
  int max_iterations = 100;
  int n_p = 25;
  int n_c = 5;
  int n_u = 300;
  int max_attempts = 200;
  int n_m = 1;
  int n_init = 25;
  /// Random draws allowed while filling the initial population.
  int init_attempts = 100000;
  std::uint64_t master_seed = 0;
  int n_images = 1000;
  /// Stop after this many iterations without a new best; 0 disables.
  int stagnation_patience = 0;

  void check() const;
  double resolve_budget(const CostProfile& profile) const;
};

void to_json(nlohmann::json& j, const SearchConfig& config);
void from_json(const nlohmann::json& j, SearchConfig& config);

struct PopulationEntry {
  ScheduleGenome genome;
  EvalResult result;
  int birth_iteration = 0;
  std::string digest;
};

bool rank_less(const PopulationEntry& a, const PopulationEntry& b);

struct IterationLog {
  int iteration = 0;
  double best_rfid = 0.0;
  double best_macs = 0.0;
  std::size_t pop_size = 0;
  int children_admitted = 0;
};

void to_json(nlohmann::json& j, const IterationLog& log);
void from_json(const nlohmann::json& j, IterationLog& log);

/// Everything needed to continue a search. All randomness is derived from
/// (master_seed, iteration, attempt), so no generator state is carried.
struct SearchState {
  std::vector<PopulationEntry> population;  // rank order
  int next_iteration = 1;
  int stagnant_iterations = 0;
  std::vector<IterationLog> log;
};

enum class MutationMode { Heavier, Lighter };
enum class Dimension { Branch, Interval, NSegment };

/// Moves one segment's branch or interval to the adjacent choice. Returns
/// nullopt at a list boundary.
std::optional<ScheduleGenome> mutate_segment(const ScheduleGenome& genome, const SearchSpace& space, int index,
                                             MutationMode mode, Dimension dimension);

/// Duplicates segment `index` in place. Nullopt when N + 1 exceeds the
/// largest segment-count choice.
std::optional<ScheduleGenome> split_segment(const ScheduleGenome& genome, const SearchSpace& space, int index);

/// Replaces segments index and index + 1 by their element-wise minimum.
/// Nullopt when there is no right neighbour or N - 1 is below the smallest
/// segment-count choice.
std::optional<ScheduleGenome> merge_segments(const ScheduleGenome& genome, const SearchSpace& space, int index);

/// One child of `parent`: n_m distinct segments, each with a random mode
/// and dimension. At most one segment-count change, applied last; it
/// splits or merges until the next larger or smaller choice is reached.
/// Nullopt when any move fails or the child does not validate.
std::optional<ScheduleGenome> mutate(const ScheduleGenome& parent, const SearchConfig& config, Rng& rng);

/// Uniform draw: N from its choices, then per segment a branch and an
/// interval no longer than the segment's span.
ScheduleGenome random_genome(const SearchSpace& space, Rng& rng);

/// Least expensive genome of the space: fewest segments, lowest branch and
/// interval.
ScheduleGenome cheapest_genome(const SearchSpace& space);

SearchState init_population(const SearchConfig& config, Evaluator& evaluator);

/// Runs one iteration in place and returns its log record.
IterationLog search_step(SearchState& state, const SearchConfig& config, Evaluator& evaluator);

struct SearchCallbacks {
  std::function<void(const IterationLog&)> on_iteration;
  std::function<void(const SearchState&)> on_state;
};

struct SearchResult {
  SearchState state;
  PopulationEntry best;
};

/// Runs until max_iterations (or stagnation). Continues `resume` when given.
SearchResult search_loop(const SearchConfig& config, Evaluator& evaluator, const SearchCallbacks& callbacks = {},
                         std::optional<SearchState> resume = std::nullopt);

/// Population dump: [{genome, rfid, nfe, avg_macs, digest}].
nlohmann::json population_json(const std::vector<PopulationEntry>& population);
std::vector<PopulationEntry> population_from_json(const nlohmann::json& j);
/// SHA-256 over the ordered entry digests.
std::string population_digest(const std::vector<PopulationEntry>& population);

/// {format, version: 1, payload, checksum = sha256(payload.dump())}.
void checkpoint_save(const std::filesystem::path& path, const SearchState& state, const SearchConfig& config);
SearchState checkpoint_load(const std::filesystem::path& path, const SearchConfig& config);

}  // namespace flexi
