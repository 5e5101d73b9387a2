// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

namespace flexi {

/// How a genome's intervals are read. In Cache mode an interval counts the
/// active (full + partial) steps of a segment; in SolverOrder mode it is the
/// per-segment order of a multistep solver (1, 2 or 3).
enum class Mode { Cache, SolverOrder };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view text);

/// One segment of a schedule: which skip branch is cached and how many
/// model evaluations run before the rest of the span is skipped.
struct SegmentSpec {
  int branch = 1;
  int interval = 1;

  friend bool operator==(const SegmentSpec&, const SegmentSpec&) = default;
};

/// A search candidate. Segments tile the sampler grid of `total_steps`
/// positions in generation order (index 0 is the noisiest step).
struct ScheduleGenome {
  std::vector<SegmentSpec> segments;
  int total_steps = 0;
  Mode mode = Mode::Cache;

  int n_segments() const { return static_cast<int>(segments.size()); }

  friend bool operator==(const ScheduleGenome&, const ScheduleGenome&) = default;
};

enum class StepKind : std::uint8_t { Full, Partial, Null };

std::string_view to_string(StepKind kind);

struct StepAction {
  StepKind kind = StepKind::Null;
  int branch = 0;   // meaningful for Partial only
  int segment = 0;  // owning segment index

  friend bool operator==(const StepAction&, const StepAction&) = default;
};

/// Per-position actions of an expanded Cache-mode genome.
struct StepPlan {
  std::vector<StepAction> actions;
  int total_steps = 0;
  /// Strictly increasing grid positions holding a Full or Partial action.
  std::vector<int> effective_timesteps;

  int nfe() const { return static_cast<int>(effective_timesteps.size()); }
};

/// Choice lists for the three search dimensions.
struct SearchSpace {
  std::vector<int> n_segment_choices;
  std::vector<int> branch_choices;
  std::vector<int> interval_choices;
  int total_steps = 0;
  int b_max = 0;
  Mode mode = Mode::Cache;

  /// Throws InvalidSpaceError when a list is empty, unsorted, or out of range.
  void check() const;
};

/// Near-equal contiguous partition of `total_steps` into `n_segments` spans;
/// the first (total_steps mod n_segments) spans are one longer.
std::vector<int> partition_spans(int total_steps, int n_segments);

/// Structural checks that do not need a search space. Throws InvalidGenomeError.
void check_genome(const ScheduleGenome& genome);

/// Expands a Cache-mode genome: each span becomes one Full step, then
/// interval-1 Partial steps at the segment's branch, then Null steps.
/// Intervals longer than their span are clamped.
StepPlan expand(const ScheduleGenome& genome);

/// Number of function evaluations. Cache mode clamps intervals to spans;
/// SolverOrder mode sums the per-segment orders.
int nfe(const ScheduleGenome& genome);

struct Violation {
  enum class Kind { SegmentCount, Branch, Interval, IntervalExceedsSpan, TotalSteps, Mode, Structure };
  Kind kind;
  int segment = -1;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(Violation::Kind kind) const;
  std::string to_string() const;
};

ValidationReport validate(const ScheduleGenome& genome, const SearchSpace& space);

/// Number of genomes in the space: the sum over segment-count choices s of
/// (|branches| * |intervals|)^s.
boost::multiprecision::cpp_int space_size(const SearchSpace& space);

/// DeepCache-style baseline: ceil(T / interval) segments sharing one
/// (branch, interval); intervals are clamped to their spans.
ScheduleGenome deepcache_uniform(int total_steps, int interval, int branch);

/// All-Full plan over `total_steps` positions.
ScheduleGenome teacher_genome(int total_steps, int branch = 1);

/// Compact JSON with sorted keys and [branch, interval] segment pairs.
std::string canonical_json(const ScheduleGenome& genome);

/// SHA-256 of the canonical JSON.
std::string genome_digest(const ScheduleGenome& genome);

void to_json(nlohmann::json& j, const ScheduleGenome& genome);
void from_json(const nlohmann::json& j, ScheduleGenome& genome);
void to_json(nlohmann::json& j, const SearchSpace& space);
void from_json(const nlohmann::json& j, SearchSpace& space);

}  // namespace flexi
