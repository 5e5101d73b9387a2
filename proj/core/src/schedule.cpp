// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#include "flexi/schedule.hpp"

#include <algorithm>
#include <sstream>

#include "flexi/digest.hpp"
#include "flexi/errors.hpp"

namespace flexi {

namespace {

bool contains(const std::vector<int>& list, int value) {
  return std::binary_search(list.begin(), list.end(), value);
}

void check_choice_list(const std::vector<int>& list, const char* name, int lo, int hi) {
  if (list.empty()) throw InvalidSpaceError(std::string(name) + " is empty");
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (list[i] < lo || list[i] > hi) {
      throw InvalidSpaceError(std::string(name) + " value " + std::to_string(list[i]) +
                              " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    if (i > 0 && list[i] <= list[i - 1]) {
      throw InvalidSpaceError(std::string(name) + " must be strictly increasing");
    }
  }
}

std::string join(const std::vector<int>& list) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < list.size(); ++i) os << (i ? "," : "") << list[i];
  os << '}';
  return os.str();
}

}  // namespace

std::string_view to_string(Mode mode) {
  return mode == Mode::Cache ? "cache" : "solver_order";
}

Mode mode_from_string(std::string_view text) {
  if (text == "cache") return Mode::Cache;
  if (text == "solver_order") return Mode::SolverOrder;
  throw FormatError("unknown mode '" + std::string(text) + "'");
}

std::string_view to_string(StepKind kind) {
  switch (kind) {
    case StepKind::Full: return "FULL";
    case StepKind::Partial: return "PARTIAL";
    case StepKind::Null: return "NULL";
  }
  return "?";
}

void SearchSpace::check() const {
  if (total_steps < 1) throw InvalidSpaceError("total_steps must be >= 1");
  if (b_max < 1) throw InvalidSpaceError("b_max must be >= 1");
  const int max_segments = mode == Mode::Cache ? total_steps : 1 << 20;
  check_choice_list(n_segment_choices, "n_segment_choices", 1, max_segments);
  check_choice_list(branch_choices, "branch_choices", 1, b_max);
  const int max_interval = mode == Mode::Cache ? total_steps : 3;
  check_choice_list(interval_choices, "interval_choices", 1, max_interval);
}

std::vector<int> partition_spans(int total_steps, int n_segments) {
  if (n_segments < 1 || n_segments > total_steps) {
    throw InvalidPartitionError("cannot partition " + std::to_string(total_steps) + " steps into " +
                                std::to_string(n_segments) + " segments");
  }
  const int base = total_steps / n_segments;
  const int longer = total_steps % n_segments;
  std::vector<int> spans(static_cast<std::size_t>(n_segments), base);
  for (int i = 0; i < longer; ++i) spans[static_cast<std::size_t>(i)] += 1;
  return spans;
}

void check_genome(const ScheduleGenome& genome) {
  if (genome.total_steps < 1) throw InvalidGenomeError("total_steps must be >= 1");
  if (genome.segments.empty()) throw InvalidGenomeError("genome has no segments");
  if (genome.mode == Mode::Cache && genome.n_segments() > genome.total_steps) {
    throw InvalidGenomeError("more segments than steps");
  }
  for (const SegmentSpec& s : genome.segments) {
    if (s.branch < 1) throw InvalidGenomeError("branch must be >= 1");
    if (s.interval < 1) throw InvalidGenomeError("interval must be >= 1");
    if (genome.mode == Mode::SolverOrder && s.interval > 3) {
      throw InvalidGenomeError("solver order must be 1, 2 or 3");
    }
  }
}

StepPlan expand(const ScheduleGenome& genome) {
  check_genome(genome);
  if (genome.mode != Mode::Cache) {
    throw UnsupportedModeError("solver-order genomes cannot be expanded to a step plan");
  }
  const std::vector<int> spans = partition_spans(genome.total_steps, genome.n_segments());
  StepPlan plan;
  plan.total_steps = genome.total_steps;
  plan.actions.reserve(static_cast<std::size_t>(genome.total_steps));
  for (int i = 0; i < genome.n_segments(); ++i) {
    const SegmentSpec& seg = genome.segments[static_cast<std::size_t>(i)];
    const int span = spans[static_cast<std::size_t>(i)];
    const int active = std::clamp(seg.interval, 1, span);
    for (int j = 0; j < span; ++j) {
      const int position = static_cast<int>(plan.actions.size());
      if (j == 0) {
        plan.actions.push_back({StepKind::Full, 0, i});
      } else if (j < active) {
        plan.actions.push_back({StepKind::Partial, seg.branch, i});
      } else {
        plan.actions.push_back({StepKind::Null, 0, i});
      }
      if (j < active) plan.effective_timesteps.push_back(position);
    }
  }
  return plan;
}

int nfe(const ScheduleGenome& genome) {
  check_genome(genome);
  int total = 0;
  if (genome.mode == Mode::SolverOrder) {
    for (const SegmentSpec& s : genome.segments) total += s.interval;
    return total;
  }
  const std::vector<int> spans = partition_spans(genome.total_steps, genome.n_segments());
  for (std::size_t i = 0; i < spans.size(); ++i) {
    total += std::clamp(genome.segments[i].interval, 1, spans[i]);
  }
  return total;
}

bool ValidationReport::has(Violation::Kind kind) const {
  return std::any_of(violations.begin(), violations.end(),
                     [kind](const Violation& v) { return v.kind == kind; });
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const Violation& v : violations) os << v.message << '\n';
  return os.str();
}

ValidationReport validate(const ScheduleGenome& genome, const SearchSpace& space) {
  ValidationReport report;
  auto add = [&](Violation::Kind kind, int segment, std::string msg) {
    report.violations.push_back({kind, segment, std::move(msg)});
  };
  try {
    check_genome(genome);
  } catch (const InvalidGenomeError& e) {
    add(Violation::Kind::Structure, -1, e.what());
    return report;
  }
  if (genome.mode != space.mode) {
    add(Violation::Kind::Mode, -1,
        "mode " + std::string(to_string(genome.mode)) + " does not match space mode " +
            std::string(to_string(space.mode)));
  }
  if (genome.total_steps != space.total_steps) {
    add(Violation::Kind::TotalSteps, -1,
        "total_steps " + std::to_string(genome.total_steps) + " != space total_steps " +
            std::to_string(space.total_steps));
  }
  if (!contains(space.n_segment_choices, genome.n_segments())) {
    add(Violation::Kind::SegmentCount, -1,
        "N-segment " + std::to_string(genome.n_segments()) + " ∉ choices " +
            join(space.n_segment_choices));
  }
  std::vector<int> spans;
  if (genome.mode == Mode::Cache) spans = partition_spans(genome.total_steps, genome.n_segments());
  for (int i = 0; i < genome.n_segments(); ++i) {
    const SegmentSpec& s = genome.segments[static_cast<std::size_t>(i)];
    const std::string where = "segment " + std::to_string(i) + ": ";
    if (!contains(space.branch_choices, s.branch)) {
      add(Violation::Kind::Branch, i,
          where + "branch " + std::to_string(s.branch) + " ∉ choices " + join(space.branch_choices));
    }
    if (!contains(space.interval_choices, s.interval)) {
      add(Violation::Kind::Interval, i,
          where + "interval " + std::to_string(s.interval) + " ∉ choices " +
              join(space.interval_choices));
    }
    if (!spans.empty() && s.interval > spans[static_cast<std::size_t>(i)]) {
      add(Violation::Kind::IntervalExceedsSpan, i,
          where + "interval exceeds span (" + std::to_string(s.interval) + " > " +
              std::to_string(spans[static_cast<std::size_t>(i)]) + ")");
    }
  }
  return report;
}

boost::multiprecision::cpp_int space_size(const SearchSpace& space) {
  space.check();
  using boost::multiprecision::cpp_int;
  const cpp_int per_segment = cpp_int(space.branch_choices.size()) * space.interval_choices.size();
  cpp_int total = 0;
  for (int s : space.n_segment_choices) {
    total += boost::multiprecision::pow(per_segment, static_cast<unsigned>(s));
  }
  return total;
}

ScheduleGenome deepcache_uniform(int total_steps, int interval, int branch) {
  if (interval < 1 || interval > total_steps) {
    throw InvalidGenomeError("deepcache interval must lie in [1, total_steps]");
  }
  if (branch < 1) throw InvalidGenomeError("branch must be >= 1");
  const int n = (total_steps + interval - 1) / interval;
  const std::vector<int> spans = partition_spans(total_steps, n);
  ScheduleGenome genome;
  genome.total_steps = total_steps;
  genome.mode = Mode::Cache;
  for (int span : spans) genome.segments.push_back({branch, std::min(interval, span)});
  return genome;
}

ScheduleGenome teacher_genome(int total_steps, int branch) {
  return deepcache_uniform(total_steps, 1, branch);
}

void to_json(nlohmann::json& j, const ScheduleGenome& genome) {
  nlohmann::json segments = nlohmann::json::array();
  for (const SegmentSpec& s : genome.segments) segments.push_back({s.branch, s.interval});
  j = nlohmann::json{{"mode", to_string(genome.mode)},
                     {"total_steps", genome.total_steps},
                     {"segments", std::move(segments)}};
}

void from_json(const nlohmann::json& j, ScheduleGenome& genome) {
  try {
    genome.mode = mode_from_string(j.value("mode", std::string("cache")));
    genome.total_steps = j.at("total_steps").get<int>();
    genome.segments.clear();
    for (const auto& pair : j.at("segments")) {
      if (!pair.is_array() || pair.size() != 2) throw FormatError("segment must be [branch, interval]");
      genome.segments.push_back({pair[0].get<int>(), pair[1].get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("genome: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const SearchSpace& space) {
  j = nlohmann::json{{"n_segment_choices", space.n_segment_choices},
                     {"branch_choices", space.branch_choices},
                     {"interval_choices", space.interval_choices},
                     {"total_steps", space.total_steps},
                     {"b_max", space.b_max}};
  if (space.mode != Mode::Cache) j["mode"] = to_string(space.mode);
}

void from_json(const nlohmann::json& j, SearchSpace& space) {
  try {
    space.n_segment_choices = j.at("n_segment_choices").get<std::vector<int>>();
    space.branch_choices = j.at("branch_choices").get<std::vector<int>>();
    space.interval_choices = j.at("interval_choices").get<std::vector<int>>();
    space.total_steps = j.at("total_steps").get<int>();
    space.b_max = j.at("b_max").get<int>();
    space.mode = mode_from_string(j.value("mode", std::string("cache")));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("search space: ") + e.what());
  }
}

std::string canonical_json(const ScheduleGenome& genome) {
  return nlohmann::json(genome).dump();
}

std::string genome_digest(const ScheduleGenome& genome) {
  return sha256_hex(canonical_json(genome));
}

}  // namespace flexi
