// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "flexi/schedule.hpp"

namespace flexi {

/// Per-framework MACs table, in G-MACs (1e9 multiply-accumulates).
struct CostProfile {
  std::string name;
  double full_macs = 0.0;
  /// Cost of a cache-reusing evaluation keyed by branch.
  std::map<int, double> partial_macs;
  int b_max = 0;

  /// Throws InvalidProfileError unless 0 < partial <= full, partial is
  /// non-decreasing in branch and every branch lies in [1, b_max].
  void check() const;

  /// Throws ProfileMissError when the branch has no entry.
  double partial(int branch) const;
};

double step_cost(const StepAction& action, const CostProfile& profile);

/// Mean cost over all plan positions; Null positions contribute zero to the
/// numerator but still count in the denominator.
double average_macs(const StepPlan& plan, const CostProfile& profile);

/// Average cost of a genome. Cache mode expands the plan. SolverOrder mode
/// charges each segment one Full evaluation plus (order - 1) Partial ones and
/// divides by the total number of evaluations.
double average_macs(const ScheduleGenome& genome, const CostProfile& profile);

/// Solves (n_full * full + n_partial * p) / T = avg for p, with
/// n_full = ceil(T / interval) as in a uniform-interval plan.
double derive_partial_macs(double full, double avg, int interval, int total_steps);

/// Strict admission test average_macs(genome) < budget.
bool within_budget(const ScheduleGenome& genome, const CostProfile& profile, double budget);

void to_json(nlohmann::json& j, const CostProfile& profile);
void from_json(const nlohmann::json& j, CostProfile& profile);

CostProfile load_profile(const std::filesystem::path& path);

}  // namespace flexi
