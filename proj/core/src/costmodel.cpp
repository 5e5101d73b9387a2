// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#include "flexi/costmodel.hpp"

#include "flexi/errors.hpp"
#include "flexi/io.hpp"

namespace flexi {

void CostProfile::check() const {
  if (!(full_macs > 0.0)) throw InvalidProfileError(name + ": full_macs must be positive");
  if (b_max < 1) throw InvalidProfileError(name + ": b_max must be >= 1");
  double previous = 0.0;
  for (const auto& [branch, macs] : partial_macs) {
    if (branch < 1 || branch > b_max) {
      throw InvalidProfileError(name + ": branch " + std::to_string(branch) + " outside [1, b_max]");
    }
    if (!(macs > 0.0) || macs > full_macs) {
      throw InvalidProfileError(name + ": partial_macs[" + std::to_string(branch) +
                                "] must lie in (0, full_macs]");
    }
    if (macs < previous) {
      throw InvalidProfileError(name + ": partial_macs must be non-decreasing in branch");
    }
    previous = macs;
  }
}

double CostProfile::partial(int branch) const {
  auto it = partial_macs.find(branch);
  if (it == partial_macs.end()) {
    throw ProfileMissError("profile '" + name + "' has no partial cost for branch " +
                           std::to_string(branch));
  }
  return it->second;
}

double step_cost(const StepAction& action, const CostProfile& profile) {
  switch (action.kind) {
    case StepKind::Full: return profile.full_macs;
    case StepKind::Partial: return profile.partial(action.branch);
    case StepKind::Null: return 0.0;
  }
  return 0.0;
}

double average_macs(const StepPlan& plan, const CostProfile& profile) {
  if (plan.actions.empty()) return 0.0;
  // Count per kind first so the result does not depend on summation order.
  std::size_t full = 0;
  std::map<int, std::size_t> partial;
  for (const StepAction& a : plan.actions) {
    if (a.kind == StepKind::Full) ++full;
    if (a.kind == StepKind::Partial) ++partial[a.branch];
  }
  double total = static_cast<double>(full) * profile.full_macs;
  for (const auto& [branch, count] : partial) total += static_cast<double>(count) * profile.partial(branch);
  return total / static_cast<double>(plan.actions.size());
}

double average_macs(const ScheduleGenome& genome, const CostProfile& profile) {
  if (genome.mode == Mode::Cache) return average_macs(expand(genome), profile);
  check_genome(genome);
  double total = 0.0;
  int evaluations = 0;
  for (const SegmentSpec& s : genome.segments) {
    total += profile.full_macs;
    if (s.interval > 1) total += (s.interval - 1) * profile.partial(s.branch);
    evaluations += s.interval;
  }
  return total / evaluations;
}

double derive_partial_macs(double full, double avg, int interval, int total_steps) {
  if (interval < 1 || total_steps < 1 || interval > total_steps) {
    throw InfeasibleProfileError("interval must lie in [1, total_steps]");
  }
  const int n_full = (total_steps + interval - 1) / interval;
  const int n_partial = total_steps - n_full;
  if (n_partial == 0) throw InfeasibleProfileError("plan has no partial steps to calibrate");
  const double p = (avg * total_steps - n_full * full) / n_partial;
  if (!(p > 0.0)) {
    throw InfeasibleProfileError("calibration yields non-positive partial cost " + std::to_string(p));
  }
  return p;
}

bool within_budget(const ScheduleGenome& genome, const CostProfile& profile, double budget) {
  return average_macs(genome, profile) < budget;
}

void to_json(nlohmann::json& j, const CostProfile& profile) {
  nlohmann::json partial = nlohmann::json::object();
  for (const auto& [branch, macs] : profile.partial_macs) partial[std::to_string(branch)] = macs;
  j = nlohmann::json{{"name", profile.name},
                     {"full_macs", profile.full_macs},
                     {"partial_macs", std::move(partial)},
                     {"b_max", profile.b_max}};
}

void from_json(const nlohmann::json& j, CostProfile& profile) {
  try {
    profile.name = j.at("name").get<std::string>();
    profile.full_macs = j.at("full_macs").get<double>();
    profile.b_max = j.at("b_max").get<int>();
    profile.partial_macs.clear();
    for (const auto& [key, value] : j.at("partial_macs").items()) {
      profile.partial_macs[std::stoi(key)] = value.get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("cost profile: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw FormatError("cost profile: partial_macs keys must be integers");
  }
}

CostProfile load_profile(const std::filesystem::path& path) {
  CostProfile profile = read_json_file(path).get<CostProfile>();
  profile.check();
  return profile;
}

}  // namespace flexi
