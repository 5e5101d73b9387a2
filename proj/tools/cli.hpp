// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flexi/search.hpp"

namespace flexi::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kRuntime = 2 };

struct CommandOutcome {
  int exit_code = kSuccess;
  std::vector<std::filesystem::path> artifacts;
};

/// args excludes the program name.
CommandOutcome run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// CSV with columns digest,nfe,avg_macs,speedup_vs_teacher,rfid in rank
/// order; speedup = teacher_macs / avg_macs.
std::string report_csv(std::vector<PopulationEntry> population, double teacher_macs);

void write_report(const std::filesystem::path& population_file, const std::filesystem::path& out,
                  double teacher_macs);

/// FLEXI_CACHE_DIR, else $XDG_CACHE_HOME/flexicache, else ~/.cache/flexicache.
std::optional<std::filesystem::path> teacher_cache_dir();

}  // namespace flexi::cli
