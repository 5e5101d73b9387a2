// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace flexi {

std::string read_text_file(const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Writes `contents` to `<path>.partial` and renames it over `path` once the
/// write succeeded. A failed write leaves only the `.partial` file behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Pretty JSON with a trailing newline; doubles keep round-trip precision.
std::string dump_json(const nlohmann::json& value);

}  // namespace flexi
