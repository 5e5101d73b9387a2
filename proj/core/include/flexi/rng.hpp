// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <random>
#include <string>

namespace flexi {

/// splitmix64 finalizer; a bijection on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent stream seed from a base seed and a path of
/// indices, e.g. derive_seed(master, {iteration, child}).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

/// Portable deterministic generator.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The std distributions are not, so every transform used by the
/// project lives here: 53-bit uniforms, Box-Muller normals and rejection
/// sampled integers. Streams are identical on every conforming toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal.
  double normal();

  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  bool coin() { return (engine_() >> 63) != 0; }

  /// Text form of the full generator state (engine plus cached normal).
  std::string state() const;
  void set_state(const std::string& text);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace flexi
