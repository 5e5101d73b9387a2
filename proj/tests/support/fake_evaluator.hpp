// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flexi/costmodel.hpp"
#include "flexi/evaluator.hpp"
#include "flexi/schedule.hpp"

namespace flexi::testing {

/// Instant evaluator: rfid is a fixed pseudo-random function of the genome
/// digest, so search mechanics can be tested without the simulator.
class FakeEvaluator final : public Evaluator {
 public:
  explicit FakeEvaluator(CostProfile profile) : profile_(std::move(profile)) {}

  std::vector<EvalResult> evaluate(std::span<const ScheduleGenome> genomes, std::size_t n_images) override {
    std::vector<EvalResult> out;
    for (const ScheduleGenome& g : genomes) {
      ++calls_;
      const std::string d = genome_digest(g);
      const std::uint64_t h = std::stoull(d.substr(0, 12), nullptr, 16);
      EvalResult r;
      r.rfid = static_cast<double>(h % 1000003) / 1000003.0;
      r.nfe = nfe(g);
      r.avg_macs = average_macs(g, profile_);
      r.images_used = static_cast<int>(n_images);
      out.push_back(r);
    }
    return out;
  }
  const CostProfile& profile() const override { return profile_; }
  std::string identity() const override { return "fake"; }
  std::size_t calls() const { return calls_; }

 private:
  CostProfile profile_;
  std::size_t calls_ = 0;
};

}  // namespace flexi::testing
