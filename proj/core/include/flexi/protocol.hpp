// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <sys/types.h>

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "flexi/evaluator.hpp"

namespace flexi {

// Newline-delimited JSON between the engine and an external evaluator
// process over the child's stdin/stdout. One request in flight per process.
//
//   engine  -> {"type":"hello","protocol_version":1}
//   adapter -> {"type":"hello_ack","protocol_version":1,"capabilities":[...]}
//   engine  -> {"type":"eval_request","id":7,"genome":{...},"n_images":1000,
//               "seed":0,"metric":"rfid"}
//   adapter -> {"type":"eval_response","id":7,"rfid":0.12,"nfe":24,"avg_macs":..}
//              or candidate_stats/teacher_stats in place of rfid
//              or {"type":"error","id":7,"code":"...","message":"..."}
//   engine  -> {"type":"shutdown"}

inline constexpr int kProtocolVersion = 1;

nlohmann::json make_hello();
nlohmann::json make_hello_ack(const std::vector<std::string>& capabilities);
nlohmann::json make_eval_request(std::int64_t id, const ScheduleGenome& genome, std::size_t n_images,
                                 std::uint64_t seed, Metric metric);
nlohmann::json make_error(std::int64_t id, const std::string& code, const std::string& message);
nlohmann::json make_shutdown();

/// Parses one line; throws FormatError on bad JSON or a missing/unknown type.
nlohmann::json parse_message(const std::string& line);

/// Child process running `/bin/sh -c command` with stdin and stdout joined
/// to one socket. stderr is inherited.
class Subprocess {
 public:
  explicit Subprocess(const std::string& command);
  ~Subprocess();
  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  void write_line(const std::string& line);
  /// Next line without its newline; nullopt at end of stream. Throws
  /// BackendError after `timeout_s` seconds without a complete line.
  std::optional<std::string> read_line(double timeout_s);
  /// Closes the channel and reaps the child, killing it after `grace_s`.
  /// Returns the exit status as reported by waitpid.
  int finish(double grace_s);
  pid_t pid() const { return pid_; }

 private:
  pid_t pid_ = -1;
  int fd_ = -1;
  std::string buffer_;
  std::optional<int> status_;
};

/// Engine-side session with one adapter process.
class AdapterClient {
 public:
  AdapterClient(const std::string& command, double timeout_s = 600.0);
  ~AdapterClient();

  const std::vector<std::string>& capabilities() const { return capabilities_; }
  bool has_capability(const std::string& name) const;

  /// Sends one eval_request and returns the matching eval_response. Error
  /// replies, id mismatches and malformed lines raise BackendError.
  nlohmann::json request(const ScheduleGenome& genome, std::size_t n_images, std::uint64_t seed, Metric metric);

  /// Sends shutdown and waits for the process to exit.
  int shutdown();

 private:
  nlohmann::json read_message();

  std::unique_ptr<Subprocess> process_;
  double timeout_s_;
  std::vector<std::string> capabilities_;
  std::int64_t next_id_ = 1;
  bool closed_ = false;
};

struct ExternEvaluatorOptions {
  std::string command;
  int jobs = 1;
  CostProfile profile;
  /// Noise seed sent with every request so candidates share inputs.
  std::uint64_t seed = 0;
  double timeout_s = 600.0;
};

/// Evaluator backed by a pool of adapter processes.
class ExternEvaluator final : public Evaluator {
 public:
  explicit ExternEvaluator(ExternEvaluatorOptions options);
  ~ExternEvaluator() override;

  std::vector<EvalResult> evaluate(std::span<const ScheduleGenome> genomes, std::size_t n_images) override;
  const CostProfile& profile() const override { return options_.profile; }
  std::string identity() const override { return "extern:" + options_.command; }

  /// Single request with an explicit metric, bypassing the memo.
  EvalResult evaluate_metric(const ScheduleGenome& genome, std::size_t n_images, Metric metric);

  /// Shuts every adapter down; further calls throw.
  void shutdown();

 private:
  EvalResult to_result(const ScheduleGenome& genome, const nlohmann::json& response, std::size_t n_images,
                       Metric metric) const;

  ExternEvaluatorOptions options_;
  std::vector<std::unique_ptr<AdapterClient>> adapters_;
  std::mutex mutex_;
  std::unordered_map<std::string, EvalResult> memo_;
};

}  // namespace flexi
