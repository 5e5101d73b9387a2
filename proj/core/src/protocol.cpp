// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#include "flexi/protocol.hpp"

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <limits>
#include <set>
#include <thread>

#include "flexi/errors.hpp"

extern char** environ;

namespace flexi {

namespace {

std::string errno_text() { return std::strerror(errno); }

const std::set<std::string>& message_types() {
  static const std::set<std::string> types{"hello",         "hello_ack", "eval_request",
                                           "eval_response", "error",     "shutdown"};
  return types;
}

}  // namespace

nlohmann::json make_hello() { return {{"type", "hello"}, {"protocol_version", kProtocolVersion}}; }

nlohmann::json make_hello_ack(const std::vector<std::string>& capabilities) {
  return {{"type", "hello_ack"}, {"protocol_version", kProtocolVersion}, {"capabilities", capabilities}};
}

nlohmann::json make_eval_request(std::int64_t id, const ScheduleGenome& genome, std::size_t n_images,
                                 std::uint64_t seed, Metric metric) {
  return {{"type", "eval_request"}, {"id", id},     {"genome", genome}, {"n_images", n_images},
          {"seed", seed},           {"metric", to_string(metric)}};
}

nlohmann::json make_error(std::int64_t id, const std::string& code, const std::string& message) {
  return {{"type", "error"}, {"id", id}, {"code", code}, {"message", message}};
}

nlohmann::json make_shutdown() { return {{"type", "shutdown"}}; }

nlohmann::json parse_message(const std::string& line) {
  nlohmann::json msg;
  try {
    msg = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("protocol: not JSON: ") + e.what());
  }
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
    throw FormatError("protocol: message lacks a string 'type'");
  }
  if (message_types().count(msg["type"].get<std::string>()) == 0) {
    throw FormatError("protocol: unknown message type '" + msg["type"].get<std::string>() + "'");
  }
  return msg;
}

// ---------------------------------------------------------------------------

Subprocess::Subprocess(const std::string& command) {
  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw BackendError("socketpair failed: " + errno_text());
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, sv[1], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, sv[1], STDOUT_FILENO);
  // Own process group, so a kill also reaches whatever the shell started.
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);
  const char* argv[] = {"sh", "-c", command.c_str(), nullptr};
  const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, &attr, const_cast<char* const*>(argv), environ);
  posix_spawnattr_destroy(&attr);
  posix_spawn_file_actions_destroy(&actions);
  ::close(sv[1]);
  if (rc != 0) {
    ::close(sv[0]);
    throw BackendError("cannot start adapter '" + command + "': " + std::strerror(rc));
  }
  fd_ = sv[0];
}

Subprocess::~Subprocess() {
  try {
    finish(1.0);
  } catch (...) {
  }
}

void Subprocess::write_line(const std::string& line) {
  if (fd_ < 0) throw BackendError("adapter channel is closed");
  const std::string data = line + "\n";
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendError("adapter stopped reading: " + errno_text());
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> Subprocess::read_line(double timeout_s) {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + std::chrono::duration<double>(timeout_s);
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    if (fd_ < 0) return std::nullopt;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
    if (left <= 0) throw BackendError("adapter did not answer within " + std::to_string(timeout_s) + " s");
    pollfd p{fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, static_cast<int>(std::min<long long>(left, 1 << 30)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw BackendError("poll failed: " + errno_text());
    }
    if (ready == 0) continue;
    char chunk[4096];
    const ssize_t n = ::read(fd_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendError("read from adapter failed: " + errno_text());
    }
    if (n == 0) {
      if (buffer_.empty()) return std::nullopt;
      std::string rest = std::move(buffer_);
      buffer_.clear();
      ::close(fd_);
      fd_ = -1;
      return rest;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

int Subprocess::finish(double grace_s) {
  if (status_) return *status_;
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  if (pid_ <= 0) return 0;
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + std::chrono::duration<double>(grace_s);
  int status = 0;
  for (;;) {
    const pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_ || (r < 0 && errno != EINTR)) break;
    if (clock::now() >= deadline) {
      ::kill(-pid_, SIGKILL);
      while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
      }
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  status_ = status;
  return status;
}

// ---------------------------------------------------------------------------

AdapterClient::AdapterClient(const std::string& command, double timeout_s)
    : process_(std::make_unique<Subprocess>(command)), timeout_s_(timeout_s) {
  process_->write_line(make_hello().dump());
  const nlohmann::json ack = read_message();
  if (ack["type"] != "hello_ack") {
    throw BackendError("adapter answered hello with '" + ack["type"].get<std::string>() + "'");
  }
  const int version = ack.value("protocol_version", -1);
  if (version != kProtocolVersion) {
    throw BackendError("adapter speaks protocol version " + std::to_string(version) + ", engine speaks " +
                       std::to_string(kProtocolVersion));
  }
  capabilities_ = ack.value("capabilities", std::vector<std::string>{});
}

AdapterClient::~AdapterClient() {
  try {
    shutdown();
  } catch (...) {
  }
}

bool AdapterClient::has_capability(const std::string& name) const {
  return std::find(capabilities_.begin(), capabilities_.end(), name) != capabilities_.end();
}

nlohmann::json AdapterClient::read_message() {
  const std::optional<std::string> line = process_->read_line(timeout_s_);
  if (!line) {
    const int status = process_->finish(1.0);
    closed_ = true;
    std::string how = WIFEXITED(status) ? "exit code " + std::to_string(WEXITSTATUS(status))
                                        : "signal " + std::to_string(WIFSIGNALED(status) ? WTERMSIG(status) : 0);
    throw BackendError("adapter closed its output (" + how + ")");
  }
  try {
    return parse_message(*line);
  } catch (const FormatError& e) {
    throw BackendError(std::string("malformed line from adapter: ") + e.what());
  }
}

nlohmann::json AdapterClient::request(const ScheduleGenome& genome, std::size_t n_images, std::uint64_t seed,
                                      Metric metric) {
  if (closed_) throw BackendError("adapter session is closed");
  const std::int64_t id = next_id_++;
  process_->write_line(make_eval_request(id, genome, n_images, seed, metric).dump());
  const nlohmann::json reply = read_message();
  const std::string type = reply["type"].get<std::string>();
  if (type == "error") {
    throw BackendError("adapter error for request " + std::to_string(id) + " [" + reply.value("code", "?") +
                       "]: " + reply.value("message", ""));
  }
  if (type != "eval_response") throw BackendError("adapter sent '" + type + "' instead of eval_response");
  if (reply.value("id", std::int64_t{-1}) != id) {
    throw BackendError("adapter answered id " + reply.value("id", nlohmann::json()).dump() + " to request " +
                       std::to_string(id));
  }
  return reply;
}

int AdapterClient::shutdown() {
  if (closed_) return 0;
  closed_ = true;
  try {
    process_->write_line(make_shutdown().dump());
  } catch (const BackendError&) {
  }
  return process_->finish(5.0);
}

// ---------------------------------------------------------------------------

ExternEvaluator::ExternEvaluator(ExternEvaluatorOptions options) : options_(std::move(options)) {
  if (options_.command.empty()) throw InvalidConfigError("extern backend needs an adapter command");
  if (options_.jobs < 1) throw InvalidConfigError("extern backend: jobs must be >= 1");
  options_.profile.check();
  for (int i = 0; i < options_.jobs; ++i) {
    adapters_.push_back(std::make_unique<AdapterClient>(options_.command, options_.timeout_s));
  }
}

ExternEvaluator::~ExternEvaluator() {
  try {
    shutdown();
  } catch (...) {
  }
}

void ExternEvaluator::shutdown() {
  for (auto& a : adapters_) a->shutdown();
}

EvalResult ExternEvaluator::to_result(const ScheduleGenome& genome, const nlohmann::json& response,
                                      std::size_t n_images, Metric metric) const {
  EvalResult r;
  r.nfe = nfe(genome);
  r.avg_macs = average_macs(genome, options_.profile);
  r.images_used = static_cast<int>(n_images);
  r.backend = Backend::External;
  if (response.contains("nfe") && response["nfe"].get<int>() != r.nfe) {
    throw BackendError("adapter reports nfe " + response["nfe"].dump() + ", engine computes " +
                       std::to_string(r.nfe));
  }
  try {
    if (metric == Metric::Mse) {
      r.mse = response.at("mse").get<double>();
      r.rfid = response.contains("rfid") ? response["rfid"].get<double>()
                                         : std::numeric_limits<double>::quiet_NaN();
      return r;
    }
    if (response.contains("rfid")) {
      r.rfid = response["rfid"].get<double>();
    } else if (response.contains("candidate_stats") && response.contains("teacher_stats")) {
      r.rfid = frechet(response["candidate_stats"].get<FeatureStats>(), response["teacher_stats"].get<FeatureStats>());
    } else {
      throw BackendError("eval_response carries neither rfid nor feature stats");
    }
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("eval_response has bad fields: ") + e.what());
  }
  if (!std::isfinite(r.rfid) || r.rfid < 0.0) throw BackendError("adapter returned an invalid rfid");
  return r;
}

EvalResult ExternEvaluator::evaluate_metric(const ScheduleGenome& genome, std::size_t n_images, Metric metric) {
  const nlohmann::json response = adapters_.front()->request(genome, n_images, options_.seed, metric);
  return to_result(genome, response, n_images, metric);
}

std::vector<EvalResult> ExternEvaluator::evaluate(std::span<const ScheduleGenome> genomes, std::size_t n_images) {
  if (n_images == 0) throw InsufficientSamplesError("evaluate: n_images must be positive");
  std::vector<EvalResult> results(genomes.size());
  std::vector<std::string> keys(genomes.size());
  std::vector<std::size_t> pending;
  {
    std::lock_guard lock(mutex_);
    std::unordered_map<std::string, std::size_t> first;
    for (std::size_t i = 0; i < genomes.size(); ++i) {
      keys[i] = genome_digest(genomes[i]) + "/" + std::to_string(n_images);
      if (auto it = memo_.find(keys[i]); it != memo_.end()) {
        results[i] = it->second;
      } else if (first.emplace(keys[i], i).second) {
        pending.push_back(i);
      }
    }
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(adapters_.size());
  auto work = [&](std::size_t worker) {
    try {
      for (std::size_t k = next++; k < pending.size(); k = next++) {
        const std::size_t i = pending[k];
        const nlohmann::json response =
            adapters_[worker]->request(genomes[i], n_images, options_.seed, Metric::Rfid);
        results[i] = to_result(genomes[i], response, n_images, Metric::Rfid);
      }
    } catch (...) {
      errors[worker] = std::current_exception();
      next = pending.size();
    }
  };
  const std::size_t workers = std::min(adapters_.size(), pending.size());
  if (workers == 1) {
    work(0);
  } else if (workers > 1) {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::lock_guard lock(mutex_);
  for (std::size_t i : pending) memo_.emplace(keys[i], results[i]);
  for (std::size_t i = 0; i < genomes.size(); ++i) {
    if (auto it = memo_.find(keys[i]); it != memo_.end()) results[i] = it->second;
  }
  return results;
}

}  // namespace flexi
