// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "flexi/costmodel.hpp"
#include "flexi/metrics.hpp"
#include "flexi/schedule.hpp"
#include "flexi/simulator.hpp"

namespace flexi {

enum class Backend { InProcess, External };
std::string_view to_string(Backend backend);

enum class Metric { Rfid, Mse };
std::string_view to_string(Metric metric);
Metric metric_from_string(std::string_view text);

/// Teacher outputs for a fixed seed list. Features are kept per image so
/// that any seed prefix can be scored.
struct TeacherBundle {
  std::string teacher_plan_digest;
  std::string model_id;
  int total_steps = 0;
  ImageShape image;
  std::vector<std::uint64_t> seeds;
  std::uint64_t extractor_seed = 0;
  Eigen::MatrixXd features;  // seeds.size() x feature_dim
  /// Teacher images rounded to float32 precision, present when requested.
  std::optional<std::vector<Image>> images;

  FeatureStats stats(std::size_t n_images) const;
  /// Digest naming the on-disk cache directory.
  std::string cache_key() const;
};

/// Stable identifier of a (model, sampler) pair.
std::string model_identity(const UNetConfig& unet, const SamplerConfig& sampler);

TeacherBundle build_teacher(const UNet& model, const DdimSampler& sampler, int total_steps,
                            std::span<const std::uint64_t> seeds, const FeatureExtractor& extractor,
                            bool keep_images = false);

/// Cache layout: <dir>/<cache_key>/{stats.json, features.bin, images.bin}.
/// features.bin: "FLXF", u32 version, u32 count, u32 dim, then float64 LE
/// row-major. images.bin: "FLXI", u32 version, u32 count, u32 H, u32 W,
/// u32 C, then float32 LE row-major.
void save_teacher(const TeacherBundle& teacher, const std::filesystem::path& dir);
/// Returns nullopt when the entry is absent. Throws FormatError on damage.
std::optional<TeacherBundle> load_teacher(const std::filesystem::path& dir, const TeacherBundle& key);

/// Build, or load when a matching entry exists under `cache_dir`.
TeacherBundle cached_teacher(const UNet& model, const DdimSampler& sampler, int total_steps,
                             std::span<const std::uint64_t> seeds, const FeatureExtractor& extractor,
                             bool keep_images, const std::optional<std::filesystem::path>& cache_dir);

struct EvalResult {
  double rfid = 0.0;
  int nfe = 0;
  double avg_macs = 0.0;
  int images_used = 0;
  Backend backend = Backend::InProcess;
  std::optional<double> mse;

  friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

void to_json(nlohmann::json& j, const EvalResult& result);
void from_json(const nlohmann::json& j, EvalResult& result);

/// Scores one genome against the teacher on the first `n_images` seeds.
EvalResult evaluate(const UNet& model, const DdimSampler& sampler, const ScheduleGenome& genome,
                    const TeacherBundle& teacher, const CostProfile& profile,
                    const FeatureExtractor& extractor, std::size_t n_images, bool with_mse = false);

struct Candidate {
  ScheduleGenome genome;
  EvalResult result;
  std::string digest;
};

/// Ascending rfid, then avg_macs, then digest.
bool rank_less(const Candidate& a, const Candidate& b);
std::vector<Candidate> rank(std::vector<Candidate> candidates);

/// Fitness and cost oracle used by the search.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  /// Results come back in submission order.
  virtual std::vector<EvalResult> evaluate(std::span<const ScheduleGenome> genomes,
                                           std::size_t n_images) = 0;
  virtual const CostProfile& profile() const = 0;
  virtual std::string identity() const = 0;
};

struct SimEvaluatorOptions {
  UNetConfig unet;
  SamplerConfig sampler;
  std::uint64_t extractor_seed = 0;
  int feature_dim = 32;
  int total_steps = 50;
  std::vector<std::uint64_t> seeds;
  int jobs = 1;
  bool with_mse = false;
  std::optional<std::filesystem::path> cache_dir;
  /// Cost profile used for avg_macs; defaults to the toy model's own.
  std::optional<CostProfile> profile;
  /// Memory bound for stored intermediate samples (0 disables reuse).
  std::size_t state_cache_bytes = std::size_t{1} << 30;
};

/// In-process backend. Memoizes results by genome digest and resumes new
/// candidates from samples already computed for a shared plan prefix,
/// which reproduces a cold run bit for bit.
class SimEvaluator final : public Evaluator {
 public:
  explicit SimEvaluator(SimEvaluatorOptions options);

  std::vector<EvalResult> evaluate(std::span<const ScheduleGenome> genomes, std::size_t n_images) override;
  const CostProfile& profile() const override { return profile_; }
  std::string identity() const override;

  const UNet& model() const { return model_; }
  const DdimSampler& sampler() const { return sampler_; }
  const FeatureExtractor& extractor() const { return extractor_; }
  const TeacherBundle& teacher() const { return teacher_; }

  EvalResult evaluate_one(const ScheduleGenome& genome, std::size_t n_images);

  struct Stats {
    std::size_t memo_hits = 0;
    std::size_t resumed_chunks = 0;
    std::size_t cold_chunks = 0;
  };
  Stats stats() const;

 private:
  std::vector<Image> generate(const StepPlan& plan, std::size_t n_images);
  std::shared_ptr<const Tensor> lookup_state(const std::string& key);
  void store_state(const std::string& key, Tensor state);

  SimEvaluatorOptions options_;
  UNet model_;
  DdimSampler sampler_;
  FeatureExtractor extractor_;
  CostProfile profile_;
  TeacherBundle teacher_;

  mutable std::mutex mutex_;
  std::unordered_map<std::string, EvalResult> memo_;
  std::list<std::string> lru_;
  struct StateEntry {
    std::shared_ptr<const Tensor> state;
    std::list<std::string>::iterator lru_pos;
  };
  std::unordered_map<std::string, StateEntry> states_;
  std::size_t state_bytes_ = 0;
  Stats stats_;
};

}  // namespace flexi
