// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>

#include "flexi/config.hpp"
#include "flexi/errors.hpp"
#include "flexi/evaluator.hpp"
#include "flexi/rng.hpp"
#include "flexi/search.hpp"
#include "support/temp_dir.hpp"

namespace flexi {
namespace {

SearchSpace small_space() {
  SearchSpace s;
  s.n_segment_choices = {4, 5, 6};
  s.branch_choices = {1, 2, 3};
  s.interval_choices = {1, 2, 3};
  s.total_steps = 20;
  s.b_max = 3;
  return s;
}

SimEvaluatorOptions options(std::size_t n_seeds) {
  SimEvaluatorOptions o;
  o.total_steps = 20;
  o.seeds = seed_range(0, n_seeds);
  return o;
}

std::vector<ScheduleGenome> random_genomes(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ScheduleGenome> out;
  for (int i = 0; i < count; ++i) out.push_back(random_genome(small_space(), rng));
  return out;
}

TEST(Evaluator, TeacherFixedPoint) {
  SimEvaluator ev(options(200));
  const ScheduleGenome teacher = teacher_genome(20);
  const EvalResult r = ev.evaluate(std::span(&teacher, 1), 200).front();
  EXPECT_LE(r.rfid, 1e-6);
  EXPECT_EQ(r.nfe, 20);
  EXPECT_DOUBLE_EQ(r.avg_macs, ev.profile().full_macs);
  EXPECT_EQ(r.images_used, 200);
  EXPECT_EQ(r.backend, Backend::InProcess);
}

TEST(Evaluator, CachedScheduleScoresWorse) {
  SimEvaluator ev(options(200));
  const ScheduleGenome g = deepcache_uniform(20, 4, 3);
  const EvalResult r = ev.evaluate(std::span(&g, 1), 200).front();
  EXPECT_GT(r.rfid, 1e-6);
  EXPECT_LT(r.avg_macs, ev.profile().full_macs);
}

// Prefix resume and memoization must not change any number.
TEST(Evaluator, ResumeEqualsColdRun) {
  const std::vector<ScheduleGenome> genomes = random_genomes(12, 7);
  SimEvaluatorOptions cold_opts = options(150);
  cold_opts.state_cache_bytes = 0;
  SimEvaluator cold(cold_opts);
  SimEvaluator warm(options(150));
  std::vector<EvalResult> expected;
  for (const ScheduleGenome& g : genomes) expected.push_back(cold.evaluate(std::span(&g, 1), 150).front());
  const std::vector<EvalResult> got = warm.evaluate(genomes, 150);
  for (std::size_t i = 0; i < genomes.size(); ++i) EXPECT_EQ(got[i], expected[i]) << i;
  EXPECT_GT(warm.stats().resumed_chunks, 0u);
  EXPECT_EQ(cold.stats().resumed_chunks, 0u);
  // Second pass is served from the memo.
  EXPECT_EQ(warm.evaluate(genomes, 150), got);
  EXPECT_GE(warm.stats().memo_hits, genomes.size());
}

TEST(Evaluator, JobsDoNotChangeResults) {
  const std::vector<ScheduleGenome> genomes = random_genomes(8, 8);
  SimEvaluator serial(options(100));
  SimEvaluatorOptions par = options(100);
  par.jobs = 3;
  SimEvaluator parallel(par);
  EXPECT_EQ(serial.evaluate(genomes, 100), parallel.evaluate(genomes, 100));
}

TEST(Evaluator, FreeFunctionAgrees) {
  SimEvaluator ev(options(100));
  const ScheduleGenome g = random_genomes(1, 9).front();
  const EvalResult a = ev.evaluate(std::span(&g, 1), 100).front();
  const EvalResult b = evaluate(ev.model(), ev.sampler(), g, ev.teacher(), ev.profile(), ev.extractor(), 100);
  EXPECT_EQ(a, b);
}

TEST(Evaluator, PrefixOfSeeds) {
  SimEvaluator ev(options(100));
  const ScheduleGenome g = random_genomes(1, 10).front();
  const EvalResult r = ev.evaluate(std::span(&g, 1), 40).front();
  EXPECT_EQ(r.images_used, 40);
  EXPECT_THROW(ev.evaluate(std::span(&g, 1), 101), InsufficientSamplesError);
  ScheduleGenome wrong = teacher_genome(10);
  EXPECT_THROW(ev.evaluate(std::span(&wrong, 1), 10), InvalidGenomeError);
}

TEST(Evaluator, MseMode) {
  SimEvaluatorOptions o = options(50);
  o.with_mse = true;
  SimEvaluator ev(o);
  const ScheduleGenome t = teacher_genome(20);
  const ScheduleGenome g = deepcache_uniform(20, 3, 2);
  const std::vector<ScheduleGenome> both{t, g};
  const std::vector<EvalResult> r = ev.evaluate(both, 50);
  ASSERT_TRUE(r[0].mse && r[1].mse);
  EXPECT_LT(*r[0].mse, 1e-12);
  EXPECT_GT(*r[1].mse, 0.0);
}

TEST(TeacherCache, RoundTripAndReuse) {
  testing::TempDir dir("teacher");
  SimEvaluatorOptions o = options(64);
  o.cache_dir = dir.path();
  o.with_mse = true;
  SimEvaluator first(o);
  SimEvaluator second(o);
  EXPECT_EQ(first.teacher().features, second.teacher().features);
  ASSERT_TRUE(second.teacher().images.has_value());
  EXPECT_EQ(*first.teacher().images, *second.teacher().images);

  const std::filesystem::path entry = dir.path() / first.teacher().cache_key();
  ASSERT_TRUE(std::filesystem::exists(entry / "stats.json"));
  ASSERT_TRUE(std::filesystem::exists(entry / "features.bin"));
  const std::optional<TeacherBundle> loaded = load_teacher(dir.path(), first.teacher());
  ASSERT_TRUE(loaded.has_value());
  EXPECT_EQ(loaded->seeds, first.teacher().seeds);

  // Different seeds map to a different entry.
  SimEvaluatorOptions other = o;
  other.seeds = seed_range(1000, 64);
  SimEvaluator third(other);
  EXPECT_NE(third.teacher().cache_key(), first.teacher().cache_key());
}

TEST(TeacherCache, DamagedFilesRaise) {
  testing::TempDir dir("teacher-bad");
  SimEvaluatorOptions o = options(16);
  o.cache_dir = dir.path();
  SimEvaluator ev(o);
  const std::filesystem::path features = dir.path() / ev.teacher().cache_key() / "features.bin";
  {
    std::ofstream f(features, std::ios::binary | std::ios::trunc);
    f << "FLXF";
  }
  EXPECT_THROW(load_teacher(dir.path(), ev.teacher()), FormatError);
  {
    std::ofstream f(features, std::ios::binary | std::ios::trunc);
    f << "JUNKJUNKJUNKJUNK";
  }
  EXPECT_THROW(load_teacher(dir.path(), ev.teacher()), FormatError);
}

TEST(TeacherBundle, StatsPrefix) {
  SimEvaluator ev(options(30));
  const FeatureStats s = ev.teacher().stats(10);
  EXPECT_EQ(s.count, 10u);
  EXPECT_THROW(ev.teacher().stats(31), InsufficientSamplesError);
}

TEST(Ranking, TieRules) {
  Candidate a{teacher_genome(4), {}, "b"};
  Candidate b{teacher_genome(4), {}, "a"};
  a.result.rfid = b.result.rfid = 0.5;
  a.result.avg_macs = 1.0;
  b.result.avg_macs = 2.0;
  EXPECT_TRUE(rank_less(a, b));
  b.result.avg_macs = 1.0;
  EXPECT_TRUE(rank_less(b, a));
  a.result.rfid = 0.1;
  const std::vector<Candidate> sorted = rank({b, a});
  EXPECT_EQ(sorted.front().digest, "b");
}

TEST(EvalResultJson, RoundTrip) {
  EvalResult r{0.25, 12, 3.5, 100, Backend::External, 0.01};
  EXPECT_EQ(nlohmann::json(r).get<EvalResult>(), r);
  EXPECT_EQ(metric_from_string("mse"), Metric::Mse);
  EXPECT_THROW(metric_from_string("fid"), InvalidConfigError);
}

}  // namespace
}  // namespace flexi
