// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "cli.hpp"
#include "flexi/io.hpp"
#include "flexi/schedule.hpp"
#include "support/temp_dir.hpp"

namespace flexi {
namespace {

const std::filesystem::path kData = FLEXI_DATA_DIR;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const cli::CommandOutcome r = cli::run_command(args, out, err);
  return {r.exit_code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override { ::setenv("FLEXI_CACHE_DIR", (dir_ / "cache").c_str(), 1); }
  void TearDown() override { ::unsetenv("FLEXI_CACHE_DIR"); }

  std::filesystem::path small_config(int iterations) {
    nlohmann::json c = read_json_file(std::filesystem::path(FLEXI_CONFIG_DIR) / "toy_search.json");
    c["search"]["max_iterations"] = iterations;
    c["search"]["n_images"] = 32;
    const std::filesystem::path p = dir_ / ("cfg" + std::to_string(iterations) + ".json");
    write_file_atomic(p, c.dump());
    return p;
  }

  testing::TempDir dir_{"cli"};
};

TEST_F(CliTest, CostPrintsTableValue) {
  ASSERT_EQ(run({"baseline", "--steps", "250", "--interval", "2", "--branch", "1", "--out", (dir_ / "g.json").string()})
                .code,
            0);
  const CliRun r = run({"cost", "--genome", (dir_ / "g.json").string(), "--profile",
                     (kData / "profiles" / "ldm.json").string(), "--format", "text"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("52.12"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("1.9x"), std::string::npos) << r.out;
  const CliRun j = run({"cost", "--genome", (dir_ / "g.json").string(), "--profile",
                     (kData / "profiles" / "ldm.json").string()});
  EXPECT_NEAR(nlohmann::json::parse(j.out)["avg_macs"].get<double>(), 52.12, 0.01);
}

TEST_F(CliTest, ExpandText) {
  write_file_atomic(dir_ / "g.json", R"({"mode":"cache","total_steps":4,"segments":[[1,2],[2,1]]})");
  const CliRun r = run({"expand", "--genome", (dir_ / "g.json").string(), "--format", "text"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "0 FULL\n1 PARTIAL b=1\n2 FULL\n3 NULL\n");
  const CliRun j = run({"expand", "--genome", (dir_ / "g.json").string()});
  EXPECT_EQ(nlohmann::json::parse(j.out)["nfe"], 3);
}

TEST_F(CliTest, SpaceSize) {
  const CliRun r = run({"space-size", "--config", (std::filesystem::path(FLEXI_CONFIG_DIR) / "toy_search.toml").string(),
                     "--format", "text"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "810085515264\n");  // 12^9 + 12^10 + 12^11
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"cost", "--genome", "/nonexistent.json", "--profile", "/nonexistent.json"}).code, 1);
  EXPECT_EQ(run({"baseline", "--interval", "0"}).code, 1);
  EXPECT_EQ(run({"expand", "--genome", (dir_ / "x").string(), "--format", "yaml"}).code, 1);
  write_file_atomic(dir_ / "bad.json", R"({"segments": "nope"})");
  EXPECT_EQ(run({"expand", "--genome", (dir_ / "bad.json").string()}).code, 2);
  write_file_atomic(dir_ / "g.json", nlohmann::json(teacher_genome(50)).dump());
  EXPECT_EQ(run({"eval", "--genome", (dir_ / "g.json").string(), "--backend", "extern"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, EvalTeacherIsZero) {
  write_file_atomic(dir_ / "g.json", nlohmann::json(teacher_genome(50)).dump());
  const CliRun r = run({"eval", "--genome", (dir_ / "g.json").string(), "--images", "16"});
  ASSERT_EQ(r.code, 0) << r.err;
  const nlohmann::json j = nlohmann::json::parse(r.out);
  EXPECT_LE(j["rfid"].get<double>(), 1e-6);
  EXPECT_EQ(j["nfe"], 50);
  EXPECT_EQ(j["images_used"], 16);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "cache"));
}

TEST_F(CliTest, EvalMse) {
  write_file_atomic(dir_ / "g.json", nlohmann::json(deepcache_uniform(50, 3, 2)).dump());
  const CliRun r = run({"eval", "--genome", (dir_ / "g.json").string(), "--images", "8", "--metric", "mse"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_GT(nlohmann::json::parse(r.out)["mse"].get<double>(), 0.0);
}

TEST_F(CliTest, EvalExternBackend) {
  write_file_atomic(dir_ / "g.json", nlohmann::json(deepcache_uniform(50, 3, 2)).dump());
  const CliRun r = run({"eval", "--genome", (dir_ / "g.json").string(), "--images", "100", "--backend", "extern",
                     "--extern-cmd", FLEXI_MOCK_ADAPTER});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["backend"], "external");
}

TEST_F(CliTest, TraceJsonLines) {
  write_file_atomic(dir_ / "g.json", nlohmann::json(deepcache_uniform(10, 2, 1)).dump());
  const CliRun r = run({"trace", "--genome", (dir_ / "g.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    EXPECT_EQ(j["position"], count);
    ++count;
  }
  EXPECT_EQ(count, 10);
}

TEST_F(CliTest, SearchArtifactsReportAndResume) {
  const std::filesystem::path cfg3 = small_config(3);
  const std::filesystem::path out = dir_ / "run";
  const CliRun r = run({"search", "--config", cfg3.string(), "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"population.json", "log.jsonl", "best.genome.json", "checkpoint.json"}) {
    EXPECT_TRUE(std::filesystem::exists(out / f)) << f;
  }
  EXPECT_FALSE(std::filesystem::exists(out / "log.jsonl.partial"));
  const nlohmann::json summary = nlohmann::json::parse(r.out);
  const ScheduleGenome best = read_json_file(out / "best.genome.json").get<ScheduleGenome>();
  EXPECT_EQ(genome_digest(best), summary["best_digest"]);

  const CliRun report = run({"report", "--population", (out / "population.json").string()});
  ASSERT_EQ(report.code, 0) << report.err;
  std::istringstream lines(report.out);
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  EXPECT_EQ(header, "digest,nfe,avg_macs,speedup_vs_teacher,rfid");
  EXPECT_EQ(first.substr(0, 64), summary["best_digest"].get<std::string>());

  // Extending the run from its checkpoint matches a straight 5-iteration run.
  const std::filesystem::path cfg5 = small_config(5);
  const CliRun resumed = run({"search", "--config", cfg5.string(), "--out", out.string(), "--resume"});
  ASSERT_EQ(resumed.code, 0) << resumed.err;
  const CliRun straight = run({"search", "--config", cfg5.string(), "--out", (dir_ / "straight").string()});
  ASSERT_EQ(straight.code, 0) << straight.err;
  EXPECT_EQ(nlohmann::json::parse(resumed.out)["population_digest"],
            nlohmann::json::parse(straight.out)["population_digest"]);
  EXPECT_EQ(read_text_file(out / "population.json"), read_text_file(dir_ / "straight" / "population.json"));
  EXPECT_EQ(read_text_file(out / "log.jsonl"), read_text_file(dir_ / "straight" / "log.jsonl"));
}

TEST(ReportCsv, SortsAndComputesSpeedup) {
  PopulationEntry a{teacher_genome(4), {}, 0, "aaa"};
  PopulationEntry b{teacher_genome(4), {}, 0, "bbb"};
  a.result = {0.5, 4, 2.0, 10, Backend::InProcess, std::nullopt};
  b.result = {0.1, 2, 1.0, 10, Backend::InProcess, std::nullopt};
  EXPECT_EQ(cli::report_csv({a, b}, 4.0),
            "digest,nfe,avg_macs,speedup_vs_teacher,rfid\nbbb,2,1,4,0.1\naaa,4,2,2,0.5\n");
}

}  // namespace
}  // namespace flexi
