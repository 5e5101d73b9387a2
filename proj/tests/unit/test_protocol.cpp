// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <chrono>
#include <fstream>

#include "flexi/errors.hpp"
#include "flexi/protocol.hpp"
#include "flexi/rng.hpp"
#include "flexi/search.hpp"
#include "support/temp_dir.hpp"

namespace flexi {
namespace {

std::string mock(const std::string& flags = "") {
  return std::string("'") + FLEXI_MOCK_ADAPTER + "'" + (flags.empty() ? "" : " " + flags);
}

CostProfile mock_profile() {
  CostProfile p;
  p.name = "mock";
  p.full_macs = 1.0;
  p.b_max = 16;
  for (int b = 1; b <= 16; ++b) p.partial_macs[b] = b / 16.0;
  return p;
}

ExternEvaluatorOptions options(const std::string& flags = "", int jobs = 1) {
  ExternEvaluatorOptions o;
  o.command = mock(flags);
  o.jobs = jobs;
  o.profile = mock_profile();
  o.seed = 17;
  o.timeout_s = 10.0;
  return o;
}

SearchSpace space() {
  SearchSpace s;
  s.n_segment_choices = {9, 10, 11};
  s.branch_choices = {1, 3, 6};
  s.interval_choices = {2, 3};
  s.total_steps = 250;
  s.b_max = 12;
  return s;
}

std::vector<ScheduleGenome> genomes(int n) {
  Rng rng(77);
  std::vector<ScheduleGenome> out;
  for (int i = 0; i < n; ++i) out.push_back(random_genome(space(), rng));
  return out;
}

TEST(Messages, BuildersAndParser) {
  EXPECT_EQ(make_hello()["protocol_version"], kProtocolVersion);
  const nlohmann::json req = make_eval_request(7, teacher_genome(4), 1000, 3, Metric::Mse);
  EXPECT_EQ(req["type"], "eval_request");
  EXPECT_EQ(req["metric"], "mse");
  EXPECT_EQ(req["genome"]["total_steps"], 4);
  EXPECT_EQ(parse_message(req.dump()), req);
  EXPECT_THROW(parse_message("{oops"), FormatError);
  EXPECT_THROW(parse_message(R"({"id":1})"), FormatError);
  EXPECT_THROW(parse_message(R"({"type":"bogus"})"), FormatError);
}

TEST(Adapter, HandshakeAndRoundTrips) {
  AdapterClient client(mock());
  EXPECT_TRUE(client.has_capability("rfid"));
  EXPECT_FALSE(client.has_capability("video"));
  const std::vector<ScheduleGenome> gs = genomes(50);
  std::vector<double> first;
  for (const ScheduleGenome& g : gs) {
    const nlohmann::json r = client.request(g, 1000, 5, Metric::Rfid);
    EXPECT_EQ(r["nfe"], nfe(g));
    first.push_back(r["rfid"].get<double>());
  }
  AdapterClient again(mock());
  for (std::size_t i = 0; i < gs.size(); ++i) {
    EXPECT_EQ(again.request(gs[i], 1000, 5, Metric::Rfid)["rfid"].get<double>(), first[i]);
  }
  EXPECT_EQ(client.shutdown(), 0);
  EXPECT_EQ(again.shutdown(), 0);
}

TEST(Adapter, VersionMismatch) { EXPECT_THROW(AdapterClient(mock("--version 2")), BackendError); }

TEST(Adapter, ErrorReplies) {
  const ScheduleGenome g = genomes(1).front();
  {
    AdapterClient c(mock("--error-at 0"));
    EXPECT_THROW(c.request(g, 10, 0, Metric::Rfid), BackendError);
    EXPECT_NO_THROW(c.request(g, 10, 0, Metric::Rfid));
  }
  {
    AdapterClient c(mock("--wrong-id-at 0"));
    EXPECT_THROW(c.request(g, 10, 0, Metric::Rfid), BackendError);
  }
  {
    AdapterClient c(mock("--garbage-at 0"));
    EXPECT_THROW(c.request(g, 10, 0, Metric::Rfid), BackendError);
  }
  {
    AdapterClient c(mock("--exit-at 0"));
    EXPECT_THROW(c.request(g, 10, 0, Metric::Rfid), BackendError);
  }
  {
    AdapterClient c(mock("--delay-ms 3000"), 0.3);
    EXPECT_THROW(c.request(g, 10, 0, Metric::Rfid), BackendError);
  }
  EXPECT_THROW(AdapterClient("exit 0"), BackendError);
}

TEST(Adapter, MalformedInputGetsErrorReply) {
  Subprocess p(mock());
  p.write_line("not json at all");
  const std::optional<std::string> line = p.read_line(10.0);
  ASSERT_TRUE(line);
  const nlohmann::json reply = parse_message(*line);
  EXPECT_EQ(reply["type"], "error");
  EXPECT_EQ(reply["id"], -1);
  EXPECT_EQ(reply["code"], "malformed");
  p.write_line(make_shutdown().dump());
  EXPECT_EQ(p.finish(5.0), 0);
}

TEST(Adapter, ShutdownIsSent) {
  testing::TempDir dir("shutdown");
  const std::filesystem::path log = dir / "log.txt";
  {
    ExternEvaluator ev(options("--log '" + log.string() + "'"));
    const std::vector<ScheduleGenome> gs = genomes(2);
    ev.evaluate(gs, 10);
  }
  std::ifstream in(log);
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_NE(all.find("hello"), std::string::npos);
  EXPECT_NE(all.rfind("shutdown"), std::string::npos);
}

TEST(Adapter, UnresponsiveShutdownIsKilled) {
  const auto start = std::chrono::steady_clock::now();
  {
    AdapterClient c(mock("--ignore-shutdown"));
    c.shutdown();
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 30.0);
}

TEST(ExternEvaluator, ResultsAndDeterminism) {
  const std::vector<ScheduleGenome> gs = genomes(50);
  ExternEvaluator a(options());
  ExternEvaluator b(options("", 3));
  const std::vector<EvalResult> ra = a.evaluate(gs, 1000);
  const std::vector<EvalResult> rb = b.evaluate(gs, 1000);
  EXPECT_EQ(ra, rb);
  for (std::size_t i = 0; i < gs.size(); ++i) {
    EXPECT_EQ(ra[i].backend, Backend::External);
    EXPECT_EQ(ra[i].nfe, nfe(gs[i]));
    EXPECT_DOUBLE_EQ(ra[i].avg_macs, average_macs(gs[i], mock_profile()));
    EXPECT_GE(ra[i].rfid, 0.0);
  }
}

TEST(ExternEvaluator, StatsReplyScoredByEngine) {
  const ScheduleGenome g = genomes(1).front();
  ExternEvaluator plain(options());
  ExternEvaluator stats(options("--stats"));
  const double s = plain.evaluate(std::span(&g, 1), 100).front().rfid;
  // Mean shift s in one coordinate, identical covariances.
  EXPECT_NEAR(stats.evaluate(std::span(&g, 1), 100).front().rfid, s * s, 1e-9);
}

TEST(ExternEvaluator, MseMetric) {
  const ScheduleGenome g = genomes(1).front();
  ExternEvaluator ev(options());
  const EvalResult r = ev.evaluate_metric(g, 100, Metric::Mse);
  ASSERT_TRUE(r.mse);
  EXPECT_GE(*r.mse, 0.0);
}

TEST(ExternEvaluator, NfeMismatchRejected) {
  const ScheduleGenome g = genomes(1).front();
  ExternEvaluator ev(options("--nfe-offset 1"));
  EXPECT_THROW(ev.evaluate(std::span(&g, 1), 100), BackendError);
}

TEST(ExternEvaluator, SolverOrderGenomesForwarded) {
  ScheduleGenome g;
  g.mode = Mode::SolverOrder;
  g.total_steps = 10;
  g.segments = {{1, 3}, {2, 3}, {1, 2}};
  ExternEvaluator ev(options());
  EXPECT_EQ(ev.evaluate(std::span(&g, 1), 100).front().nfe, 8);
}

TEST(ExternEvaluator, TenIterationSearchDeterministic) {
  SearchConfig c;
  c.space = space();
  c.budget = 0.5;
  c.max_iterations = 10;
  c.n_images = 1000;
  c.master_seed = 3;
  std::string digest;
  for (int jobs : {1, 2}) {
    ExternEvaluator ev(options("", jobs));
    const SearchResult r = search_loop(c, ev);
    EXPECT_EQ(r.state.log.size(), 11u);
    if (digest.empty()) digest = population_digest(r.state.population);
    EXPECT_EQ(population_digest(r.state.population), digest);
  }
}

}  // namespace
}  // namespace flexi
