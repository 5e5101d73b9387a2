// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion. Optional arguments
// restrict the run to the named criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "flexi/config.hpp"
#include "flexi/costmodel.hpp"
#include "flexi/evaluator.hpp"
#include "flexi/metrics.hpp"
#include "flexi/rng.hpp"
#include "flexi/schedule.hpp"
#include "flexi/search.hpp"
#include "flexi/simulator.hpp"
#include "support/oracles.hpp"

namespace flexi::acceptance {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

Outcome cost_table_ldm() {
  const auto start = Clock::now();
  const int T = 250;
  const double full = 99.82;
  const double derived = derive_partial_macs(full, 52.12, 2, T);
  const CostProfile profile{"ldm", full, {{1, 4.42}}, 1};
  const CostProfile shipped = load_profile(std::filesystem::path(FLEXI_DATA_DIR) / "profiles" / "ldm.json");
  const std::pair<int, double> rows[] = {{2, 52.12}, {5, 23.50}, {10, 13.97}, {20, 9.39}};
  double worst = 0.0;
  for (const auto& [interval, want] : rows) {
    const ScheduleGenome g = deepcache_uniform(T, interval, 1);
    worst = std::max(worst, std::abs(average_macs(g, profile) - want));
    worst = std::max(worst, std::abs(average_macs(g, shipped) - want));
  }
  const double elapsed = seconds_since(start);
  const bool pass = std::abs(derived - 4.42) < 0.005 && worst <= 0.05 && elapsed < 1.0;
  return {pass, "partial[1]=" + fmt(derived) + " max_err=" + fmt(worst) + " time=" + fmt(elapsed) + "s"};
}

Outcome cost_table_cifar() {
  const int T = 100;
  const double full = 6.10;
  const std::pair<int, double> rows[] = {{5, 3.01}, {10, 2.63}, {20, 2.42}};
  double worst = 0.0;
  for (const auto& [source_interval, source_avg] : rows) {
    const double p = derive_partial_macs(full, source_avg, source_interval, T);
    const CostProfile profile{"cifar", full, {{2, p}}, 2};
    for (const auto& [interval, want] : rows) {
      worst = std::max(worst, std::abs(average_macs(deepcache_uniform(T, interval, 2), profile) - want));
    }
  }
  return {worst <= 0.03, "max_err=" + fmt(worst)};
}

Outcome nfe_consistency() {
  SearchSpace space{{9, 10, 11}, {1, 2, 3}, {2, 3}, 250, 3, Mode::Cache};
  std::optional<ScheduleGenome> found;
  for (int n : space.n_segment_choices) {
    for (int threes = 0; threes <= n && !found; ++threes) {
      ScheduleGenome g{std::vector<SegmentSpec>(static_cast<std::size_t>(n), SegmentSpec{1, 2}), 250, Mode::Cache};
      for (int i = 0; i < threes; ++i) g.segments[static_cast<std::size_t>(i)].interval = 3;
      if (nfe(g) == 24 && validate(g, space).ok()) found = g;
    }
  }
  Rng rng(2024);
  int mismatches = 0;
  const SearchSpace wide{{1, 2, 5, 9, 10, 11, 25}, {1, 2, 3}, {1, 2, 3, 5, 10}, 250, 3, Mode::Cache};
  for (int i = 0; i < 1000; ++i) {
    const ScheduleGenome g = random_genome(wide, rng);
    const StepPlan plan = expand(g);
    const auto active = std::count_if(plan.actions.begin(), plan.actions.end(),
                                      [](const StepAction& a) { return a.kind != StepKind::Null; });
    if (nfe(g) != active || plan.nfe() != active) ++mismatches;
  }
  std::string detail = found ? "24-NFE genome N=" + std::to_string(found->n_segments()) : "no 24-NFE genome";
  return {found.has_value() && mismatches == 0, detail + " mismatches=" + std::to_string(mismatches) + "/1000"};
}

FeatureStats stats_of(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  FeatureStats s;
  s.mean = std::move(mean);
  s.cov = std::move(cov);
  s.count = 1000;
  return s;
}

Outcome frechet_correctness() {
  const auto start = Clock::now();
  double err = 0.0;
  const auto one = [](double m, double v) {
    return stats_of(Eigen::VectorXd::Constant(1, m), Eigen::MatrixXd::Constant(1, 1, v));
  };
  // (m1 - m2)^2 + s1 + s2 - 2 sqrt(s1 s2) up to the jitter
  const double cases[][4] = {{0, 1, 1, 1}, {0, 4, 0, 1}, {2, 9, -1, 0.25}, {0.5, 2, 0.5, 3}};
  for (const auto& c : cases) {
    const double v1 = c[1] + kFrechetJitter, v2 = c[3] + kFrechetJitter;
    const double want = (c[0] - c[2]) * (c[0] - c[2]) + v1 + v2 - 2.0 * std::sqrt(v1 * v2);
    err = std::max(err, std::abs(frechet(one(c[0], c[1]), one(c[2], c[3])) - want));
  }
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(16));
    Eigen::VectorXd da(d), db(d), ma(d), mb(d);
    double want = 0.0;
    for (int i = 0; i < d; ++i) {
      da(i) = rng.uniform(0.1, 4.0);
      db(i) = rng.uniform(0.1, 4.0);
      ma(i) = rng.normal();
      mb(i) = rng.normal();
      const double a = da(i) + kFrechetJitter, b = db(i) + kFrechetJitter;
      want += (ma(i) - mb(i)) * (ma(i) - mb(i)) + (std::sqrt(a) - std::sqrt(b)) * (std::sqrt(a) - std::sqrt(b));
    }
    const double got = frechet(stats_of(ma, da.asDiagonal().toDenseMatrix()), stats_of(mb, db.asDiagonal().toDenseMatrix()));
    err = std::max(err, std::abs(got - want));
  }
  double asym = 0.0, self = 0.0, oracle_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(32));
    const auto spd = [&] {
      Eigen::MatrixXd m(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
      return Eigen::MatrixXd(m * m.transpose() / d + 0.05 * Eigen::MatrixXd::Identity(d, d));
    };
    const auto vec = [&] {
      Eigen::VectorXd v(d);
      for (int i = 0; i < d; ++i) v(i) = rng.normal();
      return v;
    };
    const FeatureStats a = stats_of(vec(), spd());
    const FeatureStats b = stats_of(vec(), spd());
    const double ab = frechet(a, b);
    asym = std::max(asym, std::abs(ab - frechet(b, a)));
    self = std::max(self, frechet(a, a));
    oracle_err = std::max(oracle_err, std::abs(ab - oracle::frechet(a, b)) / std::max(1.0, ab));
  }
  const double elapsed = seconds_since(start);
  const bool pass = err <= 1e-6 && asym <= 1e-8 && self <= 1e-6 && oracle_err <= 1e-6 && elapsed < 5.0;
  return {pass, "closed_form_err=" + fmt(err) + " asym=" + fmt(asym) + " self=" + fmt(self) +
                    " oracle_rel_err=" + fmt(oracle_err) + " time=" + fmt(elapsed) + "s"};
}

Tensor random_tensor(const ImageShape& shape, Rng& rng) {
  Tensor t(1, shape.height, shape.width, shape.channels);
  for (double& v : t.data) v = rng.normal();
  return t;
}

Outcome cache_splice() {
  const UNet model(UNetConfig{});
  Rng rng(5);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = random_tensor(model.config().image, rng);
    const Tensor stale_input = random_tensor(model.config().image, rng);
    const int t = static_cast<int>(rng.below(1000));
    const int t_stale = static_cast<int>(rng.below(1000));
    const int branch = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(model.levels())));
    const FullOutput stale = model.forward_full(stale_input, t_stale);
    const CacheSlot slot{branch, stale.junction[static_cast<std::size_t>(branch - 1)], t_stale, 0};
    const Tensor got = model.forward_partial(x, t, slot);
    worst = std::max(worst, oracle::max_abs_diff(got, oracle::spliced(model, x, t, branch, slot.feature)));
  }
  const DdimSampler sampler(SamplerConfig{});
  const std::vector<std::uint64_t> seeds = seed_range(0, 8);
  const Tensor noise = noise_batch(seeds, model.config().image);
  const Tensor planned = run_plan(model, expand(teacher_genome(50)), noise, sampler);
  const bool bit_equal = planned.data == oracle::reference_ddim(model, sampler, noise, 50).data;
  return {worst <= 1e-12 && bit_equal,
          "max_err=" + fmt(worst) + " all_full_bit_equal=" + (bit_equal ? "yes" : "no")};
}

ExperimentConfig toy_config() {
  return load_experiment(std::filesystem::path(FLEXI_CONFIG_DIR) / "toy_search.json");
}

Outcome teacher_fixed_point() {
  const ExperimentConfig config = toy_config();
  SimEvaluator evaluator(sim_options(config));
  const EvalResult r = evaluator.evaluate_one(teacher_genome(config.search.space.total_steps), 1000);
  return {r.rfid <= 1e-6 && r.images_used == 1000, "rfid=" + fmt(r.rfid)};
}

Outcome search_contract() {
  const ExperimentConfig config = toy_config();
  const SearchConfig& sc = config.search;
  const bool setup = sc.space.total_steps == 50 && sc.space.b_max == 3 && sc.n_images == 1000 &&
                     sc.budget_fraction == 0.6 && sc.max_iterations == 100 && sc.n_p == 25 && sc.n_c == 5 &&
                     sc.n_u == 300;

  struct Run {
    std::string digest;
    int over_budget = 0;
    int rises = 0;
    int iterations = 0;
    double seconds = 0.0;
    double best = 0.0;
  };
  const auto run = [&] {
    SimEvaluator evaluator(sim_options(config));
    const double budget = sc.resolve_budget(evaluator.profile());
    Run r;
    double previous = INFINITY;
    SearchCallbacks callbacks;
    callbacks.on_iteration = [&](const IterationLog& log) {
      if (log.best_rfid > previous) ++r.rises;
      previous = log.best_rfid;
      if (log.iteration > 0) ++r.iterations;  // iteration 0 records the initial population
    };
    callbacks.on_state = [&](const SearchState& state) {
      for (const PopulationEntry& e : state.population) {
        if (!within_budget(e.genome, evaluator.profile(), budget) || !(e.result.avg_macs < budget)) ++r.over_budget;
      }
    };
    const auto start = Clock::now();
    const SearchResult result = search_loop(sc, evaluator, callbacks);
    r.seconds = seconds_since(start);
    for (const PopulationEntry& e : result.state.population) {
      if (!within_budget(e.genome, evaluator.profile(), budget)) ++r.over_budget;
    }
    r.digest = population_digest(result.state.population);
    r.best = result.best.result.rfid;
    return r;
  };
  const Run first = run();
  const Run second = run();
  const bool pass = setup && first.over_budget == 0 && first.rises == 0 && first.iterations == 100 &&
                    first.digest == second.digest && first.seconds < 600.0;
  return {pass, "over_budget=" + std::to_string(first.over_budget) + " best_rises=" + std::to_string(first.rises) +
                    " iterations=" + std::to_string(first.iterations) + " best_rfid=" + fmt(first.best) +
                    " rerun_digest_match=" + (first.digest == second.digest ? "yes" : "no") +
                    " time=" + fmt(first.seconds) + "s"};
}

Outcome space_size_enumeration() {
  const std::vector<std::vector<int>> n_lists{{1}, {2}, {1, 2}, {2, 3}, {1, 2, 3}, {4}, {3, 5}};
  const std::vector<std::vector<int>> b_lists{{1}, {1, 2}, {2, 3}, {1, 2, 3}};
  const std::vector<std::vector<int>> i_lists{{1}, {1, 2}, {2, 3}, {2, 3, 4}, {1, 5}};
  int checked = 0, wrong = 0;
  for (int total : {5, 8, 16})
    for (const auto& n : n_lists)
      for (const auto& b : b_lists)
        for (const auto& i : i_lists) {
          if (n.back() > total) continue;
          const SearchSpace s{n, b, i, total, 3, Mode::Cache};
          const auto size = space_size(s);
          if (size > 10000) continue;
          std::set<std::string> digests;
          for (const ScheduleGenome& g : oracle::enumerate_space(s)) digests.insert(genome_digest(g));
          if (size != digests.size()) ++wrong;
          ++checked;
        }
  return {wrong == 0 && checked > 0, "spaces=" + std::to_string(checked) + " wrong=" + std::to_string(wrong)};
}

Outcome rfid_self_consistency() {
  const ExperimentConfig config = toy_config();
  const int repetitions = 5;
  const std::size_t n_candidates = 20;
  std::vector<double> tau_ab, tau_ac;
  for (int rep = 0; rep < repetitions; ++rep) {
    const auto options_for = [&](std::uint64_t base, std::size_t count) {
      SimEvaluatorOptions o = sim_options(config);
      o.seeds = seed_range(base, count);
      return o;
    };
    const std::uint64_t base = (std::uint64_t{rep} + 2) << 32;
    SimEvaluator a(options_for(base, 1000));
    SimEvaluator b(options_for(base + 100000, 1000));
    SimEvaluator c(options_for(base + 200000, 200));
    const double budget = config.search.resolve_budget(a.profile());

    Rng rng(derive_seed(77, {static_cast<std::uint64_t>(rep)}));
    std::vector<ScheduleGenome> candidates;
    std::set<std::string> seen;
    while (candidates.size() < n_candidates) {
      ScheduleGenome g = random_genome(config.search.space, rng);
      if (within_budget(g, a.profile(), budget) && seen.insert(genome_digest(g)).second) candidates.push_back(g);
    }
    const auto scores = [&](SimEvaluator& ev, std::size_t n) {
      std::vector<double> out;
      for (const EvalResult& r : ev.evaluate(candidates, n)) out.push_back(r.rfid);
      return out;
    };
    const std::vector<double> sa = scores(a, 1000), sb = scores(b, 1000), sc = scores(c, 200);
    tau_ab.push_back(kendall_tau(sa, sb));
    tau_ac.push_back(kendall_tau(sa, sc));
  }
  const auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const double min_ab = *std::min_element(tau_ab.begin(), tau_ab.end());
  std::string per_rep;
  for (int i = 0; i < repetitions; ++i) {
    per_rep += (i ? "," : "") + fmt(tau_ab[static_cast<std::size_t>(i)], 3) + "/" +
               fmt(tau_ac[static_cast<std::size_t>(i)], 3);
  }
  const bool pass = min_ab >= 0.7 && mean(tau_ac) < mean(tau_ab);
  return {pass, "min_tau_1000v1000=" + fmt(min_ab, 3) + " mean_tau_1000v1000=" + fmt(mean(tau_ab), 3) +
                    " mean_tau_1000v200=" + fmt(mean(tau_ac), 3) + " per_rep=" + per_rep};
}

Outcome kendall_oracle() {
  Rng rng(4242);
  int wrong = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(80);
    const bool ties = trial % 2 == 1;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = ties ? static_cast<double>(rng.below(6)) : rng.normal();
      b[i] = ties ? static_cast<double>(rng.below(5)) : rng.normal();
    }
    if (std::all_of(a.begin(), a.end(), [&](double v) { return v == a[0]; })) a[0] += 1.0;
    if (std::all_of(b.begin(), b.end(), [&](double v) { return v == b[0]; })) b[0] += 1.0;
    if (kendall_tau(a, b) != oracle::kendall_pairs(a, b)) ++wrong;
  }
  return {wrong == 0, "vectors=100 mismatches=" + std::to_string(wrong)};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace flexi::acceptance

int main(int argc, char** argv) {
  using namespace flexi::acceptance;
  const std::vector<Criterion> criteria{
      {"cost_table_ldm", cost_table_ldm},
      {"cost_table_cifar", cost_table_cifar},
      {"nfe_consistency", nfe_consistency},
      {"frechet_correctness", frechet_correctness},
      {"cache_splice_oracle", cache_splice},
      {"teacher_fixed_point", teacher_fixed_point},
      {"search_contract", search_contract},
      {"space_size_enumeration", space_size_enumeration},
      {"rfid_self_consistency", rfid_self_consistency},
      {"kendall_oracle", kendall_oracle},
  };
  const std::set<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.name)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << "  " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
