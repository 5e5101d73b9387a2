// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>

#include "flexi/config.hpp"
#include "flexi/costmodel.hpp"
#include "flexi/errors.hpp"
#include "flexi/evaluator.hpp"
#include "flexi/io.hpp"
#include "flexi/protocol.hpp"
#include "flexi/schedule.hpp"
#include "flexi/simulator.hpp"

namespace flexi::cli {

namespace {

/// Reporting seeds start here, well clear of search seeds.
constexpr std::uint64_t kReportSeedBase = std::uint64_t{1} << 32;

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string genome;
  std::string profile;
  std::string space;
  std::string population;
  std::string out;
  std::string backend = "sim";
  std::string extern_cmd;
  std::string format;
  std::string metric = "rfid";
  std::optional<std::uint64_t> seed;
  std::optional<int> images;
  std::optional<int> jobs;
  int interval = 1;
  int branch = 1;
  int steps = 50;
  bool resume = false;
  bool verbose = false;
};

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

template <typename T>
T load_as(const std::string& path, const char* what) {
  const nlohmann::json j = read_json_file(path);
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": not a valid " + what + ": " + e.what());
  }
}

ExperimentConfig experiment(const Options& o, std::optional<int> total_steps) {
  ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = load_experiment(o.config);
  } else {
    // Defaults for commands that only need the simulator.
    cfg.search.space.total_steps = total_steps.value_or(50);
    cfg.search.space.b_max = cfg.simulator.unet.levels;
    cfg.search.space.n_segment_choices = {cfg.search.space.total_steps};
    for (int b = 1; b <= cfg.simulator.unet.levels; ++b) cfg.search.space.branch_choices.push_back(b);
    cfg.search.space.interval_choices = {1};
    cfg.search.budget_fraction = 1.0;
  }
  if (total_steps && *total_steps != cfg.search.space.total_steps) {
    throw InvalidGenomeError("genome has " + std::to_string(*total_steps) + " steps, config has " +
                             std::to_string(cfg.search.space.total_steps));
  }
  if (o.images) cfg.search.n_images = *o.images;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (!o.profile.empty()) cfg.profile = o.profile;
  return cfg;
}

CostProfile profile_for(const ExperimentConfig& cfg) {
  return cfg.profile ? load_profile(*cfg.profile) : UNet(cfg.simulator.unet).cost_profile();
}

std::unique_ptr<Evaluator> make_evaluator(const ExperimentConfig& cfg, const Options& o, std::uint64_t seed_base,
                                          bool with_mse) {
  if (o.backend == "extern") {
    if (o.extern_cmd.empty()) throw UsageError("--backend extern requires --extern-cmd");
    ExternEvaluatorOptions eo;
    eo.command = o.extern_cmd;
    eo.jobs = cfg.jobs;
    eo.profile = profile_for(cfg);
    eo.seed = seed_base;
    return std::make_unique<ExternEvaluator>(std::move(eo));
  }
  SimEvaluatorOptions so = sim_options(cfg);
  so.seeds = seed_range(seed_base, static_cast<std::size_t>(cfg.search.n_images));
  so.cache_dir = teacher_cache_dir();
  so.with_mse = with_mse;
  return std::make_unique<SimEvaluator>(std::move(so));
}

void emit(std::ostream& out, const std::string& text, const Options& o, CommandOutcome& outcome) {
  if (o.out.empty()) {
    out << text;
  } else {
    write_file_atomic(o.out, text);
    outcome.artifacts.emplace_back(o.out);
  }
}

// ---------------------------------------------------------------------------

void cmd_search(const Options& o, std::ostream& out, std::ostream& err, CommandOutcome& outcome) {
  ExperimentConfig cfg = experiment(o, std::nullopt);
  if (o.seed) cfg.search.master_seed = *o.seed;
  cfg.search.check();
  const std::filesystem::path dir = o.out.empty() ? std::filesystem::path("search-out") : std::filesystem::path(o.out);
  std::filesystem::create_directories(dir);
  const std::filesystem::path checkpoint = dir / "checkpoint.json";

  std::optional<SearchState> resume;
  if (o.resume && std::filesystem::exists(checkpoint)) resume = checkpoint_load(checkpoint, cfg.search);

  auto evaluator = make_evaluator(cfg, o, cfg.simulator.seed_base, false);

  const std::filesystem::path log_partial = dir / "log.jsonl.partial";
  std::ofstream log(log_partial, std::ios::trunc);
  if (!log) throw IoError("cannot write " + log_partial.string());
  if (resume) {
    for (const IterationLog& l : resume->log) log << nlohmann::json(l).dump() << '\n';
  }
  const auto start = std::chrono::steady_clock::now();
  SearchCallbacks callbacks;
  callbacks.on_iteration = [&](const IterationLog& l) {
    log << nlohmann::json(l).dump() << '\n';
    log.flush();
    if (o.verbose) {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      err << "iteration " << l.iteration << " best_rfid " << l.best_rfid << " pop " << l.pop_size << " ("
          << fixed(s, 1) << " s)\n";
    }
  };
  callbacks.on_state = [&](const SearchState& s) { checkpoint_save(checkpoint, s, cfg.search); };

  const SearchResult result = search_loop(cfg.search, *evaluator, callbacks, std::move(resume));
  log.close();

  write_file_atomic(dir / "population.json", dump_json(population_json(result.state.population)));
  write_file_atomic(dir / "best.genome.json", dump_json(result.best.genome));
  std::filesystem::rename(log_partial, dir / "log.jsonl");
  outcome.artifacts = {dir / "population.json", dir / "log.jsonl", dir / "best.genome.json", checkpoint};

  const nlohmann::json summary{{"best_digest", result.best.digest},
                               {"best_rfid", result.best.result.rfid},
                               {"best_avg_macs", result.best.result.avg_macs},
                               {"best_nfe", result.best.result.nfe},
                               {"budget", cfg.search.resolve_budget(evaluator->profile())},
                               {"iterations", result.state.next_iteration - 1},
                               {"population_size", result.state.population.size()},
                               {"population_digest", population_digest(result.state.population)}};
  if (o.format == "text") {
    out << "best " << result.best.digest.substr(0, 12) << " rfid " << result.best.result.rfid << " avg_macs "
        << result.best.result.avg_macs << " nfe " << result.best.result.nfe << '\n';
  } else {
    out << dump_json(summary);
  }
}

void cmd_expand(const Options& o, std::ostream& out, CommandOutcome& outcome) {
  const ScheduleGenome genome = load_as<ScheduleGenome>(o.genome, "genome");
  const StepPlan plan = expand(genome);
  std::ostringstream os;
  if (o.format == "text" || o.format == "csv") {
    if (o.format == "csv") os << "position,action,branch\n";
    for (std::size_t i = 0; i < plan.actions.size(); ++i) {
      const StepAction& a = plan.actions[i];
      if (o.format == "csv") {
        os << i << ',' << to_string(a.kind) << ',' << (a.kind == StepKind::Partial ? a.branch : 0) << '\n';
      } else {
        os << i << ' ' << to_string(a.kind);
        if (a.kind == StepKind::Partial) os << " b=" << a.branch;
        os << '\n';
      }
    }
  } else {
    nlohmann::json actions = nlohmann::json::array();
    for (std::size_t i = 0; i < plan.actions.size(); ++i) {
      const StepAction& a = plan.actions[i];
      nlohmann::json item{{"position", i}, {"action", to_string(a.kind)}, {"segment", a.segment}};
      if (a.kind == StepKind::Partial) item["branch"] = a.branch;
      actions.push_back(std::move(item));
    }
    os << dump_json({{"total_steps", plan.total_steps}, {"nfe", plan.nfe()}, {"actions", actions}});
  }
  emit(out, os.str(), o, outcome);
}

void cmd_cost(const Options& o, std::ostream& out, CommandOutcome& outcome) {
  const ScheduleGenome genome = load_as<ScheduleGenome>(o.genome, "genome");
  const CostProfile profile = load_profile(o.profile);
  const double avg = average_macs(genome, profile);
  const double speedup = profile.full_macs / avg;
  const int n = nfe(genome);
  std::ostringstream os;
  if (o.format == "text") {
    os << "avg_macs " << fixed(avg, 2) << " G  nfe " << n << "  speedup " << fixed(speedup, 1) << "x\n";
  } else if (o.format == "csv") {
    os << "digest,nfe,avg_macs,speedup_vs_teacher\n"
       << genome_digest(genome) << ',' << n << ',' << num(avg) << ',' << num(speedup) << '\n';
  } else {
    os << dump_json({{"profile", profile.name},
                     {"avg_macs", avg},
                     {"nfe", n},
                     {"full_macs", profile.full_macs},
                     {"speedup_vs_teacher", speedup}});
  }
  emit(out, os.str(), o, outcome);
}

void cmd_eval(const Options& o, std::ostream& out, CommandOutcome& outcome) {
  const ScheduleGenome genome = load_as<ScheduleGenome>(o.genome, "genome");
  const ExperimentConfig cfg = experiment(o, genome.total_steps);
  const Metric metric = metric_from_string(o.metric);
  const std::uint64_t seed_base = o.seed.value_or(kReportSeedBase);
  const std::size_t n = static_cast<std::size_t>(cfg.search.n_images);
  auto evaluator = make_evaluator(cfg, o, seed_base, metric == Metric::Mse);
  EvalResult r;
  if (auto* ext = dynamic_cast<ExternEvaluator*>(evaluator.get()); ext != nullptr && metric == Metric::Mse) {
    r = ext->evaluate_metric(genome, n, metric);
  } else {
    r = evaluator->evaluate(std::span<const ScheduleGenome>(&genome, 1), n).front();
  }
  std::ostringstream os;
  if (o.format == "text") {
    os << "rfid " << r.rfid << "  nfe " << r.nfe << "  avg_macs " << r.avg_macs << "  images " << r.images_used;
    if (r.mse) os << "  mse " << *r.mse;
    os << '\n';
  } else if (o.format == "csv") {
    os << "digest,nfe,avg_macs,rfid,mse\n"
       << genome_digest(genome) << ',' << r.nfe << ',' << num(r.avg_macs) << ',' << num(r.rfid) << ','
       << (r.mse ? num(*r.mse) : "") << '\n';
  } else {
    nlohmann::json j = r;
    j["digest"] = genome_digest(genome);
    os << dump_json(j);
  }
  emit(out, os.str(), o, outcome);
}

void cmd_baseline(const Options& o, std::ostream& out, CommandOutcome& outcome) {
  emit(out, dump_json(deepcache_uniform(o.steps, o.interval, o.branch)), o, outcome);
}

void cmd_space_size(const Options& o, std::ostream& out, CommandOutcome& outcome) {
  SearchSpace space;
  if (!o.space.empty()) {
    space = load_as<SearchSpace>(o.space, "search space");
  } else if (!o.config.empty()) {
    space = load_experiment(o.config).search.space;
  } else {
    throw UsageError("space-size needs --space or --config");
  }
  const std::string size = space_size(space).str();
  emit(out, o.format == "text" ? size + "\n" : dump_json({{"space_size", size}}), o, outcome);
}

void cmd_report(const Options& o, std::ostream& out, CommandOutcome& outcome) {
  const ExperimentConfig cfg = experiment(o, std::nullopt);
  const double teacher = profile_for(cfg).full_macs;
  if (o.out.empty()) {
    out << report_csv(population_from_json(read_json_file(o.population)), teacher);
  } else {
    write_report(o.population, o.out, teacher);
    outcome.artifacts.emplace_back(o.out);
  }
}

void cmd_trace(const Options& o, std::ostream& out, CommandOutcome& outcome) {
  const ScheduleGenome genome = load_as<ScheduleGenome>(o.genome, "genome");
  const ExperimentConfig cfg = experiment(o, genome.total_steps);
  const UNet model(cfg.simulator.unet);
  const DdimSampler sampler(cfg.simulator.sampler);
  const std::uint64_t seed = o.seed.value_or(0);
  std::ostringstream os;
  PlanRunOptions run;
  run.trace = [&os](const TraceRecord& r) { os << nlohmann::json(r).dump() << '\n'; };
  const std::uint64_t seeds[] = {seed};
  run_plan(model, expand(genome), noise_batch(seeds, cfg.simulator.unet.image), sampler, run);
  emit(out, os.str(), o, outcome);
}

}  // namespace

std::optional<std::filesystem::path> teacher_cache_dir() {
  if (const char* dir = std::getenv("FLEXI_CACHE_DIR"); dir != nullptr && *dir != '\0') return dir;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg != nullptr && *xdg != '\0') {
    return std::filesystem::path(xdg) / "flexicache";
  }
  if (const char* home = std::getenv("HOME"); home != nullptr && *home != '\0') {
    return std::filesystem::path(home) / ".cache" / "flexicache";
  }
  return std::nullopt;
}

std::string report_csv(std::vector<PopulationEntry> population, double teacher_macs) {
  std::stable_sort(population.begin(), population.end(),
                   [](const PopulationEntry& a, const PopulationEntry& b) { return rank_less(a, b); });
  std::ostringstream os;
  os << "digest,nfe,avg_macs,speedup_vs_teacher,rfid\n";
  for (const PopulationEntry& e : population) {
    os << e.digest << ',' << e.result.nfe << ',' << num(e.result.avg_macs) << ','
       << num(teacher_macs / e.result.avg_macs) << ',' << num(e.result.rfid) << '\n';
  }
  return os.str();
}

void write_report(const std::filesystem::path& population_file, const std::filesystem::path& out,
                  double teacher_macs) {
  write_file_atomic(out, report_csv(population_from_json(read_json_file(population_file)), teacher_macs));
}

CommandOutcome run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"flexi: segment-wise cache schedule search for diffusion samplers", "flexi"};
  app.require_subcommand(1);
  const auto formats = CLI::IsMember({"json", "text", "csv"});

  auto add_backend = [&](CLI::App* sub) {
    sub->add_option("--backend", o.backend, "Evaluator backend")->check(CLI::IsMember({"sim", "extern"}));
    sub->add_option("--extern-cmd", o.extern_cmd, "Adapter command line for --backend extern");
    sub->add_option("--jobs", o.jobs, "Parallel evaluations")->check(CLI::PositiveNumber);
    sub->add_option("--images", o.images, "Images per rFID estimate")->check(CLI::PositiveNumber);
  };

  CLI::App* search = app.add_subcommand("search", "Run the evolutionary schedule search");
  search->add_option("--config", o.config, "Search config (TOML or JSON)")->required()->check(CLI::ExistingFile);
  search->add_option("--out", o.out, "Output directory");
  search->add_option("--seed", o.seed, "Master seed");
  search->add_option("--profile", o.profile, "Cost profile JSON")->check(CLI::ExistingFile);
  search->add_flag("--resume", o.resume, "Continue from <out>/checkpoint.json when present");
  search->add_flag("--verbose", o.verbose, "Progress lines on stderr");
  add_backend(search);

  CLI::App* expand_cmd = app.add_subcommand("expand", "Print the per-step plan of a genome");
  expand_cmd->add_option("--genome", o.genome)->required()->check(CLI::ExistingFile);
  expand_cmd->add_option("--out", o.out);

  CLI::App* cost = app.add_subcommand("cost", "Average MACs of a genome under a profile");
  cost->add_option("--genome", o.genome)->required()->check(CLI::ExistingFile);
  cost->add_option("--profile", o.profile)->required()->check(CLI::ExistingFile);
  cost->add_option("--out", o.out);

  CLI::App* eval = app.add_subcommand("eval", "Score one genome against the teacher");
  eval->add_option("--genome", o.genome)->required()->check(CLI::ExistingFile);
  eval->add_option("--config", o.config)->check(CLI::ExistingFile);
  eval->add_option("--profile", o.profile)->check(CLI::ExistingFile);
  eval->add_option("--seed", o.seed, "First noise seed");
  eval->add_option("--metric", o.metric)->check(CLI::IsMember({"rfid", "mse"}));
  eval->add_option("--out", o.out);
  add_backend(eval);

  CLI::App* baseline = app.add_subcommand("baseline", "Uniform-interval baseline genome");
  baseline->add_option("--interval", o.interval)->check(CLI::PositiveNumber);
  baseline->add_option("--branch", o.branch)->check(CLI::PositiveNumber);
  baseline->add_option("--steps", o.steps)->check(CLI::PositiveNumber);
  baseline->add_option("--out", o.out);

  CLI::App* size = app.add_subcommand("space-size", "Number of genomes in a search space");
  size->add_option("--space", o.space)->check(CLI::ExistingFile);
  size->add_option("--config", o.config)->check(CLI::ExistingFile);
  size->add_option("--out", o.out);

  CLI::App* report = app.add_subcommand("report", "CSV report of a population dump");
  report->add_option("--population", o.population)->required()->check(CLI::ExistingFile);
  report->add_option("--config", o.config)->check(CLI::ExistingFile);
  report->add_option("--profile", o.profile)->check(CLI::ExistingFile);
  report->add_option("--out", o.out);

  CLI::App* trace = app.add_subcommand("trace", "Per-step trace of one sample");
  trace->add_option("--genome", o.genome)->required()->check(CLI::ExistingFile);
  trace->add_option("--config", o.config)->check(CLI::ExistingFile);
  trace->add_option("--seed", o.seed, "Noise seed");
  trace->add_option("--out", o.out);

  for (CLI::App* sub : {search, expand_cmd, cost, eval, baseline, size, trace}) {
    sub->add_option("--format", o.format)->check(formats);
  }
  report->add_option("--format", o.format)->check(CLI::IsMember({"csv"}));

  CommandOutcome outcome;
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return outcome;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    outcome.exit_code = kUsage;
    return outcome;
  }
  if (o.format.empty()) o.format = "json";

  try {
    if (search->parsed()) cmd_search(o, out, err, outcome);
    if (expand_cmd->parsed()) cmd_expand(o, out, outcome);
    if (cost->parsed()) cmd_cost(o, out, outcome);
    if (eval->parsed()) cmd_eval(o, out, outcome);
    if (baseline->parsed()) cmd_baseline(o, out, outcome);
    if (size->parsed()) cmd_space_size(o, out, outcome);
    if (report->parsed()) cmd_report(o, out, outcome);
    if (trace->parsed()) cmd_trace(o, out, outcome);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    outcome.exit_code = kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    outcome.exit_code = kRuntime;
  }
  return outcome;
}

}  // namespace flexi::cli
