// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#include "flexi/search.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <unordered_set>

#include "flexi/digest.hpp"
#include "flexi/errors.hpp"
#include "flexi/io.hpp"

namespace flexi {

namespace {

constexpr const char* kCheckpointFormat = "flexi-search-checkpoint";
constexpr int kCheckpointVersion = 1;

// Seed-path tags keep the per-purpose streams apart.
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kSelectStream = 1;
constexpr std::uint64_t kChildStream = 2;

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  return idx;
}

std::optional<int> adjacent_choice(const std::vector<int>& choices, int value, MutationMode mode) {
  if (mode == MutationMode::Heavier) {
    auto it = std::upper_bound(choices.begin(), choices.end(), value);
    if (it == choices.end()) return std::nullopt;
    return *it;
  }
  auto it = std::lower_bound(choices.begin(), choices.end(), value);
  if (it == choices.begin()) return std::nullopt;
  return *std::prev(it);
}

nlohmann::json comparable_config(const SearchConfig& config) {
  nlohmann::json j = config;
  j.erase("max_iterations");
  j.erase("stagnation_patience");
  return j;
}

IterationLog make_log(int iteration, const SearchState& state, int admitted) {
  IterationLog log;
  log.iteration = iteration;
  log.best_rfid = state.population.front().result.rfid;
  log.best_macs = state.population.front().result.avg_macs;
  log.pop_size = state.population.size();
  log.children_admitted = admitted;
  return log;
}

void sort_population(std::vector<PopulationEntry>& population) {
  std::stable_sort(population.begin(), population.end(),
                   [](const PopulationEntry& a, const PopulationEntry& b) { return rank_less(a, b); });
}

}  // namespace

void SearchConfig::check() const {
  space.check();
  if (budget.has_value() == budget_fraction.has_value()) {
    throw InvalidConfigError("search: set exactly one of budget and budget_fraction");
  }
  if (budget && !(*budget > 0.0)) throw InvalidConfigError("search: budget must be positive");
  if (budget_fraction && !(*budget_fraction > 0.0)) {
    throw InvalidConfigError("search: budget_fraction must be positive");
  }
  if (max_iterations < 0) throw InvalidConfigError("search: max_iterations must be >= 0");
  if (n_p < 1 || n_c < 1 || n_u < 1 || n_m < 1 || n_init < 1 || max_attempts < 1 || init_attempts < 1) {
    throw InvalidConfigError("search: n_p, n_c, n_u, n_m, n_init and attempt caps must be >= 1");
  }
  if (n_p > n_u) throw InvalidConfigError("search: n_p must not exceed n_u");
  if (n_init > n_u) throw InvalidConfigError("search: n_init must not exceed n_u");
  if (n_images < 1) throw InvalidConfigError("search: n_images must be >= 1");
  if (stagnation_patience < 0) throw InvalidConfigError("search: stagnation_patience must be >= 0");
}

double SearchConfig::resolve_budget(const CostProfile& profile) const {
  check();
  return budget ? *budget : *budget_fraction * profile.full_macs;
}

void to_json(nlohmann::json& j, const SearchConfig& c) {
  j = nlohmann::json{{"space", c.space},
                     {"max_iterations", c.max_iterations},
                     {"n_p", c.n_p},
                     {"n_c", c.n_c},
                     {"n_u", c.n_u},
                     {"max_attempts", c.max_attempts},
                     {"n_m", c.n_m},
                     {"n_init", c.n_init},
                     {"init_attempts", c.init_attempts},
                     {"master_seed", c.master_seed},
                     {"n_images", c.n_images},
                     {"stagnation_patience", c.stagnation_patience}};
  if (c.budget) j["budget"] = *c.budget;
  if (c.budget_fraction) j["budget_fraction"] = *c.budget_fraction;
}

void from_json(const nlohmann::json& j, SearchConfig& c) {
  static const std::set<std::string> known{"space",  "budget",        "budget_fraction", "max_iterations",
                                           "n_p",    "n_c",           "n_u",             "max_attempts",
                                           "n_m",    "n_init",        "init_attempts",   "master_seed",
                                           "n_images", "stagnation_patience"};
  for (const auto& [key, value] : j.items()) {
    if (known.count(key) == 0) throw InvalidConfigError("search config: unknown key '" + key + "'");
  }
  c.space = j.at("space").get<SearchSpace>();
  c.budget = j.contains("budget") ? std::optional<double>(j.at("budget").get<double>()) : std::nullopt;
  c.budget_fraction = j.contains("budget_fraction")
                          ? std::optional<double>(j.at("budget_fraction").get<double>())
                          : std::nullopt;
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.n_p = j.value("n_p", c.n_p);
  c.n_c = j.value("n_c", c.n_c);
  c.n_u = j.value("n_u", c.n_u);
  c.max_attempts = j.value("max_attempts", c.max_attempts);
  c.n_m = j.value("n_m", c.n_m);
  c.n_init = j.value("n_init", c.n_init);
  c.init_attempts = j.value("init_attempts", c.init_attempts);
  c.master_seed = j.value("master_seed", c.master_seed);
  c.n_images = j.value("n_images", c.n_images);
  c.stagnation_patience = j.value("stagnation_patience", c.stagnation_patience);
}

bool rank_less(const PopulationEntry& a, const PopulationEntry& b) {
  if (a.result.rfid != b.result.rfid) return a.result.rfid < b.result.rfid;
  if (a.result.avg_macs != b.result.avg_macs) return a.result.avg_macs < b.result.avg_macs;
  return a.digest < b.digest;
}

void to_json(nlohmann::json& j, const IterationLog& l) {
  j = nlohmann::json{{"iteration", l.iteration},
                     {"best_rfid", l.best_rfid},
                     {"best_macs", l.best_macs},
                     {"pop_size", l.pop_size},
                     {"children_admitted", l.children_admitted}};
}

void from_json(const nlohmann::json& j, IterationLog& l) {
  l.iteration = j.at("iteration").get<int>();
  l.best_rfid = j.at("best_rfid").get<double>();
  l.best_macs = j.at("best_macs").get<double>();
  l.pop_size = j.at("pop_size").get<std::size_t>();
  l.children_admitted = j.at("children_admitted").get<int>();
}

// ---------------------------------------------------------------------------
// Mutation

std::optional<ScheduleGenome> mutate_segment(const ScheduleGenome& genome, const SearchSpace& space, int index,
                                             MutationMode mode, Dimension dimension) {
  if (index < 0 || index >= genome.n_segments()) return std::nullopt;
  ScheduleGenome child = genome;
  SegmentSpec& seg = child.segments[static_cast<std::size_t>(index)];
  switch (dimension) {
    case Dimension::Branch: {
      const auto next = adjacent_choice(space.branch_choices, seg.branch, mode);
      if (!next) return std::nullopt;
      seg.branch = *next;
      return child;
    }
    case Dimension::Interval: {
      const auto next = adjacent_choice(space.interval_choices, seg.interval, mode);
      if (!next) return std::nullopt;
      seg.interval = *next;
      return child;
    }
    case Dimension::NSegment:
      return mode == MutationMode::Heavier ? split_segment(genome, space, index)
                                           : merge_segments(genome, space, index);
  }
  return std::nullopt;
}

std::optional<ScheduleGenome> split_segment(const ScheduleGenome& genome, const SearchSpace& space, int index) {
  const int n = genome.n_segments();
  if (index < 0 || index >= n || space.n_segment_choices.empty()) return std::nullopt;
  if (n + 1 > space.n_segment_choices.back() || n + 1 > genome.total_steps) return std::nullopt;
  ScheduleGenome child = genome;
  child.segments.insert(child.segments.begin() + index + 1, genome.segments[static_cast<std::size_t>(index)]);
  return child;
}

std::optional<ScheduleGenome> merge_segments(const ScheduleGenome& genome, const SearchSpace& space, int index) {
  const int n = genome.n_segments();
  if (index < 0 || index + 1 >= n || space.n_segment_choices.empty()) return std::nullopt;
  if (n - 1 < space.n_segment_choices.front()) return std::nullopt;
  ScheduleGenome child = genome;
  const SegmentSpec& a = genome.segments[static_cast<std::size_t>(index)];
  const SegmentSpec& b = genome.segments[static_cast<std::size_t>(index + 1)];
  child.segments[static_cast<std::size_t>(index)] = {std::min(a.branch, b.branch), std::min(a.interval, b.interval)};
  child.segments.erase(child.segments.begin() + index + 1);
  return child;
}

std::optional<ScheduleGenome> mutate(const ScheduleGenome& parent, const SearchConfig& config, Rng& rng) {
  struct Op {
    int index;
    MutationMode mode;
    Dimension dimension;
  };
  const SearchSpace& space = config.space;
  const auto picks = sample_indices(static_cast<std::size_t>(parent.n_segments()),
                                    static_cast<std::size_t>(config.n_m), rng);
  std::vector<Op> edits;
  std::optional<Op> resize;
  for (std::size_t index : picks) {
    const MutationMode mode = rng.coin() ? MutationMode::Heavier : MutationMode::Lighter;
    auto dimension = static_cast<Dimension>(rng.below(3));
    if (dimension == Dimension::NSegment && resize) dimension = static_cast<Dimension>(rng.below(2));
    const Op op{static_cast<int>(index), mode, dimension};
    if (dimension == Dimension::NSegment) {
      resize = op;
    } else {
      edits.push_back(op);
    }
  }

  std::optional<ScheduleGenome> child = parent;
  for (const Op& op : edits) {
    child = mutate_segment(*child, space, op.index, op.mode, op.dimension);
    if (!child) return std::nullopt;
  }
  if (resize) {
    const int n = child->n_segments();
    const auto target = adjacent_choice(space.n_segment_choices, n, resize->mode);
    if (!target) return std::nullopt;
    while (child && child->n_segments() != *target) {
      if (resize->mode == MutationMode::Heavier) {
        child = split_segment(*child, space, resize->index);
      } else {
        const int last = child->n_segments() - 1;
        child = merge_segments(*child, space, std::min(resize->index, last - 1));
      }
    }
    if (!child) return std::nullopt;
  }
  if (!validate(*child, space).ok()) return std::nullopt;
  return child;
}

ScheduleGenome random_genome(const SearchSpace& space, Rng& rng) {
  space.check();
  ScheduleGenome g;
  g.total_steps = space.total_steps;
  g.mode = space.mode;
  const int n = space.n_segment_choices[rng.below(space.n_segment_choices.size())];
  std::vector<int> spans;
  if (space.mode == Mode::Cache) spans = partition_spans(space.total_steps, n);
  for (int i = 0; i < n; ++i) {
    const int branch = space.branch_choices[rng.below(space.branch_choices.size())];
    std::vector<int> intervals = space.interval_choices;
    if (!spans.empty()) {
      const int span = spans[static_cast<std::size_t>(i)];
      std::erase_if(intervals, [span](int k) { return k > span; });
      if (intervals.empty()) {
        throw InvalidSpaceError("no interval choice fits a span of " + std::to_string(span));
      }
    }
    g.segments.push_back({branch, intervals[rng.below(intervals.size())]});
  }
  return g;
}

ScheduleGenome cheapest_genome(const SearchSpace& space) {
  space.check();
  ScheduleGenome g;
  g.total_steps = space.total_steps;
  g.mode = space.mode;
  g.segments.assign(static_cast<std::size_t>(space.n_segment_choices.front()),
                    SegmentSpec{space.branch_choices.front(), space.interval_choices.front()});
  return g;
}

// ---------------------------------------------------------------------------
// Loop

SearchState init_population(const SearchConfig& config, Evaluator& evaluator) {
  const double budget = config.resolve_budget(evaluator.profile());
  const double floor_cost = average_macs(cheapest_genome(config.space), evaluator.profile());
  if (!(floor_cost < budget)) {
    throw InfeasibleBudgetError("budget " + std::to_string(budget) + " G-MACs is not above the cheapest genome (" +
                                std::to_string(floor_cost) + " G-MACs)");
  }
  Rng rng(derive_seed(config.master_seed, {kInitStream}));
  std::vector<ScheduleGenome> genomes;
  std::vector<std::string> digests;
  std::unordered_set<std::string> seen;
  for (int attempt = 0; attempt < config.init_attempts && static_cast<int>(genomes.size()) < config.n_init;
       ++attempt) {
    ScheduleGenome g = random_genome(config.space, rng);
    if (!within_budget(g, evaluator.profile(), budget)) continue;
    std::string d = genome_digest(g);
    if (!seen.insert(d).second) continue;
    genomes.push_back(std::move(g));
    digests.push_back(std::move(d));
  }
  if (static_cast<int>(genomes.size()) < config.n_init) {
    throw InfeasibleBudgetError("found only " + std::to_string(genomes.size()) + " of " +
                                std::to_string(config.n_init) + " distinct under-budget genomes in " +
                                std::to_string(config.init_attempts) + " draws");
  }
  const std::vector<EvalResult> results =
      evaluator.evaluate(genomes, static_cast<std::size_t>(config.n_images));
  SearchState state;
  for (std::size_t i = 0; i < genomes.size(); ++i) {
    state.population.push_back({std::move(genomes[i]), results[i], 0, std::move(digests[i])});
  }
  sort_population(state.population);
  state.log.push_back(make_log(0, state, static_cast<int>(state.population.size())));
  return state;
}

IterationLog search_step(SearchState& state, const SearchConfig& config, Evaluator& evaluator) {
  if (state.population.empty()) throw InvalidConfigError("search: empty population");
  const double budget = config.resolve_budget(evaluator.profile());
  const int it = state.next_iteration;

  Rng select(derive_seed(config.master_seed, {kSelectStream, static_cast<std::uint64_t>(it)}));
  const auto sample = sample_indices(state.population.size(), static_cast<std::size_t>(config.n_p), select);
  const PopulationEntry* parent = &state.population[sample.front()];
  for (std::size_t i : sample) {
    if (rank_less(state.population[i], *parent)) parent = &state.population[i];
  }

  std::unordered_set<std::string> seen;
  for (const PopulationEntry& e : state.population) seen.insert(e.digest);
  std::vector<ScheduleGenome> children;
  std::vector<std::string> digests;
  for (int attempt = 0; attempt < config.max_attempts && static_cast<int>(children.size()) < config.n_c;
       ++attempt) {
    Rng rng(derive_seed(config.master_seed,
                        {kChildStream, static_cast<std::uint64_t>(it), static_cast<std::uint64_t>(attempt)}));
    std::optional<ScheduleGenome> child = mutate(parent->genome, config, rng);
    if (!child || !within_budget(*child, evaluator.profile(), budget)) continue;
    std::string d = genome_digest(*child);
    if (!seen.insert(d).second) continue;
    children.push_back(std::move(*child));
    digests.push_back(std::move(d));
  }

  const double previous_best = state.population.front().result.rfid;
  if (!children.empty()) {
    const std::vector<EvalResult> results =
        evaluator.evaluate(children, static_cast<std::size_t>(config.n_images));
    for (std::size_t i = 0; i < children.size(); ++i) {
      state.population.push_back({std::move(children[i]), results[i], it, std::move(digests[i])});
    }
    sort_population(state.population);
    if (state.population.size() > static_cast<std::size_t>(config.n_u)) {
      state.population.resize(static_cast<std::size_t>(config.n_u));
    }
  }
  state.stagnant_iterations =
      state.population.front().result.rfid < previous_best ? 0 : state.stagnant_iterations + 1;
  state.next_iteration = it + 1;
  IterationLog log = make_log(it, state, static_cast<int>(digests.size()));
  state.log.push_back(log);
  return log;
}

SearchResult search_loop(const SearchConfig& config, Evaluator& evaluator, const SearchCallbacks& callbacks,
                         std::optional<SearchState> resume) {
  config.check();
  SearchState state;
  if (resume) {
    state = std::move(*resume);
  } else {
    state = init_population(config, evaluator);
    if (callbacks.on_iteration) callbacks.on_iteration(state.log.back());
    if (callbacks.on_state) callbacks.on_state(state);
  }
  while (state.next_iteration <= config.max_iterations) {
    if (config.stagnation_patience > 0 && state.stagnant_iterations >= config.stagnation_patience) break;
    const IterationLog log = search_step(state, config, evaluator);
    if (callbacks.on_iteration) callbacks.on_iteration(log);
    if (callbacks.on_state) callbacks.on_state(state);
  }
  PopulationEntry best = state.population.front();
  return {std::move(state), std::move(best)};
}

// ---------------------------------------------------------------------------
// Persistence

nlohmann::json population_json(const std::vector<PopulationEntry>& population) {
  nlohmann::json arr = nlohmann::json::array();
  for (const PopulationEntry& e : population) {
    arr.push_back({{"genome", e.genome},
                   {"rfid", e.result.rfid},
                   {"nfe", e.result.nfe},
                   {"avg_macs", e.result.avg_macs},
                   {"digest", e.digest}});
  }
  return arr;
}

std::vector<PopulationEntry> population_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw FormatError("population: expected a JSON array");
  std::vector<PopulationEntry> out;
  for (const nlohmann::json& item : j) {
    PopulationEntry e;
    e.genome = item.at("genome").get<ScheduleGenome>();
    e.result.rfid = item.at("rfid").get<double>();
    e.result.nfe = item.at("nfe").get<int>();
    e.result.avg_macs = item.at("avg_macs").get<double>();
    e.digest = item.value("digest", genome_digest(e.genome));
    out.push_back(std::move(e));
  }
  return out;
}

std::string population_digest(const std::vector<PopulationEntry>& population) {
  std::string joined;
  for (const PopulationEntry& e : population) joined += e.digest + "\n";
  return sha256_hex(joined);
}

void checkpoint_save(const std::filesystem::path& path, const SearchState& state, const SearchConfig& config) {
  nlohmann::json entries = nlohmann::json::array();
  for (const PopulationEntry& e : state.population) {
    entries.push_back({{"genome", e.genome},
                       {"result", e.result},
                       {"birth_iteration", e.birth_iteration},
                       {"digest", e.digest}});
  }
  const nlohmann::json payload{{"config", config},
                               {"next_iteration", state.next_iteration},
                               {"stagnant_iterations", state.stagnant_iterations},
                               {"population", entries},
                               {"log", state.log}};
  const nlohmann::json doc{{"format", kCheckpointFormat},
                           {"version", kCheckpointVersion},
                           {"payload", payload},
                           {"checksum", sha256_hex(payload.dump())}};
  write_file_atomic(path, dump_json(doc));
}

SearchState checkpoint_load(const std::filesystem::path& path, const SearchConfig& config) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ChecksumError("checkpoint " + path.string() + " is corrupt: " + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != kCheckpointFormat) {
    throw FormatError("checkpoint " + path.string() + " has no recognised format tag");
  }
  if (doc.value("version", -1) != kCheckpointVersion) {
    throw FormatVersionError("checkpoint version " + doc.value("version", nlohmann::json()).dump() +
                             " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  if (!doc.contains("payload") || sha256_hex(doc["payload"].dump()) != doc.value("checksum", "")) {
    throw ChecksumError("checkpoint " + path.string() + " failed its checksum");
  }
  const nlohmann::json& payload = doc["payload"];
  if (comparable_config(payload.at("config").get<SearchConfig>()) != comparable_config(config)) {
    throw InvalidConfigError("checkpoint was written for a different search configuration");
  }
  SearchState state;
  state.next_iteration = payload.at("next_iteration").get<int>();
  state.stagnant_iterations = payload.at("stagnant_iterations").get<int>();
  for (const nlohmann::json& item : payload.at("population")) {
    state.population.push_back({item.at("genome").get<ScheduleGenome>(), item.at("result").get<EvalResult>(),
                                item.at("birth_iteration").get<int>(), item.at("digest").get<std::string>()});
  }
  state.log = payload.at("log").get<std::vector<IterationLog>>();
  return state;
}

}  // namespace flexi
