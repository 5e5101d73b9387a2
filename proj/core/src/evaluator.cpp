// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#include "flexi/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstring>
#include <exception>
#include <thread>

#include "flexi/digest.hpp"
#include "flexi/errors.hpp"
#include "flexi/io.hpp"

namespace flexi {

namespace {

constexpr std::uint32_t kTeacherFormatVersion = 1;

template <typename T>
void put_le(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T get_le(std::string_view in, std::size_t& offset) {
  if (offset + sizeof(T) > in.size()) throw FormatError("teacher cache: truncated binary file");
  char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  offset += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

void expect_magic(std::string_view in, std::size_t& offset, std::string_view magic) {
  if (in.substr(0, magic.size()) != magic) throw FormatError("teacher cache: bad magic");
  offset = magic.size();
  const auto version = get_le<std::uint32_t>(in, offset);
  if (version != kTeacherFormatVersion) {
    throw FormatVersionError("teacher cache: unsupported version " + std::to_string(version));
  }
}

std::string seeds_digest(std::span<const std::uint64_t> seeds) {
  std::string bytes;
  bytes.reserve(seeds.size() * 8);
  for (std::uint64_t s : seeds) put_le(bytes, s);
  return sha256_hex(bytes);
}

std::vector<Image> round_to_float(std::vector<Image> images) {
  for (Image& img : images) {
    for (double& v : img) v = static_cast<double>(static_cast<float>(v));
  }
  return images;
}

EvalResult score(const ScheduleGenome& genome, std::span<const Image> images, const TeacherBundle& teacher,
                 const CostProfile& profile, const FeatureExtractor& extractor, bool with_mse) {
  const std::size_t n = images.size();
  EvalResult r;
  r.rfid = frechet(stats_from_features(extractor.features(images)), teacher.stats(n));
  r.nfe = nfe(genome);
  r.avg_macs = average_macs(genome, profile);
  r.images_used = static_cast<int>(n);
  r.backend = Backend::InProcess;
  if (with_mse) {
    if (!teacher.images) throw InvalidConfigError("evaluate: mse requires teacher images");
    r.mse = pixel_mse(images, std::span<const Image>(*teacher.images).first(n));
  }
  return r;
}

void check_image_count(const TeacherBundle& teacher, std::size_t n_images) {
  if (n_images == 0) throw InsufficientSamplesError("evaluate: n_images must be positive");
  if (n_images > teacher.seeds.size()) {
    throw InsufficientSamplesError("evaluate: teacher holds only " + std::to_string(teacher.seeds.size()) +
                                   " seeds, " + std::to_string(n_images) + " requested");
  }
}

}  // namespace

std::string_view to_string(Backend backend) {
  return backend == Backend::InProcess ? "in_process" : "external";
}

std::string_view to_string(Metric metric) { return metric == Metric::Rfid ? "rfid" : "mse"; }

Metric metric_from_string(std::string_view text) {
  if (text == "rfid") return Metric::Rfid;
  if (text == "mse") return Metric::Mse;
  throw InvalidConfigError("unknown metric '" + std::string(text) + "'");
}

FeatureStats TeacherBundle::stats(std::size_t n_images) const {
  if (n_images > static_cast<std::size_t>(features.rows())) {
    throw InsufficientSamplesError("teacher: prefix longer than the seed list");
  }
  return stats_from_features(features.topRows(static_cast<Eigen::Index>(n_images)));
}

std::string TeacherBundle::cache_key() const {
  const nlohmann::json key{{"model", model_id},
                           {"total_steps", total_steps},
                           {"image", image},
                           {"teacher_plan", teacher_plan_digest},
                           {"seeds", seeds_digest(seeds)},
                           {"extractor_seed", extractor_seed},
                           {"feature_dim", features.cols()}};
  return sha256_hex(key.dump()).substr(0, 32);
}

std::string model_identity(const UNetConfig& unet, const SamplerConfig& sampler) {
  return sha256_hex(nlohmann::json{{"unet", unet}, {"sampler", sampler}}.dump()).substr(0, 32);
}

TeacherBundle build_teacher(const UNet& model, const DdimSampler& sampler, int total_steps,
                            std::span<const std::uint64_t> seeds, const FeatureExtractor& extractor,
                            bool keep_images) {
  if (seeds.empty()) throw InsufficientSamplesError("build_teacher: no seeds");
  const ScheduleGenome genome = teacher_genome(total_steps);
  TeacherBundle t;
  t.teacher_plan_digest = genome_digest(genome);
  t.model_id = model_identity(model.config(), sampler.config());
  t.total_steps = total_steps;
  t.image = model.config().image;
  t.seeds.assign(seeds.begin(), seeds.end());
  t.extractor_seed = extractor.seed();
  std::vector<Image> images = generate_batch(model, expand(genome), seeds, sampler);
  t.features = extractor.features(images);
  if (keep_images) t.images = round_to_float(std::move(images));
  return t;
}

void save_teacher(const TeacherBundle& teacher, const std::filesystem::path& dir) {
  const std::filesystem::path entry = dir / teacher.cache_key();
  std::error_code ec;
  std::filesystem::create_directories(entry, ec);
  if (ec) throw IoError("cannot create " + entry.string() + ": " + ec.message());

  std::string features("FLXF");
  put_le(features, kTeacherFormatVersion);
  put_le(features, static_cast<std::uint32_t>(teacher.features.rows()));
  put_le(features, static_cast<std::uint32_t>(teacher.features.cols()));
  for (Eigen::Index r = 0; r < teacher.features.rows(); ++r) {
    for (Eigen::Index c = 0; c < teacher.features.cols(); ++c) put_le(features, teacher.features(r, c));
  }
  write_file_atomic(entry / "features.bin", features);

  if (teacher.images) {
    const std::vector<Image>& images = *teacher.images;
    std::string blob("FLXI");
    put_le(blob, kTeacherFormatVersion);
    put_le(blob, static_cast<std::uint32_t>(images.size()));
    put_le(blob, static_cast<std::uint32_t>(teacher.image.height));
    put_le(blob, static_cast<std::uint32_t>(teacher.image.width));
    put_le(blob, static_cast<std::uint32_t>(teacher.image.channels));
    for (const Image& img : images) {
      for (double v : img) put_le(blob, static_cast<float>(v));
    }
    write_file_atomic(entry / "images.bin", blob);
  }

  const nlohmann::json meta{{"format", "flexi-teacher"},
                            {"version", kTeacherFormatVersion},
                            {"teacher_plan_digest", teacher.teacher_plan_digest},
                            {"model_id", teacher.model_id},
                            {"total_steps", teacher.total_steps},
                            {"image", teacher.image},
                            {"seeds", teacher.seeds},
                            {"extractor_seed", teacher.extractor_seed},
                            {"has_images", teacher.images.has_value()},
                            {"stats", teacher.stats(static_cast<std::size_t>(teacher.features.rows()))}};
  write_file_atomic(entry / "stats.json", dump_json(meta));
}

std::optional<TeacherBundle> load_teacher(const std::filesystem::path& dir, const TeacherBundle& key) {
  const std::filesystem::path entry = dir / key.cache_key();
  if (!std::filesystem::exists(entry / "stats.json") || !std::filesystem::exists(entry / "features.bin")) {
    return std::nullopt;
  }
  const nlohmann::json meta = read_json_file(entry / "stats.json");
  if (meta.value("format", "") != "flexi-teacher") throw FormatError("teacher cache: wrong format tag");
  if (meta.value("version", 0u) != kTeacherFormatVersion) {
    throw FormatVersionError("teacher cache: unsupported stats.json version");
  }
  TeacherBundle t;
  t.teacher_plan_digest = meta.at("teacher_plan_digest").get<std::string>();
  t.model_id = meta.at("model_id").get<std::string>();
  t.total_steps = meta.at("total_steps").get<int>();
  t.image = meta.at("image").get<ImageShape>();
  t.seeds = meta.at("seeds").get<std::vector<std::uint64_t>>();
  t.extractor_seed = meta.at("extractor_seed").get<std::uint64_t>();
  if (t.teacher_plan_digest != key.teacher_plan_digest || t.model_id != key.model_id ||
      t.total_steps != key.total_steps || t.image != key.image || t.seeds != key.seeds || t.extractor_seed != key.extractor_seed) {
    throw FormatError("teacher cache: entry does not match its key");
  }

  const std::string features = read_text_file(entry / "features.bin");
  std::size_t off = 0;
  expect_magic(features, off, "FLXF");
  const auto rows = get_le<std::uint32_t>(features, off);
  const auto cols = get_le<std::uint32_t>(features, off);
  if (rows != t.seeds.size() || static_cast<Eigen::Index>(cols) != key.features.cols()) {
    throw FormatError("teacher cache: feature matrix has unexpected dims");
  }
  t.features.resize(rows, cols);
  for (Eigen::Index r = 0; r < t.features.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.features.cols(); ++c) t.features(r, c) = get_le<double>(features, off);
  }

  if (meta.value("has_images", false) && std::filesystem::exists(entry / "images.bin")) {
    const std::string blob = read_text_file(entry / "images.bin");
    off = 0;
    expect_magic(blob, off, "FLXI");
    const auto count = get_le<std::uint32_t>(blob, off);
    const auto h = get_le<std::uint32_t>(blob, off);
    const auto w = get_le<std::uint32_t>(blob, off);
    const auto c = get_le<std::uint32_t>(blob, off);
    if (count != t.seeds.size() || h != static_cast<std::uint32_t>(t.image.height) ||
        w != static_cast<std::uint32_t>(t.image.width) || c != static_cast<std::uint32_t>(t.image.channels)) {
      throw FormatError("teacher cache: image blob dims do not match");
    }
    std::vector<Image> images(count, Image(static_cast<std::size_t>(h) * w * c));
    for (Image& img : images) {
      for (double& v : img) v = static_cast<double>(get_le<float>(blob, off));
    }
    t.images = std::move(images);
  }
  return t;
}

TeacherBundle cached_teacher(const UNet& model, const DdimSampler& sampler, int total_steps,
                             std::span<const std::uint64_t> seeds, const FeatureExtractor& extractor,
                             bool keep_images, const std::optional<std::filesystem::path>& cache_dir) {
  if (seeds.empty()) throw InsufficientSamplesError("build_teacher: no seeds");
  if (cache_dir) {
    TeacherBundle key;
    key.teacher_plan_digest = genome_digest(teacher_genome(total_steps));
    key.model_id = model_identity(model.config(), sampler.config());
    key.total_steps = total_steps;
    key.image = model.config().image;
    key.seeds.assign(seeds.begin(), seeds.end());
    key.extractor_seed = extractor.seed();
    key.features.resize(0, extractor.feature_dim());
    if (auto hit = load_teacher(*cache_dir, key); hit && (!keep_images || hit->images)) return *hit;
  }
  TeacherBundle t = build_teacher(model, sampler, total_steps, seeds, extractor, keep_images);
  if (cache_dir) save_teacher(t, *cache_dir);
  return t;
}

void to_json(nlohmann::json& j, const EvalResult& r) {
  j = nlohmann::json{{"rfid", r.rfid},
                     {"nfe", r.nfe},
                     {"avg_macs", r.avg_macs},
                     {"images_used", r.images_used},
                     {"backend", to_string(r.backend)}};
  if (r.mse) j["mse"] = *r.mse;
}

void from_json(const nlohmann::json& j, EvalResult& r) {
  r.rfid = j.at("rfid").get<double>();
  r.nfe = j.at("nfe").get<int>();
  r.avg_macs = j.at("avg_macs").get<double>();
  r.images_used = j.value("images_used", 0);
  r.backend = j.value("backend", std::string("in_process")) == "external" ? Backend::External
                                                                           : Backend::InProcess;
  if (j.contains("mse")) r.mse = j.at("mse").get<double>();
}

EvalResult evaluate(const UNet& model, const DdimSampler& sampler, const ScheduleGenome& genome,
                    const TeacherBundle& teacher, const CostProfile& profile,
                    const FeatureExtractor& extractor, std::size_t n_images, bool with_mse) {
  check_image_count(teacher, n_images);
  if (genome.total_steps != teacher.total_steps) {
    throw InvalidGenomeError("evaluate: genome and teacher differ in total_steps");
  }
  const StepPlan plan = expand(genome);
  const std::vector<Image> images =
      generate_batch(model, plan, std::span<const std::uint64_t>(teacher.seeds).first(n_images), sampler);
  return score(genome, images, teacher, profile, extractor, with_mse);
}

bool rank_less(const Candidate& a, const Candidate& b) {
  if (a.result.rfid != b.result.rfid) return a.result.rfid < b.result.rfid;
  if (a.result.avg_macs != b.result.avg_macs) return a.result.avg_macs < b.result.avg_macs;
  return a.digest < b.digest;
}

std::vector<Candidate> rank(std::vector<Candidate> candidates) {
  std::sort(candidates.begin(), candidates.end(), rank_less);
  return candidates;
}

// ---------------------------------------------------------------------------

SimEvaluator::SimEvaluator(SimEvaluatorOptions options)
    : options_(std::move(options)),
      model_(options_.unet),
      sampler_(options_.sampler),
      extractor_(options_.extractor_seed, options_.unet.image, options_.feature_dim),
      profile_(options_.profile.value_or(model_.cost_profile())) {
  if (options_.jobs < 1) throw InvalidConfigError("evaluator: jobs must be >= 1");
  profile_.check();
  teacher_ = cached_teacher(model_, sampler_, options_.total_steps, options_.seeds, extractor_,
                            options_.with_mse, options_.cache_dir);
}

std::string SimEvaluator::identity() const { return "sim:" + teacher_.cache_key(); }

SimEvaluator::Stats SimEvaluator::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

std::shared_ptr<const Tensor> SimEvaluator::lookup_state(const std::string& key) {
  std::lock_guard lock(mutex_);
  auto it = states_.find(key);
  if (it == states_.end()) return nullptr;
  lru_.splice(lru_.begin(), lru_, it->second.lru_pos);
  return it->second.state;
}

void SimEvaluator::store_state(const std::string& key, Tensor state) {
  const std::size_t bytes = state.size() * sizeof(double) + key.size();
  if (bytes > options_.state_cache_bytes) return;
  auto shared = std::make_shared<const Tensor>(std::move(state));
  std::lock_guard lock(mutex_);
  if (states_.count(key) != 0) return;
  while (state_bytes_ + bytes > options_.state_cache_bytes && !lru_.empty()) {
    auto victim = states_.find(lru_.back());
    state_bytes_ -= victim->second.state->size() * sizeof(double) + victim->first.size();
    states_.erase(victim);
    lru_.pop_back();
  }
  lru_.push_front(key);
  states_.emplace(key, StateEntry{std::move(shared), lru_.begin()});
  state_bytes_ += bytes;
}

std::vector<Image> SimEvaluator::generate(const StepPlan& plan, std::size_t n_images) {
  // The sample arriving at a Full position depends only on the actions
  // before it, so the action prefix (plus the seed chunk) names it.
  std::string prefix = "T" + std::to_string(plan.total_steps) + "|";
  std::vector<std::pair<int, std::string>> full_prefixes;
  for (std::size_t pos = 0; pos < plan.actions.size(); ++pos) {
    const StepAction& a = plan.actions[pos];
    if (a.kind == StepKind::Full && pos > 0) full_prefixes.emplace_back(static_cast<int>(pos), prefix);
    switch (a.kind) {
      case StepKind::Full: prefix += 'F'; break;
      case StepKind::Null: prefix += 'N'; break;
      case StepKind::Partial: prefix += 'P' + std::to_string(a.branch); break;
    }
  }

  const bool reuse = options_.state_cache_bytes > 0;
  const ImageShape& shape = model_.config().image;
  std::vector<Image> images;
  images.reserve(n_images);
  for (std::size_t start = 0; start < n_images; start += kBatchChunk) {
    const std::size_t count = std::min(kBatchChunk, n_images - start);
    const std::string chunk = "#" + std::to_string(start) + ":" + std::to_string(count);

    PlanRunOptions run;
    std::shared_ptr<const Tensor> resume;
    if (reuse) {
      for (auto it = full_prefixes.rbegin(); it != full_prefixes.rend(); ++it) {
        resume = lookup_state(it->second + chunk);
        if (resume) {
          run.resume_position = it->first;
          run.resume_state = resume.get();
          break;
        }
      }
      run.on_full_arrival = [&](int pos, const Tensor& x) {
        if (pos <= run.resume_position || pos == 0) return;
        auto it = std::find_if(full_prefixes.begin(), full_prefixes.end(),
                               [pos](const auto& fp) { return fp.first == pos; });
        store_state(it->second + chunk, x);
      };
    }
    Tensor noise;
    if (!resume) {
      noise = noise_batch(std::span<const std::uint64_t>(teacher_.seeds).subspan(start, count), shape);
    }
    const Tensor out = run_plan(model_, plan, noise, sampler_, run);
    {
      std::lock_guard lock(mutex_);
      ++(resume ? stats_.resumed_chunks : stats_.cold_chunks);
    }
    for (Image& img : unstack(out)) images.push_back(std::move(img));
  }
  return images;
}

EvalResult SimEvaluator::evaluate_one(const ScheduleGenome& genome, std::size_t n_images) {
  check_image_count(teacher_, n_images);
  if (genome.total_steps != teacher_.total_steps) {
    throw InvalidGenomeError("evaluate: genome and teacher differ in total_steps");
  }
  const std::string memo_key = genome_digest(genome) + "/" + std::to_string(n_images);
  {
    std::lock_guard lock(mutex_);
    if (auto it = memo_.find(memo_key); it != memo_.end()) {
      ++stats_.memo_hits;
      return it->second;
    }
  }
  const StepPlan plan = expand(genome);
  const std::vector<Image> images = generate(plan, n_images);
  EvalResult r = score(genome, images, teacher_, profile_, extractor_, options_.with_mse);
  std::lock_guard lock(mutex_);
  memo_.emplace(memo_key, r);
  return r;
}

std::vector<EvalResult> SimEvaluator::evaluate(std::span<const ScheduleGenome> genomes, std::size_t n_images) {
  std::vector<EvalResult> results(genomes.size());
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(options_.jobs), genomes.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < genomes.size(); ++i) results[i] = evaluate_one(genomes[i], n_images);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(genomes.size());
  auto work = [&] {
    for (std::size_t i = next++; i < genomes.size(); i = next++) {
      try {
        results[i] = evaluate_one(genomes[i], n_images);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace flexi
