// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#include "flexi/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "flexi/errors.hpp"
#include "flexi/rng.hpp"

namespace flexi {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr Eigen::Index kTileBytes = 128 * 1024;
constexpr Eigen::Index kActivationPacket = 16;

double cosine_similarity(const Tensor& a, const Tensor& b) {
  Eigen::Map<const Eigen::VectorXd> va(a.data.data(), static_cast<Eigen::Index>(a.size()));
  Eigen::Map<const Eigen::VectorXd> vb(b.data.data(), static_cast<Eigen::Index>(b.size()));
  const double denom = va.norm() * vb.norm();
  return denom > 0.0 ? va.dot(vb) / denom : 0.0;
}

}  // namespace

void UNetConfig::check() const {
  if (levels < 1) throw InvalidConfigError("unet: levels must be >= 1");
  if (base_channels < 1) throw InvalidConfigError("unet: base_channels must be >= 1");
  if (t_embed_dim < 2 || t_embed_dim % 2 != 0) {
    throw InvalidConfigError("unet: t_embed_dim must be a positive even number");
  }
  if (image.height < 1 || image.width < 1 || image.channels < 1) {
    throw InvalidConfigError("unet: image dims must be positive");
  }
  const int div = 1 << levels;
  if (image.height % div != 0 || image.width % div != 0) {
    throw InvalidConfigError("unet: H and W must be divisible by 2^levels");
  }
}

// ---------------------------------------------------------------------------
// Sampler

DdimSampler::DdimSampler(SamplerConfig config) : config_(config) {
  if (config_.train_steps < 2) throw InvalidConfigError("sampler: train_steps must be >= 2");
  if (config_.eta != 0.0) throw InvalidConfigError("sampler: only deterministic DDIM (eta = 0) is supported");
  if (!(config_.beta_start > 0.0) || !(config_.beta_end < 1.0) || config_.beta_end < config_.beta_start) {
    throw InvalidConfigError("sampler: betas must satisfy 0 < beta_start <= beta_end < 1");
  }
  alpha_bar_.resize(static_cast<std::size_t>(config_.train_steps));
  double prod = 1.0;
  for (int t = 0; t < config_.train_steps; ++t) {
    const double beta = config_.beta_start +
                        (config_.beta_end - config_.beta_start) * t / (config_.train_steps - 1);
    prod *= 1.0 - beta;
    alpha_bar_[static_cast<std::size_t>(t)] = prod;
  }
}

std::vector<int> DdimSampler::timesteps(int total_steps) const {
  if (total_steps < 1 || total_steps > config_.train_steps) {
    throw InvalidConfigError("sampler: total_steps must lie in [1, train_steps]");
  }
  std::vector<int> grid(static_cast<std::size_t>(total_steps));
  for (int i = 0; i < total_steps; ++i) {
    grid[static_cast<std::size_t>(i)] = static_cast<int>(
        static_cast<long long>(total_steps - 1 - i) * config_.train_steps / total_steps);
  }
  return grid;
}

void DdimSampler::step(Tensor& x, const Tensor& net_out, int t, int t_next) const {
  if (!x.same_shape(net_out)) throw DimensionMismatchError("sampler: eps shape differs from sample");
  const double a_t = alpha_bar_.at(static_cast<std::size_t>(t));
  const double a_next = t_next < 0 ? 1.0 : alpha_bar_.at(static_cast<std::size_t>(t_next));
  const double sqrt_a_t = std::sqrt(a_t);
  const double sqrt_1m_a_t = std::sqrt(1.0 - a_t);
  const double sqrt_a_next = std::sqrt(a_next);
  const double sqrt_1m_a_next = std::sqrt(1.0 - a_next);
  const bool prior = config_.gaussian_prior;
  const double g_scale = prior ? config_.residual_scale * sqrt_a_t : 1.0;
  const bool clip = config_.clip_denoised;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double eps = (prior ? sqrt_1m_a_t * x.data[i] : 0.0) + g_scale * net_out.data[i];
    double x0 = (x.data[i] - sqrt_1m_a_t * eps) / sqrt_a_t;
    if (clip) x0 = std::clamp(x0, -1.0, 1.0);
    x.data[i] = sqrt_a_next * x0 + sqrt_1m_a_next * eps;
  }
}

// ---------------------------------------------------------------------------
// Model

UNet::UNet(const UNetConfig& config) : config_(config) {
  config_.check();
  const int levels = config_.levels;
  int block_index = 0;
  auto make = [&](int cin, int cout, Block::Resample resample, bool activation) {
    Block blk;
    blk.cin = cin;
    blk.cout = cout;
    blk.resample = resample;
    blk.activation = activation;
    Rng rng(derive_seed(config_.weight_seed, {static_cast<std::uint64_t>(block_index++)}));
    const int fan_in = 9 * cin;
    const double limit = std::sqrt(6.0 / fan_in);
    blk.weight.resize(fan_in, cout);
    for (Eigen::Index r = 0; r < blk.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < cout; ++c) blk.weight(r, c) = rng.uniform(-limit, limit);
    }
    const double bias_limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
    blk.bias.resize(cout);
    for (Eigen::Index c = 0; c < cout; ++c) blk.bias(c) = rng.uniform(-bias_limit, bias_limit);
    const double time_limit = std::sqrt(6.0 / config_.t_embed_dim);
    blk.time_weight.resize(config_.t_embed_dim, cout);
    for (Eigen::Index r = 0; r < blk.time_weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < cout; ++c) blk.time_weight(r, c) = rng.uniform(-time_limit, time_limit);
    }
    if (resample == Block::Resample::Up) {
      // Nearest upsampling sends tap k at output parity p to low-res offset
      // tap_of[p][k] in {0, 1, 2} (meaning -1, 0, +1).
      static constexpr int tap_of[2][3] = {{0, 1, 1}, {1, 1, 2}};
      blk.folded = Eigen::MatrixXd::Zero(fan_in, 4 * cout);
      for (int py = 0; py < 2; ++py) {
        for (int px = 0; px < 2; ++px) {
          const int col = (py * 2 + px) * cout;
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const int dst = (tap_of[py][ky] * 3 + tap_of[px][kx]) * cin;
              blk.folded.block(dst, col, cin, cout) += blk.weight.block((ky * 3 + kx) * cin, 0, cin, cout);
            }
          }
        }
      }
    }
    return blk;
  };
  for (int b = 1; b <= levels; ++b) {
    downs_.push_back(make(config_.channels(b - 1), config_.channels(b), Block::Resample::Down, true));
  }
  middle_ = make(config_.channels(levels), config_.channels(levels), Block::Resample::Same, true);
  ups_.resize(static_cast<std::size_t>(levels));
  for (int b = levels; b >= 1; --b) {
    ups_[static_cast<std::size_t>(b - 1)] =
        make(2 * config_.channels(b), config_.channels(b - 1), Block::Resample::Up, b > 1);
  }
}

std::size_t UNet::parameter_count() const {
  std::size_t total = 0;
  auto count = [&total](const Block& b) {
    total += static_cast<std::size_t>(b.weight.size() + b.bias.size() + b.time_weight.size());
  };
  for (const Block& b : downs_) count(b);
  count(middle_);
  for (const Block& b : ups_) count(b);
  return total;
}

Eigen::VectorXd UNet::time_embedding(int t) const {
  const int half = config_.t_embed_dim / 2;
  Eigen::VectorXd emb(config_.t_embed_dim);
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / half);
    emb(i) = std::sin(t * freq);
    emb(half + i) = std::cos(t * freq);
  }
  return emb;
}

void UNet::check_input(const Tensor& x) const {
  if (x.h != config_.image.height || x.w != config_.image.width || x.c != config_.image.channels) {
    throw DimensionMismatchError("unet: input does not match configured image dims");
  }
}

Tensor UNet::apply(const Block& blk, std::span<const Tensor* const> inputs, int t) const {
  const Tensor& first = *inputs.front();
  const int n = first.n;
  const int h = first.h;
  const int w = first.w;
  int cin = 0;
  for (const Tensor* in : inputs) {
    if (in->n != n || in->h != h || in->w != w) {
      throw DimensionMismatchError("unet: concatenated inputs differ in shape");
    }
    cin += in->c;
  }
  if (cin != blk.cin) throw DimensionMismatchError("unet: block input channel mismatch");

  const bool up = blk.resample == Block::Resample::Up;
  // Up blocks convolve at input resolution with the folded kernel and
  // scatter each row to its 2x2 output pixels afterwards.
  const int stride = blk.resample == Block::Resample::Down ? 2 : 1;
  const int gh = h / stride;
  const int gw = w / stride;
  const Eigen::MatrixXd& weight = up ? blk.folded : blk.weight;
  const Eigen::Index rows = static_cast<Eigen::Index>(n) * gh * gw;
  const Eigen::Index k = 9 * static_cast<Eigen::Index>(cin);

  std::vector<int> src_y(static_cast<std::size_t>(gh) * 3);
  std::vector<int> src_x(static_cast<std::size_t>(gw) * 3);
  for (int g = 0; g < gh; ++g) {
    for (int kk = 0; kk < 3; ++kk) {
      const int i = stride * g + kk - 1;
      src_y[static_cast<std::size_t>(g * 3 + kk)] = (i >= 0 && i < h) ? i : -1;
    }
  }
  for (int g = 0; g < gw; ++g) {
    for (int kk = 0; kk < 3; ++kk) {
      const int i = stride * g + kk - 1;
      src_x[static_cast<std::size_t>(g * 3 + kk)] = (i >= 0 && i < w) ? i : -1;
    }
  }

  const int ho = up ? 2 * h : gh;
  const int wo = up ? 2 * w : gw;
  Tensor out(n, ho, wo, blk.cout);
  RowMatrix scratch(up ? rows : 0, up ? weight.cols() : 0);
  Eigen::Map<RowMatrix> result(up ? scratch.data() : out.data.data(), rows, weight.cols());
  // im2col in row tiles small enough to stay cache resident.
  const Eigen::Index tile = std::max<Eigen::Index>(16, (kTileBytes / 8) / k);
  RowMatrix cols(std::min(tile, rows), k);
  int b = 0;
  int oy = 0;
  int ox = 0;
  for (Eigen::Index r0 = 0; r0 < rows; r0 += tile) {
    const Eigen::Index nr = std::min(tile, rows - r0);
    cols.topRows(nr).setZero();
    for (Eigen::Index r = 0; r < nr; ++r) {
      double* row = cols.data() + r * k;
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = src_y[static_cast<std::size_t>(oy * 3 + ky)];
        if (iy < 0) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = src_x[static_cast<std::size_t>(ox * 3 + kx)];
          if (ix < 0) continue;
          double* dst = row + (ky * 3 + kx) * cin;
          const std::size_t pixel = (static_cast<std::size_t>(b) * h + iy) * w + ix;
          for (const Tensor* in : inputs) {
            const double* src = in->data.data() + pixel * in->c;
            for (int ci = 0; ci < in->c; ++ci) dst[ci] = src[ci];
            dst += in->c;
          }
        }
      }
      if (++ox == gw) {
        ox = 0;
        if (++oy == gh) {
          oy = 0;
          ++b;
        }
      }
    }
    result.middleRows(r0, nr).noalias() = cols.topRows(nr) * weight;
  }

  Eigen::Map<RowMatrix> o(out.data.data(), static_cast<Eigen::Index>(n) * ho * wo, blk.cout);
  if (up) {
    const std::size_t cout = static_cast<std::size_t>(blk.cout);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const int q = static_cast<int>(r % gw);
      const int p = static_cast<int>((r / gw) % gh);
      const int bi = static_cast<int>(r / (static_cast<Eigen::Index>(gw) * gh));
      for (int par = 0; par < 4; ++par) {
        const int y = 2 * p + par / 2;
        const int x = 2 * q + par % 2;
        const double* src = result.data() + r * result.cols() + par * blk.cout;
        double* dst = out.data.data() + ((static_cast<std::size_t>(bi) * ho + y) * wo + x) * cout;
        std::copy(src, src + blk.cout, dst);
      }
    }
  }
  const Eigen::RowVectorXd shift = blk.bias + (blk.time_weight.transpose() * time_embedding(t)).transpose();
  o.rowwise() += shift;
  if (blk.activation) {
    // tanh(v) = 1 - 2 / (exp(2v) + 1); Eigen vectorizes exp but not tanh for doubles.
    // Eigen's scalar and packet exp differ in the last bits, so evaluate on an
    // aligned buffer padded to whole packets: every element takes the packet
    // path regardless of where the tensor storage sits.
    const Eigen::Index size = static_cast<Eigen::Index>(out.data.size());
    const Eigen::Index padded = (size + kActivationPacket - 1) / kActivationPacket * kActivationPacket;
    Eigen::ArrayXd v = Eigen::ArrayXd::Zero(padded);
    v.head(size) = Eigen::Map<const Eigen::ArrayXd>(out.data.data(), size);
    v = 1.0 - 2.0 / ((2.0 * v).exp() + 1.0);
    std::copy(v.data(), v.data() + size, out.data.data());
  }
  return out;
}

UNet::BlockParams UNet::block_params(BlockKind kind, int branch) const {
  const Block& blk = kind == BlockKind::Middle ? middle_
                     : kind == BlockKind::Down ? downs_.at(static_cast<std::size_t>(branch - 1))
                                               : ups_.at(static_cast<std::size_t>(branch - 1));
  return {blk.cin, blk.cout, blk.activation, blk.weight, blk.bias, blk.time_weight};
}

Tensor UNet::down(int branch, const Tensor& input, int t) const {
  const Tensor* in[] = {&input};
  return apply(downs_.at(static_cast<std::size_t>(branch - 1)), in, t);
}

Tensor UNet::middle(const Tensor& deepest, int t) const {
  const Tensor* in[] = {&deepest};
  return apply(middle_, in, t);
}

Tensor UNet::up(int branch, const Tensor& skip, const Tensor& below, int t) const {
  const Tensor* in[] = {&skip, &below};
  return apply(ups_.at(static_cast<std::size_t>(branch - 1)), in, t);
}

FullOutput UNet::forward_full(const Tensor& x, int t) const {
  check_input(x);
  const int levels = config_.levels;
  std::vector<Tensor> d;
  d.reserve(static_cast<std::size_t>(levels));
  for (int b = 1; b <= levels; ++b) d.push_back(down(b, b == 1 ? x : d.back(), t));
  FullOutput out;
  out.junction.resize(static_cast<std::size_t>(levels));
  out.junction[static_cast<std::size_t>(levels - 1)] = middle(d.back(), t);
  for (int b = levels; b >= 1; --b) {
    Tensor u = up(b, d[static_cast<std::size_t>(b - 1)], out.junction[static_cast<std::size_t>(b - 1)], t);
    if (b > 1) {
      out.junction[static_cast<std::size_t>(b - 2)] = std::move(u);
    } else {
      out.eps = std::move(u);
    }
  }
  return out;
}

Tensor UNet::forward_partial(const Tensor& x, int t, const CacheSlot& cache) const {
  check_input(x);
  const int b = cache.branch;
  if (b < 1 || b > config_.levels) {
    throw CacheMissError("partial step at branch " + std::to_string(b) + " has no cached feature");
  }
  const Tensor& f = cache.feature;
  if (f.n != x.n || f.h != (x.h >> b) || f.w != (x.w >> b) || f.c != config_.channels(b)) {
    throw CacheMissError("cached feature does not match the junction at branch " + std::to_string(b));
  }
  std::vector<Tensor> d;
  d.reserve(static_cast<std::size_t>(b));
  for (int j = 1; j <= b; ++j) d.push_back(down(j, j == 1 ? x : d.back(), t));
  Tensor u = up(b, d[static_cast<std::size_t>(b - 1)], f, t);
  for (int j = b - 1; j >= 1; --j) u = up(j, d[static_cast<std::size_t>(j - 1)], u, t);
  return u;
}

BlockMacs UNet::block_macs() const {
  const int levels = config_.levels;
  const std::uint64_t te = static_cast<std::uint64_t>(config_.t_embed_dim);
  auto conv = [te](int ho, int wo, int cin, int cout) {
    return static_cast<std::uint64_t>(ho) * wo * cout * 9 * cin + te * cout;
  };
  BlockMacs m;
  for (int b = 1; b <= levels; ++b) {
    m.down.push_back(conv(config_.image.height >> b, config_.image.width >> b, config_.channels(b - 1),
                          config_.channels(b)));
  }
  m.middle = conv(config_.image.height >> levels, config_.image.width >> levels, config_.channels(levels),
                  config_.channels(levels));
  for (int b = 1; b <= levels; ++b) {
    m.up.push_back(conv(config_.image.height >> (b - 1), config_.image.width >> (b - 1),
                        2 * config_.channels(b), config_.channels(b - 1)));
  }
  return m;
}

std::uint64_t UNet::full_macs() const {
  const BlockMacs m = block_macs();
  std::uint64_t total = m.middle;
  for (std::size_t i = 0; i < m.down.size(); ++i) total += m.down[i] + m.up[i];
  return total;
}

std::uint64_t UNet::partial_macs(int branch) const {
  if (branch < 1 || branch > config_.levels) {
    throw ProfileMissError("toy unet has no branch " + std::to_string(branch));
  }
  const BlockMacs m = block_macs();
  std::uint64_t total = 0;
  for (int j = 1; j <= branch; ++j) {
    total += m.down[static_cast<std::size_t>(j - 1)] + m.up[static_cast<std::size_t>(j - 1)];
  }
  return total;
}

CostProfile UNet::cost_profile() const {
  CostProfile p;
  p.name = "toy-unet";
  p.full_macs = static_cast<double>(full_macs()) * 1e-9;
  p.b_max = config_.levels;
  for (int b = 1; b <= config_.levels; ++b) p.partial_macs[b] = static_cast<double>(partial_macs(b)) * 1e-9;
  return p;
}

// ---------------------------------------------------------------------------
// Plan execution

void to_json(nlohmann::json& j, const TraceRecord& r) {
  j = nlohmann::json{{"position", r.position},
                     {"timestep", r.timestep},
                     {"action", to_string(r.kind)},
                     {"cost_gmacs", r.cost_gmacs}};
  if (r.kind == StepKind::Partial) j["branch"] = r.branch;
  if (!r.cosine.empty()) j["cosine"] = r.cosine;
}

Tensor run_plan(const UNet& model, const StepPlan& plan, const Tensor& noise, const DdimSampler& sampler,
                const PlanRunOptions& options) {
  if (static_cast<int>(plan.actions.size()) != plan.total_steps) {
    throw InvalidGenomeError("run_plan: plan length does not match total_steps");
  }
  const std::vector<int> grid = sampler.timesteps(plan.total_steps);
  const std::vector<int>& eff = plan.effective_timesteps;

  std::size_t k = 0;
  Tensor x;
  if (options.resume_position >= 0) {
    auto it = std::find(eff.begin(), eff.end(), options.resume_position);
    if (it == eff.end() || plan.actions[static_cast<std::size_t>(*it)].kind != StepKind::Full ||
        options.resume_state == nullptr) {
      throw InvalidGenomeError("run_plan: resume position must be a Full step with a state");
    }
    k = static_cast<std::size_t>(it - eff.begin());
    x = *options.resume_state;
  } else {
    x = noise;
  }

  std::optional<CostProfile> profile;
  if (options.trace) profile = model.cost_profile();
  std::vector<Tensor> previous_junction;

  CacheSlot slot;
  for (; k < eff.size(); ++k) {
    const int pos = eff[k];
    const StepAction& action = plan.actions[static_cast<std::size_t>(pos)];
    const int t = grid[static_cast<std::size_t>(pos)];
    const int t_next = k + 1 < eff.size() ? grid[static_cast<std::size_t>(eff[k + 1])] : -1;

    TraceRecord record;
    Tensor eps;
    if (action.kind == StepKind::Full) {
      if (options.on_full_arrival) options.on_full_arrival(pos, x);
      FullOutput full = model.forward_full(x, t);
      if (options.trace) {
        if (!previous_junction.empty()) {
          for (std::size_t b = 0; b < full.junction.size(); ++b) {
            record.cosine.push_back(cosine_similarity(full.junction[b], previous_junction[b]));
          }
        }
        previous_junction = full.junction;
      }
      slot = CacheSlot{};
      const auto next = static_cast<std::size_t>(pos + 1);
      if (next < plan.actions.size() && plan.actions[next].segment == action.segment &&
          plan.actions[next].kind == StepKind::Partial) {
        const int branch = plan.actions[next].branch;
        if (branch < 1 || branch > model.levels()) {
          throw InvalidGenomeError("run_plan: branch " + std::to_string(branch) + " exceeds model levels");
        }
        slot.branch = branch;
        slot.feature = std::move(full.junction[static_cast<std::size_t>(branch - 1)]);
        slot.source_timestep = t;
        slot.segment = action.segment;
      }
      eps = std::move(full.eps);
    } else if (action.kind == StepKind::Partial) {
      if (slot.segment != action.segment || slot.branch != action.branch) {
        throw CacheMissError("run_plan: partial step at position " + std::to_string(pos) +
                             " has no cache from its segment's full step");
      }
      eps = model.forward_partial(x, t, slot);
    } else {
      continue;
    }

    sampler.step(x, eps, t, t_next);

    if (options.trace) {
      record.position = pos;
      record.timestep = t;
      record.kind = action.kind;
      record.branch = action.branch;
      record.cost_gmacs = step_cost(action, *profile);
      options.trace(record);
    }
  }
  return x;
}

Image initial_noise(std::uint64_t seed, const ImageShape& shape) {
  Rng rng(derive_seed(seed, {0}));
  Image img(shape.size());
  for (double& v : img) v = rng.normal();
  return img;
}

Tensor noise_batch(std::span<const std::uint64_t> seeds, const ImageShape& shape) {
  Tensor batch(static_cast<int>(seeds.size()), shape.height, shape.width, shape.channels);
  const std::size_t stride = shape.size();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const Image img = initial_noise(seeds[i], shape);
    std::copy(img.begin(), img.end(), batch.data.begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  return batch;
}

std::vector<Image> unstack(const Tensor& batch) {
  const std::size_t stride = static_cast<std::size_t>(batch.h) * batch.w * batch.c;
  std::vector<Image> out(static_cast<std::size_t>(batch.n));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].assign(batch.data.begin() + static_cast<std::ptrdiff_t>(i * stride),
                  batch.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * stride));
  }
  return out;
}

std::vector<Image> generate_batch(const UNet& model, const StepPlan& plan,
                                  std::span<const std::uint64_t> seeds, const DdimSampler& sampler) {
  if (seeds.empty()) throw InsufficientSamplesError("generate_batch: no seeds");
  std::vector<Image> images;
  images.reserve(seeds.size());
  for (std::size_t start = 0; start < seeds.size(); start += kBatchChunk) {
    const auto chunk = seeds.subspan(start, std::min(kBatchChunk, seeds.size() - start));
    const Tensor out = run_plan(model, plan, noise_batch(chunk, model.config().image), sampler);
    for (Image& img : unstack(out)) images.push_back(std::move(img));
  }
  return images;
}

void to_json(nlohmann::json& j, const UNetConfig& c) {
  j = nlohmann::json{{"image", c.image},
                     {"levels", c.levels},
                     {"base_channels", c.base_channels},
                     {"weight_seed", c.weight_seed},
                     {"t_embed_dim", c.t_embed_dim}};
}

void from_json(const nlohmann::json& j, UNetConfig& c) {
  if (j.contains("image")) c.image = j.at("image").get<ImageShape>();
  c.levels = j.value("levels", c.levels);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.weight_seed = j.value("weight_seed", c.weight_seed);
  c.t_embed_dim = j.value("t_embed_dim", c.t_embed_dim);
}

void to_json(nlohmann::json& j, const SamplerConfig& c) {
  j = nlohmann::json{{"train_steps", c.train_steps},
                     {"beta_start", c.beta_start},
                     {"beta_end", c.beta_end},
                     {"eta", c.eta},
                     {"clip_denoised", c.clip_denoised},
                     {"gaussian_prior", c.gaussian_prior},
                     {"residual_scale", c.residual_scale}};
}

void from_json(const nlohmann::json& j, SamplerConfig& c) {
  c.train_steps = j.value("train_steps", c.train_steps);
  c.beta_start = j.value("beta_start", c.beta_start);
  c.beta_end = j.value("beta_end", c.beta_end);
  c.eta = j.value("eta", c.eta);
  c.clip_denoised = j.value("clip_denoised", c.clip_denoised);
  c.gaussian_prior = j.value("gaussian_prior", c.gaussian_prior);
  c.residual_scale = j.value("residual_scale", c.residual_scale);
}

}  // namespace flexi
