// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "flexi/costmodel.hpp"
#include "flexi/schedule.hpp"
#include "flexi/tensor.hpp"

namespace flexi {

/// Toy denoiser shape. Level b (1-based) runs at H/2^b x W/2^b with
/// base_channels * 2^(b-1) channels.
struct UNetConfig {
  ImageShape image{16, 16, 1};
  int levels = 3;
  int base_channels = 8;
  std::uint64_t weight_seed = 0;
  int t_embed_dim = 8;

  void check() const;
  int channels(int level) const { return level == 0 ? image.channels : base_channels << (level - 1); }

  friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

struct SamplerConfig {
  int train_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  double eta = 0.0;
  /// Clamp the predicted clean image to [-1, 1] before re-noising.
  bool clip_denoised = false;
  /// Read the network output g as a residual on the unit-Gaussian optimal
  /// denoiser: eps = sqrt(1 - a_t) * x + residual_scale * sqrt(a_t) * g.
  /// Keeps untrained-network trajectories bounded. When false, eps = g.
  bool gaussian_prior = true;
  double residual_scale = 0.5;

  friend bool operator==(const SamplerConfig&, const SamplerConfig&) = default;
};

/// Deterministic (eta = 0) DDIM over an arbitrary descending timestep
/// subsequence. Skipped grid positions are handled by jumping straight to
/// the next evaluated timestep.
class DdimSampler {
 public:
  explicit DdimSampler(SamplerConfig config = {});

  const SamplerConfig& config() const { return config_; }
  const std::vector<double>& alpha_bar() const { return alpha_bar_; }

  /// Training timesteps of a T-step grid in generation order:
  /// t_i = floor((T - 1 - i) * train_steps / T).
  std::vector<int> timesteps(int total_steps) const;

  /// x <- sqrt(a_next) * x0 + sqrt(1 - a_next) * eps with
  /// x0 = (x - sqrt(1 - a_t) * eps) / sqrt(a_t), where eps is formed from the
  /// network output per `gaussian_prior`. t_next < 0 means the final step
  /// (a_next = 1).
  void step(Tensor& x, const Tensor& net_out, int t, int t_next) const;

 private:
  SamplerConfig config_;
  std::vector<double> alpha_bar_;
};

/// Feature cached by a segment's Full step: the output u_{b+1} feeding the
/// skip junction at branch b.
struct CacheSlot {
  int branch = 0;
  Tensor feature;
  int source_timestep = -1;
  int segment = -1;
};

/// Result of a complete traversal. junction[b - 1] holds u_{b+1} for b in
/// [1, levels], i.e. whatever a Partial step at branch b would reuse.
struct FullOutput {
  Tensor eps;
  std::vector<Tensor> junction;
};

struct BlockMacs {
  std::vector<std::uint64_t> down;  // index b - 1
  std::uint64_t middle = 0;
  std::vector<std::uint64_t> up;    // index b - 1
};

/// Forward-only U-Net with untrained, seeded weights.
///
/// Down block D_b: 3x3 stride-2 conv + bias + time bias + tanh.
/// Middle: 3x3 conv + bias + time bias + tanh, producing u_{B+1}.
/// Up block U_b: nearest 2x upsample of [d_b || u_{b+1}], 3x3 conv, bias and
/// time bias; tanh on every level except U_1, which is the linear noise head.
class UNet {
 public:
  explicit UNet(const UNetConfig& config);

  const UNetConfig& config() const { return config_; }
  int levels() const { return config_.levels; }
  std::size_t parameter_count() const;

  Eigen::VectorXd time_embedding(int t) const;

  Tensor down(int branch, const Tensor& input, int t) const;
  Tensor middle(const Tensor& deepest, int t) const;
  Tensor up(int branch, const Tensor& skip, const Tensor& below, int t) const;

  FullOutput forward_full(const Tensor& x, int t) const;

  /// Runs D_1..D_b and U_b..U_1, splicing cache.feature in for u_{b+1}.
  /// Throws CacheMissError when the slot is empty or mis-shaped.
  Tensor forward_partial(const Tensor& x, int t, const CacheSlot& cache) const;

  /// Analytic multiply-accumulate counts for one image.
  BlockMacs block_macs() const;
  std::uint64_t full_macs() const;
  std::uint64_t partial_macs(int branch) const;

  /// Cost profile in G-MACs over branches 1..levels.
  CostProfile cost_profile() const;

  enum class BlockKind { Down, Middle, Up };
  /// Read-only view of one block's parameters, valid while the UNet lives.
  struct BlockParams {
    int cin;
    int cout;
    bool activation;
    const Eigen::MatrixXd& weight;
    const Eigen::RowVectorXd& bias;
    const Eigen::MatrixXd& time_weight;
  };
  BlockParams block_params(BlockKind kind, int branch = 0) const;

 private:
  struct Block {
    int cin = 0;
    int cout = 0;
    enum class Resample { Same, Down, Up } resample = Resample::Same;
    bool activation = true;
    Eigen::MatrixXd weight;       // (9 * cin) x cout, row = (ky * 3 + kx) * cin + ci
    Eigen::RowVectorXd bias;      // cout
    Eigen::MatrixXd time_weight;  // t_embed_dim x cout
    // Up blocks only: the 3x3 kernel folded onto the low-resolution grid,
    // (9 * cin) x (4 * cout) with one column block per output parity.
    Eigen::MatrixXd folded;
  };

  Tensor apply(const Block& block, std::span<const Tensor* const> inputs, int t) const;
  void check_input(const Tensor& x) const;

  UNetConfig config_;
  std::vector<Block> downs_;  // index b - 1
  Block middle_;
  std::vector<Block> ups_;    // index b - 1
};

struct TraceRecord {
  int position = 0;
  int timestep = 0;
  StepKind kind = StepKind::Null;
  int branch = 0;
  double cost_gmacs = 0.0;
  /// Cosine similarity of each branch's junction feature with the previous
  /// Full step's; empty unless this is a Full step with a predecessor.
  std::vector<double> cosine;
};

void to_json(nlohmann::json& j, const TraceRecord& record);

struct PlanRunOptions {
  /// Resume at this grid position, which must hold a Full action, with
  /// `resume_state` as the sample arriving there.
  int resume_position = -1;
  const Tensor* resume_state = nullptr;
  /// Called with the sample arriving at every Full position.
  std::function<void(int position, const Tensor& x)> on_full_arrival;
  std::function<void(const TraceRecord&)> trace;
};

/// Executes a Cache-mode plan on a batch. Full steps refresh the segment's
/// cache, Partial steps reuse it, Null positions are skipped by the sampler.
Tensor run_plan(const UNet& model, const StepPlan& plan, const Tensor& noise,
                const DdimSampler& sampler, const PlanRunOptions& options = {});

/// Standard-normal starting sample for one seed, from Rng(derive_seed(seed, {0})).
Image initial_noise(std::uint64_t seed, const ImageShape& shape);

/// Stacks per-seed noise into a batch tensor.
Tensor noise_batch(std::span<const std::uint64_t> seeds, const ImageShape& shape);

std::vector<Image> unstack(const Tensor& batch);

/// Images processed per run_plan call. Batches are cut at fixed multiples
/// of this from the start of the seed list.
inline constexpr std::size_t kBatchChunk = 64;

/// One final image per seed, in seed order.
std::vector<Image> generate_batch(const UNet& model, const StepPlan& plan,
                                  std::span<const std::uint64_t> seeds, const DdimSampler& sampler);

void to_json(nlohmann::json& j, const UNetConfig& config);
void from_json(const nlohmann::json& j, UNetConfig& config);
void to_json(nlohmann::json& j, const SamplerConfig& config);
void from_json(const nlohmann::json& j, SamplerConfig& config);

}  // namespace flexi
