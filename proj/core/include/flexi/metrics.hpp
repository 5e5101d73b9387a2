// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "flexi/tensor.hpp"

namespace flexi {

/// Jitter added to both covariances before any square root is taken.
inline constexpr double kFrechetJitter = 1e-6;

/// Fixed random-projection feature map: tanh(P * flatten(image)).
///
/// P is d x (H*W*C) with entries N(0, 1/(H*W*C)) drawn from a generator
/// seeded by (seed, dims), so equal seeds and dims give equal projections.
class FeatureExtractor {
 public:
  FeatureExtractor(std::uint64_t seed, ImageShape shape, int feature_dim = 32);

  std::uint64_t seed() const { return seed_; }
  const ImageShape& shape() const { return shape_; }
  int feature_dim() const { return static_cast<int>(projection_.rows()); }
  const Eigen::MatrixXd& projection() const { return projection_; }

  Eigen::VectorXd features(std::span<const double> image) const;
  /// One row of features per image.
  Eigen::MatrixXd features(std::span<const Image> images) const;

 private:
  std::uint64_t seed_;
  ImageShape shape_;
  Eigen::MatrixXd projection_;
};

/// Gaussian summary of a feature sample.
struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t count = 0;

  int dim() const { return static_cast<int>(mean.size()); }
};

/// Sample mean and unbiased (N-1) covariance of the rows of `features`.
/// Throws InsufficientSamplesError for fewer than two rows.
FeatureStats stats_from_features(const Eigen::MatrixXd& features);

FeatureStats extract_stats(std::span<const Image> images, const FeatureExtractor& extractor);

/// Frechet distance between two Gaussians:
/// |mu_a - mu_b|^2 + Tr(A + B - 2 (A^1/2 B A^1/2)^1/2) with A, B the
/// jittered covariances. Small negative round-off is clipped to zero.
double frechet(const FeatureStats& a, const FeatureStats& b);

/// Frechet distance between candidate and teacher feature statistics. Both
/// sets must come from the same noise seeds, so their sizes must agree.
double rfid(std::span<const Image> candidate, std::span<const Image> teacher,
            const FeatureExtractor& extractor);

/// Mean squared pixel difference over paired images.
double pixel_mse(std::span<const Image> candidate, std::span<const Image> teacher);

/// Kendall's tau-b with tie correction, O(n log n).
double kendall_tau(std::span<const double> a, std::span<const double> b);

void to_json(nlohmann::json& j, const FeatureStats& stats);
void from_json(const nlohmann::json& j, FeatureStats& stats);

}  // namespace flexi
