// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#include "flexi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flexi/errors.hpp"
#include "flexi/linalg.hpp"
#include "flexi/rng.hpp"

namespace flexi {

FeatureExtractor::FeatureExtractor(std::uint64_t seed, ImageShape shape, int feature_dim)
    : seed_(seed), shape_(shape) {
  if (feature_dim < 1) throw InvalidConfigError("feature_dim must be >= 1");
  if (shape.size() == 0) throw InvalidConfigError("extractor input dims must be positive");
  const auto n = static_cast<Eigen::Index>(shape.size());
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(shape.height),
                             static_cast<std::uint64_t>(shape.width),
                             static_cast<std::uint64_t>(shape.channels),
                             static_cast<std::uint64_t>(feature_dim)}));
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  projection_.resize(feature_dim, n);
  for (Eigen::Index r = 0; r < projection_.rows(); ++r) {
    for (Eigen::Index c = 0; c < n; ++c) projection_(r, c) = scale * rng.normal();
  }
}

Eigen::VectorXd FeatureExtractor::features(std::span<const double> image) const {
  if (image.size() != shape_.size()) throw DimensionMismatchError("image does not match extractor dims");
  Eigen::Map<const Eigen::VectorXd> x(image.data(), static_cast<Eigen::Index>(image.size()));
  return (projection_ * x).array().tanh().matrix();
}

Eigen::MatrixXd FeatureExtractor::features(std::span<const Image> images) const {
  const auto n = static_cast<Eigen::Index>(shape_.size());
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> x(
      static_cast<Eigen::Index>(images.size()), n);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].size() != shape_.size()) {
      throw DimensionMismatchError("image does not match extractor dims");
    }
    x.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(images[i].data(), n);
  }
  Eigen::MatrixXd f = x * projection_.transpose();
  return f.array().tanh().matrix();
}

FeatureStats stats_from_features(const Eigen::MatrixXd& features) {
  if (features.rows() < 2) {
    throw InsufficientSamplesError("feature statistics need at least 2 samples, got " +
                                   std::to_string(features.rows()));
  }
  FeatureStats s;
  s.count = static_cast<std::size_t>(features.rows());
  s.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - s.mean.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(features.rows() - 1);
  s.cov = 0.5 * (cov + cov.transpose());
  return s;
}

FeatureStats extract_stats(std::span<const Image> images, const FeatureExtractor& extractor) {
  if (images.size() < 2) {
    throw InsufficientSamplesError("feature statistics need at least 2 images, got " +
                                   std::to_string(images.size()));
  }
  return stats_from_features(extractor.features(images));
}

double frechet(const FeatureStats& a, const FeatureStats& b) {
  if (a.dim() != b.dim() || a.cov.rows() != a.dim() || b.cov.rows() != b.dim() ||
      a.cov.cols() != a.dim() || b.cov.cols() != b.dim()) {
    throw DimensionMismatchError("frechet: feature dimensions differ");
  }
  const Eigen::Index d = a.dim();
  const Eigen::MatrixXd jitter = kFrechetJitter * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd cov_a = a.cov + jitter;
  const Eigen::MatrixXd cov_b = b.cov + jitter;

  const Eigen::MatrixXd root_a = psd_sqrt(cov_a);
  Eigen::MatrixXd s = root_a * cov_b * root_a;
  s = 0.5 * (s + s.transpose());
  const SymmetricEigen eig = jacobi_eigen(s);
  const double trace_sqrt = eig.values.cwiseMax(0.0).cwiseSqrt().sum();

  const double mean_term = (a.mean - b.mean).squaredNorm();
  const double value = mean_term + cov_a.trace() + cov_b.trace() - 2.0 * trace_sqrt;
  if (!std::isfinite(value)) throw NumericError("frechet: non-finite result");
  if (value < 0.0) {
    if (value >= -1e-6) return 0.0;
    throw NumericError("frechet: negative distance " + std::to_string(value));
  }
  return value;
}

double rfid(std::span<const Image> candidate, std::span<const Image> teacher,
            const FeatureExtractor& extractor) {
  if (candidate.size() != teacher.size()) {
    throw PairedGenerationError("candidate and teacher image counts differ (" +
                                std::to_string(candidate.size()) + " vs " +
                                std::to_string(teacher.size()) + ")");
  }
  return frechet(extract_stats(candidate, extractor), extract_stats(teacher, extractor));
}

double pixel_mse(std::span<const Image> candidate, std::span<const Image> teacher) {
  if (candidate.size() != teacher.size()) {
    throw PairedGenerationError("candidate and teacher image counts differ");
  }
  if (candidate.empty()) throw InsufficientSamplesError("pixel_mse needs at least one image pair");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (candidate[i].size() != teacher[i].size()) {
      throw DimensionMismatchError("pixel_mse: paired images differ in shape");
    }
    for (std::size_t p = 0; p < candidate[i].size(); ++p) {
      const double diff = candidate[i][p] - teacher[i][p];
      sum += diff * diff;
    }
    count += candidate[i].size();
  }
  return sum / static_cast<double>(count);
}

namespace {

// Counts pairs i < j with v[i] > v[j] while merge-sorting v in place.
std::int64_t count_inversions(std::vector<double>& v, std::vector<double>& scratch,
                              std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t inversions = count_inversions(v, scratch, lo, mid) + count_inversions(v, scratch, mid, hi);
  std::size_t i = lo;
  std::size_t j = mid;
  std::size_t k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inversions += static_cast<std::int64_t>(mid - i);
      scratch[k++] = v[j++];
    } else {
      scratch[k++] = v[i++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
            scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inversions;
}

template <typename Eq>
std::int64_t tied_pairs(std::size_t n, Eq same_as_previous) {
  std::int64_t ties = 0;
  std::int64_t run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && same_as_previous(i)) {
      ++run;
    } else {
      ties += run * (run - 1) / 2;
      run = 1;
    }
  }
  return ties;
}

}  // namespace

double kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatchError("kendall_tau: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) throw InsufficientSamplesError("kendall_tau needs at least 2 observations");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a[i] < a[j] || (a[i] == a[j] && b[i] < b[j]);
  });

  const std::int64_t tied_a = tied_pairs(n, [&](std::size_t i) { return a[order[i]] == a[order[i - 1]]; });
  const std::int64_t tied_both = tied_pairs(n, [&](std::size_t i) {
    return a[order[i]] == a[order[i - 1]] && b[order[i]] == b[order[i - 1]];
  });

  std::vector<double> sorted_b(n);
  for (std::size_t i = 0; i < n; ++i) sorted_b[i] = b[order[i]];
  std::vector<double> scratch(n);
  const std::int64_t discordant = count_inversions(sorted_b, scratch, 0, n);
  const std::int64_t tied_b = tied_pairs(n, [&](std::size_t i) { return sorted_b[i] == sorted_b[i - 1]; });

  const std::int64_t total = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  if (total == tied_a || total == tied_b) {
    throw UndefinedTauError("kendall_tau undefined: one input is entirely tied");
  }
  const std::int64_t concordant_minus_discordant = total - tied_a - tied_b + tied_both - 2 * discordant;
  return static_cast<double>(concordant_minus_discordant) /
         std::sqrt(static_cast<double>(total - tied_a) * static_cast<double>(total - tied_b));
}

void to_json(nlohmann::json& j, const FeatureStats& stats) {
  std::vector<double> mean(stats.mean.data(), stats.mean.data() + stats.mean.size());
  std::vector<double> cov;
  cov.reserve(static_cast<std::size_t>(stats.cov.size()));
  for (Eigen::Index r = 0; r < stats.cov.rows(); ++r) {
    for (Eigen::Index c = 0; c < stats.cov.cols(); ++c) cov.push_back(stats.cov(r, c));
  }
  j = nlohmann::json{{"mean", mean}, {"cov", cov}, {"count", stats.count}};
}

void from_json(const nlohmann::json& j, FeatureStats& stats) {
  try {
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto cov = j.at("cov").get<std::vector<double>>();
    const auto d = static_cast<Eigen::Index>(mean.size());
    if (static_cast<Eigen::Index>(cov.size()) != d * d) {
      throw FormatError("feature stats: cov must hold mean.size()^2 entries");
    }
    stats.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
    stats.cov.resize(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index c = 0; c < d; ++c) stats.cov(r, c) = cov[static_cast<std::size_t>(r * d + c)];
    }
    stats.count = j.at("count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("feature stats: ") + e.what());
  }
}

}  // namespace flexi
