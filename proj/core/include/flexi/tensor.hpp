// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

namespace flexi {

struct ImageShape {
  int height = 16;
  int width = 16;
  int channels = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
           static_cast<std::size_t>(channels);
  }

  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

/// One image, row-major H x W x C.
using Image = std::vector<double>;

/// Batch of feature maps in NHWC order.
struct Tensor {
  int n = 0;
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int n_, int h_, int w_, int c_)
      : n(n_), h(h_), w(w_), c(c_),
        data(static_cast<std::size_t>(n_) * h_ * w_ * c_, 0.0) {}

  std::size_t size() const { return data.size(); }
  std::size_t pixels() const { return static_cast<std::size_t>(n) * h * w; }
  bool same_shape(const Tensor& o) const { return n == o.n && h == o.h && w == o.w && c == o.c; }

  double& at(int b, int y, int x, int ch) {
    return data[((static_cast<std::size_t>(b) * h + y) * w + x) * c + ch];
  }
  double at(int b, int y, int x, int ch) const {
    return data[((static_cast<std::size_t>(b) * h + y) * w + x) * c + ch];
  }
};

inline void to_json(nlohmann::json& j, const ImageShape& s) {
  j = nlohmann::json{{"height", s.height}, {"width", s.width}, {"channels", s.channels}};
}

inline void from_json(const nlohmann::json& j, ImageShape& s) {
  s.height = j.value("height", s.height);
  s.width = j.value("width", s.width);
  s.channels = j.value("channels", s.channels);
}

}  // namespace flexi
