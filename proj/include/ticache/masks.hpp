// Copyright 2026 The ticbench Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "ticache/core.hpp"
#include "ticache/geometry.hpp"

namespace tic::masks {

/// Binary row-major grid. Used for the expression mask, the facial mask and
/// the cache guidance mask at any resolution.
class TokenMask {
 public:
  TokenMask() = default;

  TokenMask(std::size_t width, std::size_t height, bool fill = false)
      : width_(width), height_(height), bits_(width * height, fill ? 1 : 0) {
    if (width == 0 || height == 0) {
      throw Error(ErrorCode::EmptyGrid, "mask grid must be at least 1x1");
    }
  }

  static TokenMask full(std::size_t width, std::size_t height) { return {width, height, true}; }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t cells() const noexcept { return bits_.size(); }
  bool empty() const noexcept { return bits_.empty(); }

  bool get(std::size_t x, std::size_t y) const { return bits_[y * width_ + x] != 0; }
  void set(std::size_t x, std::size_t y, bool v = true) { bits_[y * width_ + x] = v ? 1 : 0; }

  /// Row-major cell index, which is also the token index of a feature map
  /// laid out on this grid.
  bool test(std::size_t index) const { return bits_[index] != 0; }

  std::size_t popcount() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }

  TokenMask complement() const {
    TokenMask out = *this;
    for (auto& b : out.bits_) b = b ? 0 : 1;
    return out;
  }

  TokenMask operator|(const TokenMask& o) const {
    require_same_grid(o);
    TokenMask out = *this;
    for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] |= o.bits_[i];
    return out;
  }

  TokenMask operator&(const TokenMask& o) const {
    require_same_grid(o);
    TokenMask out = *this;
    for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] &= o.bits_[i];
    return out;
  }

  bool subset_of(const TokenMask& o) const {
    require_same_grid(o);
    for (std::size_t i = 0; i < bits_.size(); ++i) {
      if (bits_[i] && !o.bits_[i]) return false;
    }
    return true;
  }

  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

  bool operator==(const TokenMask&) const = default;

 private:
  void require_same_grid(const TokenMask& o) const {
    if (width_ != o.width_ || height_ != o.height_) {
      throw Error(ErrorCode::ShapeMismatch, "mask grids differ");
    }
  }

  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Pixel of a normalized coordinate: floor(u * size), clipped into the grid.
inline std::size_t to_pixel(double u, std::size_t size) {
  const double p = std::floor(u * static_cast<double>(size));
  if (!(p > 0.0)) return 0;
  return std::min(static_cast<std::size_t>(p), size - 1);
}

/// Sets every cell within Chebyshev distance `radius` of a landmark pixel.
inline TokenMask dilate_points(const geometry::LandmarkSet2D& points, int radius,
                               std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) throw Error(ErrorCode::EmptyGrid, "dilation grid is empty");
  if (radius < 0) throw Error(ErrorCode::InvalidConfig, "dilation radius must be >= 0");
  TokenMask mask(width, height);
  const auto r = static_cast<std::ptrdiff_t>(radius);
  const auto w = static_cast<std::ptrdiff_t>(width);
  const auto h = static_cast<std::ptrdiff_t>(height);
  for (const auto& p : points.points) {
    const auto px = static_cast<std::ptrdiff_t>(to_pixel(p.x, width));
    const auto py = static_cast<std::ptrdiff_t>(to_pixel(p.y, height));
    for (auto y = std::max<std::ptrdiff_t>(0, py - r); y <= std::min(h - 1, py + r); ++y) {
      for (auto x = std::max<std::ptrdiff_t>(0, px - r); x <= std::min(w - 1, px + r); ++x) {
        mask.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
      }
    }
  }
  return mask;
}

/// Even-odd scanline fill of a closed polygon given in pixel coordinates,
/// where cell (i, j) has its centre at (i, j). Centres lying on an edge are
/// set as well.
inline TokenMask fill_contour(const std::vector<std::pair<double, double>>& contour,
                              std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) throw Error(ErrorCode::EmptyGrid, "fill grid is empty");
  if (contour.size() < 3) {
    throw Error(ErrorCode::DegeneratePolygon, "polygon needs at least 3 vertices");
  }
  double twice_area = 0.0;
  for (std::size_t i = 0; i < contour.size(); ++i) {
    const auto& [x0, y0] = contour[i];
    const auto& [x1, y1] = contour[(i + 1) % contour.size()];
    twice_area += x0 * y1 - x1 * y0;
  }
  if (std::abs(twice_area) < 1e-12) throw Error(ErrorCode::DegeneratePolygon, "polygon has zero area");

  TokenMask mask(width, height);
  const std::size_t n = contour.size();
  std::vector<double> xs;
  for (std::size_t j = 0; j < height; ++j) {
    const double y = static_cast<double>(j);
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& [x0, y0] = contour[i];
      const auto& [x1, y1] = contour[(i + 1) % n];
      // Half-open in y so shared vertices are counted once.
      if ((y0 <= y && y < y1) || (y1 <= y && y < y0)) {
        xs.push_back(x0 + (y - y0) * (x1 - x0) / (y1 - y0));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const double lo = std::max(0.0, std::ceil(xs[k] - 1e-9));
      const double hi = std::min(static_cast<double>(width) - 1.0, std::floor(xs[k + 1] + 1e-9));
      for (double x = lo; x <= hi; x += 1.0) mask.set(static_cast<std::size_t>(x), j);
    }
  }

  // Boundary pass: horizontal edges and vertices never produce crossings.
  constexpr double kOnEdge = 1e-9;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [x0, y0] = contour[i];
    const auto& [x1, y1] = contour[(i + 1) % n];
    const double dx = x1 - x0;
    const double dy = y1 - y0;
    const double len2 = dx * dx + dy * dy;
    const auto clip = [](double v, std::size_t size) {
      return static_cast<std::ptrdiff_t>(std::clamp(v, 0.0, static_cast<double>(size) - 1.0));
    };
    const auto xa = clip(std::ceil(std::min(x0, x1) - kOnEdge), width);
    const auto xb = clip(std::floor(std::max(x0, x1) + kOnEdge), width);
    const auto ya = clip(std::ceil(std::min(y0, y1) - kOnEdge), height);
    const auto yb = clip(std::floor(std::max(y0, y1) + kOnEdge), height);
    for (auto py = ya; py <= yb; ++py) {
      for (auto px = xa; px <= xb; ++px) {
        const double cx = static_cast<double>(px) - x0;
        const double cy = static_cast<double>(py) - y0;
        double t = len2 > 0.0 ? (cx * dx + cy * dy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double ex = cx - t * dx;
        const double ey = cy - t * dy;
        if (ex * ex + ey * ey <= kOnEdge * kOnEdge) {
          mask.set(static_cast<std::size_t>(px), static_cast<std::size_t>(py));
        }
      }
    }
  }
  return mask;
}

/// Max-pool by `factor`: an output cell is set iff any covered input cell is.
inline TokenMask downsample_any(const TokenMask& mask, std::size_t factor) {
  if (factor == 0) throw Error(ErrorCode::InvalidConfig, "downsample factor must be >= 1");
  if (mask.width() % factor != 0 || mask.height() % factor != 0) {
    throw Error(ErrorCode::ShapeMismatch, "mask " + std::to_string(mask.width()) + "x" +
                                              std::to_string(mask.height()) +
                                              " not divisible by " + std::to_string(factor));
  }
  TokenMask out(mask.width() / factor, mask.height() / factor);
  for (std::size_t y = 0; y < mask.height(); ++y) {
    for (std::size_t x = 0; x < mask.width(); ++x) {
      if (mask.get(x, y)) out.set(x / factor, y / factor);
    }
  }
  return out;
}

struct MaskConfig {
  std::size_t image_size = 64;
  /// Expression-mask radius at 64x64; scaled proportionally to image_size.
  int radius_at_64 = 2;
  bool include_facial = true;

  int radius() const {
    return static_cast<int>(std::lround(radius_at_64 * static_cast<double>(image_size) / 64.0));
  }
};

/// Expression mask: dilated non-contour landmarks.
inline TokenMask expression_mask(const std::vector<geometry::Landmark3D>& face,
                                 const MaskConfig& cfg) {
  const auto kept = geometry::filter_expression_aware(face);
  geometry::LandmarkSet2D set;
  for (const auto& p : kept) set.points.push_back({p.id, p.x, p.y});
  return dilate_points(set, cfg.radius(), cfg.image_size, cfg.image_size);
}

/// Facial mask: the contour landmarks, in the given order, filled as a
/// polygon. Normalized u maps to pixel u * size - 0.5 so that cell centres
/// agree with the floor mapping used for dilation.
inline TokenMask facial_mask(const std::vector<geometry::Landmark3D>& face, const MaskConfig& cfg) {
  std::vector<std::pair<double, double>> poly;
  const double s = static_cast<double>(cfg.image_size);
  for (const auto& p : face) {
    if (p.category == geometry::Category::Contour) poly.emplace_back(p.x * s - 0.5, p.y * s - 0.5);
  }
  return fill_contour(poly, cfg.image_size, cfg.image_size);
}

/// Cache guidance mask at image resolution: expression mask, optionally
/// united with the facial mask.
inline TokenMask landmark_mask(const std::vector<geometry::Landmark3D>& face, const MaskConfig& cfg) {
  TokenMask m = expression_mask(face, cfg);
  if (cfg.include_facial) m = m | facial_mask(face, cfg);
  return m;
}

/// Binary PGM: "P5\n<width> <height>\n255\n" followed by width*height bytes,
/// row-major, 0 for clear cells and 255 for set cells.
inline std::string to_pgm(const TokenMask& mask) {
  std::string out = "P5\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) +
                    "\n255\n";
  out.reserve(out.size() + mask.cells());
  for (auto b : mask.bits()) out.push_back(static_cast<char>(b ? 255 : 0));
  return out;
}

inline void write_pgm(const std::string& path, const TokenMask& mask) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
  f << to_pgm(mask);
}

}  // namespace tic::masks
