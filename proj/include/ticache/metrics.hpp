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

#include <cmath>
#include <vector>

#include "ticache/core.hpp"
#include "ticache/masks.hpp"

namespace tic::metrics {

inline double mse(const FeatureMap& a, const FeatureMap& b) {
  require_same_shape(a, b, "mse");
  const auto x = a.values();
  const auto y = b.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += (x[i] - y[i]) * (x[i] - y[i]);
  return sum / static_cast<double>(x.size());
}

/// MSE over the tokens set in `mask` (token index = row-major cell index).
/// Returns 0 for an empty mask.
inline double masked_mse(const FeatureMap& a, const FeatureMap& b, const masks::TokenMask& mask) {
  require_same_shape(a, b, "masked_mse");
  if (mask.cells() != a.tokens()) throw Error(ErrorCode::ShapeMismatch, "mask does not match token count");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < a.tokens(); ++p) {
    if (!mask.test(p)) continue;
    const auto x = a.row(p);
    const auto y = b.row(p);
    for (std::size_t c = 0; c < x.size(); ++c) sum += (x[c] - y[c]) * (x[c] - y[c]);
    n += x.size();
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

inline double l1_metric(const FeatureMap& a, const FeatureMap& b) {
  require_same_shape(a, b, "l1_metric");
  const auto x = a.values();
  const auto y = b.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += std::abs(x[i] - y[i]);
  return sum / static_cast<double>(x.size());
}

struct MseSeries {
  std::vector<double> per_step;
  std::vector<double> cumulative;
};

/// Per-step latent MSE against the oracle, plus its running sum.
inline MseSeries mse_series(const std::vector<FeatureMap>& run, const std::vector<FeatureMap>& oracle) {
  if (run.size() != oracle.size()) {
    throw Error(ErrorCode::ShapeMismatch, "series lengths differ: " + std::to_string(run.size()) +
                                              " vs " + std::to_string(oracle.size()));
  }
  MseSeries out;
  double acc = 0.0;
  for (std::size_t s = 0; s < run.size(); ++s) {
    const double m = mse(run[s], oracle[s]);
    acc += m;
    out.per_step.push_back(m);
    out.cumulative.push_back(acc);
  }
  return out;
}

struct SsimOptions {
  std::size_t grid_width = 16;
  std::size_t window = 8;
  /// Dynamic range L; C1 = (0.01 L)^2, C2 = (0.03 L)^2.
  double dynamic_range = 1.0;
};

/// Mean SSIM over every window x window placement (stride 1, uniform
/// weights, population statistics). Tokens are laid out row-major on a grid
/// of `grid_width` columns; each channel is scored separately and the
/// channel scores are averaged.
inline double ssim_metric(const FeatureMap& a, const FeatureMap& b, const SsimOptions& opt = {}) {
  require_same_shape(a, b, "ssim_metric");
  const std::size_t w = opt.grid_width;
  if (w == 0 || a.tokens() % w != 0) {
    throw Error(ErrorCode::InvalidConfig, "token count is not a multiple of the grid width");
  }
  const std::size_t h = a.tokens() / w;
  const std::size_t win = opt.window;
  if (win == 0 || w < win || h < win) {
    throw Error(ErrorCode::InvalidConfig, "grid " + std::to_string(w) + "x" + std::to_string(h) +
                                              " smaller than window " + std::to_string(win));
  }
  const double c1 = (0.01 * opt.dynamic_range) * (0.01 * opt.dynamic_range);
  const double c2 = (0.03 * opt.dynamic_range) * (0.03 * opt.dynamic_range);
  const double n = static_cast<double>(win * win);

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t ch = 0; ch < a.channels(); ++ch) {
    for (std::size_t y0 = 0; y0 + win <= h; ++y0) {
      for (std::size_t x0 = 0; x0 + win <= w; ++x0) {
        double sa = 0.0, sb = 0.0;
        for (std::size_t y = y0; y < y0 + win; ++y) {
          for (std::size_t x = x0; x < x0 + win; ++x) {
            sa += a.at(y * w + x, ch);
            sb += b.at(y * w + x, ch);
          }
        }
        const double ma = sa / n;
        const double mb = sb / n;
        double va = 0.0, vb = 0.0, cov = 0.0;
        for (std::size_t y = y0; y < y0 + win; ++y) {
          for (std::size_t x = x0; x < x0 + win; ++x) {
            const double da = a.at(y * w + x, ch) - ma;
            const double db = b.at(y * w + x, ch) - mb;
            va += da * da;
            vb += db * db;
            cov += da * db;
          }
        }
        va /= n;
        vb /= n;
        cov /= n;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace tic::metrics
