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
#include <string>
#include <vector>

#include "ticache/core.hpp"
#include "ticache/masks.hpp"

namespace tic::losses {

enum class BetaSpacing {
  Linear,        // beta linear in t
  ScaledLinear,  // sqrt(beta) linear in t
};

/// Discrete noise schedule with cumulative products alpha_bar[t] = prod_{i<=t} (1 - beta_i).
class NoiseSchedule {
 public:
  explicit NoiseSchedule(int train_steps = 1000, double beta_start = 0.00085,
                         double beta_end = 0.012, BetaSpacing spacing = BetaSpacing::ScaledLinear)
      : train_steps_(train_steps), beta_start_(beta_start), beta_end_(beta_end) {
    if (train_steps < 1) throw Error(ErrorCode::InvalidConfig, "train_steps must be >= 1");
    if (!(beta_start > 0.0 && beta_start < 1.0 && beta_end > 0.0 && beta_end < 1.0)) {
      throw Error(ErrorCode::InvalidConfig, "betas must lie in (0, 1)");
    }
    betas_.resize(static_cast<std::size_t>(train_steps));
    alpha_bar_.resize(betas_.size());
    const double denom = train_steps > 1 ? train_steps - 1 : 1;
    double prod = 1.0;
    for (int t = 0; t < train_steps; ++t) {
      const double u = t / denom;
      double beta = 0.0;
      if (spacing == BetaSpacing::Linear) {
        beta = beta_start + u * (beta_end - beta_start);
      } else {
        const double r = std::sqrt(beta_start) + u * (std::sqrt(beta_end) - std::sqrt(beta_start));
        beta = r * r;
      }
      betas_[static_cast<std::size_t>(t)] = beta;
      prod *= 1.0 - beta;
      alpha_bar_[static_cast<std::size_t>(t)] = prod;
    }
  }

  int train_steps() const noexcept { return train_steps_; }
  double beta_start() const noexcept { return beta_start_; }
  double beta_end() const noexcept { return beta_end_; }
  double beta(int t) const { return betas_.at(check(t)); }

  double alpha_bar(int t) const { return alpha_bar_[check(t)]; }

  /// alpha_bar(t), with t == -1 standing for the clean sample (alpha_bar = 1).
  double alpha_bar_or_one(int t) const { return t == -1 ? 1.0 : alpha_bar(t); }

 private:
  std::size_t check(int t) const {
    if (t < 0 || t >= train_steps_) {
      throw Error(ErrorCode::IndexError,
                  "timestep " + std::to_string(t) + " outside [0, " + std::to_string(train_steps_) + ")");
    }
    return static_cast<std::size_t>(t);
  }

  int train_steps_;
  double beta_start_;
  double beta_end_;
  std::vector<double> betas_;
  std::vector<double> alpha_bar_;
};

inline double alpha_bar(int t, const NoiseSchedule& s) { return s.alpha_bar(t); }

/// sqrt(alpha_bar_t) * z0 + sqrt(1 - alpha_bar_t) * eps
inline FeatureMap add_noise(const FeatureMap& z0, const FeatureMap& eps, int t, const NoiseSchedule& s) {
  require_same_shape(z0, eps, "add_noise");
  const double ab = s.alpha_bar(t);
  return axpby(std::sqrt(ab), z0, std::sqrt(1.0 - ab), eps);
}

/// Mean squared error between predicted and true noise.
inline double ldm_loss(const FeatureMap& eps_pred, const FeatureMap& eps_true) {
  require_same_shape(eps_pred, eps_true, "ldm_loss");
  const auto a = eps_pred.values();
  const auto b = eps_true.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return sum / static_cast<double>(a.size());
}

struct LatentPair {
  FeatureMap z;
  FeatureMap z_hat;
};

enum class FfgForm {
  /// mean((M_e*r + M_f*r)^2): overlapping cells weigh the residual twice
  /// inside the square.
  SumInsideNorm,
  /// mean(M_e*r^2) + mean(M_f*r^2)
  SeparateNorms,
};

/// Facial fine-grained loss. Masks lie on the token grid and broadcast over
/// channels; the residual is r = z - z_hat.
inline double ffg_loss(const LatentPair& pair, const masks::TokenMask& m_e,
                       const masks::TokenMask& m_f, FfgForm form = FfgForm::SumInsideNorm) {
  require_same_shape(pair.z, pair.z_hat, "ffg_loss");
  const std::size_t tokens = pair.z.tokens();
  if (m_e.cells() != tokens || m_f.cells() != tokens) {
    throw Error(ErrorCode::ShapeMismatch, "mask grid (" + std::to_string(m_e.cells()) + ", " +
                                              std::to_string(m_f.cells()) + " cells) vs " +
                                              std::to_string(tokens) + " tokens");
  }
  double sum = 0.0;
  for (std::size_t p = 0; p < tokens; ++p) {
    const double we = m_e.test(p) ? 1.0 : 0.0;
    const double wf = m_f.test(p) ? 1.0 : 0.0;
    if (we == 0.0 && wf == 0.0) continue;
    const auto z = pair.z.row(p);
    const auto zh = pair.z_hat.row(p);
    for (std::size_t c = 0; c < z.size(); ++c) {
      const double r = z[c] - zh[c];
      if (form == FfgForm::SumInsideNorm) {
        const double v = we * r + wf * r;
        sum += v * v;
      } else {
        sum += (we + wf) * r * r;
      }
    }
  }
  return sum / static_cast<double>(pair.z.size());
}

inline double total_loss(double ldm, double ffg) {
  if (!(ldm >= 0.0) || !(ffg >= 0.0) || !std::isfinite(ldm) || !std::isfinite(ffg)) {
    throw Error(ErrorCode::InvalidLoss, "loss terms must be finite and non-negative");
  }
  return ldm + ffg;
}

}  // namespace tic::losses
