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
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tic {

enum class ErrorCode {
  EmptyLandmarkSet,
  InsufficientPoints,
  DegenerateConfiguration,
  IncompleteEyeSet,
  EmptyGrid,
  DegeneratePolygon,
  ShapeMismatch,
  IndexError,
  InvalidLoss,
  NotEnoughHistory,
  EmptyCache,
  InvalidConfig,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyLandmarkSet: return "EmptyLandmarkSet";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::IncompleteEyeSet: return "IncompleteEyeSet";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::DegeneratePolygon: return "DegeneratePolygon";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::IndexError: return "IndexError";
    case ErrorCode::InvalidLoss: return "InvalidLoss";
    case ErrorCode::NotEnoughHistory: return "NotEnoughHistory";
    case ErrorCode::EmptyCache: return "EmptyCache";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// The text without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

/// SplitMix64. Constants are the published ones (Steele, Lea, Flood 2014):
///   state += 0x9E3779B97F4A7C15
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
/// uniform() takes the top 53 bits, so every language with 64-bit integer
/// arithmetic reproduces the same doubles.
class Rng {
 public:
  explicit constexpr Rng(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// [0, 1)
  constexpr double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// [lo, hi)
  constexpr double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  /// Box-Muller, one draw per call (the sine branch is discarded).
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  constexpr bool bernoulli(double p) noexcept { return uniform() < p; }

 private:
  std::uint64_t state_;
};

/// Mixes a base seed with a stream index into an independent seed.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  Rng rng(base ^ (stream * 0xD1B54A32D192ED03ULL));
  rng.next();
  return rng.next();
}

/// Dense tokens x channels array, row-major. The unit that blocks produce and
/// the cache stores.
class FeatureMap {
 public:
  FeatureMap() = default;

  FeatureMap(std::size_t tokens, std::size_t channels, double fill = 0.0)
      : tokens_(tokens), channels_(channels), data_(tokens * channels, fill) {
    if (tokens == 0 || channels == 0) {
      throw Error(ErrorCode::ShapeMismatch, "feature map needs positive tokens and channels");
    }
  }

  FeatureMap(std::size_t tokens, std::size_t channels, std::vector<double> data)
      : tokens_(tokens), channels_(channels), data_(std::move(data)) {
    if (tokens == 0 || channels == 0 || data_.size() != tokens * channels) {
      throw Error(ErrorCode::ShapeMismatch, "feature map data length must equal tokens*channels");
    }
  }

  static FeatureMap random_normal(std::size_t tokens, std::size_t channels, std::uint64_t seed,
                                  double scale = 1.0) {
    FeatureMap out(tokens, channels);
    Rng rng(seed);
    for (double& v : out.data_) v = scale * rng.normal();
    return out;
  }

  std::size_t tokens() const noexcept { return tokens_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& at(std::size_t token, std::size_t channel) { return data_[token * channels_ + channel]; }
  double at(std::size_t token, std::size_t channel) const {
    return data_[token * channels_ + channel];
  }

  std::span<double> row(std::size_t token) {
    return {data_.data() + token * channels_, channels_};
  }
  std::span<const double> row(std::size_t token) const {
    return {data_.data() + token * channels_, channels_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const FeatureMap& other) const noexcept {
    return tokens_ == other.tokens_ && channels_ == other.channels_;
  }

  bool operator==(const FeatureMap&) const = default;

 private:
  std::size_t tokens_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

inline void require_same_shape(const FeatureMap& a, const FeatureMap& b, std::string_view what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + ": " + std::to_string(a.tokens()) + "x" +
                    std::to_string(a.channels()) + " vs " + std::to_string(b.tokens()) + "x" +
                    std::to_string(b.channels()));
  }
}

/// out = a * x + b * y, elementwise.
inline FeatureMap axpby(double a, const FeatureMap& x, double b, const FeatureMap& y) {
  require_same_shape(x, y, "axpby");
  FeatureMap out(x.tokens(), x.channels());
  auto o = out.values();
  auto xs = x.values();
  auto ys = y.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a * xs[i] + b * ys[i];
  return out;
}

inline FeatureMap operator-(const FeatureMap& x, const FeatureMap& y) { return axpby(1.0, x, -1.0, y); }
inline FeatureMap operator+(const FeatureMap& x, const FeatureMap& y) { return axpby(1.0, x, 1.0, y); }

inline double max_abs_diff(const FeatureMap& a, const FeatureMap& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  auto as = a.values();
  auto bs = b.values();
  for (std::size_t i = 0; i < as.size(); ++i) m = std::max(m, std::abs(as[i] - bs[i]));
  return m;
}

}  // namespace tic
