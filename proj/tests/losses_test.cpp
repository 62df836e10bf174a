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

#include "ticache/losses.hpp"

#include <limits>

#include <gtest/gtest.h>

namespace tic::losses {
namespace {

FeatureMap Const(std::size_t p, std::size_t c, double v) { return FeatureMap(p, c, v); }

TEST(ScheduleTest, FirstAndLastValues) {
  const NoiseSchedule s;
  EXPECT_NEAR(s.alpha_bar(0), 0.99915, 1e-15);
  EXPECT_GT(s.alpha_bar(999), 0.0);
  EXPECT_LT(s.alpha_bar(999), 0.01);
  EXPECT_EQ(alpha_bar(0, s), s.alpha_bar(0));
}

TEST(ScheduleTest, StrictlyDecreasingInUnitInterval) {
  for (auto spacing : {BetaSpacing::ScaledLinear, BetaSpacing::Linear}) {
    const NoiseSchedule s(1000, 0.00085, 0.012, spacing);
    for (int t = 0; t + 1 < s.train_steps(); ++t) {
      ASSERT_LT(s.alpha_bar(t + 1), s.alpha_bar(t));
      ASSERT_GT(s.beta(t), 0.0);
      ASSERT_LT(s.beta(t), 1.0);
    }
  }
}

TEST(ScheduleTest, ProductMatchesBetas) {
  const NoiseSchedule s(50, 0.001, 0.02, BetaSpacing::Linear);
  double prod = 1.0;
  for (int t = 0; t < 50; ++t) {
    const double beta = 0.001 + (0.02 - 0.001) * t / 49.0;
    prod *= 1.0 - beta;
    EXPECT_NEAR(s.alpha_bar(t), prod, 1e-14);
  }
}

TEST(ScheduleTest, OutOfRange) {
  const NoiseSchedule s;
  for (int t : {-1, 1000}) {
    try {
      s.alpha_bar(t);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::IndexError);
    }
  }
  EXPECT_EQ(s.alpha_bar_or_one(-1), 1.0);
}

TEST(AddNoiseTest, ScalarCases) {
  // alpha_bar at t=0 of a one-step schedule is 1 - beta_start.
  const NoiseSchedule quarter(1, 0.75, 0.75, BetaSpacing::Linear);
  const auto z = add_noise(Const(2, 2, 1.0), Const(2, 2, 1.0), 0, quarter);
  for (double v : z.values()) EXPECT_NEAR(v, 1.3660254, 1e-7);

  const NoiseSchedule s;
  const auto only_signal = add_noise(Const(1, 3, 2.0), Const(1, 3, 0.0), 500, s);
  EXPECT_NEAR(only_signal.at(0, 0), 2.0 * std::sqrt(s.alpha_bar(500)), 1e-15);
  const auto only_noise = add_noise(Const(1, 3, 0.0), Const(1, 3, 2.0), 500, s);
  EXPECT_NEAR(only_noise.at(0, 1), 2.0 * std::sqrt(1.0 - s.alpha_bar(500)), 1e-15);
}

TEST(AddNoiseTest, LinearInEachArgument) {
  const NoiseSchedule s;
  const auto a = FeatureMap::random_normal(4, 3, 1), b = FeatureMap::random_normal(4, 3, 2);
  const auto e = FeatureMap::random_normal(4, 3, 3);
  const auto lhs = add_noise(axpby(2.0, a, 3.0, b), e, 100, s);
  const auto rhs = axpby(1.0, add_noise(axpby(2.0, a, 3.0, b), Const(4, 3, 0.0), 100, s), 1.0,
                         add_noise(Const(4, 3, 0.0), e, 100, s));
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-12);
  EXPECT_THROW(add_noise(a, FeatureMap(3, 4), 0, s), Error);
}

TEST(LdmLossTest, Values) {
  const auto a = FeatureMap::random_normal(16, 8, 11), b = FeatureMap::random_normal(16, 8, 12);
  EXPECT_EQ(ldm_loss(a, a), 0.0);
  EXPECT_NEAR(ldm_loss(Const(3, 3, 1.5), Const(3, 3, -0.5)), 4.0, 1e-15);
  double brute = 0.0;
  for (std::size_t p = 0; p < 16; ++p) {
    for (std::size_t c = 0; c < 8; ++c) brute += (a.at(p, c) - b.at(p, c)) * (a.at(p, c) - b.at(p, c));
  }
  EXPECT_NEAR(ldm_loss(a, b), brute / 128.0, 1e-12);
}

masks::TokenMask Rows(std::size_t w, std::size_t h, std::size_t from, std::size_t to) {
  masks::TokenMask m(w, h);
  for (std::size_t y = from; y < to; ++y) {
    for (std::size_t x = 0; x < w; ++x) m.set(x, y);
  }
  return m;
}

TEST(FfgLossTest, ReferenceValues) {
  const LatentPair pair{Const(16, 4, 1.0), Const(16, 4, 0.0)};
  const masks::TokenMask none(4, 4), full = masks::TokenMask::full(4, 4);
  EXPECT_EQ(ffg_loss(pair, none, none), 0.0);
  EXPECT_DOUBLE_EQ(ffg_loss(pair, Rows(4, 4, 0, 1), Rows(4, 4, 1, 2)), 0.5);
  EXPECT_DOUBLE_EQ(ffg_loss(pair, full, full), 4.0);
  EXPECT_DOUBLE_EQ(ffg_loss(pair, full, full, FfgForm::SeparateNorms), 2.0);
}

TEST(FfgLossTest, SymmetricAndFourTimesMse) {
  const LatentPair pair{FeatureMap::random_normal(16, 4, 5), FeatureMap::random_normal(16, 4, 6)};
  const auto me = Rows(4, 4, 0, 3), mf = Rows(4, 4, 2, 4);
  EXPECT_DOUBLE_EQ(ffg_loss(pair, me, mf), ffg_loss(pair, mf, me));
  const auto full = masks::TokenMask::full(4, 4);
  EXPECT_NEAR(ffg_loss(pair, full, full), 4.0 * ldm_loss(pair.z, pair.z_hat), 1e-12);
  EXPECT_GE(ffg_loss(pair, me, mf), 0.0);
}

TEST(FfgLossTest, GridMismatch) {
  const LatentPair pair{Const(16, 4, 1.0), Const(16, 4, 0.0)};
  try {
    ffg_loss(pair, masks::TokenMask(3, 3), masks::TokenMask(4, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(TotalLossTest, Additive) {
  EXPECT_EQ(total_loss(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(total_loss(0.3, 0.2), 0.5);
  const LatentPair pair{FeatureMap::random_normal(16, 4, 1), FeatureMap::random_normal(16, 4, 2)};
  const double ldm = ldm_loss(pair.z, pair.z_hat);
  EXPECT_EQ(total_loss(ldm, ffg_loss(pair, masks::TokenMask(4, 4), masks::TokenMask(4, 4))), ldm);
  for (double bad : {-1.0, std::numeric_limits<double>::infinity(), std::numeric_limits<double>::quiet_NaN()}) {
    try {
      total_loss(bad, 0.0);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidLoss);
    }
  }
}

}  // namespace
}  // namespace tic::losses
