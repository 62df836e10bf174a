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

#include "ticache/core.hpp"

#include <set>

#include <gtest/gtest.h>

namespace tic {
namespace {

TEST(RngTest, SplitMixReferenceOutputs) {
  // Reference values from the published SplitMix64 recurrence, seed 0.
  Rng rng(0);
  EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(rng.next(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(rng.next(), 0x06C45D188009454FULL);
}

TEST(RngTest, UniformUsesTop53Bits) {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, static_cast<double>(b.next() >> 11) / 9007199254740992.0);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(RngTest, SameSeedSameStream) {
  Rng a(99), b(99);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.normal(), b.normal());
}

TEST(RngTest, NormalMoments) {
  Rng rng(5);
  double sum = 0.0, sq = 0.0;
  constexpr int kN = 200000;
  for (int i = 0; i < kN; ++i) {
    const double v = rng.normal();
    sum += v;
    sq += v * v;
  }
  EXPECT_NEAR(sum / kN, 0.0, 0.01);
  EXPECT_NEAR(sq / kN, 1.0, 0.02);
}

TEST(RngTest, DerivedSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 1000; ++s) seen.insert(derive_seed(42, s));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(derive_seed(42, 3), derive_seed(42, 3));
}

TEST(FeatureMapTest, ShapeChecks) {
  EXPECT_THROW(FeatureMap(0, 4), Error);
  EXPECT_THROW(FeatureMap(2, 2, std::vector<double>{1, 2, 3}), Error);
  FeatureMap a(2, 3, 1.0), b(3, 2, 1.0);
  try {
    (void)(a - b);
    FAIL() << "expected ShapeMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(FeatureMapTest, AxpbyAndRows) {
  FeatureMap x(2, 2, std::vector<double>{1, 2, 3, 4});
  FeatureMap y(2, 2, std::vector<double>{4, 3, 2, 1});
  const FeatureMap z = axpby(2.0, x, -1.0, y);
  EXPECT_EQ(z, FeatureMap(2, 2, std::vector<double>{-2, 1, 4, 7}));
  EXPECT_EQ(z.row(1)[0], 4.0);
  EXPECT_DOUBLE_EQ(max_abs_diff(x, y), 3.0);
}

TEST(FeatureMapTest, RandomNormalIsSeeded) {
  EXPECT_EQ(FeatureMap::random_normal(8, 4, 1), FeatureMap::random_normal(8, 4, 1));
  EXPECT_NE(FeatureMap::random_normal(8, 4, 1), FeatureMap::random_normal(8, 4, 2));
}

TEST(ErrorTest, CodePrefixAndMessage) {
  const Error e(ErrorCode::EmptyCache, "nothing stored");
  EXPECT_EQ(e.code(), ErrorCode::EmptyCache);
  EXPECT_STREQ(e.what(), "EmptyCache: nothing stored");
  EXPECT_EQ(e.message(), "nothing stored");
}

}  // namespace
}  // namespace tic
