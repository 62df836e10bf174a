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

#include "ticache/pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "ticache/metrics.hpp"

namespace tic::pipeline {
namespace {

BlockSpec Spec(double base_gain = 0.8) {
  BlockSpec s;
  s.block_id = "b0.spatial";
  s.weight_seed = 77;
  s.base_gain = base_gain;
  return s;
}

TEST(BlockTest, ZeroGainIsIdentity) {
  BlockSpec s = Spec(0.0);
  s.min_gain = 0.0;
  const auto x = FeatureMap::random_normal(16, 8, 1);
  EXPECT_EQ(block_forward(s, x, {}, {3, 30, 500, 1000}), x);
}

TEST(BlockTest, Deterministic) {
  const auto x = FeatureMap::random_normal(16, 8, 1);
  const Conditioning r(8, 0.3);
  const StepTime t{5, 30, 800, 1000};
  EXPECT_EQ(block_forward(Spec(), x, r, t), block_forward(Spec(), x, r, t));
}

TEST(BlockTest, ResidualBoundedByGain) {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    BlockSpec s = Spec(rng.uniform(0.0, 2.0));
    s.kind = static_cast<BlockKind>(trial % 3);
    s.weight_seed = rng.next();
    const auto x = FeatureMap::random_normal(4, 6, rng.next(), rng.uniform(0.1, 10.0));
    Conditioning r(6);
    for (double& v : r) v = 3.0 * rng.normal();
    const int total = 30;
    const int step = static_cast<int>(rng.next() % total);
    const auto y = block_forward(s, x, r, {step, total, static_cast<int>(rng.next() % 1000), 1000});
    EXPECT_LE(max_abs_diff(y, x), s.gain(step, total) + 1e-12);
  }
}

TEST(BlockTest, OnlyCrossBlocksReadConditioning) {
  const auto x = FeatureMap::random_normal(4, 6, 2);
  const StepTime t{0, 30, 900, 1000};
  for (auto kind : {BlockKind::Spatial, BlockKind::Temporal}) {
    BlockSpec s = Spec();
    s.kind = kind;
    EXPECT_EQ(block_forward(s, x, Conditioning(6, 1.0), t), block_forward(s, x, {}, t));
  }
  BlockSpec c = Spec();
  c.kind = BlockKind::Cross;
  EXPECT_NE(block_forward(c, x, Conditioning(6, 1.0), t), block_forward(c, x, {}, t));
}

TEST(BlockTest, ShapeErrors) {
  const Block b(Spec(), 8);
  EXPECT_THROW(b.forward(FeatureMap(4, 6), {}, {}), Error);
  EXPECT_THROW(b.forward(FeatureMap(4, 8), Conditioning(3), {}), Error);
}

TEST(FlopsTest, Counts) {
  EXPECT_EQ(flops_of_block(Spec(), 256, 32), 524288u);
  EXPECT_EQ(flops_of_block(Spec(), 256, 1), 512u);
  EXPECT_EQ(flops_of_block(Spec(), 100, 64), 4 * flops_of_block(Spec(), 100, 32));
}

TEST(CfgTest, Combine) {
  const FeatureMap u(2, 2, 0.0), c(2, 2, 1.0);
  const auto mixed = cfg_combine(u, c, 3.5);
  for (double v : mixed.values()) EXPECT_DOUBLE_EQ(v, 3.5);
  const auto a = FeatureMap::random_normal(3, 3, 1), b = FeatureMap::random_normal(3, 3, 2);
  EXPECT_LT(max_abs_diff(cfg_combine(a, b, 1.0), b), 1e-15);
  EXPECT_LT(max_abs_diff(cfg_combine(a, a, 7.0), a), 1e-14);
}

TEST(DdimTest, ScalarReference) {
  const auto out = ddim_step_alpha(FeatureMap(1, 1, 1.0), FeatureMap(1, 1, 0.5), 0.25, 1.0);
  EXPECT_NEAR(out.at(0, 0), 1.1339746, 1e-7);
  const auto z = FeatureMap::random_normal(3, 3, 4);
  EXPECT_LT(max_abs_diff(ddim_step_alpha(z, FeatureMap(3, 3), 0.6, 0.6), z), 1e-15);
}

TEST(DdimTest, TrueNoiseInvertsForwardProcess) {
  const losses::NoiseSchedule s(1000, 0.0001, 0.02, losses::BetaSpacing::Linear);
  const auto z0 = FeatureMap::random_normal(8, 4, 1);
  const auto eps = FeatureMap::random_normal(8, 4, 2);
  const auto ts = sampling_timesteps(50, 1000);
  FeatureMap z = losses::add_noise(z0, eps, ts.front(), s);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    z = ddim_step(z, eps, ts[i], i + 1 < ts.size() ? ts[i + 1] : -1, s);
  }
  EXPECT_LT(max_abs_diff(z, z0), 1e-6);
}

TEST(DdimTest, RejectsNonDecreasingSteps) {
  const losses::NoiseSchedule s;
  EXPECT_THROW(ddim_step(FeatureMap(1, 1), FeatureMap(1, 1), 10, 10, s), Error);
  EXPECT_THROW(ddim_step(FeatureMap(1, 1), FeatureMap(1, 1), 10, -2, s), Error);
}

TEST(TimestepsTest, LeadingSpacing) {
  const auto ts = sampling_timesteps(30, 1000);
  ASSERT_EQ(ts.size(), 30u);
  EXPECT_EQ(ts.front(), 958);
  EXPECT_EQ(ts.back(), 1);
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) EXPECT_EQ(ts[i] - ts[i + 1], 33);
  EXPECT_EQ(sampling_timesteps(1000, 1000).front(), 999);
}

TEST(SamplerConfigTest, Validation) {
  EXPECT_THROW((SamplerConfig{0, 3.5, 0.0}.validate()), Error);
  EXPECT_THROW((SamplerConfig{30, -1.0, 0.0}.validate()), Error);
  EXPECT_THROW((SamplerConfig{30, 3.5, 0.5}.validate()), Error);
  EXPECT_FALSE((SamplerConfig{30, 1.0, 0.0}.uses_uncond_branch()));
}

TEST(RunFullTest, FlopsSingleBranch) {
  const PipelineSpec spec;
  const Pipeline pipe(spec);
  const SamplerConfig one{30, 1.0, 0.0};
  const auto tr = run_full(pipe, one, spec.initial_latent(), spec.conditioning(), false);
  EXPECT_EQ(tr.flops(), 125829120u);
  EXPECT_EQ(tr.flops_cum.back(), tr.flops());
  const auto t1 = run_full(pipe, {1, 1.0, 0.0}, spec.initial_latent(), spec.conditioning(), false);
  EXPECT_EQ(t1.flops(), pipe.flops_per_pass());
}

TEST(RunFullTest, GuidanceDoublesBranches) {
  const PipelineSpec spec;
  const Pipeline pipe(spec);
  const auto tr = run_full(pipe, SamplerConfig{}, spec.initial_latent(), spec.conditioning(), false);
  EXPECT_EQ(tr.flops(), 2u * 125829120u);
  for (std::size_t s = 0; s < tr.flops_cum.size(); ++s) {
    EXPECT_EQ(tr.flops_cum[s], (s + 1) * 2 * 8 * 524288u);
  }
}

TEST(RunFullTest, DeterministicAndFinite) {
  const PipelineSpec spec;
  const Pipeline pipe(spec);
  const auto a = run_full(pipe, SamplerConfig{}, spec.initial_latent(), spec.conditioning());
  const auto b = run_full(pipe, SamplerConfig{}, spec.initial_latent(), spec.conditioning());
  EXPECT_EQ(a.latents, b.latents);
  EXPECT_EQ(a.blocks, b.blocks);
  ASSERT_EQ(a.blocks.size(), 30u);
  ASSERT_EQ(a.blocks.front().size(), 8u);
  for (double v : a.final.values()) ASSERT_TRUE(std::isfinite(v));
}

TEST(RunFullTest, DefaultVolatilityNonIncreasing) {
  const PipelineSpec spec;
  const Pipeline pipe(spec);
  const auto tr = run_full(pipe, SamplerConfig{}, spec.initial_latent(), spec.conditioning());
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t s = 1; s < tr.blocks.size(); ++s) {
    double change = 0.0;
    for (std::size_t b = 0; b < tr.blocks[s].size(); ++b) {
      change += std::sqrt(metrics::mse(tr.blocks[s][b], tr.blocks[s - 1][b]));
    }
    change /= static_cast<double>(tr.blocks[s].size());
    EXPECT_LE(change, prev) << "step " << s;
    prev = change;
  }
}

TEST(PipelineSpecTest, BlockLayout) {
  const auto blocks = PipelineSpec{}.blocks();
  ASSERT_EQ(blocks.size(), 8u);
  EXPECT_EQ(blocks[0].block_id, "b0.spatial");
  EXPECT_EQ(blocks[1].block_id, "b1.cross");
  EXPECT_EQ(blocks[2].block_id, "b2.temporal");
  EXPECT_EQ(blocks[3].kind, BlockKind::Spatial);
  EXPECT_NE(blocks[0].weight_seed, blocks[3].weight_seed);
}

}  // namespace
}  // namespace tic::pipeline
