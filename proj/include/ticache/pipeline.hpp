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

// Deterministic stand-in for a denoising UNet: a chain of residual blocks
//
//   y = x + gain(step) * tanh(W x + b + e(t) + U r)      (per token)
//
// with seeded weights W, b, U, a smooth sinusoidal timestep embedding e(t),
// and a gain that decays over the sampling run so early steps move more than
// late ones. The noise prediction is
//
//   eps = sqrt(1 - a) / (a * s^2 + 1 - a) * h_last,   a = alpha_bar_t, s = data_std
//
// which is the optimal predictor for Gaussian data of std s perturbed by the
// block residuals and keeps DDIM trajectories bounded.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "ticache/core.hpp"
#include "ticache/losses.hpp"

namespace tic::pipeline {

enum class BlockKind { Spatial, Cross, Temporal };

inline std::string_view kind_name(BlockKind k) {
  switch (k) {
    case BlockKind::Spatial: return "spatial";
    case BlockKind::Cross: return "cross";
    case BlockKind::Temporal: return "temporal";
  }
  return "spatial";
}

struct BlockSpec {
  std::string block_id;
  BlockKind kind = BlockKind::Spatial;
  std::uint64_t weight_seed = 0;
  double base_gain = 0.8;
  double decay = 0.8;
  double min_gain = 0.1;
  double embed_amplitude = 1.0;
  double embed_frequency = 1.0;

  /// base_gain * (1 - decay * step / total) + min_gain
  double gain(int step, int total) const {
    return base_gain * (1.0 - decay * static_cast<double>(step) / static_cast<double>(total)) +
           min_gain;
  }
};

/// Where a block evaluation sits in the sampling run.
struct StepTime {
  int step = 0;            // sampler step, 0 is the noisiest
  int total = 1;           // sampler steps in the run
  int train_t = 0;         // train-step index of the noise level
  int train_steps = 1000;  // length of the noise schedule

  double normalized() const { return static_cast<double>(train_t) / train_steps; }
};

using Conditioning = std::vector<double>;

/// Multiply-accumulate count of the channel mixing, 2 * P * C^2. Bias,
/// embedding, conditioning and tanh are O(P * C) and not counted.
constexpr std::uint64_t flops_of_block(const BlockSpec& /*spec*/, std::uint64_t tokens,
                                       std::uint64_t channels) {
  return 2 * tokens * channels * channels;
}

class Block {
 public:
  Block(BlockSpec spec, std::size_t channels) : spec_(std::move(spec)), channels_(channels) {
    if (channels == 0) throw Error(ErrorCode::ShapeMismatch, "block needs channels >= 1");
    Rng rng(spec_.weight_seed);
    const double w_scale = std::sqrt(3.0) / std::sqrt(static_cast<double>(channels));
    weight_.resize(channels * channels);
    for (double& w : weight_) w = rng.uniform(-w_scale, w_scale);
    bias_.resize(channels);
    for (double& b : bias_) b = rng.uniform(-0.1, 0.1);
    cond_.resize(channels * channels);
    for (double& u : cond_) u = rng.uniform(-w_scale, w_scale);
  }

  const BlockSpec& spec() const noexcept { return spec_; }
  std::size_t channels() const noexcept { return channels_; }

  /// e_j(u) = A * sin(2 pi f (0.25 + 0.75 j / C) u + 2 pi j / C), u = t / train_steps,
  /// with A = embed_amplitude and f = embed_frequency. At f = 1 every channel
  /// completes at most one period over the schedule.
  std::vector<double> embedding(const StepTime& time) const {
    std::vector<double> e(channels_);
    const double u = time.normalized();
    const double c = static_cast<double>(channels_);
    for (std::size_t j = 0; j < channels_; ++j) {
      const double freq = spec_.embed_frequency * (0.25 + 0.75 * static_cast<double>(j) / c);
      const double phase = 2.0 * std::numbers::pi * static_cast<double>(j) / c;
      e[j] = spec_.embed_amplitude * std::sin(2.0 * std::numbers::pi * freq * u + phase);
    }
    return e;
  }

  FeatureMap forward(const FeatureMap& x, const Conditioning& r, const StepTime& time) const {
    if (x.channels() != channels_) {
      throw Error(ErrorCode::ShapeMismatch, spec_.block_id + ": input has " +
                                                std::to_string(x.channels()) + " channels, block " +
                                                std::to_string(channels_));
    }
    if (!r.empty() && r.size() != channels_) {
      throw Error(ErrorCode::ShapeMismatch, spec_.block_id + ": conditioning length mismatch");
    }

    std::vector<double> shift = embedding(time);
    for (std::size_t j = 0; j < channels_; ++j) shift[j] += bias_[j];
    if (spec_.kind == BlockKind::Cross && !r.empty()) {
      for (std::size_t i = 0; i < channels_; ++i) {
        double acc = 0.0;
        const double* row = cond_.data() + i * channels_;
        for (std::size_t j = 0; j < channels_; ++j) acc += row[j] * r[j];
        shift[i] += acc;
      }
    }

    const double g = spec_.gain(time.step, time.total);
    FeatureMap y(x.tokens(), channels_);
    for (std::size_t p = 0; p < x.tokens(); ++p) {
      const auto in = x.row(p);
      auto out = y.row(p);
      for (std::size_t i = 0; i < channels_; ++i) {
        const double* row = weight_.data() + i * channels_;
        double acc = 0.0;
        for (std::size_t j = 0; j < channels_; ++j) acc += row[j] * in[j];
        out[i] = in[i] + g * std::tanh(acc + shift[i]);
      }
    }
    return y;
  }

 private:
  BlockSpec spec_;
  std::size_t channels_;
  std::vector<double> weight_;
  std::vector<double> bias_;
  std::vector<double> cond_;
};

/// Seeds weights on every call; prefer a cached Block in loops.
inline FeatureMap block_forward(const BlockSpec& spec, const FeatureMap& x, const Conditioning& r,
                                const StepTime& time) {
  return Block(spec, x.channels()).forward(x, r, time);
}

/// eps_uncond + scale * (eps_cond - eps_uncond)
inline FeatureMap cfg_combine(const FeatureMap& eps_uncond, const FeatureMap& eps_cond, double scale) {
  return axpby(1.0 - scale, eps_uncond, scale, eps_cond);
}

/// Deterministic DDIM update between two noise levels given as alpha_bar values.
inline FeatureMap ddim_step_alpha(const FeatureMap& z_t, const FeatureMap& eps_hat, double ab_t,
                                  double ab_prev) {
  require_same_shape(z_t, eps_hat, "ddim_step");
  FeatureMap out(z_t.tokens(), z_t.channels());
  const double sa = std::sqrt(ab_t);
  const double sn = std::sqrt(1.0 - ab_t);
  const double sa_prev = std::sqrt(ab_prev);
  const double sn_prev = std::sqrt(1.0 - ab_prev);
  auto o = out.values();
  const auto z = z_t.values();
  const auto e = eps_hat.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double x0 = (z[i] - sn * e[i]) / sa;
    o[i] = sa_prev * x0 + sn_prev * e[i];
  }
  return out;
}

/// DDIM (eta = 0) from train step t to t_prev; t_prev == -1 targets the clean
/// sample (alpha_bar = 1).
inline FeatureMap ddim_step(const FeatureMap& z_t, const FeatureMap& eps_hat, int t, int t_prev,
                            const losses::NoiseSchedule& s) {
  if (t_prev >= t || t_prev < -1) {
    throw Error(ErrorCode::InvalidConfig, "ddim_step needs t > t_prev >= -1");
  }
  return ddim_step_alpha(z_t, eps_hat, s.alpha_bar(t), s.alpha_bar_or_one(t_prev));
}

struct SamplerConfig {
  int infer_steps = 30;
  double guidance_scale = 3.5;
  double eta = 0.0;

  void validate() const {
    if (infer_steps < 1) throw Error(ErrorCode::InvalidConfig, "infer_steps must be >= 1");
    if (!(guidance_scale >= 0.0)) throw Error(ErrorCode::InvalidConfig, "guidance_scale must be >= 0");
    if (eta != 0.0) throw Error(ErrorCode::InvalidConfig, "only eta = 0 is supported");
  }

  /// The unconditional branch is skipped when it cannot change the result.
  bool uses_uncond_branch() const { return guidance_scale != 1.0; }
};

/// Sampler step s (0 = noisiest) maps to train step (T - 1 - s) * (train_steps / T) + 1,
/// clipped to train_steps - 1; the step after the last one is the clean sample (-1).
inline std::vector<int> sampling_timesteps(int infer_steps, int train_steps) {
  if (infer_steps < 1 || infer_steps > train_steps) {
    throw Error(ErrorCode::InvalidConfig, "infer_steps must lie in [1, train_steps]");
  }
  const int stride = train_steps / infer_steps;
  std::vector<int> ts(static_cast<std::size_t>(infer_steps));
  for (int s = 0; s < infer_steps; ++s) {
    ts[static_cast<std::size_t>(s)] = std::min((infer_steps - 1 - s) * stride + 1, train_steps - 1);
  }
  return ts;
}

struct PipelineSpec {
  int depth = 8;
  std::size_t tokens = 256;
  std::size_t channels = 32;
  std::uint64_t weight_seed = 42;
  std::uint64_t latent_seed = 42;
  std::uint64_t cond_seed = 42;
  double base_gain = 0.8;
  double decay = 0.8;
  double min_gain = 0.1;
  double embed_amplitude = 1.0;
  double embed_frequency = 1.0;
  double data_std = 1.0;

  /// Kinds cycle spatial, cross, temporal; ids are "b<i>.<kind>".
  std::vector<BlockSpec> blocks() const {
    std::vector<BlockSpec> out;
    for (int i = 0; i < depth; ++i) {
      const auto kind = static_cast<BlockKind>(i % 3);
      out.push_back({"b" + std::to_string(i) + "." + std::string(kind_name(kind)), kind,
                     derive_seed(weight_seed, static_cast<std::uint64_t>(i)), base_gain, decay,
                     min_gain, embed_amplitude, embed_frequency});
    }
    return out;
  }

  FeatureMap initial_latent() const { return FeatureMap::random_normal(tokens, channels, latent_seed); }

  Conditioning conditioning() const {
    Rng rng(derive_seed(cond_seed, 0xC0DEULL));
    Conditioning r(channels);
    for (double& v : r) v = rng.normal();
    return r;
  }
};

class Pipeline {
 public:
  Pipeline(std::vector<BlockSpec> specs, std::size_t tokens, std::size_t channels,
           losses::NoiseSchedule schedule = losses::NoiseSchedule(), double data_std = 1.0)
      : tokens_(tokens), channels_(channels), schedule_(std::move(schedule)), data_std_(data_std) {
    if (specs.empty()) throw Error(ErrorCode::InvalidConfig, "pipeline needs at least one block");
    if (!(data_std > 0.0)) throw Error(ErrorCode::InvalidConfig, "data_std must be > 0");
    for (auto& s : specs) blocks_.emplace_back(std::move(s), channels);
  }

  explicit Pipeline(const PipelineSpec& spec)
      : Pipeline(spec.blocks(), spec.tokens, spec.channels, losses::NoiseSchedule(), spec.data_std) {}

  const std::vector<Block>& blocks() const noexcept { return blocks_; }
  std::size_t depth() const noexcept { return blocks_.size(); }
  std::size_t tokens() const noexcept { return tokens_; }
  std::size_t channels() const noexcept { return channels_; }
  const losses::NoiseSchedule& schedule() const noexcept { return schedule_; }
  double data_std() const noexcept { return data_std_; }

  /// Head gain at noise level t: sqrt(1 - ab) / (ab * s^2 + 1 - ab), the
  /// posterior-mean noise predictor for N(0, s^2) data, s = data_std.
  double head_gain(int t) const {
    const double ab = schedule_.alpha_bar(t);
    return std::sqrt(1.0 - ab) / (ab * data_std_ * data_std_ + 1.0 - ab);
  }

  std::uint64_t flops_per_pass() const {
    std::uint64_t f = 0;
    for (const auto& b : blocks_) f += flops_of_block(b.spec(), tokens_, channels_);
    return f;
  }

 private:
  std::size_t tokens_;
  std::size_t channels_;
  losses::NoiseSchedule schedule_;
  double data_std_;
  std::vector<Block> blocks_;
};

enum class Branch { Cond = 0, Uncond = 1 };

/// Everything one sampling run produced. `blocks[s][b]` is block b's output
/// on the conditional branch at step s (recorded only when requested).
struct SampleTrace {
  FeatureMap final;
  std::vector<FeatureMap> latents;
  std::vector<std::vector<FeatureMap>> blocks;
  std::vector<std::uint64_t> flops_cum;
  std::vector<double> step_ms;
  std::uint64_t block_flops = 0;
  std::uint64_t overhead_flops = 0;
  double total_ms = 0.0;

  std::uint64_t flops() const { return block_flops + overhead_flops; }
  std::size_t steps() const { return latents.size(); }
};

/// Block-evaluation hook. The oracle computes every block; caches may return
/// stored features instead. `compute` runs the real block on `input`.
struct BlockCall {
  Branch branch;
  std::size_t block;
  int step;
  int total_steps;
  const FeatureMap& input;
  const std::function<FeatureMap()>& compute;
};

struct StepCost {
  std::uint64_t block_flops = 0;
  std::uint64_t overhead_flops = 0;
};

/// Generic sampling loop. `Evaluator` provides
///   FeatureMap operator()(const BlockCall&, StepCost&)
/// and must add the FLOPs it spends to the StepCost.
template <class Evaluator>
SampleTrace sample(const Pipeline& pipe, const SamplerConfig& cfg, const std::vector<int>& timesteps,
                   const FeatureMap& z_init, const Conditioning& r, Evaluator&& eval,
                   bool record_blocks = false) {
  cfg.validate();
  if (z_init.tokens() != pipe.tokens() || z_init.channels() != pipe.channels()) {
    throw Error(ErrorCode::ShapeMismatch, "initial latent does not match pipeline dims");
  }
  const auto& sched = pipe.schedule();
  const int total = static_cast<int>(timesteps.size());
  const Conditioning no_cond;

  SampleTrace trace;
  trace.latents.reserve(timesteps.size());
  FeatureMap z = z_init;
  const auto run_start = std::chrono::steady_clock::now();

  for (int s = 0; s < total; ++s) {
    const auto step_start = std::chrono::steady_clock::now();
    const int t = timesteps[static_cast<std::size_t>(s)];
    const int t_prev = s + 1 < total ? timesteps[static_cast<std::size_t>(s + 1)] : -1;
    const StepTime time{s, total, t, sched.train_steps()};
    const double noise_scale = pipe.head_gain(t);

    StepCost cost;
    std::vector<FeatureMap> recorded;
    auto run_branch = [&](Branch branch) {
      const Conditioning& rb = branch == Branch::Cond ? r : no_cond;
      FeatureMap h = z;
      for (std::size_t b = 0; b < pipe.depth(); ++b) {
        const Block& block = pipe.blocks()[b];
        const FeatureMap& input = h;
        const std::function<FeatureMap()> compute = [&]() {
          cost.block_flops += flops_of_block(block.spec(), pipe.tokens(), pipe.channels());
          return block.forward(input, rb, time);
        };
        FeatureMap out = eval(BlockCall{branch, b, s, total, input, compute}, cost);
        if (record_blocks && branch == Branch::Cond) recorded.push_back(out);
        h = std::move(out);
      }
      for (double& v : h.values()) v *= noise_scale;
      return h;
    };

    FeatureMap eps = run_branch(Branch::Cond);
    if (cfg.uses_uncond_branch()) eps = cfg_combine(run_branch(Branch::Uncond), eps, cfg.guidance_scale);
    z = ddim_step(z, eps, t, t_prev, sched);

    trace.block_flops += cost.block_flops;
    trace.overhead_flops += cost.overhead_flops;
    trace.flops_cum.push_back(trace.flops());
    trace.latents.push_back(z);
    if (record_blocks) trace.blocks.push_back(std::move(recorded));
    trace.step_ms.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - step_start).count());
  }
  trace.total_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - run_start).count();
  trace.final = z;
  return trace;
}

/// Full-compute oracle: every block at every step.
inline SampleTrace run_full(const Pipeline& pipe, const SamplerConfig& cfg, const FeatureMap& z_init,
                            const Conditioning& r, bool record_blocks = true) {
  const auto ts = sampling_timesteps(cfg.infer_steps, pipe.schedule().train_steps());
  return sample(pipe, cfg, ts, z_init, r,
                [](const BlockCall& call, StepCost&) { return call.compute(); }, record_blocks);
}

}  // namespace tic::pipeline
