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

// Taylor-interpolated feature cache.
//
// Every block keeps the full-compute outputs taken at refresh steps
// (t % N == 0) together with their finite differences
//
//   D^1 F(t) = F(t) - F(t - N),   D^n F(t) = D^(n-1) F(t) - D^(n-1) F(t - N).
//
// At a step k past the newest refresh the extrapolated feature is
//
//   F(t) + sum_{i=1..O} D^i F(t) * k^i / (i! * N^i),
//
// applied to tokens inside the landmark mask, or to every token once the
// step reaches the threshold G = ceil(g * T) + 1. Other tokens reuse the
// stored feature unchanged.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ticache/core.hpp"
#include "ticache/masks.hpp"
#include "ticache/metrics.hpp"
#include "ticache/pipeline.hpp"

namespace tic::cache {

enum class Granularity {
  /// Mask membership is decided per token.
  PerToken,
  /// A non-empty mask switches the whole feature map to extrapolation.
  WholeMap,
};

struct TicConfig {
  int refresh_interval = 3;
  int order = 2;
  double threshold_fraction = 0.7;
  /// Token-resolution mask; every block in the pipeline shares one grid.
  std::optional<masks::TokenMask> lmk_mask;
  Granularity granularity = Granularity::PerToken;

  void validate() const {
    if (refresh_interval < 1) throw Error(ErrorCode::InvalidConfig, "refresh interval N must be >= 1");
    if (order < 0) throw Error(ErrorCode::InvalidConfig, "Taylor order O must be >= 0");
    if (!(threshold_fraction >= 0.0 && threshold_fraction <= 1.0)) {
      throw Error(ErrorCode::InvalidConfig, "threshold fraction g must lie in [0, 1]");
    }
  }

  /// G = ceil(g * T) + 1. The epsilon keeps 0.7 * 30 from rounding up to 22.
  int threshold_step(int total_steps) const {
    return static_cast<int>(std::ceil(threshold_fraction * total_steps - 1e-9)) + 1;
  }
};

struct Snapshot {
  int step = 0;
  FeatureMap value;
};

struct CacheEntry {
  std::string block_id;
  /// Oldest first; at most order + 1 retained.
  std::deque<Snapshot> snapshots;
  /// differences[n - 1] = D^n at the newest snapshot, n = 1..available order.
  std::vector<FeatureMap> differences;
  /// Value as of the last processed step.
  FeatureMap current;
  int k = 0;

  int available_order(int order) const {
    return std::min(order, static_cast<int>(differences.size()));
  }
};

/// n-th finite difference at the newest of `snapshots` (oldest first, stride N).
inline FeatureMap finite_diff(const std::vector<FeatureMap>& snapshots, int order) {
  if (order < 0) throw Error(ErrorCode::InvalidConfig, "difference order must be >= 0");
  if (snapshots.size() < static_cast<std::size_t>(order) + 1) {
    throw Error(ErrorCode::NotEnoughHistory, "order " + std::to_string(order) + " needs " +
                                                 std::to_string(order + 1) + " snapshots, have " +
                                                 std::to_string(snapshots.size()));
  }
  std::vector<FeatureMap> level(snapshots.end() - (order + 1), snapshots.end());
  for (int n = 1; n <= order; ++n) {
    for (std::size_t i = level.size() - 1; i >= 1; --i) level[i] = level[i] - level[i - 1];
    level.erase(level.begin());
  }
  return level.back();
}

/// Records a fresh full compute. Returns the FLOPs spent updating differences.
inline std::uint64_t push_snapshot(CacheEntry& entry, int step, FeatureMap value, int order) {
  std::uint64_t flops = 0;
  std::vector<FeatureMap> diffs;
  if (!entry.snapshots.empty() && order > 0) {
    const int reach = std::min(order, static_cast<int>(entry.differences.size()) + 1);
    diffs.reserve(static_cast<std::size_t>(reach));
    diffs.push_back(value - entry.snapshots.back().value);
    for (int n = 2; n <= reach; ++n) {
      diffs.push_back(diffs.back() - entry.differences[static_cast<std::size_t>(n - 2)]);
    }
    flops = static_cast<std::uint64_t>(reach) * value.size();
  }
  entry.differences = std::move(diffs);
  entry.current = value;
  entry.snapshots.push_back({step, std::move(value)});
  while (entry.snapshots.size() > static_cast<std::size_t>(order) + 1) entry.snapshots.pop_front();
  entry.k = 0;
  return flops;
}

namespace detail {

struct TaylorTerm {
  double numerator;    // k^i
  double denominator;  // i! * N^i
};

inline std::vector<TaylorTerm> taylor_terms(int k, int refresh_interval, int order) {
  std::vector<TaylorTerm> terms;
  double num = 1.0, den = 1.0;
  for (int i = 1; i <= order; ++i) {
    num *= k;
    den *= static_cast<double>(i) * refresh_interval;
    terms.push_back({num, den});
  }
  return terms;
}

}  // namespace detail

/// Extrapolated features for one token row.
inline void taylor_row(const CacheEntry& entry, const std::vector<detail::TaylorTerm>& terms,
                       std::size_t token, std::span<double> out) {
  const auto base = entry.snapshots.back().value.row(token);
  for (std::size_t c = 0; c < out.size(); ++c) {
    double v = base[c];
    for (std::size_t i = 0; i < terms.size(); ++i) {
      v += entry.differences[i].row(token)[c] * terms[i].numerator / terms[i].denominator;
    }
    out[c] = v;
  }
}

/// Newest snapshot plus the Taylor terms at offset entry.k, truncated to the
/// available history.
inline FeatureMap taylor_extrapolate(const CacheEntry& entry, const TicConfig& cfg) {
  if (entry.snapshots.empty()) throw Error(ErrorCode::EmptyCache, "no snapshot for " + entry.block_id);
  const auto terms = detail::taylor_terms(entry.k, cfg.refresh_interval, entry.available_order(cfg.order));
  FeatureMap out = entry.snapshots.back().value;
  for (std::size_t p = 0; p < out.tokens(); ++p) taylor_row(entry, terms, p, out.row(p));
  return out;
}

/// Feature access rule. Refresh steps compute and snapshot; other steps hand
/// back the stored feature and advance k. Returns FLOPs spent on differences.
template <class Compute>
std::uint64_t access(CacheEntry& entry, int step, const TicConfig& cfg, Compute&& compute) {
  if (step % cfg.refresh_interval == 0) {
    return push_snapshot(entry, step, compute(), cfg.order);
  }
  if (entry.snapshots.empty()) {
    throw Error(ErrorCode::EmptyCache, entry.block_id + " read before its first refresh");
  }
  ++entry.k;
  return 0;
}

/// Feature update rule. Tokens inside the mask, or all tokens once
/// step >= G, receive the extrapolated value; the rest keep entry.current.
/// Returns FLOPs spent (2 * order per extrapolated element, 1 per mask test).
inline std::uint64_t update(CacheEntry& entry, int step, int total_steps, const TicConfig& cfg) {
  if (entry.snapshots.empty()) throw Error(ErrorCode::EmptyCache, "no snapshot for " + entry.block_id);
  if (entry.k == 0) return 0;  // extrapolation at offset 0 is the snapshot itself

  const std::size_t tokens = entry.current.tokens();
  const std::size_t channels = entry.current.channels();
  const int order = entry.available_order(cfg.order);
  const bool late = step >= cfg.threshold_step(total_steps);
  const masks::TokenMask* mask = cfg.lmk_mask ? &*cfg.lmk_mask : nullptr;
  if (mask && mask->cells() != tokens) {
    throw Error(ErrorCode::ShapeMismatch, entry.block_id + ": mask has " +
                                              std::to_string(mask->cells()) + " cells, feature map " +
                                              std::to_string(tokens) + " tokens");
  }
  if (order == 0) return 0;

  std::uint64_t flops = 0;
  const auto terms = detail::taylor_terms(entry.k, cfg.refresh_interval, order);
  const auto per_token = static_cast<std::uint64_t>(2 * order) * channels;

  if (late) {
    for (std::size_t p = 0; p < tokens; ++p) taylor_row(entry, terms, p, entry.current.row(p));
    return per_token * tokens;
  }
  if (!mask) return 0;

  if (cfg.granularity == Granularity::WholeMap) {
    flops += tokens;
    if (mask->popcount() == 0) return flops;
    for (std::size_t p = 0; p < tokens; ++p) taylor_row(entry, terms, p, entry.current.row(p));
    return flops + per_token * tokens;
  }
  for (std::size_t p = 0; p < tokens; ++p) {
    ++flops;
    if (!mask->test(p)) continue;
    taylor_row(entry, terms, p, entry.current.row(p));
    flops += per_token;
  }
  return flops;
}

/// One cache entry per (branch, block).
class TaylorCache {
 public:
  TaylorCache(const pipeline::Pipeline& pipe, TicConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (int branch = 0; branch < 2; ++branch) {
      for (const auto& b : pipe.blocks()) {
        CacheEntry e;
        e.block_id = b.spec().block_id + (branch == 0 ? "/cond" : "/uncond");
        entries_.push_back(std::move(e));
      }
    }
    depth_ = pipe.depth();
    if (cfg_.lmk_mask && cfg_.lmk_mask->cells() != pipe.tokens()) {
      throw Error(ErrorCode::ShapeMismatch, "landmark mask does not match the block token grid");
    }
  }

  const TicConfig& config() const noexcept { return cfg_; }

  CacheEntry& entry(pipeline::Branch branch, std::size_t block) {
    return entries_[static_cast<std::size_t>(branch) * depth_ + block];
  }

  FeatureMap operator()(const pipeline::BlockCall& call, pipeline::StepCost& cost) {
    CacheEntry& e = entry(call.branch, call.block);
    cost.overhead_flops += access(e, call.step, cfg_, call.compute);
    cost.overhead_flops += update(e, call.step, call.total_steps, cfg_);
    return e.current;
  }

 private:
  TicConfig cfg_;
  std::size_t depth_ = 0;
  std::vector<CacheEntry> entries_;
};

/// Per-method results relative to the full-compute oracle.
struct RunReport {
  std::string method;
  std::vector<double> step_mse;
  std::vector<double> cum_mse;
  /// MSE restricted to masked tokens; empty when no evaluation mask is given.
  std::vector<double> masked_step_mse;
  std::vector<double> masked_cum_mse;
  /// block_step_mse[s][b]: block b's conditional-branch output MSE at step s.
  /// Filled only when both the run and the oracle recorded block outputs.
  std::vector<std::vector<double>> block_step_mse;
  std::vector<std::uint64_t> flops_cum;
  std::vector<double> step_ms;
  std::uint64_t block_flops = 0;
  std::uint64_t overhead_flops = 0;
  std::uint64_t oracle_block_flops = 0;
  double latency_ms = 0.0;
  double oracle_latency_ms = 0.0;

  std::uint64_t flops() const { return block_flops + overhead_flops; }
  double flop_ratio() const { return static_cast<double>(oracle_block_flops) / static_cast<double>(flops()); }
  double block_flop_ratio() const {
    return static_cast<double>(oracle_block_flops) / static_cast<double>(block_flops);
  }
  double speedup() const { return latency_ms > 0.0 ? oracle_latency_ms / latency_ms : 0.0; }
};

struct AcceleratedRun {
  FeatureMap final;
  RunReport report;
  pipeline::SampleTrace trace;
};

/// Builds a report for a trace whose latents align step by step with the oracle.
inline RunReport make_report(std::string method, const pipeline::SampleTrace& trace,
                             const std::vector<FeatureMap>& aligned_latents,
                             const pipeline::SampleTrace& oracle,
                             const std::optional<masks::TokenMask>& eval_mask = std::nullopt) {
  RunReport rep;
  rep.method = std::move(method);
  auto series = metrics::mse_series(aligned_latents, oracle.latents);
  rep.step_mse = std::move(series.per_step);
  rep.cum_mse = std::move(series.cumulative);
  if (eval_mask) {
    double acc = 0.0;
    for (std::size_t s = 0; s < aligned_latents.size(); ++s) {
      const double m = metrics::masked_mse(aligned_latents[s], oracle.latents[s], *eval_mask);
      acc += m;
      rep.masked_step_mse.push_back(m);
      rep.masked_cum_mse.push_back(acc);
    }
  }
  if (!trace.blocks.empty() && trace.blocks.size() == oracle.blocks.size()) {
    for (std::size_t s = 0; s < trace.blocks.size(); ++s) {
      std::vector<double> row;
      for (std::size_t b = 0; b < trace.blocks[s].size(); ++b) {
        row.push_back(metrics::mse(trace.blocks[s][b], oracle.blocks[s][b]));
      }
      rep.block_step_mse.push_back(std::move(row));
    }
  }
  rep.flops_cum = trace.flops_cum;
  rep.step_ms = trace.step_ms;
  rep.block_flops = trace.block_flops;
  rep.overhead_flops = trace.overhead_flops;
  rep.oracle_block_flops = oracle.block_flops;
  rep.latency_ms = trace.total_ms;
  rep.oracle_latency_ms = oracle.total_ms;
  return rep;
}

/// Sampling loop with every block served through a TaylorCache. The run is
/// scored against `oracle`, which must come from run_full on the same inputs.
/// The final post-process is the identity.
inline AcceleratedRun run_accelerated(const pipeline::Pipeline& pipe, const pipeline::SamplerConfig& sampler,
                                      const TicConfig& tic, const FeatureMap& z_init,
                                      const pipeline::Conditioning& r, const pipeline::SampleTrace& oracle,
                                      std::string method = "tic",
                                      const std::optional<masks::TokenMask>& eval_mask = std::nullopt,
                                      bool record_blocks = false) {
  TaylorCache cache(pipe, tic);
  const auto ts = pipeline::sampling_timesteps(sampler.infer_steps, pipe.schedule().train_steps());
  auto trace = pipeline::sample(pipe, sampler, ts, z_init, r, cache, record_blocks);
  auto report = make_report(std::move(method), trace, trace.latents, oracle, eval_mask);
  FeatureMap final = trace.final;
  return {std::move(final), std::move(report), std::move(trace)};
}

inline AcceleratedRun run_accelerated(const pipeline::Pipeline& pipe, const pipeline::SamplerConfig& sampler,
                                      const TicConfig& tic, const FeatureMap& z_init,
                                      const pipeline::Conditioning& r) {
  const auto oracle = pipeline::run_full(pipe, sampler, z_init, r, false);
  return run_accelerated(pipe, sampler, tic, z_init, r, oracle);
}

/// Generic layer-cache baseline: reuse only, no Taylor terms, no mask.
inline TicConfig reuse_config(int refresh_interval) {
  TicConfig cfg;
  cfg.refresh_interval = refresh_interval;
  cfg.order = 0;
  cfg.threshold_fraction = 1.0;
  cfg.lmk_mask.reset();
  return cfg;
}

inline AcceleratedRun run_reuse_baseline(const pipeline::Pipeline& pipe, const pipeline::SamplerConfig& sampler,
                                         int refresh_interval, const FeatureMap& z_init,
                                         const pipeline::Conditioning& r, const pipeline::SampleTrace& oracle,
                                         const std::optional<masks::TokenMask>& eval_mask = std::nullopt) {
  return run_accelerated(pipe, sampler, reuse_config(refresh_interval), z_init, r, oracle, "reuse", eval_mask);
}

/// Full compute at T/2 steps, using every other oracle timestep. Latent
/// series are aligned to the oracle by holding: at oracle step s the run
/// holds the latent of its last completed step that has reached s's noise
/// level, i.e. half step (s - 1) / 2 for odd s and s / 2 - 1 for even s
/// (the initial latent at s = 0).
inline AcceleratedRun run_half_steps(const pipeline::Pipeline& pipe, const pipeline::SamplerConfig& sampler,
                                     const FeatureMap& z_init, const pipeline::Conditioning& r,
                                     const pipeline::SampleTrace& oracle,
                                     const std::optional<masks::TokenMask>& eval_mask = std::nullopt) {
  if (sampler.infer_steps % 2 != 0) {
    throw Error(ErrorCode::InvalidConfig, "half-steps baseline needs an even step count");
  }
  const auto full_ts = pipeline::sampling_timesteps(sampler.infer_steps, pipe.schedule().train_steps());
  std::vector<int> ts;
  for (std::size_t i = 0; i < full_ts.size(); i += 2) ts.push_back(full_ts[i]);
  auto trace = pipeline::sample(pipe, sampler, ts, z_init, r,
                                [](const pipeline::BlockCall& c, pipeline::StepCost&) { return c.compute(); });

  std::vector<FeatureMap> aligned;
  pipeline::SampleTrace padded = trace;
  padded.flops_cum.clear();
  padded.step_ms.clear();
  for (int s = 0; s < sampler.infer_steps; ++s) {
    const int held = s % 2 == 1 ? (s - 1) / 2 : s / 2 - 1;
    aligned.push_back(held < 0 ? z_init : trace.latents[static_cast<std::size_t>(held)]);
    padded.flops_cum.push_back(held < 0 ? 0 : trace.flops_cum[static_cast<std::size_t>(held)]);
    padded.step_ms.push_back(s % 2 == 1 ? trace.step_ms[static_cast<std::size_t>(held)] : 0.0);
  }
  auto report = make_report("half_steps", padded, aligned, oracle, eval_mask);
  FeatureMap final = trace.final;
  return {std::move(final), std::move(report), std::move(trace)};
}

}  // namespace tic::cache
