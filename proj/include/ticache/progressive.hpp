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
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ticache/core.hpp"
#include "ticache/pipeline.hpp"

namespace tic::progressive {

/// Keyframe jobs generate their targets without anchors; interpolation jobs
/// fill the frames strictly between their two anchors.
enum class JobKind { Keyframe, Interpolation };

struct Job {
  JobKind kind = JobKind::Keyframe;
  std::vector<int> targets;
  std::vector<int> anchors;

  /// Frames the model sees: anchors and targets, ascending.
  std::vector<int> window() const {
    std::vector<int> w = targets;
    w.insert(w.end(), anchors.begin(), anchors.end());
    std::sort(w.begin(), w.end());
    return w;
  }

  bool operator==(const Job&) const = default;
};

struct GenerationPlan {
  int total_frames = 0;
  int window = 16;
  std::vector<Job> jobs;
};

namespace detail {

// Positions i * (W - 1), clamped to count - 1, without duplicates.
inline std::vector<int> keyframe_positions(int count, int window) {
  std::vector<int> out;
  for (int i = 0;; ++i) {
    const int k = std::min(i * (window - 1), count - 1);
    if (out.empty() || out.back() != k) out.push_back(k);
    if (k == count - 1) break;
  }
  return out;
}

inline void build(const std::vector<int>& frames, int window, std::vector<Job>& jobs) {
  const auto keys = keyframe_positions(static_cast<int>(frames.size()), window);
  std::vector<int> key_frames;
  for (int k : keys) key_frames.push_back(frames[static_cast<std::size_t>(k)]);

  if (static_cast<int>(key_frames.size()) <= window) {
    jobs.push_back({JobKind::Keyframe, key_frames, {}});
  } else {
    build(key_frames, window, jobs);
  }
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    Job job{JobKind::Interpolation, {}, {key_frames[i], key_frames[i + 1]}};
    for (int p = keys[i] + 1; p < keys[i + 1]; ++p) job.targets.push_back(frames[static_cast<std::size_t>(p)]);
    // Adjacent keyframes leave nothing to interpolate.
    if (!job.targets.empty()) jobs.push_back(std::move(job));
  }
}

}  // namespace detail

/// Coarse-to-fine plan: keyframes every W - 1 frames (plus the last frame),
/// generated first, then each gap filled by an interpolation job anchored on
/// the keyframes around it. When there are more keyframes than fit in one
/// window, the keyframe sequence is planned the same way recursively.
inline GenerationPlan plan_progressive(int total_frames, int window) {
  if (total_frames < 2) throw Error(ErrorCode::InvalidConfig, "progressive plan needs at least 2 frames");
  if (window < 3) throw Error(ErrorCode::InvalidConfig, "progressive plan needs a window of at least 3");
  GenerationPlan plan{total_frames, window, {}};
  std::vector<int> frames(static_cast<std::size_t>(total_frames));
  for (int i = 0; i < total_frames; ++i) frames[static_cast<std::size_t>(i)] = i;
  detail::build(frames, window, plan.jobs);
  return plan;
}

/// Independent clips of W frames, no anchors.
inline GenerationPlan plan_concat_baseline(int total_frames, int window) {
  if (total_frames < 1 || window < 1) throw Error(ErrorCode::InvalidConfig, "concat plan needs M >= 1 and W >= 1");
  GenerationPlan plan{total_frames, window, {}};
  for (int start = 0; start < total_frames; start += window) {
    Job job;
    for (int f = start; f < std::min(total_frames, start + window); ++f) job.targets.push_back(f);
    plan.jobs.push_back(std::move(job));
  }
  return plan;
}

enum class MaskMode { AnchorsOnly, RandomHalf };

struct FrameMaskSchedule {
  int window = 0;
  std::vector<std::uint8_t> keep;
  MaskMode mode = MaskMode::AnchorsOnly;

  int popcount() const { return static_cast<int>(std::count(keep.begin(), keep.end(), std::uint8_t{1})); }
};

/// AnchorsOnly keeps the first and last frame; RandomHalf keeps each frame
/// independently with probability 0.5, drawn from Rng(seed).
inline FrameMaskSchedule mask_schedule(MaskMode mode, int window, std::uint64_t seed) {
  if (window < 2) throw Error(ErrorCode::InvalidConfig, "mask window must be >= 2");
  FrameMaskSchedule s{window, std::vector<std::uint8_t>(static_cast<std::size_t>(window), 0), mode};
  if (mode == MaskMode::AnchorsOnly) {
    s.keep.front() = 1;
    s.keep.back() = 1;
  } else {
    Rng rng(seed);
    for (auto& k : s.keep) k = rng.bernoulli(0.5) ? 1 : 0;
  }
  return s;
}

/// Training-time draw: the two schemes alternate with equal probability.
inline FrameMaskSchedule training_mask_schedule(int window, std::uint64_t seed) {
  Rng rng(seed);
  const MaskMode mode = rng.bernoulli(0.5) ? MaskMode::AnchorsOnly : MaskMode::RandomHalf;
  return mask_schedule(mode, window, derive_seed(seed, 1));
}

struct WindowWeight {
  int window = 0;
  double weight = 0.0;
};

/// Overlapping windows blended with Gaussian weights.
struct OverlapPlan {
  int total_frames = 0;
  int window = 16;
  int overlap = 8;
  double sigma = 4.0;
  std::vector<int> starts;
  /// frame_weights[f]: every window covering f with its normalized weight.
  std::vector<std::vector<WindowWeight>> frame_weights;
};

/// Windows at stride W - overlap (the last one pulled back to end at M - 1).
/// A window's weight at frame f is exp(-(f - centre)^2 / (2 sigma^2)),
/// normalized over the windows covering f.
inline OverlapPlan plan_overlap_baseline(int total_frames, int window, int overlap, double sigma) {
  if (overlap <= 0 || overlap >= window) throw Error(ErrorCode::InvalidConfig, "overlap must lie in (0, W)");
  if (total_frames < window) throw Error(ErrorCode::InvalidConfig, "overlap plan needs M >= W");
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidConfig, "sigma must be > 0");

  OverlapPlan plan{total_frames, window, overlap, sigma, {}, {}};
  const int stride = window - overlap;
  for (int start = 0;; start += stride) {
    if (start + window >= total_frames) {
      plan.starts.push_back(total_frames - window);
      break;
    }
    plan.starts.push_back(start);
  }
  plan.frame_weights.resize(static_cast<std::size_t>(total_frames));
  for (int f = 0; f < total_frames; ++f) {
    auto& ws = plan.frame_weights[static_cast<std::size_t>(f)];
    double sum = 0.0;
    for (std::size_t w = 0; w < plan.starts.size(); ++w) {
      const int s = plan.starts[w];
      if (f < s || f >= s + window) continue;
      const double d = f - (s + (window - 1) / 2.0);
      const double g = std::exp(-d * d / (2.0 * sigma * sigma));
      ws.push_back({static_cast<int>(w), g});
      sum += g;
    }
    for (auto& x : ws) x.weight /= sum;
  }
  return plan;
}

inline std::string_view job_kind_name(JobKind k) {
  return k == JobKind::Keyframe ? "keyframe" : "interpolation";
}

/// {"jobs":[{"kind":"keyframe"|"interpolation","targets":[...],"anchors":[...]}]}
inline nlohmann::json plan_to_json(const GenerationPlan& plan) {
  nlohmann::json doc;
  doc["jobs"] = nlohmann::json::array();
  for (const auto& job : plan.jobs) {
    doc["jobs"].push_back(
        {{"kind", std::string(job_kind_name(job.kind))}, {"targets", job.targets}, {"anchors", job.anchors}});
  }
  return doc;
}

inline GenerationPlan plan_from_json(const nlohmann::json& doc) {
  GenerationPlan plan;
  try {
    int max_frame = -1;
    for (const auto& j : doc.at("jobs")) {
      Job job;
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "keyframe") {
        job.kind = JobKind::Keyframe;
      } else if (kind == "interpolation") {
        job.kind = JobKind::Interpolation;
      } else {
        throw Error(ErrorCode::InvalidConfig, "unknown job kind '" + kind + "'");
      }
      job.targets = j.at("targets").get<std::vector<int>>();
      job.anchors = j.at("anchors").get<std::vector<int>>();
      for (int f : job.targets) max_frame = std::max(max_frame, f);
      plan.jobs.push_back(std::move(job));
    }
    plan.total_frames = max_frame + 1;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed plan: ") + e.what());
  }
  return plan;
}

/// {"windows":[{"start":s,"length":W}],"weights":[[{"window":i,"weight":w},...],...]}
inline nlohmann::json overlap_to_json(const OverlapPlan& plan) {
  nlohmann::json doc;
  doc["windows"] = nlohmann::json::array();
  for (int s : plan.starts) doc["windows"].push_back({{"start", s}, {"length", plan.window}});
  doc["weights"] = nlohmann::json::array();
  for (const auto& ws : plan.frame_weights) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& w : ws) row.push_back({{"window", w.window}, {"weight", w.weight}});
    doc["weights"].push_back(std::move(row));
  }
  return doc;
}

/// Frames produced by executing a plan, plus what each job saw in its window.
struct ExecutedPlan {
  std::map<int, FeatureMap> frames;
  std::vector<std::map<int, FeatureMap>> windows;
};

/// Runs jobs in order. `generate(job, anchors)` receives the already
/// generated anchor frames (copied from earlier jobs) and returns one frame
/// per target.
template <class Generator>
ExecutedPlan execute_plan(const GenerationPlan& plan, Generator&& generate) {
  ExecutedPlan out;
  for (const auto& job : plan.jobs) {
    std::map<int, FeatureMap> window;
    std::vector<std::pair<int, FeatureMap>> anchors;
    for (int a : job.anchors) {
      auto it = out.frames.find(a);
      if (it == out.frames.end()) {
        throw Error(ErrorCode::InvalidConfig, "anchor " + std::to_string(a) + " used before it was generated");
      }
      anchors.emplace_back(a, it->second);
      window.emplace(a, it->second);
    }
    std::vector<FeatureMap> produced = generate(job, anchors);
    if (produced.size() != job.targets.size()) {
      throw Error(ErrorCode::ShapeMismatch, "generator returned the wrong number of frames");
    }
    for (std::size_t i = 0; i < produced.size(); ++i) {
      window.emplace(job.targets[i], produced[i]);
      out.frames.insert_or_assign(job.targets[i], std::move(produced[i]));
    }
    out.windows.push_back(std::move(window));
  }
  return out;
}

/// Largest difference between an anchor as seen by a job and the frame
/// generated for it earlier. Zero whenever anchors are passed through.
inline double anchor_discontinuity(const GenerationPlan& plan, const ExecutedPlan& run) {
  double worst = 0.0;
  for (std::size_t j = 0; j < plan.jobs.size(); ++j) {
    for (int a : plan.jobs[j].anchors) {
      worst = std::max(worst, max_abs_diff(run.windows[j].at(a), run.frames.at(a)));
    }
  }
  return worst;
}

/// Frame generator over the synthetic pipeline. Keyframe targets start from
/// noise seeded by (seed, frame); interpolation targets start from the
/// anchors blended linearly by frame position and mixed half-and-half with
/// that noise.
struct SyntheticFrameGenerator {
  const pipeline::Pipeline* pipe = nullptr;
  pipeline::SamplerConfig sampler;
  pipeline::Conditioning cond;
  std::uint64_t seed = 0;

  std::vector<FeatureMap> operator()(const Job& job, const std::vector<std::pair<int, FeatureMap>>& anchors) const {
    std::vector<FeatureMap> out;
    for (int f : job.targets) {
      FeatureMap z = FeatureMap::random_normal(pipe->tokens(), pipe->channels(),
                                               derive_seed(seed, static_cast<std::uint64_t>(f)));
      if (anchors.size() == 2) {
        const auto& [a, za] = anchors[0];
        const auto& [b, zb] = anchors[1];
        const double lam = static_cast<double>(f - a) / static_cast<double>(b - a);
        const FeatureMap guide = axpby(1.0 - lam, za, lam, zb);
        z = axpby(std::sqrt(0.5), z, std::sqrt(0.5), guide);
      }
      out.push_back(pipeline::run_full(*pipe, sampler, z, cond, false).final);
    }
    return out;
  }
};

}  // namespace tic::progressive
