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

// Config-driven benchmark: runs the full-compute oracle and every configured
// method on the same seeds, then emits a per-step CSV
//
//   step,method,mse,cum_mse,flops_cum,latency_ms
//
// a summary CSV, and optionally an SVG of the cumulative-error curves.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ticache/cache.hpp"
#include "ticache/core.hpp"
#include "ticache/geometry.hpp"
#include "ticache/landmark_io.hpp"
#include "ticache/masks.hpp"
#include "ticache/metrics.hpp"
#include "ticache/pipeline.hpp"

namespace tic::bench {

enum class MethodKind { Full, Tic, Reuse, HalfSteps };

inline std::string_view method_kind_name(MethodKind k) {
  switch (k) {
    case MethodKind::Full: return "full";
    case MethodKind::Tic: return "tic";
    case MethodKind::Reuse: return "reuse";
    case MethodKind::HalfSteps: return "half_steps";
  }
  return "full";
}

struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::Full;
  // Unset fields fall back to the config-wide TIC settings.
  std::optional<int> refresh_interval;
  std::optional<int> order;
  std::optional<double> threshold_fraction;
  std::optional<bool> use_mask;
};

enum class MaskSource { None, Synthetic, File };

struct MaskSpec {
  MaskSource source = MaskSource::Synthetic;
  std::string path;
  std::uint64_t face_seed = 7;
  double jitter = 0.0;
  masks::MaskConfig raster;
};

struct OutputSpec {
  std::string csv;
  std::string summary;
  std::string svg;
};

struct BenchConfig {
  pipeline::PipelineSpec pipeline;
  std::size_t grid_width = 16;
  pipeline::SamplerConfig sampler;
  int refresh_interval = 3;
  int order = 2;
  double threshold_fraction = 0.7;
  cache::Granularity granularity = cache::Granularity::PerToken;
  MaskSpec mask;
  std::vector<MethodSpec> methods;
  int repetitions = 5;
  OutputSpec output;

  void validate() const {
    if (pipeline.depth < 1) throw Error(ErrorCode::InvalidConfig, "pipeline.depth must be >= 1");
    if (pipeline.tokens == 0 || pipeline.channels == 0) {
      throw Error(ErrorCode::InvalidConfig, "pipeline.tokens and pipeline.channels must be >= 1");
    }
    if (grid_width == 0 || pipeline.tokens % grid_width != 0) {
      throw Error(ErrorCode::InvalidConfig, "pipeline.grid_width must divide pipeline.tokens");
    }
    if (!(pipeline.data_std > 0.0)) throw Error(ErrorCode::InvalidConfig, "pipeline.data_std must be > 0");
    sampler.validate();
    cache::TicConfig{refresh_interval, order, threshold_fraction, std::nullopt, granularity}.validate();
    if (repetitions < 1) throw Error(ErrorCode::InvalidConfig, "repetitions must be >= 1");
    if (methods.empty()) throw Error(ErrorCode::InvalidConfig, "methods must not be empty");
    std::set<std::string> names;
    for (const auto& m : methods) {
      if (m.name.empty() || !names.insert(m.name).second) {
        throw Error(ErrorCode::InvalidConfig, "method names must be unique and non-empty");
      }
      if (m.refresh_interval && *m.refresh_interval < 1) {
        throw Error(ErrorCode::InvalidConfig, m.name + ": refresh_interval must be >= 1");
      }
      if (m.order && *m.order < 0) throw Error(ErrorCode::InvalidConfig, m.name + ": order must be >= 0");
      if (m.threshold_fraction && !(*m.threshold_fraction >= 0.0 && *m.threshold_fraction <= 1.0)) {
        throw Error(ErrorCode::InvalidConfig, m.name + ": threshold_fraction must lie in [0, 1]");
      }
      if (m.kind == MethodKind::HalfSteps && sampler.infer_steps % 2 != 0) {
        throw Error(ErrorCode::InvalidConfig, "half_steps needs an even step count");
      }
    }
    if (mask.source != MaskSource::None) {
      const std::size_t grid_height = pipeline.tokens / grid_width;
      if (grid_height != grid_width) {
        throw Error(ErrorCode::InvalidConfig, "landmark masks need a square token grid");
      }
      if (mask.raster.image_size == 0 || mask.raster.image_size % grid_width != 0) {
        throw Error(ErrorCode::InvalidConfig, "mask.image_size must be a multiple of pipeline.grid_width");
      }
      if (mask.raster.radius_at_64 < 0) throw Error(ErrorCode::InvalidConfig, "mask.radius must be >= 0");
      if (mask.source == MaskSource::File && mask.path.empty()) {
        throw Error(ErrorCode::InvalidConfig, "mask.path is required for source \"file\"");
      }
    }
  }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                           std::string_view where) {
  if (!obj.is_object()) throw Error(ErrorCode::InvalidConfig, std::string(where) + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <class T>
void read(const nlohmann::json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

template <class T>
void read(const nlohmann::json& obj, const char* key, std::optional<T>& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace detail

/// Default method list: the oracle, reuse-only caching, TIC without and with
/// the landmark mask, and half the steps.
inline std::vector<MethodSpec> default_methods() {
  return {
      {"full", MethodKind::Full, {}, {}, {}, {}},
      {"reuse", MethodKind::Reuse, {}, {}, {}, {}},
      {"tic_nomask", MethodKind::Tic, {}, {}, {}, false},
      {"tic", MethodKind::Tic, {}, {}, {}, true},
      {"half_steps", MethodKind::HalfSteps, {}, {}, {}, {}},
  };
}

/// Parses a BenchConfig; every key is optional, unknown keys are errors.
inline BenchConfig config_from_json(const nlohmann::json& doc) {
  using detail::read;
  using detail::reject_unknown;
  BenchConfig cfg;
  try {
    reject_unknown(doc, {"pipeline", "sampler", "tic", "mask", "methods", "repetitions", "output"}, "config");
    if (doc.contains("pipeline")) {
      const auto& p = doc.at("pipeline");
      reject_unknown(p, {"depth", "tokens", "channels", "grid_width", "weight_seed", "latent_seed", "cond_seed",
                         "base_gain", "decay", "min_gain", "embed_amplitude",
                         "embed_frequency", "data_std"},
                     "pipeline");
      read(p, "depth", cfg.pipeline.depth);
      read(p, "tokens", cfg.pipeline.tokens);
      read(p, "channels", cfg.pipeline.channels);
      read(p, "grid_width", cfg.grid_width);
      read(p, "weight_seed", cfg.pipeline.weight_seed);
      read(p, "latent_seed", cfg.pipeline.latent_seed);
      read(p, "cond_seed", cfg.pipeline.cond_seed);
      read(p, "base_gain", cfg.pipeline.base_gain);
      read(p, "decay", cfg.pipeline.decay);
      read(p, "min_gain", cfg.pipeline.min_gain);
      read(p, "embed_amplitude", cfg.pipeline.embed_amplitude);
      read(p, "embed_frequency", cfg.pipeline.embed_frequency);
      read(p, "data_std", cfg.pipeline.data_std);
    }
    if (doc.contains("sampler")) {
      const auto& s = doc.at("sampler");
      reject_unknown(s, {"steps", "guidance"}, "sampler");
      read(s, "steps", cfg.sampler.infer_steps);
      read(s, "guidance", cfg.sampler.guidance_scale);
    }
    if (doc.contains("tic")) {
      const auto& t = doc.at("tic");
      reject_unknown(t, {"refresh_interval", "order", "threshold_fraction", "granularity"}, "tic");
      read(t, "refresh_interval", cfg.refresh_interval);
      read(t, "order", cfg.order);
      read(t, "threshold_fraction", cfg.threshold_fraction);
      if (t.contains("granularity")) {
        const auto g = t.at("granularity").get<std::string>();
        if (g == "token") {
          cfg.granularity = cache::Granularity::PerToken;
        } else if (g == "map") {
          cfg.granularity = cache::Granularity::WholeMap;
        } else {
          throw Error(ErrorCode::InvalidConfig, "tic.granularity must be \"token\" or \"map\"");
        }
      }
    }
    if (doc.contains("mask")) {
      const auto& m = doc.at("mask");
      reject_unknown(m, {"source", "path", "face_seed", "jitter", "image_size", "radius", "include_facial"}, "mask");
      if (m.contains("source")) {
        const auto s = m.at("source").get<std::string>();
        if (s == "none") {
          cfg.mask.source = MaskSource::None;
        } else if (s == "synthetic") {
          cfg.mask.source = MaskSource::Synthetic;
        } else if (s == "file") {
          cfg.mask.source = MaskSource::File;
        } else {
          throw Error(ErrorCode::InvalidConfig, "mask.source must be none, synthetic or file");
        }
      }
      read(m, "path", cfg.mask.path);
      read(m, "face_seed", cfg.mask.face_seed);
      read(m, "jitter", cfg.mask.jitter);
      read(m, "image_size", cfg.mask.raster.image_size);
      read(m, "radius", cfg.mask.raster.radius_at_64);
      read(m, "include_facial", cfg.mask.raster.include_facial);
    }
    if (doc.contains("methods")) {
      for (const auto& jm : doc.at("methods")) {
        reject_unknown(jm, {"name", "kind", "refresh_interval", "order", "threshold_fraction", "use_mask"}, "method");
        MethodSpec m;
        const auto kind = jm.at("kind").get<std::string>();
        if (kind == "full") {
          m.kind = MethodKind::Full;
        } else if (kind == "tic") {
          m.kind = MethodKind::Tic;
        } else if (kind == "reuse") {
          m.kind = MethodKind::Reuse;
        } else if (kind == "half_steps") {
          m.kind = MethodKind::HalfSteps;
        } else {
          throw Error(ErrorCode::InvalidConfig, "unknown method kind '" + kind + "'");
        }
        m.name = jm.value("name", kind);
        read(jm, "refresh_interval", m.refresh_interval);
        read(jm, "order", m.order);
        read(jm, "threshold_fraction", m.threshold_fraction);
        read(jm, "use_mask", m.use_mask);
        cfg.methods.push_back(std::move(m));
      }
    } else {
      cfg.methods = default_methods();
    }
    read(doc, "repetitions", cfg.repetitions);
    if (doc.contains("output")) {
      const auto& o = doc.at("output");
      reject_unknown(o, {"csv", "summary", "svg"}, "output");
      read(o, "csv", cfg.output.csv);
      read(o, "summary", cfg.output.summary);
      read(o, "svg", cfg.output.svg);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline BenchConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
  try {
    return config_from_json(doc);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.message());
  }
}

/// Builds the token-resolution guidance mask configured in `spec`.
inline std::optional<masks::TokenMask> build_token_mask(const MaskSpec& spec, std::size_t grid_width) {
  if (spec.source == MaskSource::None) return std::nullopt;
  std::vector<geometry::Landmark3D> face;
  if (spec.source == MaskSource::Synthetic) {
    face = geometry::synthetic_face(spec.face_seed, spec.jitter);
  } else {
    auto frames = geometry::read_landmark_file(spec.path);
    if (frames.empty() || frames.front().points.empty()) {
      throw Error(ErrorCode::EmptyLandmarkSet, spec.path + ": no landmarks in frame 0");
    }
    face = std::move(frames.front().points);
  }
  const auto image = masks::landmark_mask(face, spec.raster);
  return masks::downsample_any(image, spec.raster.image_size / grid_width);
}

struct MethodResult {
  MethodSpec spec;
  cache::RunReport report;
  FeatureMap final;
  std::vector<double> latency_samples;
  double median_latency_ms = 0.0;
  double mask_ms = 0.0;
  double l1 = 0.0;
  double ssim = 1.0;
};

struct BenchReport {
  std::vector<MethodResult> methods;
  std::vector<double> oracle_latency_samples;
  double oracle_median_ms = 0.0;
  std::optional<masks::TokenMask> token_mask;
  int steps = 0;

  const MethodResult* find(const std::string& name) const {
    for (const auto& m : methods) {
      if (m.spec.name == name) return &m;
    }
    return nullptr;
  }
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::string csv_header() { return "step,method,mse,cum_mse,flops_cum,latency_ms\n"; }

inline std::string csv_rows(const MethodResult& m) {
  std::string out;
  char buf[256];
  const auto& r = m.report;
  for (std::size_t s = 0; s < r.step_mse.size(); ++s) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g,%llu,%.6f\n", s, m.spec.name.c_str(), r.step_mse[s],
                  r.cum_mse[s], static_cast<unsigned long long>(r.flops_cum[s]), r.step_ms[s]);
    out += buf;
  }
  return out;
}

inline std::string summary_csv(const BenchReport& rep) {
  std::string out =
      "method,l1,final_mse,cum_mse,masked_cum_mse,ssim,flops,flop_ratio,block_flop_ratio,"
      "median_latency_ms,latency_speedup,mask_ms\n";
  char buf[512];
  for (const auto& m : rep.methods) {
    const auto& r = m.report;
    const double masked = r.masked_cum_mse.empty() ? 0.0 : r.masked_cum_mse.back();
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%llu,%.6f,%.6f,%.3f,%.3f,%.3f\n",
                  m.spec.name.c_str(), m.l1, r.step_mse.back(), r.cum_mse.back(), masked, m.ssim,
                  static_cast<unsigned long long>(r.flops()), r.flop_ratio(), r.block_flop_ratio(),
                  m.median_latency_ms, rep.oracle_median_ms / m.median_latency_ms, m.mask_ms);
    out += buf;
  }
  return out;
}

/// Console table.
inline std::string summary_table(const BenchReport& rep) {
  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-14s %12s %12s %12s %10s %10s %10s\n", "method", "L1", "final_mse", "cum_mse",
                "flop_x", "lat_ms", "speed_x");
  out += buf;
  for (const auto& m : rep.methods) {
    const auto& r = m.report;
    std::snprintf(buf, sizeof buf, "%-14s %12.4e %12.4e %12.4e %10.3f %10.2f %10.3f\n", m.spec.name.c_str(), m.l1,
                  r.step_mse.back(), r.cum_mse.back(), r.flop_ratio(), m.median_latency_ms,
                  rep.oracle_median_ms / m.median_latency_ms);
    out += buf;
  }
  return out;
}

struct Series {
  std::string name;
  std::vector<double> values;
};

/// Line chart of several series over step index, drawn as SVG polylines.
inline std::string render_svg(const std::vector<Series>& series, const std::string& title,
                              const std::string& y_label) {
  constexpr double kW = 720, kH = 440, kLeft = 80, kRight = 170, kTop = 40, kBottom = 50;
  const double pw = kW - kLeft - kRight;
  const double ph = kH - kTop - kBottom;
  std::size_t n = 1;
  double y_max = 0.0;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values) y_max = std::max(y_max, v);
  }
  if (y_max <= 0.0) y_max = 1.0;
  const auto px = [&](std::size_t i) { return kLeft + pw * (n > 1 ? static_cast<double>(i) / (n - 1) : 0.0); };
  const auto py = [&](double v) { return kTop + ph * (1.0 - v / y_max); };
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                            "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  std::ostringstream svg;
  char buf[256];
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = y_max * i / 4.0;
    std::snprintf(buf, sizeof buf, "%.3g", v);
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << buf << "</text>\n";
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << py(v) << "\" x2=\"" << kLeft + pw << "\" y2=\"" << py(v)
        << "\" stroke=\"#e0e0e0\"/>\n";
  }
  const std::size_t tick = std::max<std::size_t>(1, (n - 1) / 6);
  for (std::size_t i = 0; i < n; i += tick) {
    svg << "<text x=\"" << px(i) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">" << i << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">step</text>\n";
  svg << "<text x=\"18\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << kTop + ph / 2 << ")\">" << y_label << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kColors[k % std::size(kColors)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series[k].values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(i), py(series[k].values[i]));
      svg << buf;
    }
    svg << "\"/>\n";
    const double ly = kTop + 10 + 20.0 * static_cast<double>(k);
    svg << "<line x1=\"" << kLeft + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + pw + 40 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << kLeft + pw + 46 << "\" y=\"" << ly + 4 << "\">" << series[k].name << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

/// Parses a per-step CSV back into cumulative-MSE series, one per method, in
/// first-appearance order.
inline std::vector<Series> series_from_csv(std::istream& in, const std::string& column = "cum_mse") {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::InvalidConfig, "empty CSV");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const auto col = std::find(header.begin(), header.end(), column);
  const auto mcol = std::find(header.begin(), header.end(), "method");
  if (col == header.end() || mcol == header.end()) {
    throw Error(ErrorCode::InvalidConfig, "CSV lacks 'method' or '" + column + "' column");
  }
  const auto vi = static_cast<std::size_t>(col - header.begin());
  const auto mi = static_cast<std::size_t>(mcol - header.begin());
  std::vector<Series> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) throw Error(ErrorCode::InvalidConfig, "ragged CSV row: " + line);
    auto it = std::find_if(out.begin(), out.end(), [&](const Series& s) { return s.name == cells[mi]; });
    if (it == out.end()) {
      out.push_back({cells[mi], {}});
      it = out.end() - 1;
    }
    try {
      it->values.push_back(std::stod(cells[vi]));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, "non-numeric value in CSV: " + cells[vi]);
    }
  }
  return out;
}

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

}  // namespace detail

/// Runs the oracle `repetitions` times, then each method the same number of
/// times, pairing every method with the oracle on identical seeds. Latency is
/// the median sampling-loop time; TIC methods with a mask also pay the mask
/// build time, itemized as mask_ms. CSV rows are flushed after each method.
inline BenchReport run_suite(const BenchConfig& cfg) {
  cfg.validate();
  const pipeline::Pipeline pipe(cfg.pipeline);
  const FeatureMap z_init = cfg.pipeline.initial_latent();
  const pipeline::Conditioning cond = cfg.pipeline.conditioning();

  BenchReport rep;
  rep.steps = cfg.sampler.infer_steps;

  double mask_ms = 0.0;
  {
    const auto t0 = std::chrono::steady_clock::now();
    rep.token_mask = build_token_mask(cfg.mask, cfg.grid_width);
    mask_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }

  pipeline::SampleTrace oracle;
  for (int i = 0; i < cfg.repetitions; ++i) {
    oracle = pipeline::run_full(pipe, cfg.sampler, z_init, cond, false);
    rep.oracle_latency_samples.push_back(oracle.total_ms);
  }
  rep.oracle_median_ms = median(rep.oracle_latency_samples);

  std::ofstream csv;
  if (!cfg.output.csv.empty()) {
    csv.open(cfg.output.csv, std::ios::binary);
    if (!csv) throw Error(ErrorCode::Io, "cannot write " + cfg.output.csv);
    csv << csv_header();
    csv.flush();
  }

  const double dyn_range = [&] {
    const auto v = oracle.final.values();
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return std::max(*hi - *lo, 1e-12);
  }();
  const metrics::SsimOptions ssim_opt{cfg.grid_width, std::min<std::size_t>(8, cfg.grid_width), dyn_range};
  const bool can_ssim = cfg.pipeline.tokens / cfg.grid_width >= ssim_opt.window;

  for (const auto& spec : cfg.methods) {
    MethodResult res;
    res.spec = spec;
    cache::TicConfig tic;
    tic.refresh_interval = spec.refresh_interval.value_or(cfg.refresh_interval);
    tic.order = spec.order.value_or(cfg.order);
    tic.threshold_fraction = spec.threshold_fraction.value_or(cfg.threshold_fraction);
    tic.granularity = cfg.granularity;
    if (spec.use_mask.value_or(true)) tic.lmk_mask = rep.token_mask;

    std::vector<cache::RunReport> runs;
    for (int i = 0; i < cfg.repetitions; ++i) {
      cache::AcceleratedRun run;
      switch (spec.kind) {
        case MethodKind::Full:
          run.final = oracle.final;
          run.report = cache::make_report(spec.name, oracle, oracle.latents, oracle, rep.token_mask);
          run.report.latency_ms = rep.oracle_latency_samples[static_cast<std::size_t>(i)];
          break;
        case MethodKind::Tic:
          run = cache::run_accelerated(pipe, cfg.sampler, tic, z_init, cond, oracle, spec.name, rep.token_mask);
          if (tic.lmk_mask) {
            res.mask_ms = mask_ms;
            run.report.latency_ms += mask_ms;
          }
          break;
        case MethodKind::Reuse:
          run = cache::run_reuse_baseline(pipe, cfg.sampler, tic.refresh_interval, z_init, cond, oracle,
                                          rep.token_mask);
          run.report.method = spec.name;
          break;
        case MethodKind::HalfSteps:
          run = cache::run_half_steps(pipe, cfg.sampler, z_init, cond, oracle, rep.token_mask);
          run.report.method = spec.name;
          break;
      }
      res.latency_samples.push_back(run.report.latency_ms);
      res.final = std::move(run.final);
      runs.push_back(std::move(run.report));
    }
    res.median_latency_ms = median(res.latency_samples);
    // Keep the repetition closest to the median so per-step timings match it.
    std::size_t pick = 0;
    for (std::size_t i = 1; i < runs.size(); ++i) {
      if (std::abs(runs[i].latency_ms - res.median_latency_ms) <
          std::abs(runs[pick].latency_ms - res.median_latency_ms)) {
        pick = i;
      }
    }
    res.report = std::move(runs[pick]);
    res.report.oracle_latency_ms = rep.oracle_median_ms;
    res.l1 = metrics::l1_metric(res.final, oracle.final);
    res.ssim = can_ssim ? metrics::ssim_metric(res.final, oracle.final, ssim_opt) : 1.0;
    if (csv.is_open()) {
      csv << csv_rows(res);
      csv.flush();
      if (!csv) throw Error(ErrorCode::Io, "write failed for " + cfg.output.csv);
    }
    rep.methods.push_back(std::move(res));
  }

  if (!cfg.output.summary.empty()) detail::write_text(cfg.output.summary, summary_csv(rep));
  if (!cfg.output.svg.empty()) {
    std::vector<Series> series;
    for (const auto& m : rep.methods) series.push_back({m.spec.name, m.report.cum_mse});
    detail::write_text(cfg.output.svg, render_svg(series, "Cumulative latent MSE vs full compute", "cum_mse"));
  }
  return rep;
}

}  // namespace tic::bench
