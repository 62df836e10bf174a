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

// ticbench: command-line front end for the benchmark harness.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 runtime error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ticache/ticache.hpp"

namespace {

using namespace tic;

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

// Raised for anything the user can fix by editing arguments or config.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bench::BenchConfig LoadConfig(const std::string& path) {
  try {
    return bench::read_config_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

void Validate(const bench::BenchConfig& cfg) {
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

void WriteOrPrint(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

void PrintReport(const bench::BenchReport& rep) {
  std::cout << bench::summary_table(rep);
  if (rep.token_mask) {
    std::printf("mask: %zu of %zu tokens\n", rep.token_mask->popcount(), rep.token_mask->cells());
  }
}

struct RunArgs {
  std::string config;
  std::string csv, summary, svg;
  int repetitions = 0;
};

int Run(const RunArgs& a) {
  auto cfg = LoadConfig(a.config);
  if (!a.csv.empty()) cfg.output.csv = a.csv;
  if (!a.summary.empty()) cfg.output.summary = a.summary;
  if (!a.svg.empty()) cfg.output.svg = a.svg;
  if (a.repetitions > 0) cfg.repetitions = a.repetitions;
  PrintReport(bench::run_suite(cfg));
  return 0;
}

struct CompareArgs {
  std::string config;
  int n = 3;
  int order = 2;
  double g = 0.7;
  std::string mask;
  int repetitions = 3;
  std::string csv;
};

int Compare(const CompareArgs& a) {
  bench::BenchConfig cfg = a.config.empty() ? bench::BenchConfig{} : LoadConfig(a.config);
  cfg.refresh_interval = a.n;
  cfg.order = a.order;
  cfg.threshold_fraction = a.g;
  cfg.repetitions = a.repetitions;
  cfg.output = {};
  cfg.output.csv = a.csv;
  if (!a.mask.empty()) {
    cfg.mask.source = bench::MaskSource::File;
    cfg.mask.path = a.mask;
  }
  cfg.methods = {{"full", bench::MethodKind::Full, {}, {}, {}, {}},
                 {"reuse", bench::MethodKind::Reuse, {}, {}, {}, {}},
                 {"tic", bench::MethodKind::Tic, {}, {}, {}, cfg.mask.source != bench::MaskSource::None}};
  Validate(cfg);
  std::printf("N=%d O=%d g=%.3f (G=%d of T=%d)\n", a.n, a.order, a.g,
              cache::TicConfig{a.n, a.order, a.g, std::nullopt, cfg.granularity}.threshold_step(cfg.sampler.infer_steps),
              cfg.sampler.infer_steps);
  PrintReport(bench::run_suite(cfg));
  return 0;
}

struct AlignArgs {
  std::string driving, reference, out;
  int reference_frame = 0;
};

int Align(const AlignArgs& a) {
  const auto driving = geometry::read_landmark_file(a.driving);
  const auto reference = geometry::read_landmark_file(a.reference);
  if (a.reference_frame < 0 || static_cast<std::size_t>(a.reference_frame) >= reference.size()) {
    throw ConfigError("reference frame " + std::to_string(a.reference_frame) + " not in " + a.reference);
  }
  const auto aligned = geometry::align_frames(driving, reference[static_cast<std::size_t>(a.reference_frame)]);
  WriteOrPrint(a.out, geometry::dump_landmarks(aligned));
  return 0;
}

struct PlanArgs {
  int frames = 64;
  int window = 16;
  std::string strategy = "progressive";
  int overlap = 0;
  double sigma = 0.0;
  std::string out;
};

int Plan(const PlanArgs& a) {
  nlohmann::json doc;
  try {
    if (a.strategy == "progressive") {
      doc = progressive::plan_to_json(progressive::plan_progressive(a.frames, a.window));
    } else if (a.strategy == "concat") {
      doc = progressive::plan_to_json(progressive::plan_concat_baseline(a.frames, a.window));
    } else {
      const int overlap = a.overlap > 0 ? a.overlap : a.window / 2;
      const double sigma = a.sigma > 0.0 ? a.sigma : a.window / 4.0;
      doc = progressive::overlap_to_json(progressive::plan_overlap_baseline(a.frames, a.window, overlap, sigma));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw ConfigError(e.what());
    throw;
  }
  doc["strategy"] = a.strategy;
  doc["frames"] = a.frames;
  doc["window"] = a.window;
  WriteOrPrint(a.out, doc.dump(1) + "\n");
  return 0;
}

struct ReportArgs {
  std::string csv, out, column = "cum_mse";
};

int Report(const ReportArgs& a) {
  std::ifstream in(a.csv);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + a.csv);
  const auto series = bench::series_from_csv(in, a.column);
  WriteOrPrint(a.out, bench::render_svg(series, a.column + " per step", a.column));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-cache benchmark for iterative denoising pipelines"};
  app.require_subcommand(1);
  std::function<int()> action;

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run every method in a config against the full-compute oracle");
  run_cmd->add_option("config", run.config, "BenchConfig JSON file")->required();
  run_cmd->add_option("--csv", run.csv, "Per-step CSV output (overrides config)");
  run_cmd->add_option("--summary", run.summary, "Summary CSV output (overrides config)");
  run_cmd->add_option("--svg", run.svg, "Cumulative-MSE chart (overrides config)");
  run_cmd->add_option("--repetitions", run.repetitions, "Timed repetitions per method")->check(CLI::PositiveNumber);
  run_cmd->callback([&] { action = [&] { return Run(run); }; });

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Compare one cache setting with full compute and reuse-only");
  cmp_cmd->add_option("--n", cmp.n, "Refresh interval N")->capture_default_str();
  cmp_cmd->add_option("--order", cmp.order, "Taylor order O")->capture_default_str();
  cmp_cmd->add_option("--g", cmp.g, "Threshold fraction g")->capture_default_str();
  cmp_cmd->add_option("--mask", cmp.mask, "Landmark file for the guidance mask (default: synthetic face)")
      ->check(CLI::ExistingFile);
  cmp_cmd->add_option("--config", cmp.config, "Base config for pipeline and sampler settings");
  cmp_cmd->add_option("--repetitions", cmp.repetitions, "Timed repetitions per method")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmp_cmd->add_option("--csv", cmp.csv, "Per-step CSV output");
  cmp_cmd->callback([&] { action = [&] { return Compare(cmp); }; });

  AlignArgs align;
  auto* lm_cmd = app.add_subcommand("landmarks", "Landmark utilities");
  lm_cmd->require_subcommand(1);
  auto* align_cmd = lm_cmd->add_subcommand("align", "Align driving landmarks to a reference face");
  align_cmd->add_option("driving", align.driving, "Driving landmark file")->required();
  align_cmd->add_option("reference", align.reference, "Reference landmark file")->required();
  align_cmd->add_option("-o,--output", align.out, "Output landmark file ('-' for stdout)")->required();
  align_cmd->add_option("--reference-frame", align.reference_frame, "Frame of the reference file to use");
  align_cmd->callback([&] { action = [&] { return Align(align); }; });

  PlanArgs plan;
  auto* plan_cmd = app.add_subcommand("plan", "Print a long-sequence generation plan as JSON");
  plan_cmd->add_option("--frames", plan.frames, "Total frames M")->capture_default_str();
  plan_cmd->add_option("--window", plan.window, "Frames per model window W")->capture_default_str();
  plan_cmd->add_option("--strategy", plan.strategy, "progressive, overlap or concat")
      ->check(CLI::IsMember({"progressive", "overlap", "concat"}))
      ->capture_default_str();
  plan_cmd->add_option("--overlap", plan.overlap, "Overlap frames for the overlap strategy (default W/2)");
  plan_cmd->add_option("--sigma", plan.sigma, "Blend width for the overlap strategy (default W/4)");
  plan_cmd->add_option("-o,--output", plan.out, "Output file (default stdout)");
  plan_cmd->callback([&] { action = [&] { return Plan(plan); }; });

  ReportArgs report;
  auto* rep_cmd = app.add_subcommand("report", "Render a per-step CSV as an SVG chart");
  rep_cmd->add_option("csv", report.csv, "Per-step CSV written by run or compare")->required();
  rep_cmd->add_option("-o,--output", report.out, "SVG output file")->required();
  rep_cmd->add_option("--column", report.column, "Column to plot")->capture_default_str();
  rep_cmd->callback([&] { action = [&] { return Report(report); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    return action();
  } catch (const ConfigError& e) {
    std::cerr << "ticbench: config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    std::cerr << "ticbench: " << e.what() << "\n";
    return e.code() == ErrorCode::InvalidConfig ? kConfigError : kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "ticbench: " << e.what() << "\n";
    return kRuntimeError;
  }
}
