#pragma once

// The synthetic benchmark: a simulated survey, its smoothed radio map and
// the smoothed held-out samples that serve as query ground truth.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fpcd/evaluation.hpp"
#include "fpcd/io/config.hpp"
#include "fpcd/io/rfm_archive.hpp"
#include "fpcd/parallel.hpp"
#include "fpcd/rfm.hpp"
#include "fpcd/simulation.hpp"

namespace fpcd::io {

/// Overrides turning the default scenario into the evaluation benchmark:
/// dense, wall-partitioned coverage whose key sets vary across the floor,
/// with reading noise on every query.
inline const std::vector<std::string>& benchmark_overrides() {
  static const std::vector<std::string> overrides = {
      "scenario.aps=80",
      "scenario.shadowing=3",
      "scenario.sensitivity=-78",
      "scenario.walls=10 0 10 20 5; 20 0 20 20 5; 0 10 30 10 3",
      "grid.roi=0,0,30,20",
      "inject.noise=true",
  };
  return overrides;
}

inline Config benchmark_config() {
  Config c;
  c.merge_overrides(benchmark_overrides());
  return c;
}

/// Optionally smooths the training set, then interpolates the grid.
inline RfmArchive build_rfm(const RfmTrainingSet& training, const Config& c, Parallelism par = {}) {
  const KernelParams kernel = kernel_params(c);
  const QueryConfig query = query_config(c);
  RfmTrainingSet data = c.flag("grid.smooth_training") ? smooth_dataset(training, kernel, query, par) : training;
  const Roi roi = c.str("grid.roi") == "auto" ? bounding_roi(data.locations()) : parse_roi(c, "grid.roi");
  const KernelSmoother ks(data, kernel, query);
  RfmGrid grid = interpolate_grid(ks, roi, c.num("grid.spacing"), par);
  return {std::move(data), kernel, query, std::move(grid)};
}

inline PipelineConfig pipeline_config(const Config& c, std::uint64_t seed) {
  return {positioning_config(c), resample_config(c, seed), c.num("robust.lambda_mji"), variability_model(c),
          c.num("detect.threshold")};
}

/// Reading-noise model applied to injected queries, if enabled.
inline std::optional<VariabilityModel> query_noise(const Config& c) {
  if (!c.flag("inject.noise")) return std::nullopt;
  return variability_model(c);
}

struct Benchmark {
  PropagationScenario scenario;
  RfmArchive rfm;
  std::vector<LabeledFingerprint> validation;  // smoothed with the radio map's kernel smoother
};

inline Benchmark build_benchmark(const Config& c, std::uint64_t seed, Parallelism par = {}) {
  Benchmark b;
  b.scenario = scenario_config(c, seed);
  auto survey = generate_scenario(b.scenario);
  b.rfm = build_rfm(survey.training, c, par);
  const KernelSmoother ks(b.rfm.training, b.rfm.kernel, b.rfm.query);
  b.validation = smooth_validation(survey.validation, ks, par);
  return b;
}

}  // namespace fpcd::io
