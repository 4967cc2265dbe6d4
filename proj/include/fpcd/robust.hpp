#pragma once

// Resampling-based robust localization: draw feature subsets of the measured
// fingerprint, localize each, then keep the intermediate locations whose
// expected fingerprint best explains the full measurement (modified Jaccard
// index) and average them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "fpcd/error.hpp"
#include "fpcd/parallel.hpp"
#include "fpcd/positioning.hpp"
#include "fpcd/rfm.hpp"
#include "fpcd/rng.hpp"
#include "fpcd/similarity.hpp"

namespace fpcd {

inline constexpr std::uint64_t kResampleStreamTag = 0x7265736d;  // "resm"

struct ResampleConfig {
  std::size_t n_res = 200;
  double alpha_res = 0.55;
  std::size_t min_features = 3;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_res < 1) throw InvalidInput("n_res must be >= 1");
    if (!(alpha_res > 0.0 && alpha_res <= 1.0)) throw InvalidInput("alpha_res must lie in (0, 1]");
    if (min_features < 1) throw InvalidInput("min_features must be >= 1");
  }
};

/// Number of features a resample of an n-feature fingerprint keeps.
inline std::size_t resample_size(std::size_t n, double alpha, std::size_t min_features) {
  // the epsilon keeps e.g. 0.45 * 20 from rounding up to 10
  const auto want = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n) - 1e-9));
  return std::min(n, std::max(min_features, want));
}

/// Uniform subset without replacement; a pure function of (seed, draw_index).
inline Fingerprint resample(const Fingerprint& fp, const ResampleConfig& cfg, std::uint64_t draw_index) {
  cfg.validate();
  if (fp.empty()) throw InvalidInput("resample: empty fingerprint");
  Rng rng(derive_seed(cfg.seed, draw_index, kResampleStreamTag));
  const auto picked = rng.choose(fp.size(), resample_size(fp.size(), cfg.alpha_res, cfg.min_features));
  Fingerprint out;
  for (std::size_t i : picked) out.set(fp.entries()[i].id, fp.entries()[i].rss);
  return out;
}

/// Localizes each of the n_res resamples. Draw j depends only on (seed, j),
/// so the result does not depend on the thread count.
///
/// In euclidean-vector mode the unsampled features are dropped from the map
/// as well; CDM needs no such treatment.
inline std::vector<PositionEstimate> intermediate_locations(const Fingerprint& fp, const RfmGrid& grid,
                                                            const PositioningConfig& pos, const ResampleConfig& res,
                                                            Parallelism par = {}) {
  res.validate();
  std::vector<PositionEstimate> out(res.n_res);
  parallel_for(res.n_res, par, [&](std::size_t j) {
    const Fingerprint sub = resample(fp, res, j);
    if (pos.dissimilarity == Dissimilarity::euclidean_vector && sub.size() < fp.size()) {
      std::vector<FeatureId> unsampled;
      for (const auto& e : fp)
        if (!sub.contains(e.id)) unsampled.push_back(e.id);
      out[j] = knn_locate_dropout(fp, unsampled, grid, pos);
    } else {
      out[j] = knn_locate(sub, grid, pos);
    }
  });
  return out;
}

inline std::vector<Point2> locations_of(const std::vector<PositionEstimate>& est) {
  std::vector<Point2> pts;
  pts.reserve(est.size());
  for (const auto& e : est) pts.push_back(e.location);
  return pts;
}

struct ThresholdSelection {
  std::size_t index = 0;
  std::vector<std::size_t> indicating_values;
};

/// Picks the location whose expected fingerprint has the most features
/// within `lambda_res` dBm of the measurement; first index wins ties.
template <typename WorldModel>
ThresholdSelection identify_candidates_threshold(const Fingerprint& fp, const std::vector<Point2>& locations,
                                                 const WorldModel& world, double lambda_res = 10.0) {
  if (locations.empty()) throw InvalidInput("identify_candidates_threshold: no locations");
  ThresholdSelection sel;
  sel.indicating_values.reserve(locations.size());
  for (std::size_t j = 0; j < locations.size(); ++j) {
    const auto residuals = residual_vector(fp, expected_fingerprint(world, locations[j]));
    sel.indicating_values.push_back(indicating_value(residuals, lambda_res));
    if (sel.indicating_values[j] > sel.indicating_values[sel.index]) sel.index = j;
  }
  return sel;
}

struct MjiSelection {
  std::vector<std::size_t> selected;  // ascending
  std::vector<double> weights;        // aligned with selected, sums to 1
};

/// Keeps every candidate whose score is at least lambda_mji times the best
/// score and weights them by their normalized scores. When every score is
/// zero all candidates are kept with uniform weight.
inline MjiSelection select_by_mji(const std::vector<double>& scores, double lambda_mji) {
  if (scores.empty()) throw InvalidInput("select_by_mji: no scores");
  if (!(lambda_mji > 0.0 && lambda_mji <= 1.0)) throw InvalidInput("lambda_mji must lie in (0, 1]");
  const double best = *std::max_element(scores.begin(), scores.end());
  MjiSelection sel;
  double total = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] >= lambda_mji * best) {
      sel.selected.push_back(j);
      total += scores[j];
    }
  }
  for (std::size_t j : sel.selected)
    sel.weights.push_back(total > 0.0 ? scores[j] / total : 1.0 / static_cast<double>(sel.selected.size()));
  return sel;
}

template <typename WorldModel>
std::vector<double> mji_scores(const Fingerprint& fp, const std::vector<Point2>& locations, const WorldModel& world) {
  std::vector<double> scores;
  scores.reserve(locations.size());
  for (const auto& loc : locations) scores.push_back(mji(fp, expected_fingerprint(world, loc)));
  return scores;
}

template <typename WorldModel>
MjiSelection identify_candidates_mji(const Fingerprint& fp, const std::vector<Point2>& locations,
                                     const WorldModel& world, double lambda_mji = 0.97) {
  return select_by_mji(mji_scores(fp, locations, world), lambda_mji);
}

inline Point2 weighted_mean(const std::vector<Point2>& locations, const MjiSelection& sel) {
  Point2 p{0.0, 0.0};
  for (std::size_t i = 0; i < sel.selected.size(); ++i) {
    p.x += sel.weights[i] * locations[sel.selected[i]].x;
    p.y += sel.weights[i] * locations[sel.selected[i]].y;
  }
  return p;
}

struct CandidateSet {
  std::vector<Point2> locations;
  std::vector<double> mji;
  std::vector<std::size_t> selected;
  std::vector<double> weights;
  Point2 estimate;
};

/// Full pipeline: resample, localize each resample, select by MJI against
/// the world model, and return the MJI-weighted mean of the selection.
template <typename WorldModel>
CandidateSet robust_locate(const Fingerprint& fp, const RfmGrid& grid, const WorldModel& world,
                           const PositioningConfig& pos, const ResampleConfig& res, double lambda_mji = 0.97,
                           Parallelism par = {}) {
  CandidateSet cs;
  cs.locations = locations_of(intermediate_locations(fp, grid, pos, res, par));
  cs.mji = mji_scores(fp, cs.locations, world);
  MjiSelection sel = select_by_mji(cs.mji, lambda_mji);
  cs.estimate = weighted_mean(cs.locations, sel);
  cs.selected = std::move(sel.selected);
  cs.weights = std::move(sel.weights);
  return cs;
}

}  // namespace fpcd
