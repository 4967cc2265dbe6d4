#pragma once

// Feature-wise change belief from the overlap of two Gaussians: one centred
// on the measured value, one on the value the world model expects.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "fpcd/error.hpp"
#include "fpcd/positioning.hpp"
#include "fpcd/rfm.hpp"
#include "fpcd/types.hpp"

namespace fpcd {

/// Linear RSS-to-standard-deviation model sigma = max(slope * v + intercept, floor).
struct VariabilityModel {
  double slope = 0.0;
  double intercept = 2.0;
  double floor = 0.5;

  double sigma(double v) const { return std::max(slope * v + intercept, floor); }
};

/// One location/block worth of repeated readings of a feature.
using RepeatedReadings = std::vector<double>;

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw InvalidInput("median of an empty sample");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  return m;
}

/// Ordinary least squares of sigma on level over (level, sigma) points.
inline VariabilityModel fit_variability_points(const std::vector<std::pair<double, double>>& points,
                                               double floor = 0.5) {
  if (points.size() < 2) throw InvalidInput("fit_variability: need at least two (level, sigma) points");
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(points.size());
  my /= static_cast<double>(points.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  VariabilityModel m;
  m.floor = floor;
  if (sxx <= 0.0) {
    // every level identical: only a constant is identifiable
    m.slope = 0.0;
    m.intercept = my;
  } else {
    m.slope = sxy / sxx;
    m.intercept = my - m.slope * mx;
  }
  return m;
}

/// Fits the model from groups of repeated readings: per group, the median
/// level and the sample standard deviation. Groups with fewer than two
/// readings carry no spread information and are skipped.
inline VariabilityModel fit_variability(const std::vector<RepeatedReadings>& groups, double floor = 0.5) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& g : groups) {
    if (g.size() < 2) continue;
    double mean = 0.0;
    for (double v : g) mean += v;
    mean /= static_cast<double>(g.size());
    double ss = 0.0;
    for (double v : g) ss += (v - mean) * (v - mean);
    pts.emplace_back(median_of(g), std::sqrt(ss / static_cast<double>(g.size() - 1)));
  }
  return fit_variability_points(pts, floor);
}

inline double normal_pdf(double v, double mu, double sigma) {
  const double z = (v - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

/// Points where N(mu1, sigma1) and N(mu2, sigma2) have equal density. With
/// equal sigmas there is one crossing, returned twice.
inline std::pair<double, double> gaussian_intersections(double mu1, double sigma1, double mu2, double sigma2) {
  if (!(sigma1 > 0.0 && sigma2 > 0.0)) throw InvalidInput("gaussian_intersections: sigmas must be > 0");
  // (v-mu1)^2/(2 s1^2) + ln s1 = (v-mu2)^2/(2 s2^2) + ln s2, as a v^2 + b v + c = 0
  const double i1 = 1.0 / (sigma1 * sigma1), i2 = 1.0 / (sigma2 * sigma2);
  const double a = 0.5 * (i1 - i2);
  const double b = mu2 * i2 - mu1 * i1;
  const double c = 0.5 * (mu1 * mu1 * i1 - mu2 * mu2 * i2) + std::log(sigma1 / sigma2);
  if (std::abs(a) <= 1e-15 * std::max(i1, i2)) {
    if (b == 0.0) return {mu1, mu1};
    const double v = -c / b;
    return {v, v};
  }
  const double disc = std::max(b * b - 4.0 * a * c, 0.0);
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  double v1 = q / a;
  double v2 = q != 0.0 ? c / q : v1;
  if (v1 > v2) std::swap(v1, v2);
  return {v1, v2};
}

/// Belief in [0, 1] that a feature changed between the expected and the
/// measured value. nullopt stands for "not measured" and is modeled at the
/// missing indicator. Identical distributions give 0.
inline double change_belief(std::optional<double> measured, std::optional<double> expected,
                            const VariabilityModel& model) {
  if (!measured && !expected) throw InvalidInput("change_belief: both values are missing");
  const double vm = measured.value_or(kMissingDbm);
  const double ve = expected.value_or(kMissingDbm);
  const double sm = model.sigma(vm), se = model.sigma(ve);
  if (vm == ve && sm == se) return 0.0;
  const auto [v1, v2] = gaussian_intersections(vm, sm, ve, se);
  const double p = std::max(normal_pdf(v1, ve, se), normal_pdf(v2, ve, se));
  return std::clamp(1.0 - p, 0.0, 1.0);
}

struct FeatureBelief {
  FeatureId id;
  double belief;
  std::optional<double> measured;
  std::optional<double> expected;
};

/// Beliefs over the union of measured and expected keys, sorted by id.
using ChangeBeliefSet = std::vector<FeatureBelief>;

inline ChangeBeliefSet beliefs_against(const Fingerprint& fp, const Fingerprint& expected,
                                       const VariabilityModel& model) {
  ChangeBeliefSet out;
  auto im = fp.begin();
  auto ie = expected.begin();
  while (im != fp.end() || ie != expected.end()) {
    std::optional<double> m, e;
    FeatureId id;
    if (ie == expected.end() || (im != fp.end() && im->id < ie->id)) {
      id = im->id;
      m = (im++)->rss;
    } else if (im == fp.end() || ie->id < im->id) {
      id = ie->id;
      e = (ie++)->rss;
    } else {
      id = im->id;
      m = (im++)->rss;
      e = (ie++)->rss;
    }
    out.push_back({id, change_belief(m, e, model), m, e});
  }
  return out;
}

template <typename WorldModel>
ChangeBeliefSet detect_changes(const Fingerprint& fp, const Point2& estimated, const WorldModel& world,
                               const VariabilityModel& model) {
  return beliefs_against(fp, expected_fingerprint(world, estimated), model);
}

inline std::vector<FeatureId> flagged(const ChangeBeliefSet& beliefs, double threshold) {
  std::vector<FeatureId> out;
  for (const auto& b : beliefs)
    if (b.belief >= threshold) out.push_back(b.id);
  return out;
}

struct Relocation {
  Point2 location;
  std::vector<FeatureId> dropped;
  bool used_fallback = false;
};

/// Re-localizes without the features believed changed. If nothing would be
/// left to match, returns `fallback` (normally the robust estimate).
inline Relocation drop_changed_and_relocate(const Fingerprint& fp, const ChangeBeliefSet& beliefs, double threshold,
                                            const RfmGrid& grid, const PositioningConfig& cfg,
                                            const Point2& fallback) {
  Relocation r;
  r.dropped = flagged(beliefs, threshold);
  if (without(fp, r.dropped).empty()) {
    r.location = fallback;
    r.used_fallback = true;
    return r;
  }
  r.location = knn_locate_dropout(fp, r.dropped, grid, cfg).location;
  return r;
}

}  // namespace fpcd
