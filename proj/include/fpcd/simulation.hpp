#pragma once

// Synthetic survey generation and change injection.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "fpcd/change_detection.hpp"
#include "fpcd/error.hpp"
#include "fpcd/labeling.hpp"
#include "fpcd/rfm.hpp"
#include "fpcd/rng.hpp"
#include "fpcd/types.hpp"

namespace fpcd {

inline constexpr std::uint64_t kShadowingStreamTag = 0x73686164;  // "shad"
inline constexpr std::uint64_t kSplitStreamTag = 0x73706c74;      // "splt"
inline constexpr std::uint64_t kInjectStreamTag = 0x696e6a63;     // "injc"
inline constexpr std::uint64_t kNoiseStreamTag = 0x6e6f6973;      // "nois"
inline constexpr std::uint64_t kApStreamTag = 0x61707073;         // "apps"

struct AccessPoint {
  FeatureId id;
  Point2 position;
};

/// A straight wall that attenuates every link crossing it.
struct Wall {
  Point2 a, b;
  double attenuation_db = 0.0;
};

struct PropagationScenario {
  std::vector<AccessPoint> access_points;
  std::vector<Wall> walls;
  double ref_power_dbm = -40.0;  // at 1 m
  double exponent = 3.0;
  double shadowing_sigma = 2.0;
  double sensitivity_dbm = -100.0;
  Roi roi{0.0, 0.0, 30.0, 20.0};
  double survey_spacing = 1.0;
  double train_fraction = 0.75;
  std::uint64_t seed = 1;

  void validate() const {
    if (access_points.empty()) throw InvalidInput("scenario has no access points");
    if (!(exponent > 0.0)) throw InvalidInput("path-loss exponent must be > 0");
    if (!(shadowing_sigma >= 0.0)) throw InvalidInput("shadowing sigma must be >= 0");
    if (!(survey_spacing > 0.0)) throw InvalidInput("survey spacing must be > 0");
    if (!roi.valid()) throw InvalidInput("scenario ROI is invalid");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidInput("train fraction must lie in (0, 1)");
  }
};

/// `count` access points uniformly placed in `roi`, named like MAC addresses.
inline std::vector<AccessPoint> random_access_points(std::size_t count, const Roi& roi, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0, kApStreamTag));
  std::vector<AccessPoint> aps;
  for (std::size_t i = 0; i < count; ++i) {
    char mac[32];
    std::snprintf(mac, sizeof mac, "02:00:00:00:%02zx:%02zx", (i >> 8) & 0xff, i & 0xff);
    const double x = roi.min_x + rng.uniform() * roi.width();
    const double y = roi.min_y + rng.uniform() * roi.height();
    aps.push_back({FeatureId(mac), {x, y}});
  }
  return aps;
}

/// The scenario's stated defaults: 12 random APs in a 30 x 20 m room.
inline PropagationScenario default_scenario(std::uint64_t seed = 1) {
  PropagationScenario s;
  s.seed = seed;
  s.access_points = random_access_points(12, s.roi, seed);
  return s;
}

namespace detail {
inline bool segments_cross(const Point2& p1, const Point2& p2, const Point2& q1, const Point2& q2) {
  const auto orient = [](const Point2& a, const Point2& b, const Point2& c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  };
  const double d1 = orient(q1, q2, p1), d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1), d4 = orient(p1, p2, q2);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
}
}  // namespace detail

/// Noise-free log-distance RSS; distances below 1 m are floored.
inline double path_loss_rss(const PropagationScenario& s, const AccessPoint& ap, const Point2& at) {
  const double d = std::max(distance(ap.position, at), 1.0);
  double rss = s.ref_power_dbm - 10.0 * s.exponent * std::log10(d);
  for (const auto& w : s.walls)
    if (detail::segments_cross(ap.position, at, w.a, w.b)) rss -= w.attenuation_db;
  return rss;
}

/// Survey point positions: a regular lattice anchored at the ROI corner.
inline std::vector<Point2> survey_points(const PropagationScenario& s) {
  std::vector<Point2> pts;
  const auto nx = static_cast<std::size_t>(std::floor(s.roi.width() / s.survey_spacing + 1e-9)) + 1;
  const auto ny = static_cast<std::size_t>(std::floor(s.roi.height() / s.survey_spacing + 1e-9)) + 1;
  for (std::size_t iy = 0; iy < ny; ++iy)
    for (std::size_t ix = 0; ix < nx; ++ix)
      pts.push_back({s.roi.min_x + static_cast<double>(ix) * s.survey_spacing,
                     s.roi.min_y + static_cast<double>(iy) * s.survey_spacing});
  return pts;
}

/// Fingerprint heard at `at`, with shadowing drawn from `rng` (if any).
inline Fingerprint measure(const PropagationScenario& s, const Point2& at, Rng* rng) {
  Fingerprint fp;
  for (const auto& ap : s.access_points) {
    double rss = path_loss_rss(s, ap, at);
    if (rng && s.shadowing_sigma > 0.0) rss += rng->normal(0.0, s.shadowing_sigma);
    rss = std::clamp(rss, kMissingDbm, kMaxDbm);
    if (rss < s.sensitivity_dbm) continue;
    fp.set(ap.id, rss);
  }
  return fp;
}

struct SimulatedSurvey {
  RfmTrainingSet training;
  std::vector<LabeledFingerprint> validation;
};

/// Surveys every lattice point once and splits the points into training and
/// validation by a seeded shuffle.
inline SimulatedSurvey generate_scenario(const PropagationScenario& s) {
  s.validate();
  const auto pts = survey_points(s);
  std::vector<LabeledFingerprint> all;
  all.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Rng rng(derive_seed(s.seed, i, kShadowingStreamTag));
    LabeledFingerprint lf;
    lf.location = pts[i];
    lf.fingerprint = measure(s, pts[i], &rng);
    lf.block = 1;
    char id[32];
    std::snprintf(id, sizeof id, "s%05zu", i);
    lf.sample_id = id;
    all.push_back(std::move(lf));
  }
  Rng split(derive_seed(s.seed, 0, kSplitStreamTag));
  auto perm = split.permutation(all.size());
  const auto n_train = static_cast<std::size_t>(std::llround(s.train_fraction * static_cast<double>(all.size())));
  std::vector<char> is_train(all.size(), 0);
  for (std::size_t i = 0; i < n_train; ++i) is_train[perm[i]] = 1;

  std::vector<LabeledFingerprint> train, valid;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i].fingerprint.empty()) continue;
    (is_train[i] ? train : valid).push_back(std::move(all[i]));
  }
  FeatureRegistry reg;
  for (const auto& ap : s.access_points) reg.add(ap.id);
  return {RfmTrainingSet(std::move(train), std::move(reg)), std::move(valid)};
}

// ---------------------------------------------------------------------------
// Change injection

enum class ChangeMode { per_sample, shared };

struct ChangeSpec {
  double missing_ratio = 0.0;
  double shift_ratio = 0.0;
  double shift_db = -15.0;
  std::uint64_t seed = 0;
  ChangeMode mode = ChangeMode::per_sample;

  void validate() const {
    if (!(missing_ratio >= 0.0 && missing_ratio <= 0.5)) throw InvalidInput("missing ratio must lie in [0, 0.5]");
    if (!(shift_ratio >= 0.0 && shift_ratio <= 0.5)) throw InvalidInput("shift ratio must lie in [0, 0.5]");
    if (missing_ratio + shift_ratio > 0.5 + 1e-12) throw InvalidInput("missing + shift ratio must not exceed 0.5");
  }
};

/// Every (missing, shift, dB) combination on the 10 % lattice with
/// missing + shift <= 50 % and shifts of +-5, +-10, +-15 dB.
inline std::vector<ChangeSpec> change_grid(std::uint64_t seed = 0) {
  std::vector<ChangeSpec> out;
  for (int m = 0; m <= 5; ++m)
    for (int s = 0; m + s <= 5; ++s)
      for (double db : {-15.0, -10.0, -5.0, 5.0, 10.0, 15.0})
        out.push_back({m / 10.0, s / 10.0, db, seed, ChangeMode::per_sample});
  return out;
}

enum class ChangeKind { none, missing, shifted };

inline const char* to_string(ChangeKind k) {
  switch (k) {
    case ChangeKind::none: return "none";
    case ChangeKind::missing: return "missing";
    case ChangeKind::shifted: return "shifted";
  }
  return "none";
}

struct FeatureLabel {
  FeatureId id;
  ChangeStatus status = ChangeStatus::stable;
  ChangeKind kind = ChangeKind::none;
};

/// Ground truth for one injected sample, sorted by feature id.
using ChangeLabels = std::vector<FeatureLabel>;

struct InjectedSample {
  Fingerprint fingerprint;
  ChangeLabels labels;
};

inline std::size_t ratio_count(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
}

namespace detail {
inline InjectedSample apply_changes(const Fingerprint& fp, const std::vector<ChangeKind>& kinds, double shift_db) {
  InjectedSample out;
  std::size_t i = 0;
  for (const auto& e : fp) {
    FeatureLabel lab{e.id, ChangeStatus::stable, kinds[i]};
    if (kinds[i] == ChangeKind::missing) {
      lab.status = ChangeStatus::changed;
    } else if (kinds[i] == ChangeKind::shifted) {
      lab.status = ChangeStatus::changed;
      const double v = std::clamp(e.rss + shift_db, kMissingDbm, kMaxDbm);
      if (v <= kMissingDbm) {
        lab.kind = ChangeKind::missing;
      } else {
        out.fingerprint.set(e.id, v);
      }
    } else {
      out.fingerprint.set(e.id, e.rss);
    }
    out.labels.push_back(std::move(lab));
    ++i;
  }
  return out;
}
}  // namespace detail

/// Removes ceil(missing * n) features and shifts a disjoint ceil(shift * n)
/// ones; deterministic in (spec.seed, draw_index).
inline InjectedSample inject_changes(const Fingerprint& fp, const ChangeSpec& spec, std::uint64_t draw_index) {
  spec.validate();
  const std::size_t n = fp.size();
  const std::size_t n_missing = std::min(n, ratio_count(spec.missing_ratio, n));
  const std::size_t n_shift = std::min(n - n_missing, ratio_count(spec.shift_ratio, n));
  Rng rng(derive_seed(spec.seed, draw_index, kInjectStreamTag));
  const auto perm = rng.permutation(n);
  std::vector<ChangeKind> kinds(n, ChangeKind::none);
  for (std::size_t i = 0; i < n_missing; ++i) kinds[perm[i]] = ChangeKind::missing;
  for (std::size_t i = n_missing; i < n_missing + n_shift; ++i) kinds[perm[i]] = ChangeKind::shifted;
  return detail::apply_changes(fp, kinds, spec.shift_db);
}

/// Shared mode: the same registry features change in every sample.
inline InjectedSample inject_changes_shared(const Fingerprint& fp, const ChangeSpec& spec,
                                            const FeatureRegistry& registry) {
  spec.validate();
  const std::size_t n = registry.size();
  const std::size_t n_missing = std::min(n, ratio_count(spec.missing_ratio, n));
  const std::size_t n_shift = std::min(n - n_missing, ratio_count(spec.shift_ratio, n));
  Rng rng(derive_seed(spec.seed, 0, kInjectStreamTag));
  const auto perm = rng.permutation(n);
  std::vector<ChangeKind> by_feature(n, ChangeKind::none);
  for (std::size_t i = 0; i < n_missing; ++i) by_feature[perm[i]] = ChangeKind::missing;
  for (std::size_t i = n_missing; i < n_missing + n_shift; ++i) by_feature[perm[i]] = ChangeKind::shifted;
  std::vector<ChangeKind> kinds;
  for (const auto& e : fp) {
    const auto f = registry.index_of(e.id);
    kinds.push_back(f ? by_feature[*f] : ChangeKind::none);
  }
  return detail::apply_changes(fp, kinds, spec.shift_db);
}

inline InjectedSample inject(const Fingerprint& fp, const ChangeSpec& spec, std::uint64_t draw_index,
                             const FeatureRegistry& registry) {
  return spec.mode == ChangeMode::shared ? inject_changes_shared(fp, spec, registry)
                                         : inject_changes(fp, spec, draw_index);
}

/// Adds zero-mean Gaussian reading noise with the variability model's sigma
/// to every value; values falling below `sensitivity` become unmeasured.
inline Fingerprint add_reading_noise(const Fingerprint& fp, const VariabilityModel& model, std::uint64_t seed,
                                     std::uint64_t index, double sensitivity = -100.0) {
  Rng rng(derive_seed(seed, index, kNoiseStreamTag));
  Fingerprint out;
  for (const auto& e : fp) {
    const double v = std::clamp(e.rss + rng.normal(0.0, model.sigma(e.rss)), kMissingDbm, kMaxDbm);
    if (v >= sensitivity) out.set(e.id, v);
  }
  return out;
}

/// Validation fingerprints replaced by the training smoother's predictions,
/// giving a change-free baseline consistent with the map.
inline std::vector<LabeledFingerprint> smooth_validation(const std::vector<LabeledFingerprint>& validation,
                                                         const KernelSmoother& training_model,
                                                         Parallelism par = {}) {
  return smooth_samples(validation, training_model, par).samples();
}

}  // namespace fpcd
