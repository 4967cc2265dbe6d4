#pragma once

// Ground-truth change labels for repeatedly surveyed locations, from robust
// per-block statistics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "fpcd/change_detection.hpp"
#include "fpcd/error.hpp"
#include "fpcd/types.hpp"

namespace fpcd {

enum class ChangeStatus { stable, changed };

inline const char* to_string(ChangeStatus s) { return s == ChangeStatus::stable ? "stable" : "changed"; }

inline constexpr double kMadToSigma = 1.4826;

struct RobustStats {
  double mu = 0.0;     // median
  double sigma = 0.0;  // 1.4826 * MAD
};

inline RobustStats robust_stats(const std::vector<double>& values) {
  if (values.empty()) throw InvalidInput("robust_stats: empty sample");
  RobustStats s;
  s.mu = median_of(values);
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double v : values) dev.push_back(std::abs(v - s.mu));
  s.sigma = kMadToSigma * median_of(std::move(dev));
  return s;
}

/// Per-sample labels: changed when farther than 3 robust sigmas from the
/// block median (with zero spread, any deviation counts).
inline std::vector<ChangeStatus> label_within_block(const std::vector<double>& values) {
  const RobustStats s = robust_stats(values);
  std::vector<ChangeStatus> out;
  out.reserve(values.size());
  for (double v : values) {
    const double d = std::abs(v - s.mu);
    const bool changed = s.sigma > 0.0 ? d > 3.0 * s.sigma : v != s.mu;
    out.push_back(changed ? ChangeStatus::changed : ChangeStatus::stable);
  }
  return out;
}

struct BlockStats {
  double mu = 0.0;
  double sigma = 0.0;
  std::size_t count = 0;
};

inline BlockStats block_stats(const std::vector<double>& values) {
  const RobustStats s = robust_stats(values);
  return {s.mu, s.sigma, values.size()};
}

/// |mu_i - mu_j| / (3 sqrt(sigma_i^2 + sigma_j^2)) >= 1 means changed. A zero
/// denominator counts as stable only if the means agree.
inline ChangeStatus label_inter_block(const BlockStats& reference, const BlockStats& other) {
  const double num = std::abs(reference.mu - other.mu);
  const double den = 3.0 * std::sqrt(reference.sigma * reference.sigma + other.sigma * other.sigma);
  if (den == 0.0) return num == 0.0 ? ChangeStatus::stable : ChangeStatus::changed;
  return num / den >= 1.0 ? ChangeStatus::changed : ChangeStatus::stable;
}

struct SampleFeatureLabel {
  std::size_t sample = 0;  // index into the input samples
  FeatureId feature;
  int block = 1;
  ChangeStatus within = ChangeStatus::stable;
  ChangeStatus inter = ChangeStatus::stable;

  ChangeStatus status() const {
    return within == ChangeStatus::changed || inter == ChangeStatus::changed ? ChangeStatus::changed
                                                                             : ChangeStatus::stable;
  }
};

/// Labels every (sample, feature) pair of a block-structured survey.
///
/// Samples are grouped by exact location. At each location every feature ever
/// observed there contributes one value per sample, the missing indicator
/// when unmeasured. Inter-block labels compare each block with the earliest
/// block present at that location.
inline std::vector<SampleFeatureLabel> label_survey(const std::vector<LabeledFingerprint>& samples) {
  using LocKey = std::pair<double, double>;
  std::map<LocKey, std::vector<std::size_t>> by_loc;
  for (std::size_t i = 0; i < samples.size(); ++i)
    by_loc[{samples[i].location.x, samples[i].location.y}].push_back(i);

  std::vector<SampleFeatureLabel> out;
  for (const auto& [loc, idx] : by_loc) {
    std::vector<FeatureId> features;
    for (std::size_t i : idx)
      for (const auto& e : samples[i].fingerprint) features.push_back(e.id);
    std::sort(features.begin(), features.end());
    features.erase(std::unique(features.begin(), features.end()), features.end());

    std::map<int, std::vector<std::size_t>> by_block;
    for (std::size_t i : idx) by_block[samples[i].block.value_or(1)].push_back(i);

    for (const auto& f : features) {
      std::map<int, BlockStats> stats;
      std::map<int, std::vector<ChangeStatus>> within;
      for (const auto& [blk, members] : by_block) {
        std::vector<double> vals;
        vals.reserve(members.size());
        for (std::size_t i : members) vals.push_back(samples[i].fingerprint.get(f).value_or(kMissingDbm));
        stats[blk] = block_stats(vals);
        within[blk] = label_within_block(vals);
      }
      const BlockStats& first = stats.begin()->second;
      for (const auto& [blk, members] : by_block) {
        const ChangeStatus inter = label_inter_block(first, stats[blk]);
        for (std::size_t k = 0; k < members.size(); ++k)
          out.push_back({members[k], f, blk, within[blk][k], inter});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const SampleFeatureLabel& a, const SampleFeatureLabel& b) {
    return std::tie(a.sample, a.feature) < std::tie(b.sample, b.feature);
  });
  return out;
}

/// Measured values of each feature grouped by (location, block), in a
/// deterministic order; the input for fitting a variability model.
inline std::vector<std::vector<double>> repeated_readings(const std::vector<LabeledFingerprint>& samples) {
  std::map<std::tuple<double, double, int, FeatureId>, std::vector<double>> groups;
  for (const auto& s : samples)
    for (const auto& e : s.fingerprint)
      groups[{s.location.x, s.location.y, s.block.value_or(1), e.id}].push_back(e.rss);
  std::vector<std::vector<double>> out;
  out.reserve(groups.size());
  for (auto& [_, g] : groups) out.push_back(std::move(g));
  return out;
}

}  // namespace fpcd
