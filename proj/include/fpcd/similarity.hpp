#pragma once

// Set and value dissimilarities between fingerprints.

#include <cmath>
#include <cstddef>
#include <vector>

#include "fpcd/error.hpp"
#include "fpcd/types.hpp"

namespace fpcd {

/// Sizes of the key-set intersection and union plus the summed absolute gap
/// over shared features. Both fingerprints are sorted, so this is one merge.
struct KeyOverlap {
  std::size_t shared = 0;
  std::size_t uni = 0;
  double gap_sum = 0.0;
};

inline KeyOverlap key_overlap(const Fingerprint& a, const Fingerprint& b) {
  KeyOverlap o;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->id < ib->id) {
      ++ia;
    } else if (ib->id < ia->id) {
      ++ib;
    } else {
      ++o.shared;
      o.gap_sum += std::abs(ia->rss - ib->rss);
      ++ia;
      ++ib;
    }
  }
  o.uni = a.size() + b.size() - o.shared;
  return o;
}

/// Modified Jaccard index of the measured key set against the expected one:
/// the mean of |A∩B|/|A∪B| and |A∩B|/|A|. Asymmetric in its arguments.
inline double mji(const Fingerprint& measured, const Fingerprint& expected) {
  if (measured.empty()) throw InvalidInput("mji: measured fingerprint is empty");
  const KeyOverlap o = key_overlap(measured, expected);
  const double s = static_cast<double>(o.shared);
  return 0.5 * (s / static_cast<double>(o.uni) + s / static_cast<double>(measured.size()));
}

/// Gap assumed for the asymmetry penalty when two fingerprints share nothing.
inline constexpr double kCdmDisjointGapDbm = 10.0;

/// Combines overlap counts into the CDM value. Shared with the grid matcher,
/// which accumulates the same counts column-wise.
inline double cdm_from_counts(double shared, double uni, double gap_sum, double lambda_cdm) {
  const double p = shared > 0.0 ? gap_sum / shared : kCdmDisjointGapDbm;
  const double sym = uni - shared;
  return (gap_sum + lambda_cdm * p * sym) / uni;
}

/// Non-vector dissimilarity tolerant of differing key sets:
///   [ sum_{shared} |v1 - v2| + lambda * p * |A1 xor A2| ] / |A1 u A2|
/// with p the mean shared gap (10 dBm when nothing is shared).
inline double cdm(const Fingerprint& fp1, const Fingerprint& fp2, double lambda_cdm) {
  if (fp1.empty() && fp2.empty()) throw InvalidInput("cdm: both fingerprints are empty");
  if (!(lambda_cdm >= 0.0)) throw InvalidInput("cdm: lambda must be non-negative");
  const KeyOverlap o = key_overlap(fp1, fp2);
  return cdm_from_counts(static_cast<double>(o.shared), static_cast<double>(o.uni), o.gap_sum, lambda_cdm);
}

/// Absolute residuals |v_measured - v_expected| over the measured keys, in the
/// fingerprint's key order. Features the expected fingerprint lacks are
/// compared against the missing indicator.
inline std::vector<double> residual_vector(const Fingerprint& measured, const Fingerprint& expected,
                                           double missing_value = kMissingDbm) {
  std::vector<double> out;
  out.reserve(measured.size());
  auto ie = expected.begin();
  for (const auto& m : measured) {
    while (ie != expected.end() && ie->id < m.id) ++ie;
    const double ev = (ie != expected.end() && ie->id == m.id) ? ie->rss : missing_value;
    out.push_back(std::abs(m.rss - ev));
  }
  return out;
}

/// Same residuals, ordered by registry position. Measured features outside
/// the registry are appended in key order.
inline std::vector<double> residual_vector(const Fingerprint& measured, const Fingerprint& expected,
                                           const FeatureRegistry& registry,
                                           double missing_value = kMissingDbm) {
  std::vector<std::pair<std::size_t, double>> keyed;
  keyed.reserve(measured.size());
  std::size_t extra = registry.size();
  for (const auto& m : measured) {
    const double ev = expected.get(m.id).value_or(missing_value);
    keyed.emplace_back(registry.index_of(m.id).value_or(extra++), std::abs(m.rss - ev));
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<double> out;
  out.reserve(keyed.size());
  for (const auto& [_, r] : keyed) out.push_back(r);
  return out;
}

/// Number of residuals no larger than `lambda_res`.
inline std::size_t indicating_value(const std::vector<double>& residuals, double lambda_res) {
  if (residuals.empty()) throw InvalidInput("indicating_value: no residuals");
  std::size_t n = 0;
  for (double r : residuals) n += (r <= lambda_res) ? 1 : 0;
  return n;
}

struct VectorizeResult {
  std::vector<double> values;
  std::size_t dropped = 0;  // features of fp absent from the registry
};

/// Dense vector over the registry, `missing_value` where fp lacks a feature.
inline VectorizeResult vectorize(const Fingerprint& fp, const FeatureRegistry& registry,
                                 double missing_value = kMissingDbm) {
  if (registry.empty()) throw InvalidInput("vectorize: empty registry");
  VectorizeResult r;
  r.values.assign(registry.size(), missing_value);
  for (const auto& e : fp) {
    if (auto i = registry.index_of(e.id)) {
      r.values[*i] = e.rss;
    } else {
      ++r.dropped;
    }
  }
  return r;
}

}  // namespace fpcd
