#pragma once

// Query-level evaluation: inject changes into held-out samples, run the
// baseline and robust pipelines over them, and sweep the sampling ratio.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "fpcd/change_detection.hpp"
#include "fpcd/labeling.hpp"
#include "fpcd/metrics.hpp"
#include "fpcd/parallel.hpp"
#include "fpcd/positioning.hpp"
#include "fpcd/rfm.hpp"
#include "fpcd/rng.hpp"
#include "fpcd/robust.hpp"
#include "fpcd/simulation.hpp"

namespace fpcd {

inline constexpr std::uint64_t kQueryStreamTag = 0x71756572;  // "quer"

struct Query {
  LabeledFingerprint sample;  // fingerprint after injection and noise
  ChangeLabels labels;
};

/// `count` injected copies of `base`, cycling through it; draw i uses
/// injection and noise streams keyed by i. With `noise` set, reading noise is
/// added after injection. Queries stay in the radio map's representation, so
/// no detection threshold is applied on top of the noise.
inline std::vector<Query> make_queries(const std::vector<LabeledFingerprint>& base, const ChangeSpec& spec,
                                      std::size_t count, const FeatureRegistry& registry,
                                      const std::optional<VariabilityModel>& noise = std::nullopt) {
  if (base.empty()) throw InvalidInput("make_queries: no base samples");
  std::vector<Query> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& src = base[i % base.size()];
    auto inj = inject(src.fingerprint, spec, i, registry);
    Query q{src, std::move(inj.labels)};
    q.sample.fingerprint = noise ? add_reading_noise(inj.fingerprint, *noise, spec.seed, i)
                                 : std::move(inj.fingerprint);
    out.push_back(std::move(q));
  }
  return out;
}

/// Per-query resampling stream, so that queries sharing a seed do not also
/// share their resample draws.
inline ResampleConfig query_resample(const ResampleConfig& base, std::size_t query_index) {
  ResampleConfig r = base;
  r.seed = derive_seed(base.seed, query_index, kQueryStreamTag);
  return r;
}

struct PipelineConfig {
  PositioningConfig positioning;
  ResampleConfig resample;
  double lambda_mji = 0.97;
  VariabilityModel variability;
  double threshold = 0.95;
};

struct QueryOutcome {
  bool located = false;  // false for queries with nothing measured
  Point2 truth;
  Point2 knn;
  CandidateSet robust;
  ChangeBeliefSet beliefs;
  Relocation relocated;
};

/// Baseline kNN, robust localization, change beliefs at the robust estimate,
/// and re-localization without flagged features, for every query.
template <typename WorldModel>
std::vector<QueryOutcome> run_pipeline(const std::vector<LabeledFingerprint>& queries, const RfmGrid& grid,
                                       const WorldModel& world, const PipelineConfig& cfg, Parallelism par = {}) {
  std::vector<QueryOutcome> out(queries.size());
  parallel_for(queries.size(), par, [&](std::size_t i) {
    const auto& q = queries[i];
    QueryOutcome& o = out[i];
    o.truth = q.location;
    if (q.fingerprint.empty()) return;
    o.located = true;
    o.knn = knn_locate(q.fingerprint, grid, cfg.positioning).location;
    o.robust = robust_locate(q.fingerprint, grid, world, cfg.positioning, query_resample(cfg.resample, i),
                             cfg.lambda_mji);
    o.beliefs = detect_changes(q.fingerprint, o.robust.estimate, world, cfg.variability);
    o.relocated = drop_changed_and_relocate(q.fingerprint, o.beliefs, cfg.threshold, grid, cfg.positioning,
                                            o.robust.estimate);
  });
  return out;
}

struct LocalizationErrors {
  std::vector<double> knn, robust, relocated;
};

inline LocalizationErrors localization_errors(const std::vector<QueryOutcome>& outcomes) {
  LocalizationErrors e;
  for (const auto& o : outcomes) {
    if (!o.located) continue;
    e.knn.push_back(distance(o.knn, o.truth));
    e.robust.push_back(distance(o.robust.estimate, o.truth));
    e.relocated.push_back(distance(o.relocated.location, o.truth));
  }
  return e;
}

/// Pools every located query's beliefs against its labels.
inline std::vector<ScoredLabel> scored_labels(const std::vector<QueryOutcome>& outcomes,
                                              const std::vector<ChangeLabels>& labels) {
  if (outcomes.size() != labels.size()) throw InvalidInput("scored_labels: outcome and label counts differ");
  std::vector<ScoredLabel> out;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].located) continue;
    const auto s = align_beliefs(outcomes[i].beliefs, labels[i]);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

/// Per-sample change labels: for every sample, one entry per feature
/// observed at its location.
inline std::vector<ChangeLabels> per_sample_labels(const std::vector<SampleFeatureLabel>& labels, std::size_t samples) {
  std::vector<ChangeLabels> out(samples);
  for (const auto& l : labels) {
    if (l.sample >= samples) throw InvalidInput("per_sample_labels: sample index out of range");
    out[l.sample].push_back({l.feature, l.status(), ChangeKind::none});
  }
  return out;
}

struct SweepRow {
  double ratio = 0.0;
  double dispersiveness = 0.0;  // mean over queries
  double bias = 0.0;
  double normalized_dispersiveness = 0.0;  // per-query value over its sweep maximum, then averaged
  double normalized_bias = 0.0;
};

/// Dispersiveness and bias of the intermediate locations at every sampling
/// ratio, averaged over the located queries.
inline std::vector<SweepRow> ratio_sweep(const std::vector<LabeledFingerprint>& queries, const RfmGrid& grid,
                                         const PositioningConfig& pos, const ResampleConfig& res,
                                         const std::vector<double>& ratios, double sigma_scale = 1.0,
                                         Parallelism par = {}) {
  if (ratios.empty()) throw InvalidInput("ratio_sweep: no ratios");
  const std::size_t nr = ratios.size();
  std::vector<double> disp(queries.size() * nr, 0.0), bs(queries.size() * nr, 0.0);
  std::vector<char> located(queries.size(), 0);
  parallel_for(queries.size(), par, [&](std::size_t i) {
    if (queries[i].fingerprint.empty()) return;
    located[i] = 1;
    for (std::size_t r = 0; r < nr; ++r) {
      ResampleConfig rc = query_resample(res, i);
      rc.alpha_res = ratios[r];
      const auto locs = locations_of(intermediate_locations(queries[i].fingerprint, grid, pos, rc));
      disp[i * nr + r] = locs.size() < 2 ? 0.0 : dispersiveness(locs, sigma_scale);
      bs[i * nr + r] = bias(locs, queries[i].location);
    }
  });

  std::vector<SweepRow> rows(nr);
  const auto n = static_cast<double>(std::count(located.begin(), located.end(), 1));
  if (n == 0.0) throw InvalidInput("ratio_sweep: no query has measured features");
  for (std::size_t r = 0; r < nr; ++r) rows[r].ratio = ratios[r];
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (!located[i]) continue;
    const double* d = &disp[i * nr];
    const double* b = &bs[i * nr];
    const double dmax = *std::max_element(d, d + nr);
    const double bmax = *std::max_element(b, b + nr);
    for (std::size_t r = 0; r < nr; ++r) {
      rows[r].dispersiveness += d[r] / n;
      rows[r].bias += b[r] / n;
      rows[r].normalized_dispersiveness += (dmax > 0.0 ? d[r] / dmax : 0.0) / n;
      rows[r].normalized_bias += (bmax > 0.0 ? b[r] / bmax : 0.0) / n;
    }
  }
  return rows;
}

}  // namespace fpcd
