#pragma once

// kNN fingerprint matching against an interpolated grid.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

#include "fpcd/error.hpp"
#include "fpcd/rfm.hpp"
#include "fpcd/similarity.hpp"
#include "fpcd/types.hpp"

namespace fpcd {

enum class Dissimilarity { euclidean_vector, cdm };

struct PositioningConfig {
  std::size_t k = 3;
  Dissimilarity dissimilarity = Dissimilarity::cdm;
  double lambda_cdm = 3.0;
  double missing_value = kMissingDbm;
  bool inverse_distance_weighting = false;

  void validate(std::size_t cells) const {
    if (k < 1) throw InvalidInput("k must be >= 1");
    if (k > cells) throw InvalidInput("k exceeds the number of grid cells");
    if (!(lambda_cdm >= 0.0)) throw InvalidInput("lambda_cdm must be >= 0");
  }
};

struct PositionEstimate {
  Point2 location;
  std::vector<std::size_t> neighbors;  // grid cells, best first
  std::vector<double> dissimilarities;
};

namespace detail {

/// Dissimilarity of `query` to every grid cell, with `excluded` features
/// removed from both the query and the cells.
inline std::vector<double> grid_dissimilarities(const Fingerprint& query, const std::vector<FeatureId>& excluded,
                                                const RfmGrid& grid, const PositioningConfig& cfg) {
  const std::size_t nc = grid.cell_count();
  const auto& reg = grid.registry();

  std::vector<std::size_t> q_idx;
  std::vector<double> q_val;
  for (const auto& e : query) {
    // features unknown to the map still count towards the CDM union
    if (auto i = reg.index_of(e.id)) {
      q_idx.push_back(*i);
      q_val.push_back(e.rss);
    }
  }
  std::vector<std::size_t> ex_idx;
  for (const auto& id : excluded)
    if (auto i = reg.index_of(id); i && !query.contains(id)) ex_idx.push_back(*i);

  std::vector<double> out(nc, 0.0);
  if (cfg.dissimilarity == Dissimilarity::cdm) {
    std::vector<double> shared(nc, 0.0), gap(nc, 0.0), keys(nc);
    const auto& kc = grid.key_counts();
    for (std::size_t c = 0; c < nc; ++c) keys[c] = kc[c];
    for (std::size_t f : ex_idx) {
      const auto& pres = grid.presence(f);
      for (std::size_t c = 0; c < nc; ++c) keys[c] -= pres[c];
    }
    for (std::size_t j = 0; j < q_idx.size(); ++j) {
      const auto& col = grid.column(q_idx[j]);
      const auto& pres = grid.presence(q_idx[j]);
      const double q = q_val[j];
      for (std::size_t c = 0; c < nc; ++c) {
        shared[c] += pres[c];
        gap[c] += pres[c] * std::abs(q - static_cast<double>(col[c]));
      }
    }
    const double nq = static_cast<double>(query.size());
    for (std::size_t c = 0; c < nc; ++c)
      out[c] = cdm_from_counts(shared[c], nq + keys[c] - shared[c], gap[c], cfg.lambda_cdm);
    return out;
  }

  // Euclidean over registry dimensions, missing indicator as a value.
  const double m = cfg.missing_value;
  std::vector<char> omitted(reg.size(), 0);
  for (std::size_t f : q_idx) omitted[f] = 1;
  for (std::size_t f : ex_idx) omitted[f] = 1;
  if (m == kMissingDbm) {
    out = grid.indicator_energy();
    for (std::size_t f = 0; f < reg.size(); ++f) {
      if (!omitted[f]) continue;
      const auto& col = grid.column(f);
      for (std::size_t c = 0; c < nc; ++c) {
        const double d = static_cast<double>(col[c]) - m;
        out[c] -= d * d;
      }
    }
  } else {
    for (std::size_t f = 0; f < reg.size(); ++f) {
      if (omitted[f]) continue;
      const auto& col = grid.column(f);
      const auto& pres = grid.presence(f);
      for (std::size_t c = 0; c < nc; ++c) {
        const double d = pres[c] > 0.0f ? static_cast<double>(col[c]) - m : 0.0;
        out[c] += d * d;
      }
    }
  }
  for (std::size_t j = 0; j < q_idx.size(); ++j) {
    const auto& col = grid.column(q_idx[j]);
    const auto& pres = grid.presence(q_idx[j]);
    for (std::size_t c = 0; c < nc; ++c) {
      const double cv = pres[c] > 0.0f ? static_cast<double>(col[c]) : m;
      const double d = q_val[j] - cv;
      out[c] += d * d;
    }
  }
  for (auto& v : out) v = std::sqrt(std::max(v, 0.0));
  return out;
}

inline PositionEstimate select_neighbors(const std::vector<double>& dis, const RfmGrid& grid,
                                         const PositioningConfig& cfg) {
  std::vector<std::size_t> order(dis.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto k = static_cast<std::ptrdiff_t>(cfg.k);
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](std::size_t a, std::size_t b) {
    return dis[a] < dis[b] || (dis[a] == dis[b] && a < b);
  });
  PositionEstimate est;
  double wsum = 0.0;
  for (std::ptrdiff_t i = 0; i < k; ++i) {
    const std::size_t c = order[static_cast<std::size_t>(i)];
    const double w = cfg.inverse_distance_weighting ? 1.0 / (dis[c] + 1e-9) : 1.0;
    const Point2 p = grid.center(c);
    est.location.x += w * p.x;
    est.location.y += w * p.y;
    wsum += w;
    est.neighbors.push_back(c);
    est.dissimilarities.push_back(dis[c]);
  }
  est.location.x /= wsum;
  est.location.y /= wsum;
  return est;
}

}  // namespace detail

/// Mean location of the k cells most similar to `fp`; ties go to the lower
/// cell index.
inline PositionEstimate knn_locate(const Fingerprint& fp, const RfmGrid& grid, const PositioningConfig& cfg) {
  if (fp.empty()) throw InvalidInput("knn_locate: empty fingerprint");
  if (grid.empty()) throw InvalidInput("knn_locate: empty grid");
  cfg.validate(grid.cell_count());
  return detail::select_neighbors(detail::grid_dissimilarities(fp, {}, grid, cfg), grid, cfg);
}

/// kNN matching with the `excluded` features dropped from the query and from
/// the map, rather than filled with the missing indicator.
inline PositionEstimate knn_locate_dropout(const Fingerprint& fp, const std::vector<FeatureId>& excluded,
                                           const RfmGrid& grid, const PositioningConfig& cfg) {
  const Fingerprint query = without(fp, excluded);
  if (query.empty()) throw InvalidInput("knn_locate_dropout: every feature is excluded");
  if (grid.empty()) throw InvalidInput("knn_locate_dropout: empty grid");
  cfg.validate(grid.cell_count());
  return detail::select_neighbors(detail::grid_dissimilarities(query, excluded, grid, cfg), grid, cfg);
}

}  // namespace fpcd
