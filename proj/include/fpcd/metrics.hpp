#pragma once

// Positioning and detection metrics.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <vector>

#include "fpcd/change_detection.hpp"
#include "fpcd/error.hpp"
#include "fpcd/labeling.hpp"
#include "fpcd/simulation.hpp"
#include "fpcd/types.hpp"

namespace fpcd {

/// Fraction of errors no larger than `radius`.
inline double ecdf_accuracy(const std::vector<double>& errors, double radius) {
  if (errors.empty()) throw InvalidInput("ecdf_accuracy: no errors");
  std::size_t n = 0;
  for (double e : errors) n += e <= radius ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(errors.size());
}

struct EcdfCurve {
  std::vector<double> sorted;

  explicit EcdfCurve(std::vector<double> errors) : sorted(std::move(errors)) {
    if (sorted.empty()) throw InvalidInput("EcdfCurve: no errors");
    std::sort(sorted.begin(), sorted.end());
  }

  double operator()(double radius) const {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), radius);
    return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
  }
};

/// Area of the covariance ellipse of `points`, scaled by `sigma_scale`
/// standard deviations along each axis: pi * s^2 * sqrt(l1 * l2), using the
/// unbiased (n - 1) covariance. Rank-deficient sets have zero area.
inline double dispersiveness(const std::vector<Point2>& points, double sigma_scale = 1.0) {
  if (points.size() < 2) throw InvalidInput("dispersiveness: need at least two points");
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.x;
    my += p.y;
  }
  const auto n = static_cast<double>(points.size());
  mx /= n;
  my /= n;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector2d d(p.x - mx, p.y - my);
    cov += d * d.transpose();
  }
  cov /= (n - 1.0);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov, Eigen::EigenvaluesOnly);
  const double l_min = eig.eigenvalues()(0), l_max = eig.eigenvalues()(1);
  if (!(l_min > 1e-12 * std::max(l_max, 1e-300))) return 0.0;
  return std::numbers::pi * sigma_scale * sigma_scale * std::sqrt(l_min * l_max);
}

/// Smallest distance from any point to `truth`.
inline double bias(const std::vector<Point2>& points, const Point2& truth) {
  if (points.empty()) throw InvalidInput("bias: no points");
  double best = distance(points.front(), truth);
  for (const auto& p : points) best = std::min(best, distance(p, truth));
  return best;
}

struct Bandwidth {
  double alpha_l = 0.0;
  double alpha_m = 0.0;
  double alpha_r = 0.0;
};

/// Sampling-ratio interval around the bias minimum where bias stays within
/// sqrt(2) of the minimum. Ratios beyond the sweep saturate at its edges.
inline Bandwidth bandwidth_3db(const std::map<double, double>& bias_by_ratio) {
  if (bias_by_ratio.size() < 3) throw InvalidInput("bandwidth_3db: need at least three ratios");
  std::vector<std::pair<double, double>> pts(bias_by_ratio.begin(), bias_by_ratio.end());
  std::size_t m = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].second < pts[m].second) m = i;
  const double limit = std::sqrt(2.0) * pts[m].second;
  std::size_t l = m, r = m;
  while (l > 0 && pts[l - 1].second <= limit) --l;
  while (r + 1 < pts.size() && pts[r + 1].second <= limit) ++r;
  return {pts[l].first, pts[m].first, pts[r].first};
}

struct Confusion {
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;

  double tpr() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
  double tnr() const { return tn + fp ? static_cast<double>(tn) / static_cast<double>(tn + fp) : 0.0; }
  double fpr() const { return 1.0 - tnr(); }
  std::size_t total() const { return tp + fn + tn + fp; }
};

/// One scored feature with its ground truth.
struct ScoredLabel {
  double belief = 0.0;
  bool changed = false;
};

/// Pairs beliefs with labels by feature id. Both sides must cover exactly the
/// same features.
inline std::vector<ScoredLabel> pair_beliefs(const ChangeBeliefSet& beliefs, const ChangeLabels& labels) {
  if (beliefs.size() != labels.size()) throw InvalidInput("beliefs and labels cover different features");
  std::vector<FeatureBelief> b = beliefs;
  std::vector<FeatureLabel> l = labels;
  std::sort(b.begin(), b.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
  std::sort(l.begin(), l.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
  std::vector<ScoredLabel> out;
  out.reserve(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!(b[i].id == l[i].id)) throw InvalidInput("beliefs and labels disagree on feature " + b[i].id.str());
    out.push_back({b[i].belief, l[i].status == ChangeStatus::changed});
  }
  return out;
}

/// Scores every labeled feature. Labeled features the belief set does not
/// cover (unmeasured and not expected) score 0; beliefs about features the
/// labels do not cover are ignored.
inline std::vector<ScoredLabel> align_beliefs(const ChangeBeliefSet& beliefs, const ChangeLabels& labels) {
  std::vector<ScoredLabel> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    const auto it = std::lower_bound(beliefs.begin(), beliefs.end(), l.id,
                                     [](const FeatureBelief& b, const FeatureId& id) { return b.id < id; });
    const double b = (it != beliefs.end() && it->id == l.id) ? it->belief : 0.0;
    out.push_back({b, l.status == ChangeStatus::changed});
  }
  return out;
}

/// Positive = changed; predicted positive iff belief >= threshold.
inline Confusion confusion(const std::vector<ScoredLabel>& scored, double threshold) {
  Confusion c;
  for (const auto& s : scored) {
    const bool pos = s.belief >= threshold;
    if (s.changed) {
      pos ? ++c.tp : ++c.fn;
    } else {
      pos ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

inline Confusion confusion(const ChangeBeliefSet& beliefs, const ChangeLabels& labels, double threshold) {
  return confusion(pair_beliefs(beliefs, labels), threshold);
}

struct RocPoint {
  double threshold;
  double tpr;
  double tnr;
};

struct RocCurve {
  std::vector<RocPoint> points;  // thresholds ascending
  double auc = 0.0;
};

/// ROC over thresholds {0, 1} plus every distinct belief; the area is the
/// trapezoidal integral of TPR over FPR, which equals the Mann-Whitney
/// statistic with ties counted one half.
inline RocCurve roc_auc(const std::vector<ScoredLabel>& scored) {
  std::size_t pos = 0, neg = 0;
  for (const auto& s : scored) (s.changed ? pos : neg) += 1;
  if (pos == 0 || neg == 0) throw InvalidInput("roc_auc: both classes must be present");

  std::vector<double> thr{0.0, 1.0};
  for (const auto& s : scored) thr.push_back(s.belief);
  std::sort(thr.begin(), thr.end());
  thr.erase(std::unique(thr.begin(), thr.end()), thr.end());

  RocCurve roc;
  for (double t : thr) {
    const Confusion c = confusion(scored, t);
    roc.points.push_back({t, c.tpr(), c.tnr()});
  }
  // integrate from (fpr, tpr) = (0, 0); thresholds descending walk fpr upwards
  double prev_fpr = 0.0, prev_tpr = 0.0;
  for (auto it = roc.points.rbegin(); it != roc.points.rend(); ++it) {
    const double fpr = 1.0 - it->tnr;
    roc.auc += (fpr - prev_fpr) * 0.5 * (it->tpr + prev_tpr);
    prev_fpr = fpr;
    prev_tpr = it->tpr;
  }
  roc.auc += (1.0 - prev_fpr) * 0.5 * (1.0 + prev_tpr);
  return roc;
}

inline RocCurve roc_auc(const ChangeBeliefSet& beliefs, const ChangeLabels& labels) {
  return roc_auc(pair_beliefs(beliefs, labels));
}

}  // namespace fpcd
