#pragma once

// The reference fingerprint map: the discrete training set, the kernel
// smoother built on it, and the interpolated grid used online.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "fpcd/error.hpp"
#include "fpcd/kernel.hpp"
#include "fpcd/parallel.hpp"
#include "fpcd/spatial_index.hpp"
#include "fpcd/types.hpp"

namespace fpcd {

/// Predictions at or below this are treated as "not measurable".
inline constexpr double kPresenceMarginDbm = 1.0;
inline constexpr double kPresenceFloorDbm = kMissingDbm + kPresenceMarginDbm;

/// Labeled fingerprints plus their registry. Immutable once built.
class RfmTrainingSet {
 public:
  RfmTrainingSet() = default;
  explicit RfmTrainingSet(std::vector<LabeledFingerprint> samples, std::optional<FeatureRegistry> registry = {})
      : samples_(std::move(samples)) {
    for (const auto& s : samples_) {
      if (!std::isfinite(s.location.x) || !std::isfinite(s.location.y))
        throw InvalidInput("training sample has a non-finite location");
      if (s.block && *s.block < 1) throw InvalidInput("time block index must be >= 1");
    }
    registry_ = registry ? std::move(*registry) : FeatureRegistry{};
    for (const auto& s : samples_)
      for (const auto& e : s.fingerprint) registry_.add(e.id);
    locations_.reserve(samples_.size());
    for (const auto& s : samples_) locations_.push_back(s.location);
  }

  const std::vector<LabeledFingerprint>& samples() const noexcept { return samples_; }
  const FeatureRegistry& registry() const noexcept { return registry_; }
  const std::vector<Point2>& locations() const noexcept { return locations_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }

 private:
  std::vector<LabeledFingerprint> samples_;
  FeatureRegistry registry_;
  std::vector<Point2> locations_;
};

/// Axis-aligned region of interest.
struct Roi {
  double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;

  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  bool valid() const { return std::isfinite(min_x) && std::isfinite(max_x) && std::isfinite(min_y) &&
                              std::isfinite(max_y) && max_x >= min_x && max_y >= min_y; }

  friend bool operator==(const Roi&, const Roi&) = default;
};

inline Roi bounding_roi(const std::vector<Point2>& pts) {
  if (pts.empty()) throw InvalidInput("bounding_roi: no points");
  Roi r{pts[0].x, pts[0].y, pts[0].x, pts[0].y};
  for (const auto& p : pts) {
    r.min_x = std::min(r.min_x, p.x);
    r.min_y = std::min(r.min_y, p.y);
    r.max_x = std::max(r.max_x, p.x);
    r.max_y = std::max(r.max_y, p.y);
  }
  return r;
}

/// Kernel ridge regression per feature with the Matern 3/2 kernel.
///
/// Each feature is regressed on its own subset of reference points: those
/// that measured it, plus points that did not but lie within the query
/// radius of one that did (these contribute the missing indicator). The
/// regression is centred on the subset mean, so exact interpolation holds
/// at reference locations when reg == 0.
class KernelSmoother {
 public:
  KernelSmoother(RfmTrainingSet training, KernelParams kernel, QueryConfig query)
      : training_(std::move(training)), kernel_(kernel), query_(query) {
    kernel_.validate();
    query_.validate();
    build_subsets();
  }

  const RfmTrainingSet& training() const noexcept { return training_; }
  const KernelParams& kernel() const noexcept { return kernel_; }
  const QueryConfig& query() const noexcept { return query_; }
  const FeatureRegistry& registry() const noexcept { return training_.registry(); }
  double query_radius() const { return query_.radius(kernel_); }

  /// Full-subset prediction of `feature` at `loc`.
  double predict(const Point2& loc, const FeatureId& feature) const {
    const std::size_t f = feature_index(feature);
    const FullSolve& fs = full_solve(f);
    const auto& sub = subsets_[f];
    double acc = 0.0;
    for (std::size_t i = 0; i < sub.points.size(); ++i)
      acc += matern32(distance(loc, training_.locations()[sub.points[i]]), kernel_) * fs.weights[i];
    return fs.mean + acc;
  }

  /// Prediction using only subset points within `radius` of `loc`; the
  /// missing indicator when there are none.
  double predict_within(const Point2& loc, const FeatureId& feature, double radius) const {
    const std::size_t f = feature_index(feature);
    const auto near = index_.within(loc, radius);
    std::vector<std::size_t> pts;
    std::vector<double> vals;
    select_subset(f, near, pts, vals);
    if (pts.empty()) return kMissingDbm;
    return solve_at(loc, pts, vals);
  }

  /// Query-radius prediction with r = scale * length_scale.
  double predict_query(const Point2& loc, const FeatureId& feature) const {
    return predict_within(loc, feature, query_radius());
  }

  /// Query-radius predictions of every registry feature at `loc` (registry
  /// order; missing indicator where no subset point is in range). Features
  /// sharing the same local subset share one factorization.
  std::vector<double> predict_all_query(const Point2& loc) const {
    const auto near = index_.within(loc, query_radius());
    std::vector<double> out(registry().size(), kMissingDbm);
    std::map<std::vector<std::size_t>, Factorization> cache;
    std::vector<std::size_t> pts;
    std::vector<double> vals;
    for (std::size_t f = 0; f < out.size(); ++f) {
      select_subset(f, near, pts, vals);
      if (pts.empty()) continue;
      auto it = cache.find(pts);
      if (it == cache.end()) it = cache.emplace(pts, factorize(pts)).first;
      out[f] = apply(it->second, loc, pts, vals);
    }
    return out;
  }

  /// Fingerprint of features predicted above the presence floor at `loc`.
  Fingerprint expected(const Point2& loc) const {
    const auto all = predict_all_query(loc);
    Fingerprint fp;
    for (std::size_t f = 0; f < all.size(); ++f)
      if (all[f] > kPresenceFloorDbm) fp.set(registry()[f], all[f]);
    return fp;
  }

  /// Number of reference points in a feature's regression subset.
  std::size_t subset_size(const FeatureId& feature) const { return subsets_[feature_index(feature)].points.size(); }

 private:
  struct Subset {
    std::vector<std::size_t> points;  // ascending training indices
    std::vector<double> values;
    std::vector<int> slot;            // training index -> position in points, or -1
  };
  struct Factorization {
    Eigen::LDLT<Eigen::MatrixXd> ldlt;
    Eigen::MatrixXd gram;  // kept for the literal normal-equation form
  };
  struct FullSolve {
    double mean = 0.0;
    Eigen::VectorXd weights;
  };

  std::size_t feature_index(const FeatureId& f) const {
    auto i = registry().index_of(f);
    if (!i) throw InvalidInput("feature " + f.str() + " was never measured in the training set");
    return *i;
  }

  void build_subsets() {
    const auto& samples = training_.samples();
    const std::size_t n = samples.size();
    const double r = query_radius();
    index_ = SpatialIndex(training_.locations(), std::max(r, kernel_.length_scale));
    const std::size_t nf = registry().size();
    std::vector<std::vector<std::pair<std::size_t, double>>> measured(nf);
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& e : samples[i].fingerprint) measured[*registry().index_of(e.id)].emplace_back(i, e.rss);

    subsets_.assign(nf, {});
    std::vector<char> covered(n);
    for (std::size_t f = 0; f < nf; ++f) {
      std::fill(covered.begin(), covered.end(), 0);
      std::vector<double> value(n, kMissingDbm);
      for (const auto& [i, v] : measured[f]) {
        value[i] = v;
        covered[i] = 1;
      }
      for (const auto& [i, v] : measured[f])
        for (std::size_t j : index_.within(samples[i].location, r)) covered[j] = 1;
      Subset& s = subsets_[f];
      s.slot.assign(n, -1);
      for (std::size_t i = 0; i < n; ++i) {
        if (!covered[i]) continue;
        s.slot[i] = static_cast<int>(s.points.size());
        s.points.push_back(i);
        s.values.push_back(value[i]);
      }
    }
    full_ = std::make_unique<FullCache>(nf);
  }

  void select_subset(std::size_t f, const std::vector<std::size_t>& near, std::vector<std::size_t>& pts,
                     std::vector<double>& vals) const {
    pts.clear();
    vals.clear();
    const Subset& s = subsets_[f];
    for (std::size_t i : near) {
      const int k = s.slot[i];
      if (k < 0) continue;
      pts.push_back(i);
      vals.push_back(s.values[static_cast<std::size_t>(k)]);
    }
  }

  Factorization factorize(const std::vector<std::size_t>& pts) const {
    const auto m = static_cast<Eigen::Index>(pts.size());
    const auto& loc = training_.locations();
    Factorization fz;
    fz.gram.resize(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      fz.gram(a, a) = matern32(0.0, kernel_);
      for (Eigen::Index b = a + 1; b < m; ++b) {
        const double k = matern32(distance(loc[pts[a]], loc[pts[b]]), kernel_);
        fz.gram(a, b) = k;
        fz.gram(b, a) = k;
      }
    }
    Eigen::MatrixXd sys = kernel_.literal_normal_equations ? Eigen::MatrixXd(fz.gram.transpose() * fz.gram)
                                                           : fz.gram;
    sys.diagonal().array() += kernel_.reg;
    fz.ldlt.compute(sys);
    const auto d = fz.ldlt.vectorD().cwiseAbs();
    if (fz.ldlt.info() != Eigen::Success || !(d.minCoeff() > 1e-12 * std::max(1.0, d.maxCoeff())))
      throw NumericalFailure(
          "kernel smoothing system is singular (duplicated reference locations?); use a regularization > 0");
    return fz;
  }

  double apply(const Factorization& fz, const Point2& loc, const std::vector<std::size_t>& pts,
               const std::vector<double>& vals) const {
    const auto m = static_cast<Eigen::Index>(pts.size());
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    Eigen::VectorXd o(m), z(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      o(a) = vals[static_cast<std::size_t>(a)] - mean;
      z(a) = matern32(distance(loc, training_.locations()[pts[static_cast<std::size_t>(a)]]), kernel_);
    }
    return mean + z.dot(fz.ldlt.solve(o));
  }

  double solve_at(const Point2& loc, const std::vector<std::size_t>& pts, const std::vector<double>& vals) const {
    return apply(factorize(pts), loc, pts, vals);
  }

  struct FullCache {
    explicit FullCache(std::size_t n) : once(n), solves(n) {}
    std::vector<std::once_flag> once;
    std::vector<FullSolve> solves;
  };

  const FullSolve& full_solve(std::size_t f) const {
    std::call_once(full_->once[f], [&] {
      const Subset& s = subsets_[f];
      FullSolve fs;
      for (double v : s.values) fs.mean += v;
      fs.mean /= static_cast<double>(s.values.size());
      const Factorization fz = factorize(s.points);
      Eigen::VectorXd o(static_cast<Eigen::Index>(s.values.size()));
      for (Eigen::Index a = 0; a < o.size(); ++a) o(a) = s.values[static_cast<std::size_t>(a)] - fs.mean;
      fs.weights = fz.ldlt.solve(o);
      full_->solves[f] = std::move(fs);
    });
    return full_->solves[f];
  }

  RfmTrainingSet training_;
  KernelParams kernel_;
  QueryConfig query_;
  SpatialIndex index_;
  std::vector<Subset> subsets_;
  std::unique_ptr<FullCache> full_;
};

inline double ks_predict(const KernelSmoother& ks, const Point2& loc, const FeatureId& feature) {
  return ks.predict(loc, feature);
}

inline double ks_predict_query(const KernelSmoother& ks, const Point2& loc, const FeatureId& feature) {
  return ks.predict_query(loc, feature);
}

/// Replaces every sample's values by the smoother's query-radius prediction
/// at the sample location. Keys are kept, except those predicted at the
/// missing indicator and those the smoother has never seen.
inline RfmTrainingSet smooth_samples(const std::vector<LabeledFingerprint>& samples, const KernelSmoother& ks,
                                     Parallelism par = {}) {
  std::vector<LabeledFingerprint> out(samples.size());
  parallel_for(samples.size(), par, [&](std::size_t i) {
    const auto& s = samples[i];
    const auto all = ks.predict_all_query(s.location);
    LabeledFingerprint r = s;
    r.fingerprint = Fingerprint{};
    for (const auto& e : s.fingerprint) {
      const auto f = ks.registry().index_of(e.id);
      if (!f) continue;
      const double v = all[*f];
      if (v > kPresenceFloorDbm) r.fingerprint.set(e.id, std::min(v, kMaxDbm));
    }
    out[i] = std::move(r);
  });
  return RfmTrainingSet(std::move(out), ks.registry());
}

/// Denoises a training set with a smoother fitted on itself.
inline RfmTrainingSet smooth_dataset(const RfmTrainingSet& data, const KernelParams& kernel, const QueryConfig& query,
                                     Parallelism par = {}) {
  const KernelSmoother ks(data, kernel, query);
  return smooth_samples(data.samples(), ks, par);
}

/// Interpolated map over a regular grid. Values are stored as float32 with
/// NaN marking features that are not measurable in a cell.
class RfmGrid {
 public:
  RfmGrid() = default;
  RfmGrid(Roi roi, double spacing, FeatureRegistry registry, std::vector<float> values)
      : roi_(roi), spacing_(spacing), registry_(std::move(registry)), values_(std::move(values)) {
    if (!(spacing_ > 0.0)) throw InvalidInput("grid spacing must be > 0");
    if (!roi_.valid()) throw InvalidInput("grid ROI is invalid");
    nx_ = cells_along(roi_.width());
    ny_ = cells_along(roi_.height());
    if (values_.size() != cell_count() * registry_.size())
      throw InvalidInput("grid value matrix does not match cells x features");
    build_caches();
  }

  static std::size_t cells_along(double extent, double spacing) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(extent / spacing - 1e-9)));
  }

  const Roi& roi() const noexcept { return roi_; }
  double spacing() const noexcept { return spacing_; }
  std::size_t nx() const noexcept { return nx_; }
  std::size_t ny() const noexcept { return ny_; }
  std::size_t cell_count() const noexcept { return nx_ * ny_; }
  bool empty() const noexcept { return cell_count() == 0 || values_.empty(); }
  const FeatureRegistry& registry() const noexcept { return registry_; }
  const std::vector<float>& values() const noexcept { return values_; }

  Point2 center(std::size_t cell) const {
    const std::size_t ix = cell % nx_, iy = cell / nx_;
    return {roi_.min_x + (static_cast<double>(ix) + 0.5) * spacing_,
            roi_.min_y + (static_cast<double>(iy) + 0.5) * spacing_};
  }

  std::size_t nearest_cell(const Point2& p) const {
    const auto clampi = [](double v, std::size_t n) {
      if (!(v > 0.0)) return std::size_t{0};
      return std::min(static_cast<std::size_t>(v), n - 1);
    };
    const std::size_t ix = clampi(std::floor((p.x - roi_.min_x) / spacing_), nx_);
    const std::size_t iy = clampi(std::floor((p.y - roi_.min_y) / spacing_), ny_);
    return iy * nx_ + ix;
  }

  const Fingerprint& cell_fingerprint(std::size_t cell) const { return cell_fps_[cell]; }

  float value(std::size_t cell, std::size_t feature) const { return values_[cell * registry_.size() + feature]; }

  /// Feature-major copies used by the matcher: column f holds feature f's
  /// value in every cell (filled with the missing indicator when absent).
  const std::vector<float>& column(std::size_t f) const { return columns_[f]; }
  const std::vector<float>& presence(std::size_t f) const { return presence_[f]; }
  /// Number of measurable features per cell.
  const std::vector<float>& key_counts() const { return key_counts_; }
  /// Per-cell sum over features of (value - missing)^2, with missing = -110.
  const std::vector<double>& indicator_energy() const { return energy_; }

 private:
  std::size_t cells_along(double extent) const { return cells_along(extent, spacing_); }

  void build_caches() {
    const std::size_t nc = cell_count(), nf = registry_.size();
    cell_fps_.assign(nc, {});
    columns_.assign(nf, std::vector<float>(nc, static_cast<float>(kMissingDbm)));
    presence_.assign(nf, std::vector<float>(nc, 0.0f));
    key_counts_.assign(nc, 0.0f);
    energy_.assign(nc, 0.0);
    for (std::size_t c = 0; c < nc; ++c) {
      for (std::size_t f = 0; f < nf; ++f) {
        const float v = values_[c * nf + f];
        if (std::isnan(v)) continue;
        cell_fps_[c].set(registry_[f], static_cast<double>(v));
        columns_[f][c] = v;
        presence_[f][c] = 1.0f;
        key_counts_[c] += 1.0f;
        const double d = static_cast<double>(v) - kMissingDbm;
        energy_[c] += d * d;
      }
    }
  }

  Roi roi_{};
  double spacing_ = 0.5;
  std::size_t nx_ = 0, ny_ = 0;
  FeatureRegistry registry_;
  std::vector<float> values_;
  std::vector<Fingerprint> cell_fps_;
  std::vector<std::vector<float>> columns_;
  std::vector<std::vector<float>> presence_;
  std::vector<float> key_counts_;
  std::vector<double> energy_;
};

/// Evaluates the smoother at every cell centre.
inline RfmGrid interpolate_grid(const KernelSmoother& ks, const Roi& roi, double spacing = 0.5,
                                Parallelism par = {}) {
  if (!roi.valid()) throw InvalidInput("interpolate_grid: empty or invalid ROI");
  if (!(spacing > 0.0)) throw InvalidInput("interpolate_grid: spacing must be > 0");
  const std::size_t nx = RfmGrid::cells_along(roi.width(), spacing);
  const std::size_t ny = RfmGrid::cells_along(roi.height(), spacing);
  const std::size_t nf = ks.registry().size();
  std::vector<float> values(nx * ny * nf, std::numeric_limits<float>::quiet_NaN());
  parallel_for(nx * ny, par, [&](std::size_t c) {
    const Point2 p{roi.min_x + (static_cast<double>(c % nx) + 0.5) * spacing,
                   roi.min_y + (static_cast<double>(c / nx) + 0.5) * spacing};
    const auto all = ks.predict_all_query(p);
    for (std::size_t f = 0; f < nf; ++f)
      if (all[f] > kPresenceFloorDbm) values[c * nf + f] = static_cast<float>(std::min(all[f], kMaxDbm));
  });
  return RfmGrid(roi, spacing, ks.registry(), std::move(values));
}

/// The world model's expected fingerprint at `loc`.
inline const Fingerprint& expected_fingerprint(const RfmGrid& grid, const Point2& loc) {
  return grid.cell_fingerprint(grid.nearest_cell(loc));
}

inline Fingerprint expected_fingerprint(const KernelSmoother& ks, const Point2& loc) { return ks.expected(loc); }

}  // namespace fpcd
