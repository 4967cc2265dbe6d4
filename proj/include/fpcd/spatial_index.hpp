#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "fpcd/types.hpp"

namespace fpcd {

/// Uniform bucket grid over a fixed point set, answering radius queries.
class SpatialIndex {
 public:
  SpatialIndex() = default;
  SpatialIndex(std::vector<Point2> points, double bucket_size) : points_(std::move(points)), bucket_(bucket_size) {
    if (points_.empty()) return;
    if (!(bucket_ > 0.0)) bucket_ = 1.0;
    min_x_ = min_y_ = std::numeric_limits<double>::infinity();
    double max_x = -min_x_, max_y = -min_y_;
    for (const auto& p : points_) {
      min_x_ = std::min(min_x_, p.x);
      min_y_ = std::min(min_y_, p.y);
      max_x = std::max(max_x, p.x);
      max_y = std::max(max_y, p.y);
    }
    // cap the bucket count so a tiny bucket on a huge extent cannot explode memory
    const double span = std::max(max_x - min_x_, max_y - min_y_);
    bucket_ = std::max(bucket_, span / 2048.0);
    nx_ = static_cast<std::size_t>(std::floor((max_x - min_x_) / bucket_)) + 1;
    ny_ = static_cast<std::size_t>(std::floor((max_y - min_y_) / bucket_)) + 1;
    buckets_.assign(nx_ * ny_, {});
    for (std::size_t i = 0; i < points_.size(); ++i) buckets_[bucket_of(points_[i])].push_back(i);
  }

  /// Indices of points within `radius` (inclusive) of `center`, ascending.
  std::vector<std::size_t> within(const Point2& center, double radius) const {
    std::vector<std::size_t> out;
    if (points_.empty() || !(radius >= 0.0)) return out;
    const auto clampi = [](double v, std::size_t n) -> std::size_t {
      if (v < 0.0) return 0;
      const auto i = static_cast<std::size_t>(v);
      return std::min(i, n - 1);
    };
    const double fx0 = std::floor((center.x - radius - min_x_) / bucket_);
    const double fx1 = std::floor((center.x + radius - min_x_) / bucket_);
    const double fy0 = std::floor((center.y - radius - min_y_) / bucket_);
    const double fy1 = std::floor((center.y + radius - min_y_) / bucket_);
    if (fx1 < 0.0 || fy1 < 0.0 || fx0 >= static_cast<double>(nx_) || fy0 >= static_cast<double>(ny_)) return out;
    const std::size_t x0 = clampi(fx0, nx_), x1 = clampi(fx1, nx_);
    const std::size_t y0 = clampi(fy0, ny_), y1 = clampi(fy1, ny_);
    for (std::size_t by = y0; by <= y1; ++by)
      for (std::size_t bx = x0; bx <= x1; ++bx)
        for (std::size_t i : buckets_[by * nx_ + bx])
          if (distance(points_[i], center) <= radius) out.push_back(i);
    std::sort(out.begin(), out.end());
    return out;
  }

  const std::vector<Point2>& points() const noexcept { return points_; }

 private:
  std::size_t bucket_of(const Point2& p) const {
    auto ix = static_cast<std::size_t>(std::floor((p.x - min_x_) / bucket_));
    auto iy = static_cast<std::size_t>(std::floor((p.y - min_y_) / bucket_));
    return std::min(iy, ny_ - 1) * nx_ + std::min(ix, nx_ - 1);
  }

  std::vector<Point2> points_;
  double bucket_ = 1.0;
  double min_x_ = 0.0, min_y_ = 0.0;
  std::size_t nx_ = 0, ny_ = 0;
  std::vector<std::vector<std::size_t>> buckets_;
};

}  // namespace fpcd
