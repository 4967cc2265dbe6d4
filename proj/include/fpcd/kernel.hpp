#pragma once

#include <cmath>
#include <numbers>

#include "fpcd/error.hpp"

namespace fpcd {

/// Hyper-parameters of the kernel-smoothing world model.
struct KernelParams {
  double length_scale = 1.0;  // meters
  double amplitude = 1.0;     // kernel sigma_k; the kernel scales with its square
  double reg = 1.0;           // ridge term sigma^2 added to the Gram diagonal
  /// Solve with (G'G + reg*I) instead of (G + reg*I).
  bool literal_normal_equations = false;

  void validate() const {
    if (!(length_scale > 0.0)) throw InvalidInput("kernel length scale must be > 0");
    if (!(amplitude > 0.0)) throw InvalidInput("kernel amplitude must be > 0");
    if (!(reg >= 0.0)) throw InvalidInput("kernel regularization must be >= 0");
  }
};

/// Neighborhood used by the query-radius variant: r = scale * length_scale.
struct QueryConfig {
  double scale = 5.0;

  double radius(const KernelParams& k) const { return scale * k.length_scale; }

  void validate() const {
    if (!(scale > 1.0)) throw InvalidInput("query scale must be > 1");
  }
};

/// Matern kernel with nu = 3/2.
inline double matern32(double d, const KernelParams& p) {
  const double r = std::numbers::sqrt3 * d / p.length_scale;
  return p.amplitude * p.amplitude * (1.0 + r) * std::exp(-r);
}

}  // namespace fpcd
