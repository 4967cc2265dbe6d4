#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "fpcd/rfm.hpp"
#include "fpcd/types.hpp"

namespace fpcd::testing {

inline LabeledFingerprint sample_at(double x, double y, Fingerprint fp) {
  LabeledFingerprint lf;
  lf.location = {x, y};
  lf.fingerprint = std::move(fp);
  return lf;
}

/// A grid of nx x ny unit cells whose fingerprints are given row by row.
inline RfmGrid make_grid(std::size_t nx, std::size_t ny, const FeatureRegistry& reg,
                         const std::vector<Fingerprint>& cells, double spacing = 1.0) {
  std::vector<float> values(nx * ny * reg.size(), std::numeric_limits<float>::quiet_NaN());
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (const auto& e : cells[c]) values[c * reg.size() + *reg.index_of(e.id)] = static_cast<float>(e.rss);
  return RfmGrid(Roi{0, 0, static_cast<double>(nx) * spacing, static_cast<double>(ny) * spacing}, spacing, reg,
                 std::move(values));
}

inline FeatureRegistry registry_of(std::initializer_list<const char*> ids) {
  FeatureRegistry reg;
  for (const char* id : ids) reg.add(FeatureId(id));
  return reg;
}

}  // namespace fpcd::testing
