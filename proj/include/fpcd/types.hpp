#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fpcd/error.hpp"

namespace fpcd {

/// Sentinel RSS used wherever a feature is not measurable.
inline constexpr double kMissingDbm = -110.0;
inline constexpr double kMaxDbm = 0.0;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Opaque identifier of a measurable signal source, e.g. a MAC address.
/// Stored lower-cased; comparison is exact string comparison.
class FeatureId {
 public:
  FeatureId() = default;
  explicit FeatureId(std::string_view raw) : id_(raw) {
    // trim surrounding blanks, then canonicalize
    auto b = id_.find_first_not_of(" \t\r\n");
    auto e = id_.find_last_not_of(" \t\r\n");
    id_ = b == std::string::npos ? std::string{} : id_.substr(b, e - b + 1);
    std::transform(id_.begin(), id_.end(), id_.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (id_.empty()) throw InvalidInput("feature id must be non-empty");
  }

  const std::string& str() const noexcept { return id_; }

  friend bool operator==(const FeatureId&, const FeatureId&) = default;
  friend std::strong_ordering operator<=>(const FeatureId& a, const FeatureId& b) {
    int c = a.id_.compare(b.id_);
    return c < 0 ? std::strong_ordering::less : c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal;
  }

 private:
  std::string id_;
};

/// A set of (feature, RSS) pairs kept sorted by feature id.
class Fingerprint {
 public:
  struct Entry {
    FeatureId id;
    double rss;
  };

  Fingerprint() = default;
  Fingerprint(std::initializer_list<std::pair<std::string_view, double>> init) {
    for (const auto& [id, v] : init) set(FeatureId(id), v);
  }

  /// Inserts or overwrites.
  void set(const FeatureId& id, double rss) {
    auto it = lower(id);
    if (it != entries_.end() && it->id == id) {
      it->rss = rss;
    } else {
      entries_.insert(it, Entry{id, rss});
    }
  }

  /// Inserts; throws if the feature is already present.
  void insert_unique(const FeatureId& id, double rss) {
    auto it = lower(id);
    if (it != entries_.end() && it->id == id) throw InvalidInput("duplicate feature " + id.str());
    entries_.insert(it, Entry{id, rss});
  }

  bool erase(const FeatureId& id) {
    auto it = lower(id);
    if (it == entries_.end() || !(it->id == id)) return false;
    entries_.erase(it);
    return true;
  }

  std::optional<double> get(const FeatureId& id) const {
    auto it = lower(id);
    if (it == entries_.end() || !(it->id == id)) return std::nullopt;
    return it->rss;
  }

  bool contains(const FeatureId& id) const { return get(id).has_value(); }

  std::vector<FeatureId> keys() const {
    std::vector<FeatureId> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.id);
    return out;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  friend bool operator==(const Fingerprint& a, const Fingerprint& b) {
    return a.entries_.size() == b.entries_.size() &&
           std::equal(a.entries_.begin(), a.entries_.end(), b.entries_.begin(),
                      [](const Entry& x, const Entry& y) { return x.id == y.id && x.rss == y.rss; });
  }

 private:
  std::vector<Entry>::iterator lower(const FeatureId& id) {
    return std::lower_bound(entries_.begin(), entries_.end(), id,
                            [](const Entry& e, const FeatureId& k) { return e.id < k; });
  }
  std::vector<Entry>::const_iterator lower(const FeatureId& id) const {
    return std::lower_bound(entries_.begin(), entries_.end(), id,
                            [](const Entry& e, const FeatureId& k) { return e.id < k; });
  }

  std::vector<Entry> entries_;
};

/// Returns `fp` without the listed features.
inline Fingerprint without(const Fingerprint& fp, const std::vector<FeatureId>& excluded) {
  Fingerprint out = fp;
  for (const auto& id : excluded) out.erase(id);
  return out;
}

struct LabeledFingerprint {
  Point2 location;
  Fingerprint fingerprint;
  std::optional<double> timestamp;
  std::optional<int> block;
  std::string sample_id;
};

/// Ordered, duplicate-free list of every feature seen in a dataset.
class FeatureRegistry {
 public:
  FeatureRegistry() = default;
  explicit FeatureRegistry(const std::vector<FeatureId>& ids) {
    for (const auto& id : ids) add(id);
  }

  /// Appends `id` unless already present; returns its index either way.
  std::size_t add(const FeatureId& id) {
    auto [it, inserted] = index_.try_emplace(id.str(), ids_.size());
    if (inserted) ids_.push_back(id);
    return it->second;
  }

  std::optional<std::size_t> index_of(const FeatureId& id) const {
    auto it = index_.find(id.str());
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const FeatureId& operator[](std::size_t i) const { return ids_[i]; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  const std::vector<FeatureId>& ids() const noexcept { return ids_; }
  auto begin() const noexcept { return ids_.begin(); }
  auto end() const noexcept { return ids_.end(); }

  friend bool operator==(const FeatureRegistry& a, const FeatureRegistry& b) { return a.ids_ == b.ids_; }

 private:
  std::vector<FeatureId> ids_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Registry of all features in `samples`, in first-seen order.
inline FeatureRegistry build_registry(const std::vector<LabeledFingerprint>& samples) {
  FeatureRegistry reg;
  for (const auto& s : samples)
    for (const auto& e : s.fingerprint) reg.add(e.id);
  return reg;
}

}  // namespace fpcd
