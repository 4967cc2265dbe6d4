#pragma once

// Loader for the UJI long-term WiFi dataset layout:
//
//   <root>/<MM>/trn<MM>rss.csv, trn<MM>crd.csv   (MM = 01, 02, ...)
//   <root>/<MM>/tst<MM>rss.csv, tst<MM>crd.csv
//
// rss rows hold one value per WAP with 100 meaning "not detected"; crd rows
// hold x, y, floor. Every file becomes one time block, numbered in month
// order with the training file first.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "fpcd/error.hpp"
#include "fpcd/io/csv.hpp"
#include "fpcd/types.hpp"

namespace fpcd::io {

inline constexpr double kUjiSentinel = 100.0;

struct UjiOptions {
  std::optional<int> floor = 3;
  std::optional<int> first_month;
  std::optional<int> last_month;
};

namespace detail {
inline std::vector<std::vector<double>> read_numeric_rows(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ParseError("cannot open " + p.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split_record(line, lineno)) {
      const auto v = parse_number(cell);
      if (!v) throw ParseError(p.filename().string() + ": not a number '" + cell + "'", lineno);
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string wap_name(std::size_t i) {
  std::string n = std::to_string(i + 1);
  return "wap" + std::string(n.size() < 3 ? 3 - n.size() : 0, '0') + n;
}
}  // namespace detail

/// Samples of the selected floor; `block` numbers the source files.
inline Dataset load_uji(const std::filesystem::path& root, const UjiOptions& opt = {}) {
  if (!std::filesystem::is_directory(root)) throw ParseError("UJI root " + root.string() + " is not a directory");
  std::vector<std::string> months;
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory()) months.push_back(e.path().filename().string());
  std::sort(months.begin(), months.end());

  Dataset ds;
  ds.report.sentinel = kUjiSentinel;
  int block = 0;
  for (const auto& m : months) {
    const auto mnum = parse_number(m);
    if (!mnum) continue;
    if (opt.first_month && *mnum < *opt.first_month) continue;
    if (opt.last_month && *mnum > *opt.last_month) continue;
    for (const char* kind : {"trn", "tst"}) {
      const auto rss_path = root / m / (std::string(kind) + m + "rss.csv");
      const auto crd_path = root / m / (std::string(kind) + m + "crd.csv");
      if (!std::filesystem::exists(rss_path) || !std::filesystem::exists(crd_path)) continue;
      ++block;
      const auto rss = detail::read_numeric_rows(rss_path);
      const auto crd = detail::read_numeric_rows(crd_path);
      if (rss.size() != crd.size()) throw ParseError(rss_path.string() + ": row count differs from coordinates");
      for (std::size_t r = 0; r < rss.size(); ++r) {
        if (crd[r].size() < 3) throw ParseError(crd_path.string() + ": need x, y, floor", r + 1);
        if (opt.floor && static_cast<int>(crd[r][2]) != *opt.floor) continue;
        if (!std::isfinite(crd[r][0]) || !std::isfinite(crd[r][1])) {
          ++ds.report.rejected_rows;
          continue;
        }
        LabeledFingerprint lf;
        lf.location = {crd[r][0], crd[r][1]};
        lf.block = block;
        lf.sample_id = std::string(kind) + m + "-" + std::to_string(r + 1);
        for (std::size_t f = 0; f < rss[r].size(); ++f) {
          const FeatureId id(detail::wap_name(f));
          ds.registry.add(id);
          double v = rss[r][f];
          if (v == kUjiSentinel) continue;
          if (v < kMissingDbm) {
            ++ds.report.clamped_low;
            continue;
          }
          if (v > kMaxDbm) {
            ++ds.report.clamped_high;
            v = kMaxDbm;
          }
          if (v > kMissingDbm) lf.fingerprint.set(id, v);
        }
        ++ds.report.rows;
        ds.samples.push_back(std::move(lf));
      }
    }
  }
  if (ds.samples.empty()) throw ParseError("no UJI samples found under " + root.string());
  return ds;
}

}  // namespace fpcd::io
