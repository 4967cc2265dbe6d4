#pragma once

// Survey CSV ingestion and emission.
//
// Two shapes are accepted, both preceded by a metadata line declaring the
// missing-value sentinel (`# missing=100` or `# missing=-110`):
//
//   wide:  [sample_id,] x, y, [block,] [timestamp,] <feature>, <feature>, ...
//   long:  sample_id, x, y, [block,] [timestamp,] feature_id, rss
//
// The long shape is recognized by its feature_id and rss columns.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "fpcd/error.hpp"
#include "fpcd/rfm.hpp"
#include "fpcd/types.hpp"

namespace fpcd::io {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_number(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Splits one CSV record. Double-quoted fields may contain commas and
/// doubled quotes; embedded newlines are not supported.
inline std::vector<std::string> split_record(std::string_view line, std::size_t lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = was_quoted = true;
    } else if (c == ',') {
      out.push_back(was_quoted ? cur : std::string(trim(cur)));
      cur.clear();
      was_quoted = false;
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", lineno);
  out.push_back(was_quoted ? cur : std::string(trim(cur)));
  return out;
}

inline std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

enum class CsvShape { wide, long_form };

struct IngestReport {
  CsvShape shape = CsvShape::wide;
  double sentinel = kMissingDbm;
  std::size_t rows = 0;
  std::size_t clamped_low = 0;     // values raised to the missing indicator
  std::size_t clamped_high = 0;    // values lowered to 0 dBm
  std::size_t rejected_rows = 0;   // non-finite coordinates
};

struct Dataset {
  std::vector<LabeledFingerprint> samples;
  FeatureRegistry registry;
  IngestReport report;

  RfmTrainingSet training_set() const { return RfmTrainingSet(samples, registry); }
};

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

/// Parses `# missing=<value>`; nullopt if the line is not that declaration.
inline std::optional<double> sentinel_of(std::string_view line, std::size_t lineno) {
  std::string_view s = trim(line);
  if (s.empty() || s.front() != '#') return std::nullopt;
  s = trim(s.substr(1));
  const auto eq = s.find('=');
  if (eq == std::string_view::npos || lower(trim(s.substr(0, eq))) != "missing") return std::nullopt;
  const auto v = parse_number(s.substr(eq + 1));
  if (!v) throw ParseError("unknown missing-value sentinel '" + std::string(trim(s.substr(eq + 1))) + "'", lineno);
  if (*v != 100.0 && *v != kMissingDbm)
    throw ParseError("unknown missing-value sentinel " + format_number(*v) + " (expected 100 or -110)", lineno);
  return *v;
}

struct RowContext {
  double sentinel;
  IngestReport* report;
  std::size_t lineno;
};

/// Normalized RSS, or nullopt when the cell means "not measured".
inline std::optional<double> normalize_rss(std::string_view cell, const RowContext& ctx, const std::string& column) {
  if (trim(cell).empty()) return std::nullopt;
  const auto v = parse_number(cell);
  if (!v || std::isnan(*v)) throw ParseError("column '" + column + "': not a number: '" + std::string(cell) + "'",
                                             ctx.lineno);
  if (*v == ctx.sentinel) return std::nullopt;
  double x = *v;
  if (x < kMissingDbm) {
    ++ctx.report->clamped_low;
    x = kMissingDbm;
  } else if (x > kMaxDbm) {
    ++ctx.report->clamped_high;
    x = kMaxDbm;
  }
  if (x <= kMissingDbm) return std::nullopt;
  return x;
}

inline double coordinate(std::string_view cell, const char* name, std::size_t lineno) {
  const auto v = parse_number(cell);
  if (!v) throw ParseError(std::string("bad ") + name + " coordinate '" + std::string(cell) + "'", lineno);
  return *v;
}

inline std::optional<int> block_of(std::string_view cell, std::size_t lineno) {
  if (trim(cell).empty()) return std::nullopt;
  const auto v = parse_number(cell);
  if (!v || *v != std::floor(*v) || *v < 1.0 || *v > 2.0e9) throw ParseError("block must be an integer >= 1", lineno);
  return static_cast<int>(*v);
}

inline std::optional<double> timestamp_of(std::string_view cell, std::size_t lineno) {
  if (trim(cell).empty()) return std::nullopt;
  const auto v = parse_number(cell);
  if (!v || !std::isfinite(*v)) throw ParseError("bad timestamp '" + std::string(cell) + "'", lineno);
  return *v;
}

}  // namespace detail

/// Reads a survey in either CSV shape.
inline Dataset read_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  std::optional<double> sentinel;
  std::vector<std::string> header;
  std::size_t header_line = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    if (trim(line).front() == '#') {
      if (auto s = detail::sentinel_of(line, lineno)) sentinel = s;
      continue;
    }
    header = split_record(line, lineno);
    header_line = lineno;
    break;
  }
  if (header.empty()) throw ParseError("missing header row", lineno ? lineno : 1);
  if (!sentinel) throw ParseError("missing '# missing=<sentinel>' metadata line before the header", header_line);
  ds.report.sentinel = *sentinel;

  std::map<std::string, std::size_t> reserved;
  std::vector<std::pair<std::size_t, FeatureId>> feature_cols;
  std::set<std::string> seen;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name = detail::lower(trim(header[c]));
    if (name.empty()) throw ParseError("empty column name in header (column " + std::to_string(c + 1) + ")", header_line);
    if (!seen.insert(name).second) throw ParseError("duplicate column '" + header[c] + "'", header_line);
    if (name == "sample_id" || name == "x" || name == "y" || name == "block" || name == "timestamp" ||
        name == "feature_id" || name == "rss") {
      reserved[name] = c;
    } else {
      feature_cols.emplace_back(c, FeatureId(name));
    }
  }
  if (!reserved.count("x") || !reserved.count("y")) throw ParseError("header lacks x and y columns", header_line);
  const bool is_long = reserved.count("feature_id") || reserved.count("rss");
  if (is_long) {
    if (!reserved.count("feature_id") || !reserved.count("rss") || !reserved.count("sample_id"))
      throw ParseError("long format needs sample_id, feature_id and rss columns", header_line);
    if (!feature_cols.empty())
      throw ParseError("unexpected column '" + header[feature_cols.front().first] + "' in long format", header_line);
  }
  ds.report.shape = is_long ? CsvShape::long_form : CsvShape::wide;
  const auto col = [&](const char* n) -> std::optional<std::size_t> {
    auto it = reserved.find(n);
    if (it == reserved.end()) return std::nullopt;
    return it->second;
  };

  std::unordered_map<std::string, std::size_t> sample_index;
  std::vector<std::map<std::string, std::size_t>> first_line;  // long form: feature -> line
  std::vector<char> rejected_sample;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    const auto cells = split_record(line, lineno);
    if (cells.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(cells.size()),
                       lineno);
    ++ds.report.rows;
    const detail::RowContext ctx{*sentinel, &ds.report, lineno};
    const double x = detail::coordinate(cells[*col("x")], "x", lineno);
    const double y = detail::coordinate(cells[*col("y")], "y", lineno);
    const bool finite = std::isfinite(x) && std::isfinite(y);
    const auto block = col("block") ? detail::block_of(cells[*col("block")], lineno) : std::nullopt;
    const auto ts = col("timestamp") ? detail::timestamp_of(cells[*col("timestamp")], lineno) : std::nullopt;

    if (!is_long) {
      if (!finite) {
        ++ds.report.rejected_rows;
        continue;
      }
      LabeledFingerprint lf;
      lf.location = {x, y};
      lf.block = block;
      lf.timestamp = ts;
      lf.sample_id = col("sample_id") ? cells[*col("sample_id")] : "r" + std::to_string(ds.samples.size());
      for (const auto& [c, id] : feature_cols) {
        ds.registry.add(id);
        if (auto v = detail::normalize_rss(cells[c], ctx, id.str())) lf.fingerprint.set(id, *v);
      }
      ds.samples.push_back(std::move(lf));
      continue;
    }

    const std::string sid = cells[*col("sample_id")];
    if (sid.empty()) throw ParseError("empty sample_id", lineno);
    const std::string& fraw = cells[*col("feature_id")];
    if (trim(fraw).empty()) throw ParseError("empty feature_id", lineno);
    const FeatureId fid(fraw);
    auto [it, fresh] = sample_index.try_emplace(sid, ds.samples.size());
    if (fresh) {
      LabeledFingerprint lf;
      lf.location = {x, y};
      lf.block = block;
      lf.timestamp = ts;
      lf.sample_id = sid;
      ds.samples.push_back(std::move(lf));
      first_line.emplace_back();
      rejected_sample.push_back(finite ? 0 : 1);
      if (!finite) ++ds.report.rejected_rows;
    } else {
      const auto& s = ds.samples[it->second];
      const bool same_loc = (s.location.x == x || (std::isnan(s.location.x) && std::isnan(x))) &&
                            (s.location.y == y || (std::isnan(s.location.y) && std::isnan(y)));
      if (!same_loc || s.block != block) throw ParseError("sample '" + sid + "' changes location or block", lineno);
    }
    auto& lines = first_line[it->second];
    if (auto [li, ok] = lines.try_emplace(fid.str(), lineno); !ok)
      throw ParseError("duplicate feature '" + fid.str() + "' for sample '" + sid + "' (first on line " +
                           std::to_string(li->second) + ")",
                       lineno);
    if (rejected_sample[it->second]) continue;
    ds.registry.add(fid);
    if (auto v = detail::normalize_rss(cells[*col("rss")], ctx, "rss")) ds.samples[it->second].fingerprint.set(fid, *v);
  }

  if (is_long) {
    std::vector<LabeledFingerprint> kept;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
      if (!rejected_sample[i]) kept.push_back(std::move(ds.samples[i]));
    ds.samples = std::move(kept);
  }
  return ds;
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return read_dataset(in);
}

inline RfmTrainingSet ingest(const std::string& path) { return read_dataset(path).training_set(); }

namespace detail {
inline void write_meta_columns(std::ostream& out, const LabeledFingerprint& s, bool with_block, bool with_ts) {
  out << s.sample_id << ',' << format_number(s.location.x) << ',' << format_number(s.location.y);
  if (with_block) out << ',' << (s.block ? std::to_string(*s.block) : std::string{});
  if (with_ts) out << ',' << (s.timestamp ? format_number(*s.timestamp) : std::string{});
}

inline bool any_block(const std::vector<LabeledFingerprint>& v) {
  return std::any_of(v.begin(), v.end(), [](const auto& s) { return s.block.has_value(); });
}
inline bool any_timestamp(const std::vector<LabeledFingerprint>& v) {
  return std::any_of(v.begin(), v.end(), [](const auto& s) { return s.timestamp.has_value(); });
}
}  // namespace detail

/// Wide CSV with one column per registry feature; unmeasured cells hold the
/// sentinel.
inline void write_wide(std::ostream& out, const std::vector<LabeledFingerprint>& samples,
                       const FeatureRegistry& registry, double sentinel = kMissingDbm) {
  const bool blk = detail::any_block(samples), ts = detail::any_timestamp(samples);
  out << "# missing=" << format_number(sentinel) << '\n';
  out << "sample_id,x,y";
  if (blk) out << ",block";
  if (ts) out << ",timestamp";
  for (const auto& id : registry) out << ',' << id.str();
  out << '\n';
  for (const auto& s : samples) {
    detail::write_meta_columns(out, s, blk, ts);
    for (const auto& id : registry) out << ',' << format_number(s.fingerprint.get(id).value_or(sentinel));
    out << '\n';
  }
}

/// Long CSV: one row per measured (sample, feature) pair, features in
/// registry order within a sample. The first sample lists every registry
/// feature (sentinel where unmeasured) so that reading the file back
/// reproduces the registry order; samples with nothing measured keep one
/// sentinel row.
inline void write_long(std::ostream& out, const std::vector<LabeledFingerprint>& samples,
                       const FeatureRegistry& registry) {
  const bool blk = detail::any_block(samples), ts = detail::any_timestamp(samples);
  out << "# missing=-110\n";
  out << "sample_id,x,y";
  if (blk) out << ",block";
  if (ts) out << ",timestamp";
  out << ",feature_id,rss\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    bool wrote = false;
    for (const auto& id : registry) {
      const auto v = s.fingerprint.get(id);
      if (!v && i != 0 && (wrote || !s.fingerprint.empty())) continue;
      detail::write_meta_columns(out, s, blk, ts);
      out << ',' << id.str() << ',' << format_number(v.value_or(kMissingDbm)) << '\n';
      wrote = true;
    }
  }
}

}  // namespace fpcd::io
