#pragma once

// Layered key=value run configuration: built-in defaults, then a config
// file, then FPCD_* environment variables, then command-line overrides.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fpcd/change_detection.hpp"
#include "fpcd/error.hpp"
#include "fpcd/io/csv.hpp"
#include "fpcd/kernel.hpp"
#include "fpcd/positioning.hpp"
#include "fpcd/robust.hpp"
#include "fpcd/simulation.hpp"

namespace fpcd::io {

inline constexpr std::string_view kEnvPrefix = "FPCD_";

struct ConfigEntry {
  std::string key;
  std::string value;
  std::string help;
};

/// Every recognized key with its default.
inline const std::vector<ConfigEntry>& config_schema() {
  static const std::vector<ConfigEntry> schema = {
      {"kernel.length_scale", "1", "Matern length scale in meters"},
      {"kernel.amplitude", "1", "kernel amplitude sigma_k"},
      {"kernel.reg", "1", "ridge regularization sigma^2"},
      {"kernel.literal_normal_equations", "false", "solve (G'G + reg I) instead of (G + reg I)"},
      {"query.scale", "5", "query radius in length scales (> 1)"},
      {"grid.spacing", "0.5", "grid cell size in meters"},
      {"grid.roi", "auto", "min_x,min_y,max_x,max_y or auto (training bounding box)"},
      {"grid.smooth_training", "true", "denoise the training set before interpolation"},
      {"positioning.k", "3", "neighbors averaged by kNN"},
      {"positioning.dissimilarity", "cdm", "cdm or euclidean"},
      {"positioning.lambda_cdm", "3", "CDM key-mismatch penalty factor"},
      {"positioning.missing_value", "-110", "missing indicator used by euclidean matching"},
      {"positioning.inverse_distance_weighting", "false", "weight neighbors by 1/dissimilarity"},
      {"resample.n_res", "200", "resamples per query"},
      {"resample.alpha", "0.55", "sampling ratio"},
      {"resample.min_features", "3", "smallest resample size"},
      {"robust.lambda_mji", "0.97", "MJI selection bound"},
      {"robust.lambda_res", "10", "residual threshold of the count-based selector (dBm)"},
      {"detect.threshold", "0.95", "change belief threshold"},
      {"variability.slope", "0", "sigma = slope * rss + intercept"},
      {"variability.intercept", "2", ""},
      {"variability.floor", "0.5", "smallest sigma"},
      {"scenario.aps", "12", "number of random access points"},
      {"scenario.ref_power", "-40", "RSS at 1 m (dBm)"},
      {"scenario.exponent", "3", "path-loss exponent"},
      {"scenario.shadowing", "2", "shadowing sigma (dBm)"},
      {"scenario.sensitivity", "-100", "weakest measurable RSS (dBm)"},
      {"scenario.roi", "0,0,30,20", "min_x,min_y,max_x,max_y"},
      {"scenario.spacing", "1", "survey lattice spacing (m)"},
      {"scenario.train_fraction", "0.75", "share of survey points used for training"},
      {"scenario.walls", "", "x1 y1 x2 y2 attenuation; ... (semicolon separated)"},
      {"inject.missing", "0.5", "missing ratio"},
      {"inject.shift", "0", "shift ratio"},
      {"inject.shift_db", "-15", "shift in dBm"},
      {"inject.mode", "per_sample", "per_sample or shared"},
      {"inject.grid", "false", "emit the whole change grid instead of one spec"},
      {"inject.noise", "false", "add reading noise from the variability model after injection"},
      {"sweep.ratios", "0.05:0.95:0.05", "first:last:step or a comma list"},
      {"sweep.max_queries", "200", "queries evaluated by sweep (0 = all)"},
      {"sweep.sigma_scale", "1", "confidence scale of the dispersiveness ellipse"},
      {"evaluate.radius", "2", "ECDF radius in meters"},
  };
  return schema;
}

inline std::string env_name(const std::string& key) {
  std::string out(kEnvPrefix);
  for (char c : key) {
    if (c == '.')
      out += "__";
    else
      out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

class Config {
 public:
  Config() {
    for (const auto& e : config_schema()) values_[e.key] = e.value;
  }

  bool known(const std::string& key) const { return values_.count(key) != 0; }

  void set(const std::string& key, const std::string& value, std::size_t line = 0) {
    if (!known(key)) throw ParseError("unknown configuration key '" + key + "'", line);
    values_[key] = value;
  }

  /// `key=value` per line; '#' starts a comment; an optional [section]
  /// prefixes the following keys.
  void merge_stream(std::istream& in) {
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
      const auto t = trim(line);
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw ParseError("malformed section header", lineno);
        section = std::string(trim(t.substr(1, t.size() - 2)));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string_view::npos) throw ParseError("expected key=value", lineno);
      std::string key(trim(t.substr(0, eq)));
      if (!section.empty()) key = section + "." + key;
      set(key, std::string(trim(t.substr(eq + 1))), lineno);
    }
  }

  void merge_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file " + path);
    merge_stream(in);
  }

  void merge_environment() {
    for (auto& [key, value] : values_)
      if (const char* v = std::getenv(env_name(key).c_str())) value = v;
  }

  /// Applies `key=value` override strings.
  void merge_overrides(const std::vector<std::string>& kvs) {
    for (const auto& kv : kvs) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ParseError("override '" + kv + "' is not key=value");
      set(std::string(trim(std::string_view(kv).substr(0, eq))), std::string(trim(std::string_view(kv).substr(eq + 1))));
    }
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ParseError("unknown configuration key '" + key + "'");
    return it->second;
  }

  double num(const std::string& key) const {
    const auto v = parse_number(str(key));
    if (!v) throw ParseError("configuration key '" + key + "' is not a number: '" + str(key) + "'");
    return *v;
  }

  std::size_t count(const std::string& key) const {
    const double v = num(key);
    if (v < 0.0 || v != static_cast<double>(static_cast<std::uint64_t>(v)))
      throw ParseError("configuration key '" + key + "' must be a non-negative integer");
    return static_cast<std::size_t>(v);
  }

  bool flag(const std::string& key) const {
    const std::string v = detail::lower(str(key));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ParseError("configuration key '" + key + "' is not a boolean: '" + str(key) + "'");
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto v = parse_number(item);
      if (!v) throw ParseError("configuration key '" + key + "': bad number '" + item + "'");
      out.push_back(*v);
    }
    return out;
  }

  /// Canonical text: sorted key=value lines. Hashing this identifies a run.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
  }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// ---------------------------------------------------------------------------
// Typed views

inline KernelParams kernel_params(const Config& c) {
  KernelParams k;
  k.length_scale = c.num("kernel.length_scale");
  k.amplitude = c.num("kernel.amplitude");
  k.reg = c.num("kernel.reg");
  k.literal_normal_equations = c.flag("kernel.literal_normal_equations");
  k.validate();
  return k;
}

inline QueryConfig query_config(const Config& c) {
  QueryConfig q;
  q.scale = c.num("query.scale");
  q.validate();
  return q;
}

inline PositioningConfig positioning_config(const Config& c) {
  PositioningConfig p;
  p.k = c.count("positioning.k");
  const std::string d = detail::lower(c.str("positioning.dissimilarity"));
  if (d == "cdm")
    p.dissimilarity = Dissimilarity::cdm;
  else if (d == "euclidean" || d == "euclidean_vector" || d == "euclidean-vector")
    p.dissimilarity = Dissimilarity::euclidean_vector;
  else
    throw ParseError("positioning.dissimilarity must be cdm or euclidean");
  p.lambda_cdm = c.num("positioning.lambda_cdm");
  p.missing_value = c.num("positioning.missing_value");
  p.inverse_distance_weighting = c.flag("positioning.inverse_distance_weighting");
  return p;
}

inline ResampleConfig resample_config(const Config& c, std::uint64_t seed) {
  ResampleConfig r;
  r.n_res = c.count("resample.n_res");
  r.alpha_res = c.num("resample.alpha");
  r.min_features = c.count("resample.min_features");
  r.seed = seed;
  r.validate();
  return r;
}

inline VariabilityModel variability_model(const Config& c) {
  VariabilityModel m;
  m.slope = c.num("variability.slope");
  m.intercept = c.num("variability.intercept");
  m.floor = c.num("variability.floor");
  if (!(m.floor > 0.0)) throw InvalidInput("variability.floor must be > 0");
  return m;
}

inline Roi parse_roi(const Config& c, const std::string& key) {
  const auto v = c.numbers(key);
  if (v.size() != 4) throw ParseError(key + " needs four numbers: min_x,min_y,max_x,max_y");
  Roi r{v[0], v[1], v[2], v[3]};
  if (!r.valid()) throw InvalidInput(key + " is not a valid region");
  return r;
}

inline std::vector<Wall> parse_walls(const std::string& text) {
  std::vector<Wall> walls;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (trim(item).empty()) continue;
    std::stringstream ws{std::string(trim(item))};
    Wall w;
    if (!(ws >> w.a.x >> w.a.y >> w.b.x >> w.b.y >> w.attenuation_db))
      throw ParseError("wall '" + item + "' needs: x1 y1 x2 y2 attenuation");
    walls.push_back(w);
  }
  return walls;
}

inline PropagationScenario scenario_config(const Config& c, std::uint64_t seed) {
  PropagationScenario s;
  s.seed = seed;
  s.roi = parse_roi(c, "scenario.roi");
  s.ref_power_dbm = c.num("scenario.ref_power");
  s.exponent = c.num("scenario.exponent");
  s.shadowing_sigma = c.num("scenario.shadowing");
  s.sensitivity_dbm = c.num("scenario.sensitivity");
  s.survey_spacing = c.num("scenario.spacing");
  s.train_fraction = c.num("scenario.train_fraction");
  s.walls = parse_walls(c.str("scenario.walls"));
  s.access_points = random_access_points(c.count("scenario.aps"), s.roi, seed);
  s.validate();
  return s;
}

inline ChangeSpec change_spec(const Config& c, std::uint64_t seed) {
  ChangeSpec s;
  s.missing_ratio = c.num("inject.missing");
  s.shift_ratio = c.num("inject.shift");
  s.shift_db = c.num("inject.shift_db");
  s.seed = seed;
  const std::string m = detail::lower(c.str("inject.mode"));
  if (m == "per_sample")
    s.mode = ChangeMode::per_sample;
  else if (m == "shared")
    s.mode = ChangeMode::shared;
  else
    throw ParseError("inject.mode must be per_sample or shared");
  s.validate();
  return s;
}

/// Sampling ratios from "first:last:step" or a comma list.
inline std::vector<double> sweep_ratios(const Config& c) {
  const std::string& text = c.str("sweep.ratios");
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) {
      const auto v = parse_number(item);
      if (!v) throw ParseError("sweep.ratios: bad number '" + item + "'");
      parts.push_back(*v);
    }
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0])
      throw ParseError("sweep.ratios range must be first:last:step");
    const auto n = static_cast<std::size_t>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9)) + 1;
    for (std::size_t i = 0; i < n; ++i) out.push_back(std::round((parts[0] + i * parts[2]) * 1e9) / 1e9);
  } else {
    out = c.numbers("sweep.ratios");
  }
  for (double r : out)
    if (!(r > 0.0 && r <= 1.0)) throw InvalidInput("sweep ratios must lie in (0, 1]");
  return out;
}

}  // namespace fpcd::io
