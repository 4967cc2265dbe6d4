#pragma once

// On-disk RFM container: a directory holding
//
//   VERSION        format tag
//   training.csv   training set, long CSV
//   params.txt     kernel and query parameters, key=value
//   grid.json      grid header: bounds, spacing, shape, feature order
//   grid.bin       cells x features float32, little-endian, NaN = absent

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpcd/error.hpp"
#include "fpcd/io/csv.hpp"
#include "fpcd/io/manifest.hpp"
#include "fpcd/kernel.hpp"
#include "fpcd/rfm.hpp"

namespace fpcd::io {

inline constexpr std::string_view kRfmFormat = "fpcd-rfm 1";

struct RfmArchive {
  RfmTrainingSet training;
  KernelParams kernel;
  QueryConfig query;
  std::optional<RfmGrid> grid;
};

inline std::string encode_float32_le(const std::vector<float>& v) {
  std::string out(v.size() * 4, '\0');
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint32_t u = std::bit_cast<std::uint32_t>(v[i]);
    for (int b = 0; b < 4; ++b) out[i * 4 + static_cast<std::size_t>(b)] = static_cast<char>((u >> (8 * b)) & 0xff);
  }
  return out;
}

inline std::vector<float> decode_float32_le(std::string_view bytes) {
  if (bytes.size() % 4 != 0) throw ParseError("grid.bin size is not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b)
      u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + static_cast<std::size_t>(b)])) << (8 * b);
    out[i] = std::bit_cast<float>(u);
  }
  return out;
}

inline std::string params_text(const KernelParams& k, const QueryConfig& q) {
  std::string s;
  s += "kernel.length_scale=" + format_number(k.length_scale) + "\n";
  s += "kernel.amplitude=" + format_number(k.amplitude) + "\n";
  s += "kernel.reg=" + format_number(k.reg) + "\n";
  s += std::string("kernel.literal_normal_equations=") + (k.literal_normal_equations ? "true" : "false") + "\n";
  s += "query.scale=" + format_number(q.scale) + "\n";
  return s;
}

/// Writes the archive; returns the file names written.
inline std::vector<std::string> save_rfm(const std::filesystem::path& dir, const RfmArchive& a) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  write_file(dir / "VERSION", std::string(kRfmFormat) + "\n");
  files.push_back("VERSION");
  std::ostringstream csv;
  write_long(csv, a.training.samples(), a.training.registry());
  write_file(dir / "training.csv", csv.str());
  files.push_back("training.csv");
  write_file(dir / "params.txt", params_text(a.kernel, a.query));
  files.push_back("params.txt");
  if (a.grid) {
    const RfmGrid& g = *a.grid;
    nlohmann::ordered_json h;
    h["format"] = "float32-le";
    h["layout"] = "cell-major";
    h["roi"] = {g.roi().min_x, g.roi().min_y, g.roi().max_x, g.roi().max_y};
    h["spacing"] = g.spacing();
    h["nx"] = g.nx();
    h["ny"] = g.ny();
    auto feats = nlohmann::ordered_json::array();
    for (const auto& id : g.registry()) feats.push_back(id.str());
    h["features"] = feats;
    write_file(dir / "grid.json", h.dump(2) + "\n");
    write_file(dir / "grid.bin", encode_float32_le(g.values()));
    files.push_back("grid.json");
    files.push_back("grid.bin");
  }
  return files;
}

inline RfmArchive load_rfm(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ParseError("RFM archive " + dir.string() + " is not a directory");
  const std::string version(trim(read_file(dir / "VERSION")));
  if (version != kRfmFormat) throw ParseError("unsupported RFM archive version '" + version + "'");

  std::istringstream csv(read_file(dir / "training.csv"));
  Dataset ds = read_dataset(csv);

  Config params;
  std::istringstream ptxt(read_file(dir / "params.txt"));
  params.merge_stream(ptxt);

  RfmArchive a{RfmTrainingSet(std::move(ds.samples), std::move(ds.registry)), kernel_params(params),
               query_config(params), std::nullopt};

  if (std::filesystem::exists(dir / "grid.json")) {
    nlohmann::json h;
    try {
      h = nlohmann::json::parse(read_file(dir / "grid.json"));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("grid.json: ") + e.what());
    }
    try {
      if (h.at("format").get<std::string>() != "float32-le") throw ParseError("grid.json: unsupported format");
      const auto roi = h.at("roi").get<std::vector<double>>();
      if (roi.size() != 4) throw ParseError("grid.json: roi needs four numbers");
      std::vector<FeatureId> ids;
      for (const auto& f : h.at("features")) ids.emplace_back(f.get<std::string>());
      RfmGrid g(Roi{roi[0], roi[1], roi[2], roi[3]}, h.at("spacing").get<double>(), FeatureRegistry(ids),
                decode_float32_le(read_file(dir / "grid.bin")));
      if (g.nx() != h.at("nx").get<std::size_t>() || g.ny() != h.at("ny").get<std::size_t>())
        throw ParseError("grid.json: shape does not match bounds and spacing");
      a.grid = std::move(g);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("grid.json: ") + e.what());
    } catch (const InvalidInput& e) {
      throw ParseError(std::string("grid: ") + e.what());
    }
  }
  return a;
}

}  // namespace fpcd::io
