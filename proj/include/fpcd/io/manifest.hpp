#pragma once

// Run manifests: what produced a set of output files.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "fpcd/error.hpp"
#include "fpcd/io/config.hpp"

#ifndef FPCD_VERSION
#define FPCD_VERSION "0.0.0"
#endif

namespace fpcd::io {

inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ParseError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, std::string_view data) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ParseError("cannot write " + p.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

inline std::string config_hash(const Config& c) { return hex64(fnv1a(c.canonical())); }

struct Manifest {
  std::string command;
  std::uint64_t seed = 0;
  const Config* config = nullptr;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::string> outputs;  // file names inside the output directory
};

/// Writes manifest.json into `dir`, with content hashes of inputs and
/// outputs. Contains nothing time- or host-dependent.
inline void write_manifest(const std::filesystem::path& dir, const Manifest& m) {
  nlohmann::ordered_json j;
  j["tool"] = "fpcd";
  j["command"] = m.command;
  j["seed"] = m.seed;
  j["versions"] = {{"fpcd", FPCD_VERSION},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  if (m.config) {
    j["config_hash"] = config_hash(*m.config);
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m.config->values()) cfg[k] = v;
    j["config"] = cfg;
  }
  auto inputs = nlohmann::ordered_json::array();
  for (const auto& p : m.inputs) {
    if (std::filesystem::is_directory(p)) {
      std::vector<std::filesystem::path> files;
      for (const auto& e : std::filesystem::directory_iterator(p))
        if (e.is_regular_file()) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      std::uint64_t h = 0xcbf29ce484222325ULL;
      for (const auto& f : files) h = fnv1a(read_file(f), fnv1a(f.filename().string(), h));
      inputs.push_back({{"name", p.filename().string()}, {"fnv1a", hex64(h)}});
    } else {
      inputs.push_back({{"name", p.filename().string()}, {"fnv1a", hex64(fnv1a(read_file(p)))}});
    }
  }
  j["inputs"] = inputs;
  auto outputs = nlohmann::ordered_json::array();
  for (const auto& name : m.outputs)
    outputs.push_back({{"name", name}, {"fnv1a", hex64(fnv1a(read_file(dir / name)))}});
  j["outputs"] = outputs;
  write_file(dir / "manifest.json", j.dump(2) + "\n");
}

}  // namespace fpcd::io
