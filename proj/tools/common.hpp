#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "eager/util/errors.hpp"

namespace eager::cli {

// EAGER_SEED overrides every seed argument, for scripted sweeps.
inline uint64_t resolve_seed(uint64_t flag_value) {
  if (const char* env = std::getenv("EAGER_SEED"))
    return std::strtoull(env, nullptr, 10);
  return flag_value;
}

inline std::vector<uint64_t> parse_seed_list(const std::string& text) {
  std::vector<uint64_t> out;
  std::string cur;
  for (char c : text + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(std::strtoull(cur.c_str(), nullptr, 10));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (out.empty()) throw ConfigError("empty seed list");
  return out;
}

// Refuses to reuse an output directory that already holds a run unless
// --force was given.
inline void claim_out_dir(const std::string& dir, bool force) {
  namespace fs = std::filesystem;
  if (fs::exists(fs::path(dir) / "manifest.json") && !force)
    throw ConfigError("output directory already holds a run: " + dir +
                      " (pass --force to overwrite)");
  fs::create_directories(dir);
}

inline void write_manifest(const std::string& dir,
                           const nlohmann::json& manifest) {
  std::ofstream out(std::filesystem::path(dir) / "manifest.json");
  if (!out) throw DataError("cannot write manifest in " + dir);
  out << manifest.dump(2) << '\n';
}

}  // namespace eager::cli
