// SPDX-License-Identifier: Apache-2.0
#include "config.hpp"

#include <cstdlib>
#include <fstream>

#include "cers/errors.hpp"
#include "cers/report.hpp"

namespace cers::cli {

void ParamRegistry::apply_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");

  for (const auto& [key, value] : j.items()) {
    const Entry* found = nullptr;
    for (const auto& entry : entries_)
      if (entry.name == key) {
        found = &entry;
        break;
      }
    if (found == nullptr) throw ConfigError("unknown config key: " + key);
    if (found->option != nullptr && found->option->count() > 0) continue;
    try {
      found->from_json(value);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key '" + key + "' has the wrong type");
    }
  }
}

nlohmann::json ParamRegistry::effective(const std::string& subcommand) const {
  nlohmann::json j;
  j["subcommand"] = subcommand;
  for (const auto& entry : entries_) j[entry.name] = entry.to_json();
  return j;
}

std::string ParamRegistry::hash(const std::string& subcommand) const {
  return stable_digest(effective(subcommand).dump());
}

std::uint64_t default_seed(std::uint64_t fallback) {
  if (const char* env = std::getenv("CERS_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0') return v;
  }
  return fallback;
}

}  // namespace cers::cli
