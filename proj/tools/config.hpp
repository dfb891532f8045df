// SPDX-License-Identifier: Apache-2.0
// Run configuration: every subcommand option is registered here so a JSON
// config file can set it, flags can override it, and the effective
// (canonicalized) config can be hashed into reports.
#pragma once

#include <CLI11.hpp>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace cers::cli {

class ParamRegistry {
 public:
  template <typename T>
  void bind(CLI::Option* option, const std::string& name, T& var) {
    entries_.push_back(Entry{
        name, option,
        [&var](const nlohmann::json& j) { var = j.get<T>(); },
        [&var]() { return nlohmann::json(var); },
    });
  }

  /// Overlays a JSON config file. Unknown keys fail; keys whose flag was
  /// passed on the command line are skipped (flags win).
  void apply_config_file(const std::filesystem::path& path);

  /// Canonical effective config (subcommand + every parameter).
  nlohmann::json effective(const std::string& subcommand) const;

  std::string hash(const std::string& subcommand) const;

 private:
  struct Entry {
    std::string name;
    CLI::Option* option;
    std::function<void(const nlohmann::json&)> from_json;
    std::function<nlohmann::json()> to_json;
  };
  std::vector<Entry> entries_;
};

/// CERS_SEED when set, otherwise fallback.
std::uint64_t default_seed(std::uint64_t fallback = 0);

}  // namespace cers::cli
