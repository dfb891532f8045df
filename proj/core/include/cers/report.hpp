// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>

namespace cers {

struct MetricValue {
  double value = 0.0;
  std::optional<double> ci_low;   // present iff bootstrap ran
  std::optional<double> ci_high;
};

/// Metric values plus provenance. Serialized as flat JSON: one key per
/// metric ({value, ci_low, ci_high}) alongside seed, n_bootstrap,
/// config_hash, and timestamp. The timestamp is the only field allowed to
/// differ between reruns of an identical (config, seed).
struct EvalReport {
  std::map<std::string, MetricValue> metrics;
  std::uint64_t seed = 0;
  int n_bootstrap = 0;
  std::string config_hash;
  std::string timestamp;
};

std::string current_timestamp();

void write_report_json(const EvalReport& report, const std::filesystem::path& path);
EvalReport read_report_json(const std::filesystem::path& path);

/// CSV flattening: header `metric,value,ci_low,ci_high`, empty CI fields
/// when no bootstrap ran.
void write_report_csv(const EvalReport& report, std::ostream& out);
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);

/// Stable 64-bit FNV-1a digest of a canonicalized string, hex-encoded.
std::string stable_digest(const std::string& canonical);

}  // namespace cers
