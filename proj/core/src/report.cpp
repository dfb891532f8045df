// SPDX-License-Identifier: Apache-2.0
#include "cers/report.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <nlohmann/json.hpp>

#include "cers/errors.hpp"

namespace cers {

namespace {

using json = nlohmann::json;

const char* kReservedKeys[] = {"seed", "n_bootstrap", "config_hash", "timestamp"};

bool is_reserved(const std::string& key) {
  for (const char* r : kReservedKeys)
    if (key == r) return true;
  return false;
}

std::string format_csv_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string current_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_report_json(const EvalReport& report, const std::filesystem::path& path) {
  json j;
  for (const auto& [name, metric] : report.metrics) {
    if (is_reserved(name)) throw ConfigError("metric name '" + name + "' is reserved");
    json entry;
    entry["value"] = metric.value;
    if (metric.ci_low) entry["ci_low"] = *metric.ci_low;
    if (metric.ci_high) entry["ci_high"] = *metric.ci_high;
    j[name] = std::move(entry);
  }
  j["seed"] = report.seed;
  j["n_bootstrap"] = report.n_bootstrap;
  j["config_hash"] = report.config_hash;
  j["timestamp"] = report.timestamp.empty() ? current_timestamp() : report.timestamp;

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
    if (!out) throw DataError("report write failed");
  }
  std::filesystem::rename(tmp, path);
}

EvalReport read_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("report parse error: " + std::string(e.what()));
  }
  EvalReport report;
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") {
      report.seed = value.get<std::uint64_t>();
    } else if (key == "n_bootstrap") {
      report.n_bootstrap = value.get<int>();
    } else if (key == "config_hash") {
      report.config_hash = value.get<std::string>();
    } else if (key == "timestamp") {
      report.timestamp = value.get<std::string>();
    } else {
      MetricValue metric;
      metric.value = value.at("value").get<double>();
      if (value.contains("ci_low")) metric.ci_low = value.at("ci_low").get<double>();
      if (value.contains("ci_high")) metric.ci_high = value.at("ci_high").get<double>();
      report.metrics[key] = metric;
    }
  }
  return report;
}

void write_report_csv(const EvalReport& report, std::ostream& out) {
  out << "metric,value,ci_low,ci_high\n";
  for (const auto& [name, metric] : report.metrics) {
    out << name << ',' << format_csv_double(metric.value) << ',';
    if (metric.ci_low) out << format_csv_double(*metric.ci_low);
    out << ',';
    if (metric.ci_high) out << format_csv_double(*metric.ci_high);
    out << '\n';
  }
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write_report_csv(report, out);
  if (!out) throw DataError("report write failed");
}

std::string stable_digest(const std::string& canonical) {
  // FNV-1a, 64 bit.
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace cers
