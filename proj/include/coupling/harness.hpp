#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace coupling::harness {

inline constexpr const char* kVersion = "0.1.0";

/// A flat JSON object (no nested objects or arrays). File-valued keys are
/// resolved against the directory of the config file.
struct ExperimentConfig {
    std::string experiment;
    nlohmann::json params = nlohmann::json::object();
    std::filesystem::path base_dir = ".";
    std::filesystem::path output_dir = "out";
    std::optional<std::uint64_t> seed;

    bool has(const std::string& key) const { return params.contains(key); }
    double number(const std::string& key, double fallback) const;
    std::int64_t integer(const std::string& key, std::int64_t fallback) const;
    std::string text(const std::string& key) const;
    std::filesystem::path file(const std::string& key) const;
    std::uint64_t require_seed() const;
};

/// Reads a config file; COUPLING_LAB_SEED, when set, replaces the seed.
ExperimentConfig load_config(const std::filesystem::path& path, const std::string& experiment);

/// Same, from an already parsed object (tests build configs in memory).
ExperimentConfig make_config(const std::string& experiment, const nlohmann::json& params,
                             const std::filesystem::path& base_dir = ".");

struct CheckTally {
    std::string name;
    std::size_t passed = 0;
    std::size_t failed = 0;
    double max_violation = 0.0;  // largest excess over the tolerance (<= 0 when all pass)
    std::vector<std::string> messages;
};

struct RunManifest {
    nlohmann::json config;
    std::string experiment;
    std::string version = kVersion;
    std::string started_at;
    double wall_seconds = 0.0;
    std::vector<CheckTally> checks;
    std::map<std::string, double> values;
    std::vector<std::string> artifacts;

    bool ok() const;
    nlohmann::json to_json() const;
};

struct RunOptions {
    int parallel = 1;
};

std::vector<std::string> experiment_names();

/// Runs the experiment, writes its CSV files and manifest.json into
/// config.output_dir and returns the manifest. Check failures are recorded in
/// the manifest; invalid configurations throw.
RunManifest run(const ExperimentConfig& config, const RunOptions& options = {});

/// Fixed CSV number format: 17 significant digits.
std::string csv_number(double v);

}  // namespace coupling::harness
