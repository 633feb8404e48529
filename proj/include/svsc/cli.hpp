#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace svsc::cli {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitConfig = 2;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const char* version();

/// Flag values that override fields of the JSON config (flag names mirror the JSON paths).
struct Overrides {
    std::optional<std::uint64_t> seed;    // engine.seed
    std::optional<long> paths;            // engine.paths
    std::optional<int> steps;             // engine.steps
    std::optional<int> buckets;           // engine.buckets
    std::optional<std::string> format;    // output.format
    bool bp = false;                      // output.bp
};

json load_config(const std::filesystem::path& path);
void apply_overrides(json& config, const Overrides& o);

/// FNV-1a 64 of the canonical (key-sorted, compact) serialization, as 16 hex digits.
std::string config_hash(const json& config);

using Cell = std::variant<std::monostate, double, long long, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

struct Report {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string format = "csv";
    json summary = json::object();  // scalar results and run metadata that must be reproducible
    Table table;
    std::vector<std::string> log;   // runtime statistics and warnings; never part of the output file
    int exit_code = kExitOk;
};

/// Runs one command against an effective config. Relative paths inside the config resolve
/// against base_dir. Throws ConfigError for invalid configs; row-level failures set exit_code.
Report run_command(const std::string& command, const json& config, const std::filesystem::path& base_dir = {});

std::string render_csv(const Report& r);
std::string render_json(const Report& r);
/// Header block and summary only; written next to a CSV when the command has a summary.
std::string render_summary_json(const Report& r);

}  // namespace svsc::cli
