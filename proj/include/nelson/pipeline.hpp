#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nelson/config.hpp"

namespace nelson {

const std::vector<std::string>& stage_names();

struct RunRequest {
    std::string stage = "all";
    std::string config_path;
    std::filesystem::path out_dir = "out";
    std::vector<std::string> overrides;  // key.path=value
    std::optional<std::string> xi_grid;      // a:b:n
    std::optional<std::string> lambda_grid;  // a:b:n
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string command_line;
};

struct RunManifest {
    std::string config_hash;
    std::string command;
    std::string stage;
    std::vector<std::string> overrides;
    std::vector<std::string> outputs;  // relative to the output directory
    double wall_clock = 0.0;           // seconds
    std::string version;
    std::string status = "ok";
    std::string error;

    nlohmann::json to_json() const;
};

inline constexpr const char* kManifestName = "run_manifest.json";

std::string sha256_hex(const std::string& data);
// Hash of the canonical dump of a validated tree; thread count is excluded.
std::string config_hash(const nlohmann::json& tree);

// Config tree after overrides and grid flags, before validation.
nlohmann::json resolve_config(const RunRequest& request);

// Runs the stage and writes artifacts plus the manifest; rethrows stage errors after recording them.
RunManifest run_pipeline(const RunRequest& request, std::ostream& log);

// 2 config error, 3 precondition failure, 4 numerical failure.
int exit_code(const std::exception& e);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nelson
