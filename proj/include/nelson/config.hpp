#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nelson/mourre.hpp"

namespace nelson {

// Uniform samples start, ..., stop (count >= 1).
struct SampleRange {
    double start = 0.0;
    double stop = 0.0;
    int count = 1;
    std::vector<double> values() const;
};

// Parses "a:b:n"; throws ConfigError naming the flag on malformed input.
SampleRange parse_range(const std::string& text, const std::string& flag);

struct GridConfig {
    double half_width = 2.0;
    int points = 65;
    int n_max = 2;
    std::size_t dimension_cap = FockBasis::kDefaultCap;
};

// Synthetic shell given by a polynomial in |xi|.
struct AnalyticShellConfig {
    std::string name;
    std::vector<double> coefficients;  // c0 + c1 r + c2 r^2 + ...
    double r_min = 0.0;
    double r_max = 0.0;
    int multiplicity = 1;
    bool ground = false;
};

struct ShellConfig {
    std::string source = "eigensolver";  // or "analytic"
    double xi_max = 2.0;
    int xi_points = 21;
    int branches = 2;
    TraceOptions trace;
    std::vector<AnalyticShellConfig> analytic;
};

struct ModelCheckConfig {
    std::size_t samples = 2000;
    double box_half_width = 10.0;
    std::uint64_t seed = 1;
    bool allow_flagged = false;
};

struct ThresholdScanConfig {
    SampleRange xi{0.0, 2.0, 5};
    Vec direction = Vec(1.0, 0.0);
    ThresholdOptions options;
};

struct VFieldConfig {
    Vec xi = Vec::Zero();
    double energy = 1.5;
    CalibrationOptions calibration;
    int flow_samples = 100;
    double flow_time = 1.0;
    double flow_step = 1e-3;
};

struct MourreConfig {
    std::vector<double> xi_radii{0.0};
    SampleRange lambda{1.1, 1.6, 6};
    MourreOptions options;
    bool commutator_check = true;
    bool virial_check = true;
    VirialOptions virial;
};

struct OutputConfig {
    bool svg = false;
};

struct RunConfig {
    ModelSpec model;
    GridConfig grid;
    SolverOptions solver;
    ShellConfig shells;
    ModelCheckConfig model_check;
    ThresholdScanConfig thresholds;
    VFieldConfig vfield;
    MourreConfig mourre;
    OutputConfig output;
    std::uint64_t seed = 7;
    int threads = 1;
    nlohmann::json raw;  // validated tree, overrides applied

    Vec xi_at(double radius) const { return radius * thresholds.direction; }
};

nlohmann::json load_config_file(const std::string& path);
// Sets a dotted key path to a value; the value is read as JSON when it parses, as a string otherwise.
void apply_override(nlohmann::json& tree, const std::string& assignment);
// Validates the tree against the schema; errors name the offending key path.
RunConfig parse_config(const nlohmann::json& tree);

ModelSpec parse_model(const nlohmann::json& tree);
std::vector<ShellDefinition> shell_definitions(const ShellConfig& shells);

}  // namespace nelson
