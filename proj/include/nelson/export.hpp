#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "nelson/mourre.hpp"

namespace nelson {

// Shortest text that is stable across runs: 15 significant digits, "nan" and "inf" spelled out.
std::string format_number(double x);

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
    void add(std::vector<std::string> row);
    std::size_t rows() const { return rows_.size(); }
    std::string str() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

// Columns branch_id, xi_radius, energy, multiplicity; analytic branches are sampled on xi_grid.
CsvTable atlas_csv(const MassShellAtlas& atlas);
// Columns radius, energy, multiplicity, status (confirmed or candidate).
CsvTable crossings_csv(const MassShellAtlas& atlas);

// Sampled eigensolver atlas, enough to rebuild it exactly.
nlohmann::json atlas_to_json(const MassShellAtlas& atlas);
MassShellAtlas atlas_from_json(const nlohmann::json& j, const ModelSpec& model, const MomentumGrid& grid, int n_max);

// Columns xi_radius, family, energy, witness_x, witness_y, residual.
void append_thresholds(CsvTable& table, double xi_radius, const ThresholdReport& report);
CsvTable thresholds_table();
nlohmann::json to_json(const ThresholdReport& report);

// Columns k components, v components, piece_id, over nodes where the field is nonzero.
CsvTable vfield_csv(const VectorFieldBundle& bundle, const MomentumGrid& grid);

// Columns xi_radius, lambda, kappa, c_value, c_fiber, n_compact, verdict.
CsvTable mourre_table();
void append_mourre(CsvTable& table, double xi_radius, const MourreReport& report);

// Energy against |xi|: shell branches, crossings, and sigma1/sigma2 with listed thresholds when given.
std::string shell_diagram_svg(const MassShellAtlas& atlas, const std::vector<double>& xi_radii = {},
                              const std::vector<ThresholdReport>& reports = {});

}  // namespace nelson
