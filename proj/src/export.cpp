#include "nelson/export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace nelson {

using nlohmann::json;

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x == 0.0) return "0";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", x);
    return buf;
}

void CsvTable::add(std::vector<std::string> row) {
    if (row.size() != header_.size()) throw std::logic_error("CsvTable: row width does not match the header");
    rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
    std::ostringstream os;
    auto line = [&os](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
        os << '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return os.str();
}

CsvTable atlas_csv(const MassShellAtlas& atlas) {
    CsvTable t({"branch_id", "xi_radius", "energy", "multiplicity"});
    for (const auto& b : atlas.branches) {
        const auto emit = [&](double r, double e) {
            t.add({std::to_string(b.id), format_number(r), format_number(e), std::to_string(b.multiplicity)});
        };
        if (!b.radii.empty()) {
            for (std::size_t i = 0; i < b.radii.size(); ++i) emit(b.radii[i], b.energies[i]);
        } else {
            for (double r : atlas.xi_grid)
                if (b.covers(r)) emit(r, b.fn.value(r));
        }
    }
    return t;
}

CsvTable crossings_csv(const MassShellAtlas& atlas) {
    CsvTable t({"radius", "energy", "multiplicity", "status"});
    for (const auto& c : atlas.crossings)
        t.add({format_number(c.radius), format_number(c.energy), std::to_string(c.multiplicity), "confirmed"});
    for (const auto& c : atlas.candidates)
        t.add({format_number(c.radius), format_number(c.energy), std::to_string(c.multiplicity), "candidate"});
    return t;
}

namespace {

json crossing_json(const Crossing& c) {
    return {{"radius", c.radius},     {"energy", c.energy},     {"multiplicity", c.multiplicity},
            {"branch_a", c.branch_a}, {"branch_b", c.branch_b}, {"candidate", c.candidate}};
}

Crossing crossing_from(const json& j) {
    Crossing c;
    c.radius = j.at("radius").get<double>();
    c.energy = j.at("energy").get<double>();
    c.multiplicity = j.at("multiplicity").get<int>();
    c.branch_a = j.at("branch_a").get<int>();
    c.branch_b = j.at("branch_b").get<int>();
    c.candidate = j.at("candidate").get<bool>();
    return c;
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json vec_json(const Vec& v) { return json::array({v.x(), v.y()}); }

}  // namespace

json atlas_to_json(const MassShellAtlas& atlas) {
    if (atlas.source != AtlasSource::Eigensolver)
        throw std::logic_error("atlas_to_json: only sampled atlases are serialized");
    json j;
    j["xi_grid"] = atlas.xi_grid;
    j["ess_bottom"] = atlas.ess_bottom;
    j["ground_samples"] = atlas.ground_samples;
    j["ground_limit"] = atlas.ground.limit();
    j["L_shell"] = atlas.L_shell;
    j["gap_tol"] = atlas.gap_tol;
    j["cross_tol"] = atlas.cross_tol;
    j["branches"] = json::array();
    for (const auto& b : atlas.branches)
        j["branches"].push_back({{"id", b.id},
                                 {"r_min", b.r_min},
                                 {"r_max", b.r_max},
                                 {"multiplicity", b.multiplicity},
                                 {"ground", b.ground},
                                 {"radii", b.radii},
                                 {"energies", b.energies}});
    j["crossings"] = json::array();
    for (const auto& c : atlas.crossings) j["crossings"].push_back(crossing_json(c));
    j["candidates"] = json::array();
    for (const auto& c : atlas.candidates) j["candidates"].push_back(crossing_json(c));
    j["tangencies"] = json::array();
    for (const auto& t : atlas.tangencies)
        j["tangencies"].push_back(
            {{"radius", t.radius}, {"energy", t.energy}, {"branch_a", t.branch_a}, {"branch_b", t.branch_b}});
    return j;
}

MassShellAtlas atlas_from_json(const json& j, const ModelSpec& model, const MomentumGrid& grid, int n_max) {
    MassShellAtlas a;
    a.source = AtlasSource::Eigensolver;
    a.xi_grid = j.at("xi_grid").get<std::vector<double>>();
    a.ess_bottom = j.at("ess_bottom").get<std::vector<double>>();
    a.ground_samples = j.at("ground_samples").get<std::vector<double>>();
    a.L_shell = j.at("L_shell").get<double>();
    a.gap_tol = j.at("gap_tol").get<double>();
    a.cross_tol = j.at("cross_tol").get<double>();
    for (const auto& b : j.at("branches")) {
        ShellBranch s;
        s.id = b.at("id").get<int>();
        s.r_min = b.at("r_min").get<double>();
        s.r_max = b.at("r_max").get<double>();
        s.multiplicity = b.at("multiplicity").get<int>();
        s.ground = b.at("ground").get<bool>();
        s.radii = b.at("radii").get<std::vector<double>>();
        s.energies = b.at("energies").get<std::vector<double>>();
        s.fn = spline_profile(s.radii, s.energies);
        a.branches.push_back(std::move(s));
    }
    for (const auto& c : j.at("crossings")) a.crossings.push_back(crossing_from(c));
    for (const auto& c : j.at("candidates")) a.candidates.push_back(crossing_from(c));
    for (const auto& t : j.at("tangencies"))
        a.tangencies.push_back({t.at("radius").get<double>(), t.at("energy").get<double>(),
                                t.at("branch_a").get<int>(), t.at("branch_b").get<int>()});
    a.ground = traced_ground(model, grid, n_max, a.xi_grid, a.ground_samples, j.at("ground_limit").get<double>());
    return a;
}

CsvTable thresholds_table() {
    return CsvTable({"xi_radius", "family", "energy", "witness_x", "witness_y", "residual"});
}

void append_thresholds(CsvTable& t, double xi_radius, const ThresholdReport& r) {
    const std::string x = format_number(xi_radius);
    const std::string none = "nan";
    t.add({x, "sigma1", format_number(r.sigma1), none, none, none});
    t.add({x, "sigma2", format_number(r.sigma2), none, none, none});
    for (const auto& s : r.t_shell)
        t.add({x, "shell", format_number(s.energy), format_number(s.witness.x()), format_number(s.witness.y()),
               format_number(s.residual)});
    for (const auto& p : r.t_parallel) {
        const Vec w = r.xi.norm() > 0.0 ? Vec(p.r * r.xi.normalized()) : Vec(p.r, 0.0);
        t.add({x, "parallel", format_number(p.energy), format_number(w.x()), format_number(w.y()),
               format_number(p.residual)});
    }
    for (const auto& h : r.t_hash)
        t.add({x, "hash", format_number(h.energy), format_number(h.witness.x()), format_number(h.witness.y()),
               format_number(h.residual)});
    for (double e : r.exc) t.add({x, "exc", format_number(e), none, none, none});
}

json to_json(const ThresholdReport& r) {
    json j;
    j["xi"] = vec_json(r.xi);
    j["sigma1"] = number_or_null(r.sigma1);
    j["sigma2"] = number_or_null(r.sigma2);
    j["sigma1_extrapolated"] = r.min1.extrapolated;
    j["sigma2_extrapolated"] = r.min2.extrapolated;
    j["t_shell"] = json::array();
    for (const auto& s : r.t_shell)
        j["t_shell"].push_back({{"energy", s.energy},
                                {"witness", vec_json(s.witness)},
                                {"shell_id", s.shell_id},
                                {"residual", number_or_null(s.residual)}});
    j["t_parallel"] = json::array();
    for (const auto& p : r.t_parallel)
        j["t_parallel"].push_back(
            {{"energy", p.energy}, {"r", p.r}, {"crossing", p.crossing}, {"residual", number_or_null(p.residual)}});
    j["t_hash"] = json::array();
    for (const auto& h : r.t_hash)
        j["t_hash"].push_back({{"energy", h.energy},
                               {"witness", vec_json(h.witness)},
                               {"rho", h.rho},
                               {"crossing", h.crossing},
                               {"residual", number_or_null(h.residual)}});
    j["exc"] = r.exc;
    j["log"] = r.log;
    return j;
}

CsvTable vfield_csv(const VectorFieldBundle& bundle, const MomentumGrid& grid) {
    const bool two = bundle.model().nu == 2;
    std::vector<std::string> header{"kx"};
    if (two) header.push_back("ky");
    header.push_back("vx");
    if (two) header.push_back("vy");
    header.push_back("piece_id");
    CsvTable t(header);
    for (int p = 0; p < grid.size(); ++p) {
        const Vec& v = bundle.sampled[static_cast<std::size_t>(p)];
        if (v.isZero(0.0)) continue;
        const Vec k = grid.node(p);
        std::vector<std::string> row{format_number(k.x())};
        if (two) row.push_back(format_number(k.y()));
        row.push_back(format_number(v.x()));
        if (two) row.push_back(format_number(v.y()));
        row.push_back(std::to_string(bundle.piece_id[static_cast<std::size_t>(p)]));
        t.add(std::move(row));
    }
    return t;
}

CsvTable mourre_table() {
    return CsvTable({"xi_radius", "lambda", "kappa", "c_value", "c_fiber", "n_compact", "verdict"});
}

void append_mourre(CsvTable& t, double xi_radius, const MourreReport& r) {
    const std::string verdict = to_string(r.verdict);
    if (r.ladder.empty()) {
        t.add({format_number(xi_radius), format_number(r.lambda), "nan", "nan", format_number(r.c_fiber), "0",
               verdict});
        return;
    }
    for (const auto& e : r.ladder)
        t.add({format_number(xi_radius), format_number(r.lambda), format_number(e.kappa), format_number(e.c_value),
               format_number(r.c_fiber), std::to_string(e.n_compact), verdict});
}

std::string shell_diagram_svg(const MassShellAtlas& atlas, const std::vector<double>& xi_radii,
                              const std::vector<ThresholdReport>& reports) {
    constexpr double W = 640, H = 420, L = 60, R = 20, T = 20, B = 50;
    std::vector<std::vector<std::pair<double, double>>> curves;
    for (const auto& b : atlas.branches) {
        std::vector<std::pair<double, double>> c;
        if (!b.radii.empty()) {
            for (std::size_t i = 0; i < b.radii.size(); ++i) c.emplace_back(b.radii[i], b.energies[i]);
        } else {
            for (double r : atlas.xi_grid)
                if (b.covers(r)) c.emplace_back(r, b.fn.value(r));
        }
        curves.push_back(std::move(c));
    }
    double x0 = 0.0, x1 = 0.0, y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
    auto extend = [&](double x, double y) {
        if (!std::isfinite(x) || !std::isfinite(y)) return;
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
    };
    for (const auto& c : curves)
        for (const auto& [x, y] : c) extend(x, y);
    for (std::size_t i = 0; i < reports.size() && i < xi_radii.size(); ++i) {
        extend(xi_radii[i], reports[i].sigma1);
        extend(xi_radii[i], reports[i].sigma2);
    }
    if (!(y1 > y0)) {
        y0 = std::isfinite(y0) ? y0 - 1.0 : 0.0;
        y1 = y0 + 2.0;
    }
    if (!(x1 > x0)) x1 = x0 + 1.0;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    auto polyline = [&](const std::vector<std::pair<double, double>>& c, const std::string& style) {
        std::string pts;
        for (const auto& [x, y] : c)
            if (std::isfinite(y)) pts += num(px(x)) + "," + num(py(y)) + " ";
        return "<polyline fill=\"none\" " + style + " points=\"" + pts + "\"/>\n";
    };
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << (W + L) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">|xi|</text>\n";
    os << "<text x=\"14\" y=\"" << (H - B + T) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
       << (H - B + T) / 2 << ")\">energy</text>\n";
    for (int i = 0; i <= 4; ++i) {
        const double x = x0 + (x1 - x0) * i / 4.0, y = y0 + (y1 - y0) * i / 4.0;
        os << "<text x=\"" << num(px(x)) << "\" y=\"" << H - B + 16 << "\" font-size=\"11\" text-anchor=\"middle\">"
           << format_number(std::round(x * 1000) / 1000) << "</text>\n";
        os << "<text x=\"" << L - 4 << "\" y=\"" << num(py(y) + 4) << "\" font-size=\"11\" text-anchor=\"end\">"
           << format_number(std::round(y * 1000) / 1000) << "</text>\n";
    }
    for (std::size_t i = 0; i < curves.size(); ++i)
        os << polyline(curves[i], std::string("stroke=\"") + palette[i % 6] + "\" stroke-width=\"2\"");
    if (!reports.empty()) {
        std::vector<std::pair<double, double>> s1, s2;
        for (std::size_t i = 0; i < reports.size() && i < xi_radii.size(); ++i) {
            s1.emplace_back(xi_radii[i], reports[i].sigma1);
            s2.emplace_back(xi_radii[i], reports[i].sigma2);
        }
        os << polyline(s1, "stroke=\"black\" stroke-dasharray=\"6,3\"");
        os << polyline(s2, "stroke=\"gray\" stroke-dasharray=\"2,3\"");
        for (std::size_t i = 0; i < reports.size() && i < xi_radii.size(); ++i)
            for (double e : reports[i].energies())
                if (e >= y0 && e <= y1)
                    os << "<circle cx=\"" << num(px(xi_radii[i])) << "\" cy=\"" << num(py(e))
                       << "\" r=\"2.5\" fill=\"black\"/>\n";
    }
    for (const auto& c : atlas.crossings)
        if (c.energy >= y0 && c.energy <= y1)
            os << "<circle cx=\"" << num(px(c.radius)) << "\" cy=\"" << num(py(c.energy))
               << "\" r=\"4\" fill=\"none\" stroke=\"black\"/>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace nelson
