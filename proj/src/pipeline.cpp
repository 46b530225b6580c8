#include "nelson/pipeline.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <sys/file.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nelson/export.hpp"

#ifndef NELSON_VERSION
#define NELSON_VERSION "0.0.0"
#endif

namespace nelson {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names{"model-check", "shells", "thresholds", "vfield", "mourre-scan", "all"};
    return names;
}

json RunManifest::to_json() const {
    json j;
    j["config_hash"] = config_hash;
    j["command"] = command;
    j["stage"] = stage;
    j["overrides"] = overrides;
    j["outputs"] = outputs;
    j["wall_clock_seconds"] = wall_clock;
    j["version"] = version;
    j["status"] = status;
    if (!error.empty()) j["error"] = error;
    return j;
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string config_hash(const json& tree) {
    json copy = tree;
    copy.erase("threads");
    return sha256_hex(copy.dump());
}

json resolve_config(const RunRequest& req) {
    json tree = load_config_file(req.config_path);
    if (!tree.is_object()) throw ConfigError("config error at '<root>': expected an object");
    for (const auto& o : req.overrides) apply_override(tree, o);
    if (req.xi_grid) {
        const SampleRange r = parse_range(*req.xi_grid, "--xi-grid");
        tree["thresholds"]["xi"] = {{"start", r.start}, {"stop", r.stop}, {"count", r.count}};
        tree["mourre"]["xi_radii"] = r.values();
    }
    if (req.lambda_grid) {
        const SampleRange r = parse_range(*req.lambda_grid, "--lambda-grid");
        tree["mourre"]["lambda"] = {{"start", r.start}, {"stop", r.stop}, {"count", r.count}};
    }
    if (req.seed) tree["seed"] = *req.seed;
    if (req.threads) tree["threads"] = *req.threads;
    return tree;
}

int exit_code(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const std::invalid_argument*>(&e)) return 2;
    if (dynamic_cast<const PreconditionError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
        dynamic_cast<const RangeError*>(&e) || dynamic_cast<const SizingError*>(&e))
        return 3;
    return 4;
}

namespace {

// Exclusive advisory lock held for the lifetime of the object.
class FileLock {
public:
    explicit FileLock(const fs::path& path) {
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
        if (fd_ < 0 || ::flock(fd_, LOCK_EX) != 0) throw std::runtime_error("cannot lock " + path.string());
    }
    ~FileLock() {
        if (fd_ >= 0) {
            ::flock(fd_, LOCK_UN);
            ::close(fd_);
        }
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    int fd_ = -1;
};

void write_file(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

std::vector<double> linspace(double a, double b, int n) {
    SampleRange r{a, b, n};
    return r.values();
}

class Pipeline {
public:
    Pipeline(RunConfig cfg, fs::path out, std::string hash, RunManifest& manifest, std::ostream& log)
        : cfg_(std::move(cfg)), out_(std::move(out)), hash_(std::move(hash)), manifest_(manifest), log_(log) {}

    void run(const std::string& stage) {
        if (stage == "all") {
            for (const auto& s : stage_names())
                if (s != "all") run(s);
            return;
        }
        stage_ = stage;
        log_ << "[" << stage << "] start\n";
        if (stage == "model-check") model_check();
        else if (stage == "shells") shells();
        else if (stage == "thresholds") thresholds();
        else if (stage == "vfield") vfield();
        else if (stage == "mourre-scan") mourre();
        else throw ConfigError("config error at '--stage': unknown stage '" + stage + "'");
        log_ << "[" << stage << "] done\n";
    }

private:
    void artifact(const std::string& name, const std::string& content) {
        write_file(out_ / name, content);
        json meta{{"manifest", kManifestName}, {"config_hash", hash_}, {"stage", stage_}, {"file", name}};
        write_file(out_ / (name + ".meta.json"), meta.dump(2) + "\n");
        manifest_.outputs.push_back(name);
    }

    const MomentumGrid& grid() {
        if (!grid_) grid_.emplace(cfg_.model.nu, cfg_.grid.half_width, cfg_.grid.points);
        return *grid_;
    }
    const FockBasis& basis() {
        if (!basis_) basis_.emplace(grid(), cfg_.grid.n_max, cfg_.grid.dimension_cap);
        return *basis_;
    }

    void model_check() {
        const auto& mc = cfg_.model_check;
        const ConditionReport report =
            check_minimal_conditions(cfg_.model, mc.samples, mc.box_half_width, mc.seed);
        artifact("model_check.json", to_json(report).dump(2) + "\n");
        CsvTable t({"condition", "passed", "value"});
        for (const auto& r : report.results) t.add({r.name, r.passed ? "1" : "0", format_number(r.value)});
        artifact("model_check.csv", t.str());
        require_admissible(report, mc.allow_flagged);
    }

    // Atlas cache keyed by the inputs that determine it; rebuilt from its serialized form in every case.
    const MassShellAtlas& atlas() {
        if (atlas_) return *atlas_;
        const auto& sc = cfg_.shells;
        const std::vector<double> xi_grid = linspace(0.0, sc.xi_max, sc.xi_points);
        if (sc.source == "analytic") {
            atlas_ = analytic_shell_source(shell_definitions(sc), xi_grid);
            return *atlas_;
        }
        json key;
        for (const char* k : {"nu", "omega", "Omega", "coupling", "grid", "solver", "shells"})
            if (cfg_.raw.contains(k)) key[k] = cfg_.raw[k];
        const fs::path dir = out_ / "cache" / sha256_hex(key.dump());
        fs::create_directories(dir);
        FileLock lock(dir / ".lock");
        const fs::path file = dir / "atlas.json";
        json stored;
        if (fs::exists(file)) {
            std::ifstream in(file);
            stored = json::parse(in, nullptr, false);
            if (stored.is_discarded()) stored = nullptr;
            else log_ << "  atlas loaded from cache\n";
        }
        if (stored.is_null()) {
            const MassShellAtlas fresh = trace_shells(cfg_.model, grid(), basis(), xi_grid, sc.branches, sc.trace);
            stored = atlas_to_json(fresh);
            write_file(file, stored.dump() + "\n");
        }
        atlas_ = atlas_from_json(stored, cfg_.model, grid(), cfg_.grid.n_max);
        return *atlas_;
    }

    void shells() {
        const MassShellAtlas& a = atlas();
        artifact("atlas.csv", atlas_csv(a).str());
        artifact("crossings.csv", crossings_csv(a).str());
        if (cfg_.output.svg) artifact("shells.svg", shell_diagram_svg(a));
        log_ << "  " << a.branches.size() << " branches, " << a.crossings.size() << " crossings\n";
    }

    void thresholds() {
        const MassShellAtlas& a = atlas();
        const auto radii = cfg_.thresholds.xi.values();
        std::vector<ThresholdReport> reports;
        CsvTable t = thresholds_table();
        for (std::size_t i = 0; i < radii.size(); ++i) {
            reports.push_back(full_report(cfg_.model, a, cfg_.xi_at(radii[i]), cfg_.thresholds.options));
            append_thresholds(t, radii[i], reports.back());
            char name[48];
            std::snprintf(name, sizeof name, "thresholds_xi_%03zu.json", i);
            json j = to_json(reports.back());
            j["xi_radius"] = radii[i];
            artifact(name, j.dump(2) + "\n");
        }
        artifact("thresholds.csv", t.str());
        if (cfg_.output.svg) artifact("thresholds.svg", shell_diagram_svg(a, radii, reports));
    }

    void vfield() {
        const MassShellAtlas& a = atlas();
        const auto& vc = cfg_.vfield;
        CalibrationOptions opt = vc.calibration;
        opt.box_half_width = cfg_.grid.half_width;
        const CalibrationResult cal = calibrate(cfg_.model, a, vc.xi, vc.energy, opt);
        const VectorFieldBundle bundle = build_vector_field(cfg_.model, a, cal, grid());
        json cj = to_json(cal.record, cal.tori);
        cj["energy"] = vc.energy;
        cj["xi"] = json::array({vc.xi.x(), vc.xi.y()});
        cj["emission_pieces"] = cal.emission.shells;
        cj["emission_clipped"] = cal.emission.clipped;
        cj["sup_norm"] = bundle.sup_norm;
        cj["sup_bound"] = bundle.sup_bound();
        artifact("calibration.json", cj.dump(2) + "\n");
        artifact("vfield.csv", vfield_csv(bundle, grid()).str());

        std::vector<int> support;
        for (int p = 0; p < grid().size(); ++p)
            if (!bundle.sampled[static_cast<std::size_t>(p)].isZero(0.0)) support.push_back(p);
        const bool two = cfg_.model.nu == 2;
        std::vector<std::string> header{"k0x"};
        if (two) header.push_back("k0y");
        header.push_back("ktx");
        if (two) header.push_back("kty");
        for (const char* h : {"displacement", "bound", "J"}) header.push_back(h);
        CsvTable t(header);
        const int n = std::min<int>(vc.flow_samples, static_cast<int>(support.size()));
        const double bound = std::abs(vc.flow_time) * bundle.sup_bound();
        for (int i = 0; i < n; ++i) {
            const std::size_t idx = support.size() * static_cast<std::size_t>(i) / static_cast<std::size_t>(n);
            const Vec k0 = grid().node(support[idx]);
            const FlowResult f = flow_map(bundle, k0, vc.flow_time, vc.flow_step);
            std::vector<std::string> row{format_number(k0.x())};
            if (two) row.push_back(format_number(k0.y()));
            row.push_back(format_number(f.k.x()));
            if (two) row.push_back(format_number(f.k.y()));
            row.push_back(format_number((f.k - k0).norm()));
            row.push_back(format_number(bound));
            row.push_back(format_number(f.J));
            t.add(std::move(row));
        }
        artifact("flow.csv", t.str());
    }

    void mourre() {
        const MassShellAtlas& a = atlas();
        const auto& mc = cfg_.mourre;
        MourreOptions opt = mc.options;
        opt.calibration.box_half_width = cfg_.grid.half_width;
        const auto lambdas = mc.lambda.values();
        CsvTable t = mourre_table();
        json reports = json::array(), checks = json::array();
        for (double radius : mc.xi_radii) {
            const Vec xi = cfg_.xi_at(radius);
            const auto scan = mourre_scan(cfg_.model, a, grid(), basis(), xi, lambdas, opt);
            for (const auto& r : scan) {
                append_mourre(t, radius, r);
                json entry{{"xi_radius", radius},
                           {"lambda", r.lambda},
                           {"c_fiber", std::isfinite(r.c_fiber) ? json(r.c_fiber) : json(nullptr)},
                           {"threshold_distance", r.threshold_distance},
                           {"verdict", to_string(r.verdict)},
                           {"note", r.note},
                           {"ladder", json::array()}};
                for (const auto& e : r.ladder)
                    entry["ladder"].push_back(
                        {{"kappa", e.kappa},
                         {"window_dim", e.window_dim},
                         {"n_compact", e.n_compact},
                         {"c_value", std::isfinite(e.c_value) ? json(e.c_value) : json(nullptr)},
                         {"c_all", std::isfinite(e.c_all) ? json(e.c_all) : json(nullptr)}});
                reports.push_back(entry);
            }
            if (mc.commutator_check || mc.virial_check) checks.push_back(field_checks(a, radius, scan, opt));
        }
        artifact("mourre.csv", t.str());
        artifact("mourre.json", reports.dump(2) + "\n");
        if (mc.commutator_check || mc.virial_check) artifact("mourre_checks.json", checks.dump(2) + "\n");
    }

    // Commutator and virial diagnostics at the first scan energy with a positive verdict.
    json field_checks(const MassShellAtlas& a, double radius, const std::vector<MourreReport>& scan,
                      const MourreOptions& opt) {
        const auto& mc = cfg_.mourre;
        json j{{"xi_radius", radius}};
        const MourreReport* pick = nullptr;
        for (const auto& r : scan)
            if (r.verdict == Verdict::Positive) {
                pick = &r;
                break;
            }
        if (!pick) {
            j["note"] = "no positive scan point";
            return j;
        }
        const Vec xi = cfg_.xi_at(radius);
        const VectorFieldBundle bundle = build_vector_field(cfg_.model, a, xi, pick->lambda, grid(), opt.calibration);
        j["lambda"] = pick->lambda;
        if (mc.commutator_check) {
            const CommutatorBundle c = commutator_matrix(cfg_.model, grid(), basis(), xi, bundle);
            j["commutator_discrepancy"] = c.discrepancy;
        }
        if (mc.virial_check) {
            const VirialResult v = virial_check(cfg_.model, grid(), basis(), xi, bundle, mc.virial);
            j["virial_max_error"] = v.max_error;
            j["virial_formula_error"] = v.max_formula_error;
            j["virial_samples"] = v.samples.size();
        }
        return j;
    }

    RunConfig cfg_;
    fs::path out_;
    std::string hash_;
    RunManifest& manifest_;
    std::ostream& log_;
    std::string stage_;
    std::optional<MomentumGrid> grid_;
    std::optional<FockBasis> basis_;
    std::optional<MassShellAtlas> atlas_;
};

}  // namespace

RunManifest run_pipeline(const RunRequest& req, std::ostream& log) {
    const auto t0 = std::chrono::steady_clock::now();
    RunManifest m;
    m.command = req.command_line;
    m.stage = req.stage;
    m.overrides = req.overrides;
    m.version = NELSON_VERSION;
    auto finish = [&] {
        m.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        fs::create_directories(req.out_dir);
        write_file(req.out_dir / kManifestName, m.to_json().dump(2) + "\n");
    };
    try {
        const bool known = std::find(stage_names().begin(), stage_names().end(), req.stage) != stage_names().end();
        if (!known) throw ConfigError("config error at '--stage': unknown stage '" + req.stage + "'");
        const json tree = resolve_config(req);
        RunConfig cfg = parse_config(tree);
        m.config_hash = config_hash(tree);
        fs::create_directories(req.out_dir);
        const std::string resolved = "config.resolved.json";
        write_file(req.out_dir / resolved, tree.dump(2) + "\n");
        const json meta{{"manifest", kManifestName}, {"config_hash", m.config_hash}, {"stage", "config"}, {"file", resolved}};
        write_file(req.out_dir / (resolved + ".meta.json"), meta.dump(2) + "\n");
        m.outputs.push_back(resolved);
        Pipeline(std::move(cfg), req.out_dir, m.config_hash, m, log).run(req.stage);
    } catch (const std::exception& e) {
        m.status = "failed";
        m.error = e.what();
        try {
            finish();
        } catch (const std::exception&) {
            // An unwritable output directory must not mask the original error.
        }
        throw;
    }
    finish();
    return m;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spectral analysis pipeline for translation-invariant boson-particle Hamiltonians"};
    RunRequest req;
    std::string out_dir = "out";
    std::string xi_grid, lambda_grid;
    std::uint64_t seed = 0;
    int threads = 1;
    app.add_option("--config", req.config_path, "model configuration (JSON)")->required();
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--stage", req.stage, "model-check, shells, thresholds, vfield, mourre-scan or all");
    auto* xi_opt = app.add_option("--xi-grid", xi_grid, "radii start:stop:count along the threshold ray");
    auto* lambda_opt = app.add_option("--lambda-grid", lambda_grid, "energies start:stop:count for the scan");
    auto* seed_opt = app.add_option("--seed", seed, "pipeline seed");
    auto* threads_opt = app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--override", req.overrides, "key.path=value, repeatable");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    }
    req.out_dir = out_dir;
    if (*xi_opt) req.xi_grid = xi_grid;
    if (*lambda_opt) req.lambda_grid = lambda_grid;
    if (*seed_opt) req.seed = seed;
    if (*threads_opt) req.threads = threads;
    for (int i = 0; i < argc; ++i) req.command_line += (i ? " " : "") + std::string(argv[i]);
    try {
        const RunManifest m = run_pipeline(req, out);
        out << "wrote " << m.outputs.size() << " files to " << out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        const int code = exit_code(e);
        err << (code == 2 ? "" : code == 3 ? "precondition violated: " : "numerical failure: ") << e.what() << "\n";
        return code;
    }
}

}  // namespace nelson
