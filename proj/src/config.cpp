#include "nelson/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace nelson {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config error at '" + path + "': " + what);
}

// Typed access to one object of the tree; unread keys are reported by finish().
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    std::string at(const std::string& key) const { return join(path_, key); }

    double num(const std::string& key, double def) {
        if (!mark(key)) return def;
        const json& v = j_.at(key);
        if (!v.is_number()) fail(at(key), "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(at(key), "expected a finite number");
        return x;
    }
    double positive(const std::string& key, double def) {
        const double x = num(key, def);
        if (!(x > 0.0)) fail(at(key), "must be positive");
        return x;
    }
    double nonnegative(const std::string& key, double def) {
        const double x = num(key, def);
        if (!(x >= 0.0)) fail(at(key), "must be nonnegative");
        return x;
    }
    long long integer(const std::string& key, long long def, long long lo, long long hi) {
        if (!mark(key)) return def;
        const json& v = j_.at(key);
        if (!v.is_number_integer()) fail(at(key), "expected an integer");
        const long long x = v.get<long long>();
        if (x < lo || x > hi) {
            std::ostringstream os;
            os << "must lie in [" << lo << ", " << hi << "]";
            fail(at(key), os.str());
        }
        return x;
    }
    std::uint64_t seed(const std::string& key, std::uint64_t def) {
        if (!mark(key)) return def;
        const json& v = j_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            fail(at(key), "expected a nonnegative integer");
        return v.get<std::uint64_t>();
    }
    bool flag(const std::string& key, bool def) {
        if (!mark(key)) return def;
        if (!j_.at(key).is_boolean()) fail(at(key), "expected true or false");
        return j_.at(key).get<bool>();
    }
    std::string str(const std::string& key, const std::string& def, const std::set<std::string>& allowed = {}) {
        if (!mark(key)) return def;
        if (!j_.at(key).is_string()) fail(at(key), "expected a string");
        std::string s = j_.at(key).get<std::string>();
        if (!allowed.empty() && !allowed.count(s)) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            fail(at(key), "unknown value '" + s + "' (allowed: " + list + ")");
        }
        return s;
    }
    std::vector<double> nums(const std::string& key, const std::vector<double>& def) {
        if (!mark(key)) return def;
        const json& v = j_.at(key);
        if (!v.is_array()) fail(at(key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) fail(at(key) + "[" + std::to_string(i) + "]", "expected a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }
    Vec vec(const std::string& key, const Vec& def, int nu) {
        if (!has(key)) {
            mark(key);
            return def;
        }
        const auto v = nums(key, {});
        if (static_cast<int>(v.size()) != nu) fail(at(key), "expected " + std::to_string(nu) + " components");
        return nu == 1 ? Vec(v[0], 0.0) : Vec(v[0], v[1]);
    }
    SampleRange range(const std::string& key, const SampleRange& def) {
        if (!has(key)) {
            mark(key);
            return def;
        }
        Node n = child(key);
        SampleRange r;
        r.start = n.num("start", def.start);
        r.stop = n.num("stop", def.stop);
        r.count = static_cast<int>(n.integer("count", def.count, 1, 100000));
        if (r.count > 1 && !(r.stop >= r.start)) fail(n.at("stop"), "must not be below start");
        n.finish();
        return r;
    }
    Node child(const std::string& key) {
        static const json empty = json::object();
        if (!mark(key)) return Node(empty, at(key));
        return Node(j_.at(key), at(key));
    }
    const json& raw(const std::string& key) {
        mark(key);
        return j_.at(key);
    }
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
    }

private:
    bool mark(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

ModelSpec read_model(Node& root) {
    ModelSpec m;
    if (!root.has("nu")) fail("nu", "required key is missing");
    m.nu = static_cast<int>(root.integer("nu", 1, 1, 2));
    {
        if (!root.has("omega")) fail("omega", "required key is missing");
        Node o = root.child("omega");
        const std::string kind = o.str("kind", "relativistic", {"relativistic", "constant"});
        if (kind == "relativistic") {
            m.omega = OneBodyDispersion::relativistic(o.positive("m", 1.0));
        } else {
            m.omega = OneBodyDispersion::constant(o.positive("c0", 1.0));
        }
        o.finish();
    }
    {
        Node o = root.child("Omega");
        const std::string kind = o.str("kind", "nonrelativistic", {"nonrelativistic", "relativistic", "polynomial"});
        if (kind == "nonrelativistic") {
            m.Omega = ParticleDispersion::nonrelativistic();
        } else if (kind == "relativistic") {
            m.Omega = ParticleDispersion::relativistic(o.positive("M", 1.0));
        } else {
            const auto c = o.nums("coefficients", {});
            if (c.size() < 2) fail(o.at("coefficients"), "expected at least two coefficients");
            try {
                m.Omega = ParticleDispersion::polynomial(c);
            } catch (const Error& e) {
                fail(o.at("coefficients"), e.what());
            }
        }
        m.s_Omega = o.num("s", std::min(2.0, m.Omega.natural_growth()));
        o.finish();
    }
    {
        Node c = root.child("coupling");
        const std::string kind = c.str("kind", "nelson", {"nelson", "polaron", "gaussian", "zero"});
        m.coupling.kind = kind == "nelson"     ? CouplingKind::Nelson
                          : kind == "polaron"  ? CouplingKind::Polaron
                          : kind == "gaussian" ? CouplingKind::Gaussian
                                               : CouplingKind::Zero;
        m.coupling.lambda = c.nonnegative("lambda", 0.0);
        m.coupling.uv_cutoff = c.positive("uv_cutoff", 2.0);
        m.coupling.width = c.positive("width", 1.0);
        if (m.coupling.lambda == 0.0) m.coupling.kind = CouplingKind::Zero;
        c.finish();
    }
    try {
        m.validate();
    } catch (const ConfigError& e) {
        fail("model", e.what());
    }
    return m;
}

}  // namespace

std::vector<double> SampleRange::values() const {
    std::vector<double> out;
    if (count == 1) return {start};
    for (int i = 0; i < count; ++i) out.push_back(start + (stop - start) * i / (count - 1));
    return out;
}

SampleRange parse_range(const std::string& text, const std::string& flag) {
    SampleRange r;
    char c1 = 0, c2 = 0;
    std::istringstream is(text);
    if (!(is >> r.start >> c1 >> r.stop >> c2 >> r.count) || c1 != ':' || c2 != ':' || !is.eof() || r.count < 1 ||
        (r.count > 1 && r.stop < r.start))
        throw ConfigError("config error at '" + flag + "': expected start:stop:count with stop >= start, count >= 1");
    return r;
}

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config error: cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config error: '") + path + "' is not valid JSON: " + e.what());
    }
}

void apply_override(json& tree, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("config error at '--override': expected key.path=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &tree;
    std::istringstream is(path);
    std::string key;
    std::vector<std::string> keys;
    while (std::getline(is, key, '.')) keys.push_back(key);
    for (std::size_t i = 0; i < keys.size(); ++i) {
        if (keys[i].empty()) throw ConfigError("config error at '" + path + "': empty key segment");
        if (!node->is_object()) throw ConfigError("config error at '" + path + "': '" + keys[i - 1] + "' is not an object");
        if (i + 1 == keys.size()) {
            (*node)[keys[i]] = value;
        } else {
            if (!node->contains(keys[i])) (*node)[keys[i]] = json::object();
            node = &(*node)[keys[i]];
        }
    }
}

ModelSpec parse_model(const json& tree) {
    Node root(tree, "");
    return read_model(root);
}

RunConfig parse_config(const json& tree) {
    RunConfig c;
    c.raw = tree;
    Node root(tree, "");
    c.model = read_model(root);
    const int nu = c.model.nu;
    c.seed = root.seed("seed", 7);
    c.threads = static_cast<int>(root.integer("threads", 1, 1, 256));
    {
        Node g = root.child("grid");
        c.grid.half_width = g.positive("half_width", 2.0);
        c.grid.points = static_cast<int>(g.integer("points", 65, 3, 4097));
        c.grid.n_max = static_cast<int>(g.integer("n_max", 2, 1, 8));
        c.grid.dimension_cap = static_cast<std::size_t>(
            g.integer("dimension_cap", static_cast<long long>(FockBasis::kDefaultCap), 1, 1LL << 40));
        g.finish();
        if (c.grid.half_width < c.model.coupling.uv_cutoff && c.model.coupled())
            fail("grid.half_width", "must be at least coupling.uv_cutoff so the coupling is resolved");
    }
    {
        Node s = root.child("solver");
        c.solver.tol = s.positive("tol", 1e-10);
        c.solver.dense_threshold = static_cast<std::size_t>(s.integer("dense_threshold", 600, 1, 100000));
        c.solver.max_basis = static_cast<int>(s.integer("max_basis", 0, 0, 100000));
        c.solver.max_restarts = static_cast<int>(s.integer("max_restarts", 2000, 1, 1000000));
        c.solver.seed = s.seed("seed", c.solver.seed);
        s.finish();
    }
    {
        Node s = root.child("shells");
        c.shells.source = s.str("source", "eigensolver", {"eigensolver", "analytic"});
        c.shells.xi_max = s.positive("xi_max", 2.0);
        c.shells.xi_points = static_cast<int>(s.integer("xi_points", 21, 2, 100000));
        c.shells.branches = static_cast<int>(s.integer("branches", 2, 1, 64));
        c.shells.trace.solver = c.solver;
        c.shells.trace.threads = c.threads;
        c.shells.trace.gap_tol = s.nonnegative("gap_tol", 0.0);
        c.shells.trace.cross_tol = s.nonnegative("cross_tol", 0.0);
        c.shells.trace.overlap_tol = s.positive("overlap_tol", 0.1);
        c.shells.trace.extra_eigs = static_cast<int>(s.integer("extra_eigs", 2, 0, 64));
        c.shells.trace.extrapolation_factor = s.positive("extrapolation_factor", 4.0);
        c.shells.trace.composite_scan_points = static_cast<int>(s.integer("composite_scan_points", 0, 0, 100001));
        if (s.has("analytic")) {
            const json& arr = s.raw("analytic");
            if (!arr.is_array()) fail(s.at("analytic"), "expected an array of shells");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                Node d(arr[i], s.at("analytic") + "[" + std::to_string(i) + "]");
                AnalyticShellConfig a;
                a.name = d.str("name", "shell" + std::to_string(i));
                a.coefficients = d.nums("coefficients", {});
                if (a.coefficients.empty()) fail(d.at("coefficients"), "required key is missing");
                a.r_min = d.nonnegative("r_min", 0.0);
                a.r_max = d.positive("r_max", c.shells.xi_max);
                if (!(a.r_max > a.r_min)) fail(d.at("r_max"), "must exceed r_min");
                a.multiplicity = static_cast<int>(d.integer("multiplicity", 1, 1, 64));
                a.ground = d.flag("ground", false);
                d.finish();
                c.shells.analytic.push_back(a);
            }
        } else {
            s.child("analytic");
        }
        if (c.shells.source == "analytic" && c.shells.analytic.empty())
            fail(s.at("analytic"), "analytic source needs at least one shell");
        s.finish();
    }
    {
        Node m = root.child("model_check");
        c.model_check.samples = static_cast<std::size_t>(m.integer("samples", 2000, 1, 100000000));
        c.model_check.box_half_width = m.positive("box_half_width", 10.0);
        c.model_check.seed = m.seed("seed", 1);
        c.model_check.allow_flagged = m.flag("allow_flagged", false);
        m.finish();
    }
    auto read_thresholds = [&](Node& t, ThresholdOptions& o) {
        o.dedup_tol = t.positive("dedup_tol", 1e-8);
        o.newton_tol = t.positive("newton_tol", 1e-10);
        o.collinear_scan = static_cast<int>(t.integer("collinear_scan", 4000, 8, 10000000));
        o.net_seeds = static_cast<int>(t.integer("net_seeds", 48, 0, 100000));
        o.newton_iters = static_cast<int>(t.integer("newton_iters", 60, 1, 100000));
        o.seed = c.seed;
        Node cm = t.child("composite");
        o.composite.scan_points = static_cast<int>(cm.integer("scan_points", 65, 3, 100001));
        o.composite.scan_half_width = cm.positive("scan_half_width", c.grid.half_width);
        o.composite.starts = static_cast<int>(cm.integer("starts", 8, 1, 1000));
        o.composite.tol = cm.positive("tol", 1e-12);
        o.composite.max_iter = static_cast<int>(cm.integer("max_iter", 4000, 1, 10000000));
        cm.finish();
    };
    {
        Node t = root.child("thresholds");
        c.thresholds.xi = t.range("xi", c.thresholds.xi);
        c.thresholds.direction = t.vec("direction", Vec(1.0, 0.0), nu);
        if (!(c.thresholds.direction.norm() > 0.0)) fail(t.at("direction"), "must be nonzero");
        c.thresholds.direction.normalize();
        read_thresholds(t, c.thresholds.options);
        t.finish();
    }
    auto read_calibration = [&](Node& v, CalibrationOptions& o) {
        o.dedup_tol = c.thresholds.options.dedup_tol;
        o.thresholds = c.thresholds.options;
        o.grad_floor = v.positive("grad_floor", 1e-6);
        o.radial_samples = static_cast<int>(v.integer("radial_samples", 4000, 16, 10000000));
        o.angular_samples = static_cast<int>(v.integer("angular_samples", 720, 4, 10000000));
        o.torus_samples = static_cast<int>(v.integer("torus_samples", 16, 2, 100000));
        o.theta_samples = static_cast<int>(v.integer("theta_samples", 64, 2, 100000));
        o.lipschitz_radii = static_cast<int>(v.integer("lipschitz_radii", 5, 2, 100000));
        o.max_halvings = static_cast<int>(v.integer("max_halvings", 60, 1, 1000));
        o.box_half_width = c.grid.half_width;
    };
    {
        Node v = root.child("vfield");
        c.vfield.xi = v.vec("xi", Vec::Zero(), nu);
        c.vfield.energy = v.num("energy", 1.5);
        read_calibration(v, c.vfield.calibration);
        c.vfield.flow_samples = static_cast<int>(v.integer("flow_samples", 100, 0, 1000000));
        c.vfield.flow_time = v.num("flow_time", 1.0);
        c.vfield.flow_step = v.positive("flow_step", 1e-3);
        v.finish();
    }
    {
        Node m = root.child("mourre");
        c.mourre.xi_radii = m.nums("xi_radii", {0.0});
        if (c.mourre.xi_radii.empty()) fail(m.at("xi_radii"), "expected at least one radius");
        for (double r : c.mourre.xi_radii)
            if (!(r >= 0.0)) fail(m.at("xi_radii"), "radii must be nonnegative");
        c.mourre.lambda = m.range("lambda", c.mourre.lambda);
        auto& o = c.mourre.options;
        o.kappa_ladder = m.nums("kappa_ladder", o.kappa_ladder);
        if (o.kappa_ladder.size() < 3) fail(m.at("kappa_ladder"), "expected at least three values");
        for (std::size_t i = 0; i < o.kappa_ladder.size(); ++i)
            if (!(o.kappa_ladder[i] > 0.0) || (i > 0 && !(o.kappa_ladder[i] < o.kappa_ladder[i - 1])))
                fail(m.at("kappa_ladder"), "expected positive, strictly decreasing values");
        o.stabilization = m.positive("stabilization", 0.8);
        o.positive_floor = m.nonnegative("positive_floor", 0.0);
        o.near_threshold = m.nonnegative("near_threshold", 0.0);
        o.channel_weight = m.positive("channel_weight", 0.5);
        o.level_set_angles = static_cast<int>(m.integer("level_set_angles", 720, 4, 10000000));
        o.level_set_radii = static_cast<int>(m.integer("level_set_radii", 4000, 16, 10000000));
        read_calibration(m, o.calibration);
        c.mourre.commutator_check = m.flag("commutator_check", true);
        c.mourre.virial_check = m.flag("virial_check", true);
        c.mourre.virial.samples = static_cast<int>(m.integer("virial_samples", 20, 1, 100000));
        c.mourre.virial.fd_step = m.positive("virial_fd_step", 1e-3);
        c.mourre.virial.solver = c.solver;
        m.finish();
    }
    {
        Node o = root.child("output");
        c.output.svg = o.flag("svg", false);
        o.finish();
    }
    root.finish();
    return c;
}

std::vector<ShellDefinition> shell_definitions(const ShellConfig& shells) {
    std::vector<ShellDefinition> out;
    for (const auto& a : shells.analytic) {
        const std::vector<double> c = a.coefficients;
        RadialProfile fn{[c](double r) {
                             double acc = 0.0;
                             for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * r + *it;
                             return acc;
                         },
                         [c](double r) {
                             double acc = 0.0;
                             for (std::size_t i = c.size(); i-- > 1;) acc = acc * r + static_cast<double>(i) * c[i];
                             return acc;
                         },
                         [c](double r) {
                             double acc = 0.0;
                             for (std::size_t i = c.size(); i-- > 2;)
                                 acc = acc * r + static_cast<double>(i * (i - 1)) * c[i];
                             return acc;
                         }};
        out.push_back({a.name, fn, a.r_min, a.r_max, a.multiplicity, a.ground});
    }
    return out;
}

}  // namespace nelson
