#include "nelson/thresholds.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace nelson {

namespace {

std::vector<double> sorted_unique(std::vector<double> v, double tol) {
    std::sort(v.begin(), v.end());
    std::vector<double> out;
    for (double x : v)
        if (out.empty() || x - out.back() > tol) out.push_back(x);
    return out;
}

Vec ray_direction(const Vec& xi) {
    const double s = xi.norm();
    return s > 0.0 ? Vec(xi / s) : Vec(1.0, 0.0);
}

double sgn(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

// Even extensions along a line: f_e(x) = f(|x|).
double even_d1(const RadialProfile& f, double x) { return sgn(x) * f.d1(std::abs(x)); }

double omega_even_d1(const OneBodyDispersion& w, double t) {
    return w.is_constant() ? 0.0 : sgn(t) * w.radial_d1(std::abs(t));
}

double omega_even_d2(const OneBodyDispersion& w, double t) {
    return w.is_constant() ? 0.0 : w.radial_d2(std::abs(t));
}

Vec shell_gradient(const ShellBranch& S, const Vec& eta) { return radial_gradient(S.fn.d1(eta.norm()), eta); }

Mat2 shell_hessian(const ShellBranch& S, const Vec& eta) {
    const double r = eta.norm();
    return radial_hessian(S.fn.d1(r), S.fn.d2(r), eta);
}

double critical_residual(const ModelSpec& model, const ShellBranch& S, const Vec& xi, const Vec& k) {
    return (shell_gradient(S, xi - k) - model.omega.gradient(k)).norm();
}

}  // namespace

std::vector<double> ThresholdReport::energies(double dedup_tol) const {
    std::vector<double> e;
    for (const auto& t : t_shell) e.push_back(t.energy);
    for (const auto& t : t_parallel) e.push_back(t.energy);
    for (const auto& t : t_hash) e.push_back(t.energy);
    return sorted_unique(e, dedup_tol);
}

std::vector<double> ThresholdReport::obstructions(double dedup_tol) const {
    std::vector<double> e = energies(dedup_tol);
    e.insert(e.end(), exc.begin(), exc.end());
    return sorted_unique(e, dedup_tol);
}

double essential_bottom(const ModelSpec& model, const MassShellAtlas& atlas, const Vec& xi,
                        const ThresholdOptions& options) {
    CompositeOptions co = options.composite;
    co.scan_half_width = std::max(co.scan_half_width, xi.norm());
    return sigma_n_min(model, atlas.ground, xi, 1, co).value;
}

double cluster_bottom(const Eigen::VectorXd& ascending, double spacing, int run) {
    const Eigen::Index n = ascending.size();
    for (Eigen::Index i = 0; i + run < n; ++i) {
        bool dense = true;
        for (int j = 0; j < run && dense; ++j) dense = ascending[i + j + 1] - ascending[i + j] < spacing;
        if (dense) return ascending[i];
    }
    throw NumericalError("no dense eigenvalue cluster among the computed eigenvalues");
}

std::vector<double> omega_critical_radii(const OneBodyDispersion& omega, double r_max) {
    if (omega.is_constant()) return {};
    std::vector<double> out;
    if (std::abs(omega.radial_d1(0.0)) <= 1e-12) out.push_back(0.0);
    if (r_max > 0.0) {
        auto f = [&](double r) { return omega.radial_d1(r); };
        for (double r : scan_roots(f, 1e-9, r_max, 4000))
            if (out.empty() || r - out.back() > 1e-9) out.push_back(r);
    }
    return out;
}

std::vector<ShellThreshold> threshold_shell(const ModelSpec& model, const MassShellAtlas& atlas, const Vec& xi,
                                            const ThresholdOptions& opt, std::vector<std::string>* log) {
    std::vector<ShellThreshold> out;
    const double s = xi.norm();
    const Vec u = ray_direction(xi);
    auto note = [&](const std::string& m) {
        if (log) log->push_back(m);
    };
    for (const auto& S : atlas.branches) {
        std::vector<ShellThreshold> found;
        auto add = [&](const Vec& k) {
            const double res = critical_residual(model, S, xi, k);
            if (!(res <= opt.newton_tol)) {
                std::ostringstream os;
                os << "shell " << S.id << ": critical point at k=(" << k.x() << "," << k.y()
                   << ") dropped, residual " << res;
                note(os.str());
                return;
            }
            const double r = (xi - k).norm();
            if (!S.covers(r, 1e-12)) return;
            const double E = S.fn.value(r) + model.omega(k);
            for (const auto& f : found)
                if (std::abs(f.energy - E) <= opt.dedup_tol) return;
            found.push_back({E, k, S.id, res});
        };
        // Collinear reduction: k = t u, so xi - k = (s - t) u.
        auto dphi = [&](double t) { return -even_d1(S.fn, s - t) + omega_even_d1(model.omega, t); };
        auto d2phi = [&](double t) { return S.fn.d2(std::abs(s - t)) + omega_even_d2(model.omega, t); };
        std::vector<std::pair<double, double>> intervals;
        if (S.r_min <= 0.0) {
            intervals.push_back({s - S.r_max, s + S.r_max});
        } else {
            intervals.push_back({s - S.r_max, s - S.r_min});
            intervals.push_back({s + S.r_min, s + S.r_max});
        }
        for (const auto& [a, b] : intervals) {
            for (double t : scan_roots(dphi, a, b, opt.collinear_scan)) {
                for (int it = 0; it < 20 && std::abs(dphi(t)) > 0.1 * opt.newton_tol; ++it) {
                    const double h = d2phi(t);
                    if (h == 0.0) break;
                    const double tn = t - dphi(t) / h;
                    if (!(tn >= a && tn <= b)) break;
                    t = tn;
                }
                add(t * u);
            }
        }
        // Two-dimensional Newton net.
        if (model.nu == 2 && opt.net_seeds > 0) {
            std::mt19937_64 rng(opt.seed + static_cast<std::uint64_t>(S.id));
            std::uniform_real_distribution<double> rad(S.r_min, S.r_max), ang(0.0, 2.0 * M_PI);
            for (int seed = 0; seed < opt.net_seeds; ++seed) {
                const double rr = rad(rng), th = ang(rng);
                Vec k = xi - rr * Vec(std::cos(th), std::sin(th));
                bool ok = false;
                for (int it = 0; it < opt.newton_iters; ++it) {
                    const Vec eta = xi - k;
                    if (!S.covers(eta.norm(), 1e-12)) break;
                    const Vec G = model.omega.gradient(k) - shell_gradient(S, eta);
                    if (G.norm() <= opt.newton_tol) {
                        ok = true;
                        break;
                    }
                    const Mat2 J = model.omega.hessian(k) + shell_hessian(S, eta);
                    const Vec step = J.completeOrthogonalDecomposition().solve(-G);
                    if (!step.allFinite()) break;
                    k += step;
                }
                if (ok) {
                    add(k);
                } else {
                    std::ostringstream os;
                    os << "shell " << S.id << ": planar Newton seed " << seed << " stagnated";
                    note(os.str());
                }
            }
        }
        out.insert(out.end(), found.begin(), found.end());
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.energy < y.energy; });
    return out;
}

std::vector<ParallelThreshold> threshold_parallel(const ModelSpec& model, const MassShellAtlas& atlas, const Vec& xi) {
    std::vector<ParallelThreshold> out;
    const double s = xi.norm();
    const Vec u = ray_direction(xi);
    for (std::size_t c = 0; c < atlas.crossings.size(); ++c) {
        const auto& X = atlas.crossings[c];
        const int id = static_cast<int>(c);
        if (s == 0.0) {
            out.push_back({X.energy + model.omega(Vec(X.radius * u)), X.radius, id, 0.0});
            continue;
        }
        for (double r : {s - X.radius, s + X.radius}) {
            const double res = std::abs((xi - r * u).norm() - X.radius);
            bool dup = false;
            for (const auto& p : out) dup = dup || (p.crossing == id && p.r == r);
            if (!dup) out.push_back({X.energy + model.omega(Vec(r * u)), r, id, res});
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.energy < y.energy; });
    return out;
}

std::vector<HashThreshold> threshold_hash(const ModelSpec& model, const MassShellAtlas& atlas, const Vec& xi,
                                          const ThresholdOptions& opt) {
    std::vector<HashThreshold> out;
    const double s = xi.norm();
    const Vec u = ray_direction(xi);
    const Vec perp(-u.y(), u.x());
    double rmax = 0.0;
    for (const auto& X : atlas.crossings) rmax = std::max(rmax, s + X.radius);
    for (std::size_t c = 0; c < atlas.crossings.size(); ++c) {
        const auto& X = atlas.crossings[c];
        const int id = static_cast<int>(c);
        if (model.omega.is_constant()) {
            const Vec k = xi - X.radius * u;
            out.push_back({X.energy + model.omega.level(), k, k.norm(), id, 0.0});
            continue;
        }
        for (double rho : omega_critical_radii(model.omega, rmax)) {
            std::vector<Vec> witnesses;
            if (model.nu == 1) {
                for (double t : {rho, -rho})
                    if (std::abs(std::abs(s - t) - X.radius) <= opt.dedup_tol) witnesses.push_back(t * u);
            } else if (rho >= std::abs(s - X.radius) - opt.dedup_tol && rho <= s + X.radius + opt.dedup_tol) {
                if (rho == 0.0 || s == 0.0) {
                    witnesses.push_back(rho * u);
                } else {
                    // |k| = rho and |xi - k| = R_c: angle from the law of cosines.
                    const double c0 = std::clamp((s * s + rho * rho - X.radius * X.radius) / (2.0 * s * rho), -1.0, 1.0);
                    witnesses.push_back(rho * (c0 * u + std::sqrt(1.0 - c0 * c0) * perp));
                }
            }
            for (const auto& k : witnesses) {
                const double res = std::max(model.omega.gradient(k).norm(), std::abs((xi - k).norm() - X.radius));
                bool dup = false;
                for (const auto& h : out) dup = dup || (h.crossing == id && std::abs(h.rho - rho) <= opt.dedup_tol);
                if (!dup) out.push_back({X.energy + model.omega.radial(rho), k, rho, id, res});
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.energy < y.energy; });
    return out;
}

std::vector<double> exc_set(const ModelSpec& model, const MassShellAtlas& atlas, const Vec& xi,
                            const std::vector<double>& extra_isolated, double dedup_tol) {
    if (!model.coupling.ir_singular()) return {};
    const double w0 = model.omega(Vec::Zero());
    std::vector<double> e;
    for (const auto* b : atlas.branches_at(xi.norm())) e.push_back(w0 + b->fn.value(xi.norm()));
    for (double v : extra_isolated) e.push_back(w0 + v);
    return sorted_unique(e, dedup_tol);
}

ThresholdReport full_report(const ModelSpec& model, const MassShellAtlas& atlas, const Vec& xi,
                            const ThresholdOptions& opt) {
    ThresholdReport r;
    r.xi = xi;
    CompositeOptions co = opt.composite;
    co.scan_half_width = std::max(co.scan_half_width, xi.norm());
    r.min1 = sigma_n_min(model, atlas.ground, xi, 1, co);
    r.min2 = sigma_n_min(model, atlas.ground, xi, 2, co);
    r.sigma1 = r.min1.value;
    r.sigma2 = r.min2.value;
    if (r.min1.extrapolated || r.min2.extrapolated) r.log.push_back("threshold minimizer used extrapolated ground energy");
    if (r.min1.fallback || r.min2.fallback) r.log.push_back("local descent failed; grid-scan value used");
    // Thresholds at the window's lower edge are kept when they agree with sigma1 to dedup_tol.
    auto inside = [&](double E) { return E >= r.sigma1 - opt.dedup_tol && E < r.sigma2; };
    for (const auto& t : threshold_shell(model, atlas, xi, opt, &r.log))
        if (inside(t.energy)) r.t_shell.push_back(t);
    for (const auto& t : threshold_parallel(model, atlas, xi))
        if (inside(t.energy)) r.t_parallel.push_back(t);
    for (const auto& t : threshold_hash(model, atlas, xi, opt))
        if (inside(t.energy)) r.t_hash.push_back(t);
    for (double e : exc_set(model, atlas, xi, {}, opt.dedup_tol))
        if (inside(e)) r.exc.push_back(e);
    return r;
}

DiscretenessResult discreteness_check(const std::vector<ThresholdReport>& reports, double eps, std::size_t max_count,
                                      double dedup_tol) {
    DiscretenessResult d;
    d.min_separation = std::numeric_limits<double>::infinity();
    for (const auto& r : reports) {
        std::vector<double> e;
        for (double x : r.obstructions(0.0)) {
            if (x < r.sigma1 - dedup_tol || x > r.sigma2 - eps) continue;
            if (!std::isfinite(x)) {
                d.passed = false;
                d.detail = "non-finite threshold energy";
            }
            e.push_back(x);
        }
        const auto u = sorted_unique(e, dedup_tol);
        d.worst_count = std::max(d.worst_count, u.size());
        for (std::size_t i = 1; i < u.size(); ++i) d.min_separation = std::min(d.min_separation, u[i] - u[i - 1]);
        if (u.size() > max_count) {
            d.passed = false;
            std::ostringstream os;
            os << "|xi| = " << r.xi.norm() << ": " << u.size() << " energies in the compact sub-window";
            d.detail = os.str();
        }
    }
    return d;
}

}  // namespace nelson
