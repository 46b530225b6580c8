#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nelson/conjugate.hpp"

namespace nelson {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct AngularSample {
    double theta;
    int w;
};

std::vector<AngularSample> angular_samples(int nu, int count) {
    std::vector<AngularSample> out;
    if (nu == 1) return {{0.0, 1}, {M_PI, 1}};
    const int n = std::max(2, count / 2);
    for (int m = 0; m <= n; ++m) {
        const double t = M_PI * m / n;
        out.push_back({t, 1});
        if (m > 0 && m < n) out.push_back({t, -1});
    }
    return out;
}

Vec shell_grad_k(const ModelSpec& model, const RadialProfile& fn, const Vec& xi, const Vec& k) {
    const Vec eta = xi - k;
    return model.omega.gradient(k) - radial_gradient(fn.d1(eta.norm()), eta);
}

std::string fmt(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

}  // namespace

std::vector<ShellPiece> split_shells(const MassShellAtlas& atlas) {
    std::vector<ShellPiece> out;
    const double traced_end = atlas.xi_grid.empty() ? kInf : atlas.xi_grid.back();
    for (const auto& b : atlas.branches) {
        std::vector<double> cuts;
        for (const auto& c : atlas.crossings)
            if ((c.branch_a == b.id || c.branch_b == b.id) && c.radius > b.r_min && c.radius < b.r_max)
                cuts.push_back(c.radius);
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        std::vector<double> edges{b.r_min};
        edges.insert(edges.end(), cuts.begin(), cuts.end());
        edges.push_back(b.r_max);
        const bool outer_real = atlas.source == AtlasSource::AnalyticSynthetic ? std::isfinite(b.r_max)
                                                                              : b.r_max < traced_end - 1e-12;
        for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
            ShellPiece p;
            p.shell_id = b.id;
            p.r_min = edges[e];
            p.r_max = edges[e + 1];
            p.inner_edge = e > 0 || b.r_min > 0.0;
            p.outer_edge = e + 2 < edges.size() || outer_real;
            p.fn = b.fn;
            out.push_back(std::move(p));
        }
    }
    return out;
}

CalibrationResult calibrate(const ModelSpec& model, const MassShellAtlas& atlas, const Vec& xi, double E,
                            const CalibrationOptions& opt) {
    return calibrate(model, atlas, full_report(model, atlas, xi, opt.thresholds), E, opt);
}

CalibrationResult calibrate(const ModelSpec& model, const MassShellAtlas& atlas, const ThresholdReport& report,
                            double E, const CalibrationOptions& opt) {
    CalibrationResult res;
    res.report = report;
    res.energy = E;
    res.grad_floor = opt.grad_floor;
    auto& rec = res.record;
    const Vec xi = report.xi;
    const PolarFrame frame(xi);
    const std::string where = " at |xi| = " + fmt(xi.norm());

    // Validated window around E.
    if (!(E > report.sigma1 && E < report.sigma2))
        throw PreconditionError("energy " + fmt(E) + " lies outside the one-boson window [" + fmt(report.sigma1) +
                                ", " + fmt(report.sigma2) + ")" + where);
    double dist = std::min(E - report.sigma1, report.sigma2 - E);
    for (double e : report.obstructions(opt.dedup_tol)) dist = std::min(dist, std::abs(E - e));
    if (dist <= opt.dedup_tol)
        throw PreconditionError("energy " + fmt(E) + " lies in the threshold set or the exceptional set" + where);
    rec.delta_prime0 = 0.4 * dist;

    // Tori around non-collinear crossing momenta at E.
    std::vector<TorusSpec>& tori = res.tori;
    std::vector<double> torus_radii;
    for (const auto& m : crossing_momenta(model, atlas, xi, E)) {
        int i = -1;
        for (std::size_t q = 0; q < torus_radii.size(); ++q)
            if (std::abs(torus_radii[q] - m.R) <= 1e-12) i = static_cast<int>(q);
        if (i < 0) {
            torus_radii.push_back(m.R);
            i = static_cast<int>(torus_radii.size()) - 1;
        }
        TorusSpec t;
        t.i = i;
        t.j = static_cast<int>(std::count_if(tori.begin(), tori.end(), [i](const TorusSpec& x) { return x.i == i; }));
        t.crossing = m.crossing;
        t.R = m.R;
        t.theta = m.theta;
        tori.push_back(t);
    }

    const std::vector<ShellPiece> pieces = split_shells(atlas);
    double s_max = 0.0;
    for (const auto& p : pieces) s_max = std::max(s_max, p.r_max);
    const double reach = opt.box_half_width > 0.0 ? xi.norm() + opt.box_half_width * std::sqrt(double(model.nu))
                                                  : xi.norm() + 20.0;
    s_max = std::min(s_max, reach);
    const double ds = s_max / opt.radial_samples;
    const double resolution = opt.resolution > 0.0 ? opt.resolution : ds;
    const auto angles = angular_samples(model.nu, opt.angular_samples);

    double eps_t = 0.0;
    if (!tori.empty()) {
        double minR = kInf, minAng = kInf;
        for (const auto& t : tori) {
            minR = std::min(minR, t.R);
            minAng = std::min(minAng, std::min(t.theta, M_PI - t.theta));
        }
        rec.eps_r4 = std::min(1.0, 0.5 * minR);
        rec.eps_theta2 = 0.45 * minAng;
        // Shrink until |grad omega| is bounded below and k . grad omega keeps one sign on each torus.
        double et = rec.eps_theta2, er = rec.eps_r4;
        const int n = opt.torus_samples;
        for (;;) {
            bool ok = true;
            for (auto& t : tori) {
                const Vec kc = frame.k(t.R, t.theta, 1);
                const double sc = kc.dot(model.omega.gradient(kc));
                t.sigma = sc > 0 ? 1 : -1;
                if (sc == 0.0) ok = false;
                for (int a = 0; a <= n && ok; ++a) {
                    for (int b = 0; b <= n && ok; ++b) {
                        for (int w : {1, -1}) {
                            const double r = t.R - er + 2.0 * er * a / n;
                            const double th = t.theta - et + 2.0 * et * b / n;
                            const Vec k = frame.k(r, th, w);
                            const Vec g = model.omega.gradient(k);
                            if (g.norm() < opt.grad_floor || t.sigma * k.dot(g) <= 0.0) ok = false;
                        }
                    }
                }
            }
            if (ok) break;
            et *= 0.5;
            er *= 0.5;
            ++rec.torus_halvings;
            if (er < resolution || rec.torus_halvings > opt.max_halvings)
                throw ResolutionError("torus gradient bound: |grad omega| is not bounded below with a fixed sign on the"
                                      " tori before their thickness reaches the sampling resolution" + where);
        }
        rec.eps_theta1 = et;
        rec.eps_r3 = er;
        // Separation of crossings in energy-momentum space and the Lipschitz bound of the landing map.
        rec.d = kInf;
        for (const auto& t : tori) {
            const auto& X = atlas.crossings[static_cast<std::size_t>(t.crossing)];
            for (std::size_t c = 0; c < atlas.crossings.size(); ++c) {
                if (static_cast<int>(c) == t.crossing) continue;
                const auto& Y = atlas.crossings[c];
                rec.d = std::min(rec.d, std::hypot(X.radius - Y.radius, X.energy - Y.energy));
            }
        }
        rec.C = 0.0;
        for (const auto& t : tori) {
            for (int a = 0; a <= n; ++a) {
                for (int b = 0; b <= n; ++b) {
                    for (int w : {1, -1}) {
                        const double r = t.R - er + 2.0 * er * a / n;
                        const double th = t.theta - et + 2.0 * et * b / n;
                        const Vec k = frame.k(r, th, w);
                        const Vec g = model.omega.gradient(k);
                        Eigen::Matrix<double, 3, 2> J;
                        const Vec kr = frame.dk_dr(th, w), kt = frame.v(r, th, w);
                        J << kr.x(), kt.x(), kr.y(), kt.y(), g.dot(kr), g.dot(kt);
                        rec.C = std::max(rec.C, J.jacobiSvd().singularValues()[0]);
                    }
                }
            }
        }
        rec.C *= 1.05;
        const double cap = std::isfinite(rec.d) ? rec.d / (2.0 * rec.C) : kInf;
        eps_t = std::min(rec.eps_theta1, cap);
        rec.eps_theta = eps_t;
        rec.eps_r2 = std::min(rec.eps_r3, cap);
        if (rec.eps_r2 < resolution)
            throw ResolutionError("crossing isolation: the radial thickness needed to separate crossings is below the"
                                  " sampling resolution" + where);
    }

    // Shrink the window until crossing landings are covered by the tori and land only on their own crossing.
    double delta = rec.delta_prime0;
    auto landing_ok = [&](double dl, std::vector<Vec>* landings) {
        for (std::size_t c = 0; c < atlas.crossings.size(); ++c) {
            const auto& X = atlas.crossings[c];
            for (const auto& a : angles) {
                const Vec k = frame.k(X.radius, a.theta, a.w);
                if (std::abs(X.energy + model.omega(k) - E) > dl) continue;
                if (landings) landings->push_back(k);
                bool covered = false;
                for (const auto& t : tori)
                    covered = covered || (std::abs(t.R - X.radius) <= 1e-12 && std::abs(a.theta - t.theta) < eps_t);
                if (!covered) return false;
            }
        }
        for (const auto& t : tori) {
            for (std::size_t c = 0; c < atlas.crossings.size(); ++c) {
                if (static_cast<int>(c) == t.crossing) continue;
                const auto& Y = atlas.crossings[c];
                if (std::abs(Y.radius - t.R) > rec.eps_r2) continue;
                for (int b = 0; b <= opt.torus_samples; ++b) {
                    const double th = t.theta - eps_t + 2.0 * eps_t * b / opt.torus_samples;
                    for (int w : {1, -1})
                        if (std::abs(Y.energy + model.omega(frame.k(Y.radius, th, w)) - E) <= dl) return false;
                }
            }
        }
        return true;
    };
    while (!landing_ok(delta, nullptr)) {
        delta *= 0.5;
        ++rec.delta_halvings;
        if (delta < opt.dedup_tol || rec.delta_halvings > opt.max_halvings)
            throw ResolutionError("crossing-landing coverage: the validated energy window shrank below dedup_tol" +
                                  where);
    }
    rec.delta_prime = delta;
    EmissionSets& em = res.emission;
    em.delta_prime = delta;
    em.radial_spacing = ds;
    landing_ok(delta, &em.K_J_X);

    // Emission momenta: k with S(|xi - k|) + omega(k) in the validated window.
    std::vector<bool> reachable(pieces.size(), false);
    std::vector<double> samples_s, samples_theta;
    for (int a = 0; a <= opt.radial_samples; ++a) {
        const double s = ds * a;
        for (const auto& ang : angles) {
            const Vec k = frame.k(s, ang.theta, ang.w);
            const double w = model.omega(k);
            for (std::size_t p = 0; p < pieces.size(); ++p) {
                if (!pieces[p].covers(s)) continue;
                if (std::abs(pieces[p].fn.value(s) + w - E) > delta) continue;
                reachable[p] = true;
                em.K_J.push_back({k, static_cast<int>(p)});
                samples_s.push_back(s);
                samples_theta.push_back(ang.theta);
                if (opt.box_half_width > 0.0 && k.cwiseAbs().maxCoeff() > opt.box_half_width) em.clipped = true;
            }
        }
    }
    for (std::size_t p = 0; p < pieces.size(); ++p)
        if (reachable[p]) em.shells.push_back(static_cast<int>(p));
    if (em.clipped) rec.log.push_back("emission set reaches beyond the momentum box");

    // Radial margins from annulus boundaries, crossing spheres and the origin.
    std::vector<double> bounds;
    for (int p : em.shells) {
        const auto& sp = pieces[static_cast<std::size_t>(p)];
        if (sp.inner_edge) bounds.push_back(sp.r_min);
        if (sp.outer_edge && std::isfinite(sp.r_max)) bounds.push_back(sp.r_max);
    }
    std::sort(bounds.begin(), bounds.end());
    bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
    for (double Rp : bounds) {
        bool is_torus = false;
        for (double R : torus_radii) is_torus = is_torus || std::abs(R - Rp) <= 1e-12;
        if (is_torus) continue;
        double m = kInf;
        for (double s : samples_s) m = std::min(m, std::abs(s - Rp));
        rec.r_prime.push_back(std::max(0.0, m - ds));
    }
    for (std::size_t i = 0; i < torus_radii.size(); ++i) {
        double m = kInf;
        for (std::size_t q = 0; q < samples_s.size(); ++q) {
            bool in_window = false;
            for (const auto& t : tori)
                if (t.i == static_cast<int>(i)) in_window = in_window || std::abs(samples_theta[q] - t.theta) < eps_t;
            if (in_window) continue;
            m = std::min(m, std::abs(samples_s[q] - torus_radii[i]));
        }
        rec.r_i.push_back(std::max(0.0, m - ds));
    }
    rec.r_exc = kInf;
    if (!report.exc.empty()) {
        const double dtheta = model.nu == 2 ? M_PI / std::max(2, opt.angular_samples / 2) : 0.0;
        for (const auto& [k, p] : em.K_J) rec.r_exc = std::min(rec.r_exc, k.norm() - ds - s_max * dtheta);
        rec.r_exc = std::max(0.0, rec.r_exc);
    }
    double margin = rec.r_exc;
    for (double x : rec.r_prime) margin = std::min(margin, x);
    for (double x : rec.r_i) margin = std::min(margin, x);

    if (tori.empty()) {
        rec.eps_r = std::isfinite(margin) ? margin : 1.0;
        if (rec.eps_r < resolution)
            throw ResolutionError("radial margin: the emission set approaches an annulus boundary or the origin closer"
                                  " than the sampling resolution" + where);
    } else {
        rec.eps_r1 = std::min(rec.eps_r2, margin);
        if (rec.eps_r1 < resolution)
            throw ResolutionError("radial margin: the emission set approaches a crossing sphere or annulus boundary"
                                  " closer than the sampling resolution" + where);
        // Torus positivity constant from the closed angular window.
        rec.c_double_prime = kInf;
        for (auto& t : tori) {
            t.c_ij = kInf;
            for (int b = 0; b < opt.theta_samples; ++b) {
                const double th = t.theta - eps_t + 2.0 * eps_t * b / (opt.theta_samples - 1);
                for (int w : {1, -1}) {
                    const double val =
                        t.sigma * frame.v(t.R, th, w).dot(model.omega.gradient(frame.k(t.R, th, w)));
                    t.c_ij = std::min(t.c_ij, val);
                }
            }
            rec.c_double_prime = std::min(rec.c_double_prime, t.c_ij);
        }
        if (!(rec.c_double_prime > 0.0))
            throw ConstructionError("torus sign condition fails: sigma v . grad omega is not positive on a torus" +
                                    where);
        // Lipschitz bound in r of the localized fiber commutator symbol near each crossing sphere.
        auto chi2 = [&](double e) { return window(e, E - 0.75 * delta, E + 0.75 * delta, 0.25 * delta); };
        rec.L = 0.0;
        const int nr = std::max(2, opt.lipschitz_radii);
        for (const auto& t : tori) {
            for (int b = 0; b < opt.theta_samples; ++b) {
                const double th = t.theta - 2.0 * eps_t + 4.0 * eps_t * b / (opt.theta_samples - 1);
                const double rho = t.rho_theta(th);
                for (int w : {1, -1}) {
                    std::vector<double> sym(static_cast<std::size_t>(nr)), loc(static_cast<std::size_t>(nr));
                    std::vector<double> rs(static_cast<std::size_t>(nr));
                    for (int q = 0; q < nr; ++q) {
                        const double r = t.R - rec.eps_r1 + 2.0 * rec.eps_r1 * q / (nr - 1);
                        const Vec k = frame.k(r, th, w);
                        double bsum = 0.0, csum = 0.0;
                        for (int p : em.shells) {
                            const auto& sp = pieces[static_cast<std::size_t>(p)];
                            if (!sp.covers(r)) continue;
                            const double c = chi2(sp.fn.value(r) + model.omega(k));
                            const double sym_v =
                                t.sigma * rho * frame.v(r, th, w).dot(shell_grad_k(model, sp.fn, xi, k));
                            bsum += c * c * sym_v;
                            csum += c;
                        }
                        rs[static_cast<std::size_t>(q)] = r;
                        sym[static_cast<std::size_t>(q)] = bsum;
                        loc[static_cast<std::size_t>(q)] = csum;
                    }
                    for (int q = 1; q < nr; ++q) {
                        const double dr = rs[static_cast<std::size_t>(q)] - rs[static_cast<std::size_t>(q) - 1];
                        rec.L = std::max(rec.L, std::abs(sym[static_cast<std::size_t>(q)] - sym[static_cast<std::size_t>(q) - 1]) / dr);
                        rec.L = std::max(rec.L, std::abs(loc[static_cast<std::size_t>(q)] - loc[static_cast<std::size_t>(q) - 1]) / dr);
                    }
                }
            }
        }
        const double cpp = rec.c_double_prime;
        rec.eps_r = rec.L > 0.0 ? std::min(rec.eps_r1, cpp / (2.0 * rec.L * (1.0 + cpp))) : rec.eps_r1;
        rec.c_prime = 0.5 * cpp;
        if (rec.eps_r < resolution)
            throw ResolutionError("radial thickness from the Lipschitz bound of the localized torus commutator is below"
                                  " the sampling resolution" + where);
        for (auto& t : tori) {
            t.eps_theta = eps_t;
            t.eps_r = rec.eps_r;
        }
    }

    // Shell gradient floor away from the tori.
    rec.grad_min = kInf;
    for (std::size_t q = 0; q < em.K_J.size(); ++q) {
        bool in_torus = false;
        for (const auto& t : tori) in_torus = in_torus || t.contains(samples_s[q], samples_theta[q]);
        if (in_torus) continue;
        const auto& [k, p] = em.K_J[q];
        rec.grad_min = std::min(rec.grad_min, shell_grad_k(model, pieces[static_cast<std::size_t>(p)].fn, xi, k).norm());
    }
    const double er = std::min(rec.eps_r, 1.0);
    rec.band_margin = std::isfinite(rec.grad_min) ? std::min(delta, 0.25 * er * rec.grad_min) : delta;
    res.pieces = pieces;
    return res;
}

nlohmann::json to_json(const CalibrationRecord& r, const std::vector<TorusSpec>& tori) {
    auto num = [](double x) -> nlohmann::json { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
    nlohmann::json j;
    j["delta_prime0"] = num(r.delta_prime0);
    j["delta_prime"] = num(r.delta_prime);
    j["eps_r"] = {{"eps_r4", num(r.eps_r4)}, {"eps_r3", num(r.eps_r3)}, {"eps_r2", num(r.eps_r2)},
                  {"eps_r1", num(r.eps_r1)}, {"eps_r", num(r.eps_r)}};
    j["eps_theta"] = {{"eps_theta2", num(r.eps_theta2)}, {"eps_theta1", num(r.eps_theta1)},
                      {"eps_theta", num(r.eps_theta)}};
    j["crossing_separation_d"] = num(r.d);
    j["landing_lipschitz_C"] = num(r.C);
    j["commutator_lipschitz_L"] = num(r.L);
    j["c_double_prime"] = num(r.c_double_prime);
    j["c_prime"] = num(r.c_prime);
    j["r_i"] = nlohmann::json::array();
    for (double x : r.r_i) j["r_i"].push_back(num(x));
    j["r_prime"] = nlohmann::json::array();
    for (double x : r.r_prime) j["r_prime"].push_back(num(x));
    j["r_exc"] = num(r.r_exc);
    j["grad_min"] = num(r.grad_min);
    j["band_margin"] = num(r.band_margin);
    j["delta_halvings"] = r.delta_halvings;
    j["torus_halvings"] = r.torus_halvings;
    j["log"] = r.log;
    j["tori"] = nlohmann::json::array();
    for (const auto& t : tori)
        j["tori"].push_back({{"i", t.i}, {"j", t.j}, {"crossing", t.crossing}, {"R", t.R}, {"theta", t.theta},
                             {"sigma", t.sigma}, {"eps_theta", t.eps_theta}, {"eps_r", t.eps_r}, {"c_ij", t.c_ij}});
    return j;
}

}  // namespace nelson
