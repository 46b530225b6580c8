#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "nelson/composite.hpp"
#include "nelson/spectra.hpp"

namespace nelson {

namespace {

struct Group {
    std::vector<int> idx;
    double energy = 0.0;
    Eigen::MatrixXcd V;
};

std::vector<Group> isolated_groups(const SpectralSample& s, double gap_tol, double cross_tol) {
    std::vector<Group> out;
    const Eigen::Index n = s.values.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(s.values[i] < s.ess_bottom - gap_tol)) break;
        if (!out.empty() && s.values[i] - s.values[out.back().idx.back()] <= cross_tol) {
            out.back().idx.push_back(static_cast<int>(i));
        } else {
            out.push_back({{static_cast<int>(i)}, 0.0, {}});
        }
    }
    for (auto& g : out) {
        double e = 0.0;
        g.V.resize(s.vectors.rows(), static_cast<Eigen::Index>(g.idx.size()));
        for (std::size_t c = 0; c < g.idx.size(); ++c) {
            e += s.values[g.idx[c]];
            g.V.col(static_cast<Eigen::Index>(c)) = s.vectors.col(g.idx[c]);
        }
        g.energy = e / static_cast<double>(g.idx.size());
    }
    return out;
}

double subspace_overlap(const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& B) {
    const double m = static_cast<double>(std::min(A.cols(), B.cols()));
    return (A.adjoint() * B).squaredNorm() / m;
}

Eigen::MatrixXcd orthonormal_columns(const Eigen::MatrixXcd& X) {
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(X);
    return qr.householderQ() * Eigen::MatrixXcd::Identity(X.rows(), X.cols());
}

struct Builder {
    int id = 0;
    int multiplicity = 1;
    bool alive = true;
    std::vector<int> sample_index;
    std::vector<double> energies;
    std::vector<bool> lowest;  // group held the lowest eigenvalue at that sample
    Eigen::MatrixXcd V;
};

// Crossings and tangencies from a sampled difference E_a - E_b on shared radii.
void classify_pair(const ShellBranch& a, const ShellBranch& b, double cross_tol, MassShellAtlas& atlas) {
    std::vector<double> r, d, ea;
    std::map<double, double> eb;
    for (std::size_t i = 0; i < b.radii.size(); ++i) eb[b.radii[i]] = b.energies[i];
    for (std::size_t i = 0; i < a.radii.size(); ++i) {
        auto it = eb.find(a.radii[i]);
        if (it == eb.end()) continue;
        r.push_back(a.radii[i]);
        ea.push_back(a.energies[i]);
        d.push_back(a.energies[i] - it->second);
    }
    const std::size_t n = r.size();
    auto sgn = [cross_tol](double x) { return std::abs(x) <= cross_tol ? 0 : (x > 0 ? 1 : -1); };
    std::size_t i = 0;
    while (i < n) {
        if (sgn(d[i]) != 0) {
            if (i + 1 < n && sgn(d[i + 1]) == -sgn(d[i])) {
                const double t = d[i] / (d[i] - d[i + 1]);
                const double rc = r[i] + t * (r[i + 1] - r[i]);
                const double ec = ea[i] + t * (ea[i + 1] - ea[i]);
                atlas.crossings.push_back({rc, ec, a.multiplicity + b.multiplicity, a.id, b.id, false});
            }
            ++i;
            continue;
        }
        // Run of coincident samples.
        std::size_t j = i;
        while (j + 1 < n && sgn(d[j + 1]) == 0) ++j;
        const std::size_t mid = (i + j) / 2;
        const int before = i > 0 ? sgn(d[i - 1]) : 0;
        const int after = j + 1 < n ? sgn(d[j + 1]) : 0;
        if (before != 0 && after != 0 && before == after) {
            atlas.tangencies.push_back({r[mid], ea[mid], a.id, b.id});
        } else {
            Crossing c{r[mid], ea[mid], a.multiplicity + b.multiplicity, a.id, b.id, before == 0 || after == 0};
            (c.candidate ? atlas.candidates : atlas.crossings).push_back(c);
        }
        i = j + 1;
    }
}

}  // namespace

RadialProfile spline_profile(const std::vector<double>& r, const std::vector<double>& e) {
    if (r.size() == 1) {
        const double c = e.front();
        return {[c](double) { return c; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
    }
    auto s = std::make_shared<CubicSpline>(r, e, r.front() == 0.0);
    return {[s](double x) { return s->value(x); }, [s](double x) { return s->d1(x); },
            [s](double x) { return s->d2(x); }};
}

GroundEnergy traced_ground(const ModelSpec& model, const MomentumGrid& grid, int n_max,
                           const std::vector<double>& xi_grid, const std::vector<double>& e0, double limit) {
    auto table = std::make_shared<FreeGroundTable>(model, grid, n_max);
    return GroundEnergy::sampled(CubicSpline(xi_grid, e0, xi_grid.front() == 0.0),
                                 [table](double r) { return (*table)(Vec(r, 0.0)); }, limit);
}

MassShellAtlas continue_branches(const std::vector<SpectralSample>& samples, const ContinuationOptions& opt) {
    MassShellAtlas atlas;
    atlas.gap_tol = opt.gap_tol;
    atlas.cross_tol = opt.cross_tol;
    for (std::size_t j = 1; j < samples.size(); ++j)
        if (!(samples[j].radius > samples[j - 1].radius)) throw std::invalid_argument("xi grid must increase");
    std::vector<Builder> builders;
    std::vector<int> active;
    int next_id = 0;
    auto open = [&](const Group& g, int j) {
        Builder b;
        b.id = next_id++;
        b.multiplicity = static_cast<int>(g.idx.size());
        b.sample_index.push_back(j);
        b.energies.push_back(g.energy);
        b.lowest.push_back(g.idx.front() == 0);
        b.V = g.V;
        builders.push_back(std::move(b));
        active.push_back(static_cast<int>(builders.size()) - 1);
    };
    for (std::size_t j = 0; j < samples.size(); ++j) {
        atlas.xi_grid.push_back(samples[j].radius);
        atlas.ess_bottom.push_back(samples[j].ess_bottom);
        const std::vector<Group> groups = isolated_groups(samples[j], opt.gap_tol, opt.cross_tol);
        if (j == 0 || active.empty()) {
            for (const auto& g : groups) open(g, static_cast<int>(j));
            continue;
        }
        const std::size_t nb = active.size(), ng = groups.size();
        Eigen::MatrixXd O = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(ng));
        for (std::size_t b = 0; b < nb; ++b)
            for (std::size_t g = 0; g < ng; ++g)
                O(b, g) = subspace_overlap(builders[static_cast<std::size_t>(active[b])].V, groups[g].V);
        std::vector<int> choice(nb, -1);
        for (std::size_t b = 0; b < nb; ++b) {
            int g1 = -1, g2 = -1;
            for (std::size_t g = 0; g < ng; ++g) {
                if (g1 < 0 || O(b, g) > O(b, g1)) {
                    g2 = g1;
                    g1 = static_cast<int>(g);
                } else if (g2 < 0 || O(b, g) > O(b, g2)) {
                    g2 = static_cast<int>(g);
                }
            }
            if (g1 < 0 || O(b, g1) < opt.min_overlap) continue;
            choice[b] = g1;
            if (g2 >= 0 && O(b, g2) >= O(b, g1) - opt.overlap_tol) {
                const Builder& bb = builders[static_cast<std::size_t>(active[b])];
                atlas.candidates.push_back({samples[j].radius, groups[static_cast<std::size_t>(g1)].energy,
                                            bb.multiplicity + static_cast<int>(groups[static_cast<std::size_t>(g2)].idx.size()),
                                            bb.id, -1, true});
            }
        }
        // Resolve groups claimed by several branches.
        std::vector<std::vector<int>> claims(ng);
        for (std::size_t b = 0; b < nb; ++b)
            if (choice[b] >= 0) claims[static_cast<std::size_t>(choice[b])].push_back(static_cast<int>(b));
        std::vector<bool> shared(ng, false);
        for (std::size_t g = 0; g < ng; ++g) {
            if (claims[g].size() < 2) continue;
            int total = 0;
            for (int b : claims[g]) total += builders[static_cast<std::size_t>(active[static_cast<std::size_t>(b)])].multiplicity;
            if (total <= static_cast<int>(groups[g].idx.size())) {
                shared[g] = true;
                continue;
            }
            std::sort(claims[g].begin(), claims[g].end(), [&](int x, int y) { return O(x, g) > O(y, g); });
            for (std::size_t c = 1; c < claims[g].size(); ++c) {
                const int b = claims[g][c];
                const Builder& bb = builders[static_cast<std::size_t>(active[static_cast<std::size_t>(b)])];
                atlas.candidates.push_back({samples[j].radius, groups[g].energy,
                                            bb.multiplicity + static_cast<int>(groups[g].idx.size()), bb.id, -1, true});
                choice[static_cast<std::size_t>(b)] = -1;
            }
            claims[g].resize(1);
        }
        std::vector<int> still_active;
        std::vector<bool> used(ng, false);
        for (std::size_t b = 0; b < nb; ++b) {
            Builder& bb = builders[static_cast<std::size_t>(active[b])];
            if (choice[b] < 0) {
                bb.alive = false;
                continue;
            }
            const Group& g = groups[static_cast<std::size_t>(choice[b])];
            used[static_cast<std::size_t>(choice[b])] = true;
            bb.sample_index.push_back(static_cast<int>(j));
            bb.energies.push_back(g.energy);
            bb.lowest.push_back(g.idx.front() == 0);
            bb.V = shared[static_cast<std::size_t>(choice[b])] ? orthonormal_columns(g.V * (g.V.adjoint() * bb.V)) : g.V;
            still_active.push_back(active[b]);
        }
        active = still_active;
        for (std::size_t g = 0; g < ng; ++g)
            if (!used[g]) open(groups[g], static_cast<int>(j));
    }
    bool ground_taken = false;
    for (const auto& b : builders) {
        ShellBranch s;
        s.id = b.id;
        s.multiplicity = b.multiplicity;
        for (int idx : b.sample_index) s.radii.push_back(samples[static_cast<std::size_t>(idx)].radius);
        s.energies = b.energies;
        s.r_min = s.radii.front();
        s.r_max = s.radii.back();
        s.fn = spline_profile(s.radii, s.energies);
        const bool lowest = std::all_of(b.lowest.begin(), b.lowest.end(), [](bool x) { return x; });
        if (lowest && b.multiplicity == 1 && !ground_taken) {
            s.ground = true;
            ground_taken = true;
        }
        for (std::size_t i = 1; i < s.radii.size(); ++i)
            atlas.L_shell = std::max(atlas.L_shell, std::abs(s.energies[i] - s.energies[i - 1]) / (s.radii[i] - s.radii[i - 1]));
        atlas.branches.push_back(std::move(s));
    }
    for (std::size_t a = 0; a < atlas.branches.size(); ++a)
        for (std::size_t b = a + 1; b < atlas.branches.size(); ++b)
            classify_pair(atlas.branches[a], atlas.branches[b], opt.cross_tol, atlas);
    std::sort(atlas.crossings.begin(), atlas.crossings.end(),
              [](const Crossing& x, const Crossing& y) { return x.radius < y.radius; });
    if (samples.size() >= 2) {
        std::vector<double> r, e;
        for (const auto& s : samples) {
            r.push_back(s.radius);
            e.push_back(s.values[0]);
        }
        atlas.ground = GroundEnergy::sampled(CubicSpline(r, e, r.front() == 0.0), nullptr, r.back());
    }
    return atlas;
}

MassShellAtlas analytic_shell_source(const std::vector<ShellDefinition>& defs, const std::vector<double>& xi_grid,
                                     const AnalyticSourceOptions& opt) {
    if (defs.empty()) throw ConfigError("analytic shell source needs at least one definition");
    MassShellAtlas atlas;
    atlas.source = AtlasSource::AnalyticSynthetic;
    atlas.xi_grid = xi_grid;
    for (std::size_t i = 0; i < defs.size(); ++i) {
        const auto& d = defs[i];
        if (!(d.r_max > d.r_min) || d.r_min < 0.0)
            throw ConfigError("shell '" + d.name + "' needs a domain 0 <= r_min < r_max");
        ShellBranch b;
        b.id = static_cast<int>(i);
        b.r_min = d.r_min;
        b.r_max = d.r_max;
        b.multiplicity = d.multiplicity;
        b.ground = d.ground;
        b.fn = d.fn;
        for (double r : xi_grid) {
            if (!b.covers(r)) continue;
            b.radii.push_back(r);
            b.energies.push_back(d.fn.value(r));
        }
        for (std::size_t k = 1; k < b.radii.size(); ++k)
            atlas.L_shell = std::max(atlas.L_shell,
                                     std::abs(b.energies[k] - b.energies[k - 1]) / (b.radii[k] - b.radii[k - 1]));
        atlas.branches.push_back(std::move(b));
    }
    // Ground energy: pointwise lowest definition covering r.
    auto defs_copy = std::make_shared<std::vector<ShellDefinition>>(defs);
    auto lowest = [defs_copy](double r) -> const ShellDefinition& {
        const ShellDefinition* best = nullptr;
        double bv = 0.0;
        for (const auto& d : *defs_copy) {
            if (r < d.r_min || r > d.r_max) continue;
            const double v = d.fn.value(r);
            if (!best || v < bv) {
                best = &d;
                bv = v;
            }
        }
        if (!best) {
            std::ostringstream os;
            os << "no synthetic shell covers |xi| = " << r;
            throw RangeError(os.str());
        }
        return *best;
    };
    atlas.ground = GroundEnergy::analytic({[lowest](double r) { return lowest(std::abs(r)).fn.value(std::abs(r)); },
                                           [lowest](double r) { return lowest(std::abs(r)).fn.d1(std::abs(r)); },
                                           [lowest](double r) { return lowest(std::abs(r)).fn.d2(std::abs(r)); }});
    for (std::size_t a = 0; a < defs.size(); ++a) {
        for (std::size_t b = a + 1; b < defs.size(); ++b) {
            const double lo = std::max(defs[a].r_min, defs[b].r_min), hi = std::min(defs[a].r_max, defs[b].r_max);
            if (!(hi > lo)) continue;
            const auto& fa = defs[a].fn;
            const auto& fb = defs[b].fn;
            auto diff = [&](double r) { return fa.value(r) - fb.value(r); };
            const int mult = defs[a].multiplicity + defs[b].multiplicity;
            const int N = opt.scan_points;
            std::vector<double> x(static_cast<std::size_t>(N) + 1), d(x.size());
            for (int i = 0; i <= N; ++i) {
                x[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / N;
                d[static_cast<std::size_t>(i)] = diff(x[static_cast<std::size_t>(i)]);
            }
            auto sg = [](double v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); };
            for (int i = 0; i <= N; ++i) {
                const std::size_t u = static_cast<std::size_t>(i);
                if (d[u] == 0.0) {
                    const int before = i > 0 ? sg(d[u - 1]) : 0, after = i < N ? sg(d[u + 1]) : 0;
                    if (before != 0 && before == after) {
                        atlas.tangencies.push_back({x[u], fa.value(x[u]), static_cast<int>(a), static_cast<int>(b)});
                    } else {
                        Crossing c{x[u], fa.value(x[u]), mult, static_cast<int>(a), static_cast<int>(b),
                                   before == 0 || after == 0};
                        (c.candidate ? atlas.candidates : atlas.crossings).push_back(c);
                    }
                    continue;
                }
                if (i < N && d[u + 1] != 0.0 && sg(d[u]) != sg(d[u + 1])) {
                    const double rc = refine_root(diff, x[u], x[u + 1]);
                    atlas.crossings.push_back({rc, fa.value(rc), mult, static_cast<int>(a), static_cast<int>(b), false});
                    continue;
                }
                // Interior local minimum of |diff| without a sign change: tangency check.
                if (i > 0 && i < N && sg(d[u - 1]) == sg(d[u]) && sg(d[u + 1]) == sg(d[u]) &&
                    std::abs(d[u]) <= std::abs(d[u - 1]) && std::abs(d[u]) < std::abs(d[u + 1])) {
                    auto absd = [&](double r) { return std::abs(diff(r)); };
                    const auto m = boost::math::tools::brent_find_minima(absd, x[u - 1], x[u + 1], 52);
                    if (m.second <= opt.tangency_tol)
                        atlas.tangencies.push_back({m.first, fa.value(m.first), static_cast<int>(a), static_cast<int>(b)});
                }
            }
        }
    }
    std::sort(atlas.crossings.begin(), atlas.crossings.end(),
              [](const Crossing& x, const Crossing& y) { return x.radius < y.radius; });
    return atlas;
}

double ground_energy(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis, const Vec& xi,
                     const SolverOptions& solver) {
    return lowest_eigs(assemble_H(model, grid, basis, xi), 1, solver).values[0];
}

double one_boson_spacing(const ModelSpec& model, const MomentumGrid& grid) {
    std::vector<double> e;
    for (const auto& k : grid.nodes()) e.push_back(model.Omega(Vec(-k)) + model.omega(k));
    std::sort(e.begin(), e.end());
    const double tol = 1e-12 * (1.0 + std::abs(e.front()));
    for (double v : e)
        if (v - e.front() > tol) return v - e.front();
    return grid.spacing() * grid.spacing();
}

MassShellAtlas trace_shells(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis,
                            const std::vector<double>& xi_grid, int n_branches, const TraceOptions& opt) {
    if (n_branches < 1) throw std::invalid_argument("trace_shells: n_branches must be positive");
    if (xi_grid.size() < 2) throw std::invalid_argument("trace_shells: need at least two radii");
    for (std::size_t j = 0; j < xi_grid.size(); ++j) {
        if (xi_grid[j] < 0.0 || (j > 0 && !(xi_grid[j] > xi_grid[j - 1])))
            throw std::invalid_argument("trace_shells: xi grid must be nonnegative and increasing");
    }
    const int count = static_cast<int>(std::min<std::size_t>(basis.dimension(), n_branches + opt.extra_eigs));
    const double cross_tol = opt.cross_tol > 0.0 ? opt.cross_tol : 10.0 * opt.solver.tol;
    std::vector<SpectralSample> samples(xi_grid.size());
    parallel_for(static_cast<int>(xi_grid.size()), opt.threads, [&](int j) {
        const double s = xi_grid[static_cast<std::size_t>(j)];
        const EigenResult r = lowest_eigs(assemble_H(model, grid, basis, Vec(s, 0.0)), count, opt.solver);
        Eigen::Index keep = std::min<Eigen::Index>(n_branches, r.values.size());
        while (keep < r.values.size() && r.values[keep] - r.values[keep - 1] <= cross_tol) ++keep;
        auto& out = samples[static_cast<std::size_t>(j)];
        out.radius = s;
        out.values = r.values.head(keep);
        out.vectors = r.vectors.leftCols(keep);
    });
    std::vector<double> e0;
    for (const auto& s : samples) e0.push_back(s.values[0]);
    const double limit = opt.extrapolation_factor * std::max(xi_grid.back(), grid.half_width());
    GroundEnergy ground = traced_ground(model, grid, basis.n_max(), xi_grid, e0, limit);
    CompositeOptions co;
    co.scan_half_width = grid.half_width();
    co.scan_points = opt.composite_scan_points > 0 ? opt.composite_scan_points : grid.points_per_axis();
    parallel_for(static_cast<int>(xi_grid.size()), opt.threads, [&](int j) {
        auto& s = samples[static_cast<std::size_t>(j)];
        s.ess_bottom = sigma_n_min(model, ground, Vec(s.radius, 0.0), 1, co).value;
    });
    ContinuationOptions c;
    c.gap_tol = opt.gap_tol > 0.0 ? opt.gap_tol : 2.0 * one_boson_spacing(model, grid);
    c.cross_tol = cross_tol;
    c.overlap_tol = opt.overlap_tol;
    MassShellAtlas atlas = continue_branches(samples, c);
    atlas.source = AtlasSource::Eigensolver;
    atlas.ground = ground;
    atlas.ground_samples = e0;
    return atlas;
}

}  // namespace nelson
