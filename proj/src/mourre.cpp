#include "nelson/mourre.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace nelson {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> formula_diagonal(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis,
                                     const Vec& xi, const std::vector<Vec>& v, bool kinetic) {
    std::vector<double> out(basis.dimension(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto modes = basis.state(i);
        if (modes.empty()) continue;
        if (kinetic) {
            double acc = 0.0;
            for (int p : modes) acc += v[static_cast<std::size_t>(p)].dot(model.omega.gradient(grid.node(p)));
            out[i] = acc;
        } else {
            Vec P = Vec::Zero(), V = Vec::Zero();
            for (int p : modes) {
                P += grid.node(p);
                V += v[static_cast<std::size_t>(p)];
            }
            out[i] = V.dot(model.Omega.gradient(xi - P));
        }
    }
    return out;
}

OperatorMatrix field_term(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis,
                          const SampledField& f) {
    if (!model.coupled()) return OperatorMatrix::zero(basis.dimension(), "phi(v.grad g + div v g / 2)");
    std::vector<cplx> modes(static_cast<std::size_t>(grid.size()));
    const double sw = std::sqrt(grid.weight());
    for (int p = 0; p < grid.size(); ++p) {
        const auto q = static_cast<std::size_t>(p);
        if (f.v[q].norm() == 0.0 && f.div[q] == 0.0) continue;
        const Vec& k = grid.node(p);
        const double h = f.v[q].dot(coupling_gradient(model, k)) + 0.5 * f.div[q] * coupling_value(model, k);
        modes[q] = cplx(sw * h, 0.0);
    }
    return build_field_modes(basis, modes, "phi(v.grad g + div v g / 2)");
}

// Boson-support mask of the field.
std::vector<bool> support_mask(const std::vector<Vec>& v) {
    std::vector<bool> m(v.size());
    for (std::size_t p = 0; p < v.size(); ++p) m[p] = v[p].norm() > 0.0;
    return m;
}

double channel_weight(const FockBasis& basis, const std::vector<bool>& mask, const Eigen::VectorXcd& psi) {
    double w = 0.0, total = 0.0;
    for (std::size_t i = 0; i < basis.dimension(); ++i) {
        const double a = std::norm(psi[static_cast<Eigen::Index>(i)]);
        total += a;
        for (int p : basis.state(i))
            if (mask[static_cast<std::size_t>(p)]) {
                w += a;
                break;
            }
    }
    return total > 0.0 ? w / total : 0.0;
}

double min_eigenvalue(const Eigen::MatrixXcd& B) {
    if (B.rows() == 0) return kNaN;
    const Eigen::MatrixXcd S = 0.5 * (B + B.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues()[0];
}

}  // namespace

SampledField sample_field(const VectorFieldBundle& bundle, const MomentumGrid& grid) {
    SampledField f;
    const auto n = static_cast<std::size_t>(grid.size());
    f.v = bundle.sampled.size() == n ? bundle.sampled : std::vector<Vec>(n, Vec::Zero());
    f.div.assign(n, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        if (bundle.sampled.size() != n) f.v[p] = bundle.v(grid.node(static_cast<int>(p)));
        f.div[p] = bundle.divergence(grid.node(static_cast<int>(p)));
        if (grid.nu() == 1) f.v[p].y() = 0.0;
    }
    return f;
}

OperatorMatrix commutator_formula(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis,
                                  const Vec& xi, const SampledField& field) {
    std::vector<double> diag = formula_diagonal(model, grid, basis, xi, field.v, true);
    const std::vector<double> rec = formula_diagonal(model, grid, basis, xi, field.v, false);
    for (std::size_t i = 0; i < diag.size(); ++i) diag[i] -= rec[i];
    OperatorMatrix F = OperatorMatrix::diagonal(diag, "formula") + field_term(model, grid, basis, field);
    F.set_label("formula commutator");
    return F;
}

OperatorMatrix direct_commutator(const OperatorMatrix& H, const OperatorMatrix& A) {
    const SparseC HA = H.matrix() * A.matrix();
    const SparseC AH = A.matrix() * H.matrix();
    const SparseC C = cplx(0.0, 1.0) * (HA - AH);
    return OperatorMatrix::hermitian_part(C, BlockTag::BlockTridiagonal, "i(HA - AH)");
}

CommutatorBundle commutator_matrix(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis,
                                   const Vec& xi, const SampledField& field, const ConjugateOperators& conj) {
    CommutatorBundle out;
    out.kinetic = OperatorMatrix::diagonal(formula_diagonal(model, grid, basis, xi, field.v, true),
                                           "dGamma(v.grad omega)");
    out.recoil = OperatorMatrix::diagonal(formula_diagonal(model, grid, basis, xi, field.v, false),
                                          "dGamma(v).grad Omega(xi - dGamma(k))");
    out.field = field_term(model, grid, basis, field);
    out.formula = out.kinetic - out.recoil + out.field;
    out.formula.set_label("formula commutator");
    out.direct = direct_commutator(assemble_H(model, grid, basis, xi), conj.A);
    // Smooth packets centred where the field is largest probe the continuum limit of both sides.
    int best = 0;
    for (int p = 0; p < grid.size(); ++p)
        if (field.v[static_cast<std::size_t>(p)].norm() > field.v[static_cast<std::size_t>(best)].norm()) best = p;
    const std::vector<Vec> centers{grid.node(best), grid.node(grid.mirror(best))};
    const auto states = gaussian_test_states(grid, basis, centers, 0.25 * grid.half_width(), basis.n_max() - 1);
    out.discrepancy = discrepancy_norm(out.formula, out.direct, states);
    return out;
}

CommutatorBundle commutator_matrix(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis,
                                   const Vec& xi, const VectorFieldBundle& bundle) {
    const SampledField f = sample_field(bundle, grid);
    return commutator_matrix(model, grid, basis, xi, f, build_conjugate(basis, grid, f.v));
}

std::vector<Eigen::VectorXcd> gaussian_test_states(const MomentumGrid& grid, const FockBasis& basis,
                                                   const std::vector<Vec>& centers, double width, int n_top) {
    std::vector<Eigen::VectorXcd> out;
    const auto dim = static_cast<Eigen::Index>(basis.dimension());
    for (const Vec& c : centers) {
        std::vector<double> f(static_cast<std::size_t>(grid.size()));
        double norm2 = 0.0;
        for (int p = 0; p < grid.size(); ++p) {
            const double d2 = (grid.node(p) - c).squaredNorm();
            f[static_cast<std::size_t>(p)] = std::sqrt(grid.weight()) * std::exp(-d2 / (2.0 * width * width));
            norm2 += f[static_cast<std::size_t>(p)] * f[static_cast<std::size_t>(p)];
        }
        for (double& x : f) x /= std::sqrt(norm2);
        for (int n = 0; n <= std::min(n_top, basis.n_max()); ++n) {
            Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(dim);
            const std::size_t off = basis.sector_offset(n);
            for (std::size_t i = off; i < off + basis.sector_dimension(n); ++i) {
                const auto modes = basis.state(i);
                // sqrt(n! / prod m_j!) prod f(k_i) for the symmetric tensor power.
                double amp = 1.0, fact = 1.0;
                int run = 0;
                for (std::size_t j = 0; j < modes.size(); ++j) {
                    amp *= f[static_cast<std::size_t>(modes[j])];
                    run = (j > 0 && modes[j] == modes[j - 1]) ? run + 1 : 1;
                    fact *= static_cast<double>(j + 1) / run;
                }
                psi[static_cast<Eigen::Index>(i)] = amp * std::sqrt(fact);
            }
            const double nn = psi.norm();
            if (nn > 0.0) out.push_back(psi / nn);
        }
    }
    return out;
}

double discrepancy_norm(const OperatorMatrix& F, const OperatorMatrix& D, const std::vector<Eigen::VectorXcd>& states) {
    const SparseC diff = F.matrix() - D.matrix();
    double worst = 0.0;
    for (const auto& psi : states) worst = std::max(worst, (diff * psi).norm());
    return worst;
}

OperatorMatrix extended_commutator(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis,
                                   const Vec& xi, int node, const SampledField& field, const OperatorMatrix* A) {
    const Vec& k = grid.node(node);
    const Vec eta = xi - k;
    const Vec vk = field.v[static_cast<std::size_t>(node)];
    OperatorMatrix inner = A ? direct_commutator(assemble_H(model, grid, basis, eta), *A)
                             : commutator_formula(model, grid, basis, eta, field);
    if (vk.norm() == 0.0) return inner;
    std::vector<double> corr(basis.dimension());
    const Vec gw = model.omega.gradient(k);
    for (std::size_t i = 0; i < corr.size(); ++i) {
        Vec P = Vec::Zero();
        for (int p : basis.state(i)) P += grid.node(p);
        corr[i] = vk.dot(gw - model.Omega.gradient(eta - P));
    }
    OperatorMatrix out = inner + OperatorMatrix::diagonal(corr, "fiber correction");
    out.set_label("extended commutator");
    return out;
}

OperatorMatrix extended_commutator(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis,
                                   const Vec& xi, int node, const VectorFieldBundle& bundle) {
    const SampledField f = sample_field(bundle, grid);
    const ConjugateOperators conj = build_conjugate(basis, grid, f.v);
    return extended_commutator(model, grid, basis, xi, node, f, &conj.A);
}

VirialResult virial_check(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis, const Vec& xi,
                          const VectorFieldBundle& bundle, const VirialOptions& options) {
    return virial_check(model, grid, basis, xi, sample_field(bundle, grid), options);
}

VirialResult virial_check(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis, const Vec& xi,
                          const SampledField& field, const VirialOptions& opt) {
    VirialResult res;
    double sup = 0.0;
    for (const auto& x : field.v) sup = std::max(sup, x.norm());
    if (sup == 0.0) {
        res.log.push_back("field vanishes on the grid; both sides are zero");
        return res;
    }
    std::vector<int> candidates;
    for (int p = 0; p < grid.size(); ++p)
        if (field.v[static_cast<std::size_t>(p)].norm() >= opt.support_fraction * sup) candidates.push_back(p);
    std::vector<int> picks;
    const int want = std::min<int>(opt.samples, static_cast<int>(candidates.size()));
    for (int i = 0; i < want; ++i)
        picks.push_back(candidates[static_cast<std::size_t>(i) * candidates.size() / static_cast<std::size_t>(want)]);

    const int count = opt.branch + 1;
    auto energy = [&](const Vec& eta) {
        return lowest_eigs(assemble_H(model, grid, basis, eta), count, opt.solver).values[opt.branch];
    };
    const bool diagonal = opt.exact_diagonal && !model.coupled();
    const ConjugateOperators conj = build_conjugate(basis, grid, field.v);
    const std::vector<Vec> P = diagonal ? total_momenta(grid, basis) : std::vector<Vec>{};
    for (int node : picks) {
        const Vec& k = grid.node(node);
        const Vec eta = xi - k;
        Eigen::VectorXcd psi;
        Vec gradS = Vec::Zero();
        if (diagonal) {
            const std::vector<double> d = free_diagonal(model, grid, basis, eta);
            std::vector<std::size_t> order(d.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
            const std::size_t i = order[static_cast<std::size_t>(opt.branch)];
            psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis.dimension()));
            psi[static_cast<Eigen::Index>(i)] = 1.0;
            gradS = model.Omega.gradient(eta - P[i]);
        } else {
            const auto eig = lowest_eigs(assemble_H(model, grid, basis, eta), count, opt.solver);
            const double E = eig.values[opt.branch];
            if (eig.residuals[opt.branch] > 10.0 * opt.solver.tol * (1.0 + std::abs(E))) {
                std::ostringstream os;
                os << "node " << node << " skipped: eigenvector residual " << eig.residuals[opt.branch];
                res.log.push_back(os.str());
                continue;
            }
            psi = eig.vectors.col(opt.branch);
            for (int a = 0; a < model.nu; ++a) {
                Vec e = Vec::Zero();
                e[a] = opt.fd_step;
                gradS[a] = (energy(eta + e) - energy(eta - e)) / (2.0 * opt.fd_step);
            }
        }
        const OperatorMatrix X = extended_commutator(model, grid, basis, xi, node, field, &conj.A);
        const OperatorMatrix Y = extended_commutator(model, grid, basis, xi, node, field);
        VirialSample s;
        s.node = node;
        s.k = k;
        s.lhs = psi.dot(X.apply(psi)).real();
        const double lhs_formula = psi.dot(Y.apply(psi)).real();
        const Vec vk = field.v[static_cast<std::size_t>(node)];
        const Vec gk = model.omega.gradient(k) - gradS;
        s.rhs = vk.dot(gk);
        const double scale = vk.norm() * gk.norm();
        s.error = std::abs(s.lhs - s.rhs) / (scale > 0.0 ? scale : 1.0);
        s.formula_error = std::abs(lhs_formula - s.rhs) / (scale > 0.0 ? scale : 1.0);
        res.max_error = std::max(res.max_error, s.error);
        res.max_formula_error = std::max(res.max_formula_error, s.formula_error);
        res.samples.push_back(s);
    }
    return res;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Positive: return "positive";
        case Verdict::DegradedNearThreshold: return "degraded-near-threshold";
        case Verdict::Fails: return "fails";
    }
    return "fails";
}

double fiber_constant(const VectorFieldBundle& bundle, int angles, int radii) {
    const auto& model = bundle.model();
    const auto& frame = bundle.frame();
    const double E = bundle.energy();
    std::vector<std::pair<double, int>> dirs;
    if (model.nu == 1) {
        dirs = {{0.0, 1}, {M_PI, 1}};
    } else {
        const int n = std::max(2, angles / 2);
        for (int m = 0; m <= n; ++m) {
            dirs.emplace_back(M_PI * m / n, 1);
            if (m > 0 && m < n) dirs.emplace_back(M_PI * m / n, -1);
        }
    }
    double c = std::numeric_limits<double>::infinity();
    for (const auto& s : bundle.shells()) {
        const double hi = std::min(s.r_max, bundle.xi().norm() + 20.0);
        if (!(hi > s.r_min)) continue;
        for (const auto& [theta, w] : dirs) {
            auto f = [&](double r) { return s.fn.value(r) + model.omega(frame.k(r, theta, w)) - E; };
            for (double r : scan_roots(f, s.r_min, hi, radii)) {
                const Vec k = frame.k(r, theta, w);
                const auto pieces = bundle.evaluate(k);
                bool in_torus = false;
                for (double t : pieces.torus) in_torus = in_torus || t > 0.0;
                if (in_torus) continue;
                c = std::min(c, pieces.v.dot(bundle.shell_gradient(s, k)));
            }
        }
    }
    for (const auto& t : bundle.tori()) c = std::min(c, t.c_ij);
    return std::isfinite(c) ? c : kNaN;
}

Verdict decide(const MourreReport& r, const MourreOptions& opt, std::string* note) {
    double kmax = 0.0;
    for (double k : opt.kappa_ladder) kmax = std::max(kmax, k);
    const double near = opt.near_threshold > 0.0 ? opt.near_threshold : kmax;
    std::vector<const KappaEntry*> valid;
    for (const auto& e : r.ladder)
        if (e.window_dim - e.n_compact > 0 && std::isfinite(e.c_value)) valid.push_back(&e);
    std::sort(valid.begin(), valid.end(), [](auto* a, auto* b) { return a->kappa > b->kappa; });
    const bool close = r.threshold_distance < near;
    std::ostringstream os;
    if (valid.size() < 3) {
        os << "only " << valid.size() << " ladder windows hold non-compact states";
        if (note) *note = os.str();
        return close ? Verdict::DegradedNearThreshold : Verdict::Fails;
    }
    const double c_min = valid.back()->c_value;
    const double c_mid = valid[valid.size() / 2]->c_value;
    const bool stable = c_min >= opt.stabilization * c_mid;
    os << "c(kappa_min) = " << c_min << ", c(kappa_mid) = " << c_mid << ", threshold distance "
       << r.threshold_distance;
    if (note) *note = os.str();
    if (close) return Verdict::DegradedNearThreshold;
    if (!(c_min > opt.positive_floor)) return Verdict::Fails;
    return stable ? Verdict::Positive : Verdict::DegradedNearThreshold;
}

std::vector<MourreReport> mourre_scan(const ModelSpec& model, const MassShellAtlas& atlas, const MomentumGrid& grid,
                                      const FockBasis& basis, const Vec& xi, const std::vector<double>& lambdas,
                                      const MourreOptions& opt) {
    std::vector<MourreReport> out;
    if (lambdas.empty()) return out;
    if (opt.kappa_ladder.size() < 3) throw ConfigError("kappa ladder needs at least three values");
    const ThresholdReport rep = full_report(model, atlas, xi, opt.calibration.thresholds);
    const auto obstructions = rep.obstructions(opt.calibration.dedup_tol);
    const double kmax = *std::max_element(opt.kappa_ladder.begin(), opt.kappa_ladder.end());
    const double lo = *std::min_element(lambdas.begin(), lambdas.end()) - kmax;
    const double hi = *std::max_element(lambdas.begin(), lambdas.end()) + kmax;
    const EigenResult eig = window_eigs(assemble_H(model, grid, basis, xi), lo, hi);
    CalibrationOptions copt = opt.calibration;
    if (copt.box_half_width == 0.0) copt.box_half_width = grid.half_width();

    for (double lambda : lambdas) {
        MourreReport r;
        r.xi = xi;
        r.lambda = lambda;
        r.c_fiber = kNaN;
        r.threshold_distance = std::min(std::abs(lambda - rep.sigma1), std::abs(rep.sigma2 - lambda));
        for (double e : obstructions) r.threshold_distance = std::min(r.threshold_distance, std::abs(lambda - e));
        VectorFieldBundle bundle;
        try {
            bundle = build_vector_field(model, atlas, calibrate(model, atlas, rep, lambda, copt), grid);
        } catch (const PreconditionError& e) {
            r.verdict = Verdict::DegradedNearThreshold;
            r.note = e.what();
            out.push_back(std::move(r));
            continue;
        } catch (const ResolutionError& e) {
            r.verdict = Verdict::DegradedNearThreshold;
            r.note = e.what();
            out.push_back(std::move(r));
            continue;
        }
        const SampledField field = sample_field(bundle, grid);
        const OperatorMatrix F = commutator_formula(model, grid, basis, xi, field);
        const auto mask = support_mask(field.v);
        std::vector<double> weight(static_cast<std::size_t>(eig.values.size()));
        for (Eigen::Index j = 0; j < eig.values.size(); ++j)
            weight[static_cast<std::size_t>(j)] = channel_weight(basis, mask, eig.vectors.col(j));
        for (double kappa : opt.kappa_ladder) {
            KappaEntry e;
            e.kappa = kappa;
            std::vector<Eigen::Index> all, open;
            for (Eigen::Index j = 0; j < eig.values.size(); ++j) {
                if (std::abs(eig.values[j] - lambda) > kappa) continue;
                all.push_back(j);
                if (weight[static_cast<std::size_t>(j)] >= opt.channel_weight) open.push_back(j);
            }
            e.window_dim = static_cast<int>(all.size());
            e.n_compact = static_cast<int>(all.size() - open.size());
            auto restricted = [&](const std::vector<Eigen::Index>& cols) {
                Eigen::MatrixXcd P(eig.vectors.rows(), static_cast<Eigen::Index>(cols.size()));
                for (std::size_t c = 0; c < cols.size(); ++c) P.col(static_cast<Eigen::Index>(c)) = eig.vectors.col(cols[c]);
                const Eigen::MatrixXcd FP = F.matrix() * P;
                return Eigen::MatrixXcd(P.adjoint() * FP);
            };
            const Eigen::MatrixXcd Ball = restricted(all);
            if (Ball.rows() > 0) {
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (Ball + Ball.adjoint()), Eigen::EigenvaluesOnly);
                e.spectrum = es.eigenvalues();
                e.c_all = e.spectrum[0];
            } else {
                e.c_all = kNaN;
            }
            e.c_value = min_eigenvalue(restricted(open));
            r.ladder.push_back(std::move(e));
        }
        r.c_fiber = fiber_constant(bundle, opt.level_set_angles, opt.level_set_radii);
        std::string note;
        r.verdict = decide(r, opt, &note);
        r.note = note;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace nelson
