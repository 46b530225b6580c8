#include <algorithm>
#include <cmath>
#include <sstream>

#include "nelson/conjugate.hpp"

namespace nelson {

VectorFieldBundle::VectorFieldBundle(ModelSpec model, const CalibrationResult& cal, std::vector<ShellPiece> shells,
                                     double E)
    : model_(std::move(model)),
      frame_(cal.report.xi),
      E_(E),
      tori_(cal.tori),
      shells_(std::move(shells)),
      record_(cal.record),
      emission_(cal.emission) {}

double VectorFieldBundle::band(double e) const {
    const double d = record_.delta_prime, b = record_.band_margin;
    return window(e, E_ - d, E_ + d, b);
}

double VectorFieldBundle::annulus_cutoff(const ShellPiece& s, double r) const {
    if (r < s.r_min || r > s.r_max) return 0.0;
    const double half = 0.5 * record_.eps_r;
    double c = 1.0;
    if (s.inner_edge) c *= smooth_step((r - s.r_min - half) / half);
    if (s.outer_edge) c *= smooth_step((s.r_max - r - half) / half);
    return c;
}

double VectorFieldBundle::shell_raw(const ShellPiece& s, const Vec& k) const {
    const double r = (frame_.xi() - k).norm();
    const double cut = annulus_cutoff(s, r);
    if (cut == 0.0) return 0.0;
    return cut * band(s.fn.value(r) + model_.omega(k));
}

Vec VectorFieldBundle::shell_gradient(const ShellPiece& s, const Vec& k) const {
    const Vec eta = frame_.xi() - k;
    return model_.omega.gradient(k) - radial_gradient(s.fn.d1(eta.norm()), eta);
}

VectorFieldBundle::Pieces VectorFieldBundle::evaluate(const Vec& k) const {
    Pieces out;
    const auto c = frame_.coords(k);
    double T = 0.0;
    for (const auto& t : tori_) {
        const double phi = t.rho_theta(c.theta) * t.rho_r(c.s);
        out.torus.push_back(phi);
        const Vec vt = phi == 0.0 ? Vec(Vec::Zero()) : Vec(t.sigma * phi * frame_.v(c.s, c.theta, c.w));
        out.torus_v.push_back(vt);
        out.v += vt;
        T += phi;
    }
    std::vector<double> raw(shells_.size());
    double sum = 0.0, prod = 1.0;
    for (std::size_t i = 0; i < shells_.size(); ++i) {
        raw[i] = shell_raw(shells_[i], k);
        sum += raw[i];
        prod *= 1.0 - raw[i];
    }
    const double norm = sum + prod;
    for (std::size_t i = 0; i < shells_.size(); ++i) {
        const double phi = raw[i] == 0.0 ? 0.0 : (1.0 - T) * raw[i] / norm;
        out.shell.push_back(phi);
        Vec vs = Vec::Zero();
        if (phi != 0.0) {
            const Vec g = shell_gradient(shells_[i], k);
            const double gn = g.norm();
            if (gn > 0.0) vs = phi * g / gn;
        }
        out.shell_v.push_back(vs);
        out.v += vs;
    }
    if (model_.nu == 1) out.v.y() = 0.0;
    return out;
}

double VectorFieldBundle::partition_sum(const Vec& k) const {
    const auto p = evaluate(k);
    double s = 0.0;
    for (double x : p.torus) s += x;
    for (double x : p.shell) s += x;
    return s;
}

double VectorFieldBundle::divergence(const Vec& k, double h) const {
    if (h <= 0.0) {
        h = 1e-3;
        if (record_.eps_r > 0.0) h = std::min(h, 0.05 * record_.eps_r);
        if (record_.band_margin > 0.0 && record_.grad_min > 0.0 && std::isfinite(record_.grad_min))
            h = std::min(h, 0.05 * record_.band_margin / std::max(1.0, record_.grad_min));
    }
    double div = 0.0;
    for (int axis = 0; axis < model_.nu; ++axis) {
        Vec e = Vec::Zero();
        e[axis] = h;
        div += (-v(k + 2.0 * e)[axis] + 8.0 * v(k + e)[axis] - 8.0 * v(k - e)[axis] + v(k - 2.0 * e)[axis]) /
               (12.0 * h);
    }
    return div;
}

bool VectorFieldBundle::in_emission_set(const Vec& k) const {
    const double r = (frame_.xi() - k).norm();
    const double w = model_.omega(k);
    for (const auto& s : shells_)
        if (s.covers(r) && std::abs(s.fn.value(r) + w - E_) <= record_.delta_prime) return true;
    return false;
}

double VectorFieldBundle::sup_bound() const {
    double m = 0.0;
    for (const auto& t : tori_) m = std::max(m, t.R);
    return 2.0 + m;
}

void sample_on_grid(VectorFieldBundle& bundle, const MomentumGrid& grid) {
    const auto n = static_cast<std::size_t>(grid.size());
    bundle.sampled.assign(n, Vec::Zero());
    bundle.piece_id.assign(n, -1);
    bundle.sup_norm = 0.0;
    const int ntori = static_cast<int>(bundle.tori().size());
    for (std::size_t p = 0; p < n; ++p) {
        const auto pieces = bundle.evaluate(grid.node(static_cast<int>(p)));
        bundle.sampled[p] = pieces.v;
        bundle.sup_norm = std::max(bundle.sup_norm, pieces.v.norm());
        double best = 0.0;
        for (int t = 0; t < ntori; ++t)
            if (pieces.torus[static_cast<std::size_t>(t)] > best) {
                best = pieces.torus[static_cast<std::size_t>(t)];
                bundle.piece_id[p] = t;
            }
        for (std::size_t s = 0; s < pieces.shell.size(); ++s)
            if (pieces.shell[s] > best) {
                best = pieces.shell[s];
                bundle.piece_id[p] = ntori + static_cast<int>(s);
            }
    }
}

VectorFieldBundle build_vector_field(const ModelSpec& model, const MassShellAtlas& atlas, const Vec& xi, double E,
                                     const MomentumGrid& grid, const CalibrationOptions& options) {
    CalibrationOptions opt = options;
    if (opt.box_half_width == 0.0) opt.box_half_width = grid.half_width();
    return build_vector_field(model, atlas, calibrate(model, atlas, xi, E, opt), grid);
}

VectorFieldBundle build_vector_field(const ModelSpec& model, const MassShellAtlas& atlas,
                                     const CalibrationResult& cal, const MomentumGrid& grid) {
    (void)atlas;
    if (cal.record.grad_min < cal.grad_floor) {
        std::ostringstream os;
        os << "shell gradient |grad_k S1| = " << cal.record.grad_min
           << " vanishes on the emission set: the energy is too close to the shell threshold set";
        throw ConstructionError(os.str());
    }
    std::vector<ShellPiece> shells;
    for (int p : cal.emission.shells) shells.push_back(cal.pieces[static_cast<std::size_t>(p)]);
    VectorFieldBundle bundle(model, cal, std::move(shells), cal.energy);
    sample_on_grid(bundle, grid);
    if (bundle.sup_norm > bundle.sup_bound() + 1e-12) {
        std::ostringstream os;
        os << "vector field sup norm " << bundle.sup_norm << " exceeds 2 + max R_i = " << bundle.sup_bound();
        throw ConstructionError(os.str());
    }
    return bundle;
}

}  // namespace nelson
