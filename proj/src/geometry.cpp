#include <cmath>
#include <sstream>

#include "nelson/conjugate.hpp"

namespace nelson {

PolarFrame::PolarFrame(const Vec& xi) : xi_(xi) {
    const double s = xi.norm();
    u_ = s > 0.0 ? Vec(xi / s) : Vec(1.0, 0.0);
    perp_ = Vec(-u_.y(), u_.x());
}

Vec PolarFrame::k(double s, double theta, int w) const {
    return xi_ - s * std::cos(theta) * u_ + s * std::sin(theta) * static_cast<double>(w) * perp_;
}

Vec PolarFrame::v(double r, double theta, int w) const {
    return r * (std::sin(theta) * u_ + std::cos(theta) * static_cast<double>(w) * perp_);
}

Vec PolarFrame::dk_dr(double theta, int w) const {
    return -std::cos(theta) * u_ + std::sin(theta) * static_cast<double>(w) * perp_;
}

PolarFrame::Coords PolarFrame::coords(const Vec& k) const {
    const Vec d = k - xi_;
    Coords c;
    c.s = d.norm();
    const double a = -d.dot(u_), b = d.dot(perp_);
    c.theta = std::atan2(std::abs(b), a);
    c.w = b < 0.0 ? -1 : 1;
    return c;
}

double TorusSpec::rho_theta(double t) const { return plateau(t - theta, eps_theta, 2.0 * eps_theta); }

double TorusSpec::rho_r(double r) const { return plateau(r - R, eps_r, 2.0 * eps_r); }

bool TorusSpec::contains(double r, double t, double eps_r_override) const {
    const double er = eps_r_override >= 0.0 ? eps_r_override : eps_r;
    return std::abs(r - R) < er && std::abs(t - theta) < eps_theta;
}

std::vector<CrossingMomentum> crossing_momenta(const ModelSpec& model, const MassShellAtlas& atlas, const Vec& xi,
                                               double E, int scan_points, double collinear_tol) {
    std::vector<CrossingMomentum> out;
    if (model.nu != 2 || xi.norm() == 0.0 || model.omega.is_constant()) return out;
    const PolarFrame frame(xi);
    for (std::size_t c = 0; c < atlas.crossings.size(); ++c) {
        const auto& X = atlas.crossings[c];
        const double target = E - X.energy;
        auto f = [&](double t) { return model.omega(frame.k(X.radius, t, 1)) - target; };
        for (double end : {0.0, M_PI}) {
            if (std::abs(f(end)) <= collinear_tol * (1.0 + std::abs(target))) {
                std::ostringstream os;
                os << "energy " << E << " lies in the parallel threshold set at |xi| = " << xi.norm()
                   << ": crossing at radius " << X.radius << " is reached by a momentum collinear with xi";
                throw PreconditionError(os.str());
            }
        }
        for (double t : scan_roots(f, 0.0, M_PI, scan_points)) {
            for (int it = 0; it < 8; ++it) {
                const double fp = model.omega.gradient(frame.k(X.radius, t, 1)).dot(frame.v(X.radius, t, 1));
                if (fp == 0.0) break;
                const double tn = t - f(t) / fp;
                if (!(tn > 0.0 && tn < M_PI)) break;
                t = tn;
            }
            CrossingMomentum m;
            m.crossing = static_cast<int>(c);
            m.R = X.radius;
            m.E_c = X.energy;
            m.theta = t;
            m.witness_plus = frame.k(X.radius, t, 1);
            m.witness_minus = frame.k(X.radius, t, -1);
            m.residual = std::abs(f(t));
            out.push_back(m);
        }
    }
    return out;
}

}  // namespace nelson
