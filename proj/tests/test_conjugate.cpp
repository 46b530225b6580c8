#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "nelson/conjugate.hpp"

using namespace nelson;
using Catch::Approx;

namespace {

RadialProfile poly(double c0, double c2) {
    return {[=](double r) { return c0 + c2 * r * r; }, [=](double r) { return 2 * c2 * r; },
            [=](double) { return 2 * c2; }};
}

std::vector<double> radii(double stop, int count) {
    std::vector<double> r;
    for (int i = 0; i < count; ++i) r.push_back(stop * i / (count - 1));
    return r;
}

MassShellAtlas crossing_atlas() {
    return analytic_shell_source({{"lower", poly(0.0, 0.5), 0.0, 3.0, 1, true}, {"upper", poly(0.25, 0.25), 0.0, 3.0, 1, false}},
                                 radii(3.0, 61));
}

MassShellAtlas single_atlas() {
    return analytic_shell_source({{"lower", poly(0.0, 0.5), 0.0, 4.0, 1, true}}, radii(4.0, 81));
}

CalibrationOptions box(double K) {
    CalibrationOptions o;
    o.box_half_width = K;
    return o;
}

// |k(1, theta)|^2 = 5 - 4 cos(theta) around xi = (2, 0), so omega = sqrt(6 - 4 cos(theta)).
double crossing_angle_oracle(double excess) {
    return bisect([excess](double t) { return std::sqrt(6.0 - 4.0 * std::cos(t)) - excess; }, 0.0, M_PI);
}

double max_abs(const SparseC& m) {
    double out = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SparseC::InnerIterator it(m, k); it; ++it) out = std::max(out, std::abs(it.value()));
    return out;
}

}  // namespace

TEST_CASE("crossing momenta match the closed-form angle", "[conjugate]") {
    const auto atlas = crossing_atlas();
    const ModelSpec m = nelson_preset(2, 0.0, 2.0);
    const auto exact = crossing_momenta(m, atlas, Vec(2.0, 0.0), 0.5 + std::sqrt(6.0));
    REQUIRE(exact.size() == 1);
    REQUIRE(exact[0].theta == Approx(M_PI / 2).margin(1e-10));
    REQUIRE(exact[0].R == Approx(1.0).margin(1e-12));

    for (double excess : {1.6, 2.0, 2.7, 3.1}) {
        const auto cm = crossing_momenta(m, atlas, Vec(2.0, 0.0), 0.5 + excess);
        REQUIRE(cm.size() == 1);
        REQUIRE(cm[0].theta == Approx(crossing_angle_oracle(excess)).margin(1e-10));
        REQUIRE(cm[0].residual < 1e-10);
    }
    REQUIRE(crossing_momenta(m, atlas, Vec::Zero(), 2.1).empty());
}

TEST_CASE("calibration without crossings builds no tori", "[conjugate]") {
    const auto cal = calibrate(nelson_preset(1, 0.0, 3.0), single_atlas(), Vec::Zero(), 1.5, box(3.0));
    REQUIRE(cal.tori.empty());
    REQUIRE(cal.emission.K_J_X.empty());
    REQUIRE(cal.record.delta_prime > 0.0);
    REQUIRE_FALSE(cal.emission.K_J.empty());
}

TEST_CASE("calibration rejects energies outside the window or on a threshold", "[conjugate]") {
    const ModelSpec m = nelson_preset(1, 0.0, 3.0);
    REQUIRE_THROWS_AS(calibrate(m, single_atlas(), Vec::Zero(), 2.5, box(3.0)), PreconditionError);
    REQUIRE_THROWS_AS(calibrate(m, single_atlas(), Vec::Zero(), 1.0, box(3.0)), PreconditionError);
}

TEST_CASE("synthetic crossing in the plane: tori, signs and the epsilon cascade", "[conjugate]") {
    const auto atlas = crossing_atlas();
    const ModelSpec m = nelson_preset(2, 0.0, 2.0);
    const Vec xi(2.0, 0.0);
    const double E = 2.1;
    const auto cm = crossing_momenta(m, atlas, xi, E);
    const auto cal = calibrate(m, atlas, xi, E, box(6.0));
    REQUIRE(cal.tori.size() == cm.size());
    REQUIRE_FALSE(cal.tori.empty());
    for (std::size_t i = 0; i < cal.tori.size(); ++i) {
        const Vec k = cm[i].witness_plus;
        const int sign = k.dot(m.omega.gradient(k)) > 0.0 ? 1 : -1;
        REQUIRE(cal.tori[i].sigma == sign);
        REQUIRE(cal.tori[i].c_ij > 0.0);
    }
    const auto& r = cal.record;
    REQUIRE(r.eps_r <= r.eps_r1);
    REQUIRE(r.eps_r1 <= r.eps_r2);
    REQUIRE(r.eps_r2 <= r.eps_r3);
    REQUIRE(r.eps_r3 <= r.eps_r4);
    REQUIRE(r.eps_theta <= r.eps_theta1);
    REQUIRE(r.eps_theta1 <= r.eps_theta2);
    REQUIRE(r.c_prime > 0.0);
}

TEST_CASE("vector field partition, direction and sup bound", "[conjugate]") {
    const auto atlas = crossing_atlas();
    const ModelSpec m = nelson_preset(2, 0.0, 2.0);
    const Vec xi(2.0, 0.0);
    const MomentumGrid g(2, 6.0, 21);
    const auto bundle = build_vector_field(m, atlas, xi, 2.1, g, box(6.0));
    const auto& kj = bundle.emission().K_J;
    REQUIRE(kj.size() >= 50);
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<std::size_t> pick(0, kj.size() - 1);
    for (int i = 0; i < 50; ++i) REQUIRE(std::abs(bundle.partition_sum(kj[pick(rng)].first) - 1.0) <= 1e-12);
    REQUIRE(bundle.sup_norm <= bundle.sup_bound());
    for (const auto& [k, piece] : kj) REQUIRE(bundle.v(k).norm() <= bundle.sup_bound());
}

TEST_CASE("single shell field is the unit shell gradient on its plateau", "[conjugate]") {
    const ModelSpec m = nelson_preset(1, 0.0, 3.0);
    const MomentumGrid g(1, 3.0, 65);
    const auto bundle = build_vector_field(m, single_atlas(), Vec::Zero(), 1.5, g, box(3.0));
    REQUIRE(bundle.tori().empty());
    int checked = 0;
    for (const auto& [k, piece] : bundle.emission().K_J) {
        const auto p = bundle.evaluate(k);
        if (p.shell.empty() || p.shell[0] != 1.0) continue;
        const Vec grad = bundle.shell_gradient(bundle.shells()[0], k);
        REQUIRE(bundle.v(k).dot(grad) == Approx(grad.norm()).epsilon(1e-12));
        ++checked;
    }
    REQUIRE(checked > 0);
}

TEST_CASE("zero field gives zero conjugate operators", "[conjugate]") {
    const MomentumGrid g(1, 2.0, 17);
    const FockBasis b(g, 2);
    const auto c = build_conjugate(b, g, std::vector<Vec>(static_cast<std::size_t>(g.size()), Vec::Zero()));
    REQUIRE(max_abs(c.a) == 0.0);
    REQUIRE(max_abs(c.A.matrix()) == 0.0);
}

TEST_CASE("one-body conjugate is exactly Hermitian with real expectations", "[conjugate][property]") {
    const MomentumGrid g(2, 2.0, 9);
    const FockBasis b(g, 2);
    std::vector<Vec> v(static_cast<std::size_t>(g.size()), Vec::Zero());
    for (int p = 0; p < g.size(); ++p)
        if (g.boundary_distance(p) >= 2) v[static_cast<std::size_t>(p)] = Vec(std::sin(g.node(p).y()), std::cos(g.node(p).x()));
    const auto c = build_conjugate(b, g, v);
    const SparseC adj = SparseC(c.a.adjoint());
    REQUIRE(max_abs(c.a - adj) == 0.0);
    REQUIRE(c.A.exactly_hermitian());

    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        Eigen::VectorXcd psi(static_cast<Eigen::Index>(b.dimension()));
        for (Eigen::Index j = 0; j < psi.size(); ++j) psi[j] = cplx(n(rng), n(rng));
        const cplx q = psi.dot(c.A.apply(psi));
        REQUIRE(std::abs(q.imag()) <= 1e-12 * std::abs(q));
    }
}

TEST_CASE("conjugate rejects fields touching the box boundary", "[conjugate]") {
    const MomentumGrid g(1, 2.0, 17);
    std::vector<Vec> v(static_cast<std::size_t>(g.size()), Vec::Zero());
    v[0] = Vec(1.0, 0.0);
    REQUIRE_THROWS_AS(one_body_conjugate(g, v), SupportError);
}

TEST_CASE("flow is the identity off the support of the field", "[conjugate]") {
    const auto bundle = build_vector_field(nelson_preset(1, 0.0, 3.0), single_atlas(), Vec::Zero(), 1.5,
                                           MomentumGrid(1, 3.0, 65), box(3.0));
    const Vec far(2.9, 0.0);
    REQUIRE(bundle.v(far).norm() == 0.0);
    const auto f = flow_map(bundle, far, 1.0, 1e-2);
    REQUIRE(f.k == far);
    REQUIRE(f.J == 1.0);
}

TEST_CASE("flow displacement is bounded by time times the sup norm", "[conjugate][property]") {
    const auto bundle = build_vector_field(nelson_preset(1, 0.0, 3.0), single_atlas(), Vec::Zero(), 1.5,
                                           MomentumGrid(1, 3.0, 65), box(3.0));
    for (const auto& [k, piece] : bundle.emission().K_J) {
        for (double t : {0.25, 1.0}) {
            const auto f = flow_map(bundle, k, t, 1e-3);
            REQUIRE((f.k - k).norm() <= t * bundle.sup_bound() + 1e-12);
            REQUIRE(f.J > 0.0);
        }
    }
}

TEST_CASE("linear field flow matches the exponential solution", "[conjugate]") {
    const double alpha = 0.7;
    const Vec center(0.3, -0.2), k0(1.1, 0.4);
    const Field v = [&](const Vec& k) { return Vec(alpha * (k - center)); };
    const Divergence div = [&](const Vec&) { return 2.0 * alpha; };
    const double t = 1.3;
    const auto f = flow(v, div, k0, t, 1e-3);
    const Vec exact = center + std::exp(alpha * t) * (k0 - center);
    REQUIRE((f.k - exact).norm() < 1e-8);
    REQUIRE(f.J == Approx(std::exp(2.0 * alpha * t)).epsilon(1e-8));
    REQUIRE_THROWS_AS(flow(v, div, k0, t, 0.0), DomainError);
}
