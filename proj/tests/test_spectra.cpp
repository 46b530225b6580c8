#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "nelson/numerics.hpp"
#include "nelson/spectra.hpp"

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

}  // namespace

TEST_CASE("eigenvalues of a diagonal matrix come out sorted", "[spectra]") {
    const auto H = OperatorMatrix::diagonal({3.0, 1.0, 2.0}, "d");
    const auto r = lowest_eigs(H, 3);
    REQUIRE(r.values.size() == 3);
    REQUIRE(r.values[0] == Approx(1.0));
    REQUIRE(r.values[1] == Approx(2.0));
    REQUIRE(r.values[2] == Approx(3.0));
}

TEST_CASE("iterative eigensolver matches the dense oracle", "[spectra]") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 1.0);
    const std::size_t dim = 200;
    std::vector<Entry> upper;
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = i; j < dim; ++j) upper.push_back({i, j, cplx(n(rng), i == j ? 0.0 : n(rng))});
    const auto H = OperatorMatrix::from_upper(dim, upper, BlockTag::General, "random");
    SolverOptions opt;
    opt.dense_threshold = 10;
    const auto it = lowest_eigs(H, 6, opt);
    REQUIRE(it.method != dense_eigs(H).method);
    const Eigen::MatrixXcd dense = H.matrix();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> oracle(dense);
    for (int i = 0; i < 6; ++i) {
        REQUIRE(std::abs(it.values[i] - oracle.eigenvalues()[i]) < 1e-10);
        REQUIRE(it.residuals[i] <= opt.tol * (1.0 + std::abs(it.values[i])));
    }
}

TEST_CASE("window eigenpairs are exactly the dense values inside the window", "[spectra]") {
    const auto H = OperatorMatrix::diagonal({0.5, 1.5, 2.5, 3.5}, "d");
    const auto w = window_eigs(H, 1.0, 3.0);
    REQUIRE(w.values.size() == 2);
    REQUIRE(w.values[0] == Approx(1.5));
    REQUIRE(w.values[1] == Approx(2.5));
}

TEST_CASE("uncoupled ground energy is the smallest free diagonal entry", "[spectra]") {
    const ModelSpec m = nelson_preset(1, 0.0, 2.0);
    const MomentumGrid g(1, 2.0, 33);
    const FockBasis b(g, 2);
    REQUIRE(ground_energy(m, g, b, Vec::Zero()) == Approx(0.0).margin(1e-12));
    const Vec xi(1.7, 0.0);
    const auto d = free_diagonal(m, g, b, xi);
    REQUIRE(ground_energy(m, g, b, xi) == Approx(*std::min_element(d.begin(), d.end())).margin(1e-10));
}

TEST_CASE("coupling lowers the ground energy", "[spectra]") {
    const MomentumGrid g(1, 2.0, 33);
    const FockBasis b(g, 2);
    for (double s : {0.0, 0.5, 1.0}) {
        const Vec xi(s, 0.0);
        REQUIRE(ground_energy(nelson_preset(1, 0.3, 2.0), g, b, xi) <
                ground_energy(nelson_preset(1, 0.0, 2.0), g, b, xi) - 1e-4);
    }
}

TEST_CASE("ground energy is invariant under grid rotations", "[spectra][property]") {
    const ModelSpec m = nelson_preset(2, 0.3, 1.5);
    const MomentumGrid g(2, 1.5, 9);
    const FockBasis b(g, 2);
    const double e = ground_energy(m, g, b, Vec(0.6, 0.2));
    REQUIRE(ground_energy(m, g, b, Vec(-0.2, 0.6)) == Approx(e).epsilon(1e-10));
    REQUIRE(ground_energy(m, g, b, Vec(-0.6, -0.2)) == Approx(e).epsilon(1e-10));
    // Off the lattice symmetries the defect is bounded by the grid anisotropy.
    const double r = Vec(0.6, 0.2).norm();
    REQUIRE(ground_energy(m, g, b, Vec(r / std::sqrt(2.0), r / std::sqrt(2.0))) == Approx(e).margin(0.02));
}

TEST_CASE("uncoupled shell is the particle dispersion below the continuum", "[spectra]") {
    const ModelSpec m = nelson_preset(1, 0.0, 3.0);
    const MomentumGrid g(1, 3.0, 33);
    const FockBasis b(g, 2);
    const auto atlas = trace_shells(m, g, b, radii(1.0, 11), 1);
    REQUIRE(atlas.branches.size() == 1);
    const auto& s = atlas.branches[0];
    REQUIRE(s.ground);
    REQUIRE(s.multiplicity == 1);
    REQUIRE(s.r_max == Approx(1.0));
    for (std::size_t i = 0; i < s.radii.size(); ++i) REQUIRE(s.energies[i] == Approx(s.radii[i] * s.radii[i]).margin(1e-10));
    REQUIRE(atlas.crossings.empty());
}

TEST_CASE("coupled ground branch is non-degenerate where isolated", "[spectra]") {
    const ModelSpec m = nelson_preset(1, 0.3, 2.0);
    const MomentumGrid g(1, 2.0, 33);
    const FockBasis b(g, 2);
    const auto atlas = trace_shells(m, g, b, radii(1.0, 6), 2);
    const ShellBranch* ground = atlas.ground_branch();
    REQUIRE(ground != nullptr);
    REQUIRE(ground->multiplicity == 1);
    for (std::size_t i = 0; i < ground->radii.size(); ++i)
        REQUIRE(ground->energies[i] < atlas.ess_bottom[i] - atlas.gap_tol);
}

TEST_CASE("designed crossing of two analytic shells", "[spectra]") {
    const ShellDefinition a{"a", poly(0.0, 0.5), 0.0, 2.0, 1, true};
    const ShellDefinition b{"b", poly(1.0, -0.5), 0.0, 2.0, 1, false};
    const auto atlas = analytic_shell_source({a, b}, radii(2.0, 41));
    REQUIRE(atlas.crossings.size() == 1);
    REQUIRE(atlas.crossings[0].radius == Approx(1.0).margin(1e-10));
    REQUIRE(atlas.crossings[0].energy == Approx(0.5).margin(1e-10));
    REQUIRE(atlas.crossings[0].multiplicity == 2);

    const auto single = analytic_shell_source({a}, radii(2.0, 41));
    REQUIRE(single.crossings.empty());
}

TEST_CASE("three analytic shells with two designed crossings", "[spectra]") {
    const ShellDefinition a{"a", poly(0.0, 0.5), 0.0, 3.0, 1, true};
    const ShellDefinition b{"b", poly(1.0, -0.5), 0.0, 3.0, 1, false};
    const ShellDefinition c{"c", poly(2.0, 0.25), 0.0, 3.0, 1, false};
    const auto atlas = analytic_shell_source({a, b, c}, radii(3.0, 61));
    REQUIRE(atlas.crossings.size() == 2);
    std::vector<double> r;
    for (const auto& x : atlas.crossings) r.push_back(x.radius);
    std::sort(r.begin(), r.end());
    REQUIRE(r[0] == Approx(1.0).margin(1e-10));
    REQUIRE(r[1] == Approx(std::sqrt(8.0)).margin(1e-10));
}

TEST_CASE("smooth step and window are bounded and monotone", "[spectra][property]") {
    REQUIRE(smooth_step(-0.1) == 0.0);
    REQUIRE(smooth_step(0.0) == 0.0);
    REQUIRE(smooth_step(1.0) == 1.0);
    REQUIRE(smooth_step(0.5) == Approx(0.5));
    double prev = 0.0;
    for (int i = 1; i <= 100; ++i) {
        const double x = smooth_step(i / 100.0);
        REQUIRE(x >= prev);
        REQUIRE(x <= 1.0);
        prev = x;
    }
    REQUIRE(window(1.5, 1.0, 2.0, 0.1) == 1.0);
    REQUIRE(window(0.85, 1.0, 2.0, 0.1) == 0.0);
    REQUIRE(plateau(0.3, 0.5, 1.0) == 1.0);
    REQUIRE(plateau(1.2, 0.5, 1.0) == 0.0);
}

TEST_CASE("cubic spline interpolates its knots", "[spectra][property]") {
    std::vector<double> x, y;
    for (int i = 0; i <= 20; ++i) {
        x.push_back(0.1 * i);
        y.push_back(std::cos(0.1 * i));
    }
    const CubicSpline s(x, y, true);
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(s.value(x[i]) == Approx(y[i]).margin(1e-14));
    REQUIRE(s.d1(0.0) == Approx(0.0).margin(1e-12));
    REQUIRE(s.value(1.05) == Approx(std::cos(1.05)).margin(1e-5));
}
