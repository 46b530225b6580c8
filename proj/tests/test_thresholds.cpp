#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "nelson/thresholds.hpp"

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

// Ground shell r^2/2 and an upper shell 1/4 + r^2/4 crossing it at R = 1, E = 1/2.
MassShellAtlas crossing_atlas() {
    return analytic_shell_source({{"lower", poly(0.0, 0.5), 0.0, 3.0, 1, true}, {"upper", poly(0.25, 0.25), 0.0, 3.0, 1, false}},
                                 radii(3.0, 61));
}

MassShellAtlas single_atlas() {
    return analytic_shell_source({{"lower", poly(0.0, 0.5), 0.0, 4.0, 1, true}}, radii(4.0, 81));
}

bool contains(const std::vector<double>& xs, double x, double tol = 1e-9) {
    return std::any_of(xs.begin(), xs.end(), [&](double y) { return std::abs(x - y) <= tol; });
}

}  // namespace

TEST_CASE("one-boson composite at zero momentum is the ground energy plus the mass", "[thresholds]") {
    const ModelSpec m = nelson_preset(1, 0.0, 2.0);
    const auto ground = GroundEnergy::analytic(poly(-0.3, 0.7));
    const Vec xi(0.8, 0.0);
    const Vec zero = Vec::Zero();
    REQUIRE(sigma_n_value(m, ground, xi, std::span<const Vec>(&zero, 1)).value ==
            Approx(-0.3 + 0.7 * 0.64 + 1.0).epsilon(1e-14));

    const auto free_ground = GroundEnergy::analytic(poly(0.0, 1.0));
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 50; ++i) {
        const Vec k(u(rng), 0.0);
        const double expected = (xi - k).squaredNorm() + std::sqrt(k.squaredNorm() + 1.0);
        REQUIRE(sigma_n_value(m, free_ground, xi, std::span<const Vec>(&k, 1)).value == Approx(expected).epsilon(1e-13));
    }
    const Vec ks[2] = {Vec(0.0, 0.0), Vec(0.0, 0.0)};
    REQUIRE(sigma_n_value(m, free_ground, Vec::Zero(), ks).value == Approx(2.0));
}

TEST_CASE("uncoupled Nelson thresholds at rest", "[thresholds]") {
    const ModelSpec m = nelson_preset(1, 0.0, 2.0);
    const auto ground = GroundEnergy::analytic(poly(0.0, 1.0));
    const auto one = sigma_n_min(m, ground, Vec::Zero(), 1);
    REQUIRE(one.value == Approx(1.0).margin(1e-10));
    REQUIRE(one.minimizer.at(0).norm() < 1e-5);
    REQUIRE(sigma_n_min(m, ground, Vec::Zero(), 2).value == Approx(2.0).margin(1e-10));
}

TEST_CASE("composite minimum is below every value on a fine verification grid", "[thresholds]") {
    const ModelSpec m = nelson_preset(1, 0.3, 2.0);
    const MomentumGrid g(1, 2.0, 33);
    const FockBasis b(g, 2);
    const auto atlas = trace_shells(m, g, b, radii(1.0, 6), 1);
    const Vec xi(0.6, 0.0);
    const double v = sigma_n_min(m, atlas.ground, xi, 1).value;
    for (int i = 0; i <= 2000; ++i) {
        const Vec k(-2.0 + 4.0 * i / 2000.0, 0.0);
        REQUIRE(v <= sigma_n_value(m, atlas.ground, xi, std::span<const Vec>(&k, 1)).value + 1e-12);
    }
}

TEST_CASE("essential bottom of uncoupled presets", "[thresholds]") {
    const auto free_ground = single_atlas();
    REQUIRE(essential_bottom(nelson_preset(1, 0.0, 2.0), free_ground, Vec::Zero()) == Approx(1.0).margin(1e-10));
    const ModelSpec polaron = polaron_preset(1, 0.0, 2.0, 0.6);
    REQUIRE(essential_bottom(polaron, free_ground, Vec::Zero()) == Approx(0.6).margin(1e-10));
}

TEST_CASE("shell-critical thresholds", "[thresholds]") {
    const auto atlas = single_atlas();
    const ModelSpec m = nelson_preset(1, 0.0, 2.0);
    const auto at_rest = threshold_shell(m, atlas, Vec::Zero());
    REQUIRE(at_rest.size() == 1);
    REQUIRE(at_rest[0].energy == Approx(1.0).margin(1e-10));

    // Critical point of k -> (2 - k)^2 / 2 + sqrt(k^2 + 1) by plain bisection.
    const double k = bisect([](double x) { return (x - 2.0) + x / std::sqrt(x * x + 1.0); }, 0.0, 2.0);
    const double oracle = 0.5 * (2.0 - k) * (2.0 - k) + std::sqrt(k * k + 1.0);
    const auto moving = threshold_shell(m, atlas, Vec(2.0, 0.0));
    REQUIRE(moving.size() == 1);
    REQUIRE(moving[0].energy == Approx(oracle).margin(1e-10));
    REQUIRE(moving[0].witness.x() == Approx(k).margin(1e-9));
    REQUIRE(moving[0].residual < 1e-10);

    const auto flat = threshold_shell(polaron_preset(1, 0.0, 2.0, 0.6), atlas, Vec(1.3, 0.0));
    REQUIRE(flat.size() == 1);
    REQUIRE(flat[0].energy == Approx(0.6).margin(1e-10));
    REQUIRE(flat[0].witness.x() == Approx(1.3).margin(1e-9));
}

TEST_CASE("crossing-collinear thresholds in closed form", "[thresholds]") {
    const auto atlas = crossing_atlas();
    REQUIRE(atlas.crossings.size() == 1);
    const ModelSpec m = nelson_preset(1, 0.0, 2.0);
    std::vector<double> e;
    for (const auto& t : threshold_parallel(m, atlas, Vec(2.0, 0.0))) e.push_back(t.energy);
    REQUIRE(e.size() == 2);
    REQUIRE(contains(e, 0.5 + std::sqrt(2.0)));
    REQUIRE(contains(e, 0.5 + std::sqrt(10.0)));
    const auto at_rest = threshold_parallel(m, atlas, Vec::Zero());
    REQUIRE(at_rest.size() == 1);
    REQUIRE(at_rest[0].energy == Approx(0.5 + std::sqrt(2.0)).margin(1e-10));
    REQUIRE(threshold_parallel(m, single_atlas(), Vec(2.0, 0.0)).empty());
}

TEST_CASE("crossing thresholds with flat omega", "[thresholds]") {
    const auto atlas = crossing_atlas();
    const ModelSpec m = nelson_preset(2, 0.0, 2.0);
    const auto on = threshold_hash(m, atlas, Vec(0.6, 0.8));
    REQUIRE(on.size() == 1);
    REQUIRE(on[0].energy == Approx(1.5).margin(1e-10));
    REQUIRE(threshold_hash(m, atlas, Vec(0.5, 0.0)).empty());
    const auto flat = threshold_hash(polaron_preset(1, 0.0, 2.0, 0.6), atlas, Vec(2.0, 0.0));
    REQUIRE(flat.size() == 1);
    REQUIRE(flat[0].energy == Approx(0.5 + 0.6).margin(1e-10));
}

TEST_CASE("at rest the flat-omega family lies inside the collinear family", "[thresholds][property]") {
    const auto atlas = crossing_atlas();
    for (const ModelSpec& m : {nelson_preset(1, 0.0, 2.0), polaron_preset(1, 0.0, 2.0, 0.6)}) {
        std::vector<double> par;
        for (const auto& t : threshold_parallel(m, atlas, Vec::Zero())) par.push_back(t.energy);
        for (const auto& h : threshold_hash(m, atlas, Vec::Zero())) REQUIRE(contains(par, h.energy));
    }
}

TEST_CASE("exceptional energies", "[thresholds]") {
    const auto atlas = crossing_atlas();
    REQUIRE(exc_set(nelson_preset(1, 0.2, 2.0), atlas, Vec::Zero()).empty());
    const ModelSpec polaron = polaron_preset(1, 0.2, 2.0, 0.6);
    const auto ground_only = exc_set(polaron, single_atlas(), Vec(0.5, 0.0));
    REQUIRE(ground_only.size() == 1);
    REQUIRE(ground_only[0] == Approx(0.6 + 0.125).margin(1e-12));
    const auto two = exc_set(polaron, atlas, Vec(0.5, 0.0));
    REQUIRE(two.size() == 2);
    REQUIRE(contains(two, 0.6 + 0.125, 1e-12));
    REQUIRE(contains(two, 0.6 + 0.25 + 0.0625, 1e-12));
}

TEST_CASE("uncoupled Nelson report at rest", "[thresholds]") {
    const ModelSpec m = nelson_preset(1, 0.0, 3.0);
    const MomentumGrid g(1, 3.0, 33);
    const FockBasis b(g, 2);
    const auto atlas = trace_shells(m, g, b, radii(1.0, 11), 1);
    const auto r = full_report(m, atlas, Vec::Zero());
    REQUIRE(r.sigma1 == Approx(1.0).margin(1e-10));
    REQUIRE(r.sigma2 == Approx(2.0).margin(1e-10));
    REQUIRE(r.t_shell.size() == 1);
    REQUIRE(r.t_shell[0].energy == Approx(1.0).margin(1e-10));
    REQUIRE(r.t_parallel.empty());
    REQUIRE(r.t_hash.empty());
    REQUIRE(r.exc.empty());
    REQUIRE(r.in_window(1.5));
    REQUIRE_FALSE(r.in_window(2.0));
}

TEST_CASE("synthetic crossing populates every family inside the window", "[thresholds]") {
    const auto atlas = crossing_atlas();
    for (int nu : {1, 2}) {
        const auto r = full_report(nelson_preset(nu, 0.0, 2.0), atlas, Vec(1.0, 0.0));
        REQUIRE_FALSE(r.t_shell.empty());
        REQUIRE_FALSE(r.t_parallel.empty());
        REQUIRE_FALSE(r.t_hash.empty());
        for (double e : r.energies()) {
            REQUIRE(e >= r.sigma1 - 1e-10);
            REQUIRE(e < r.sigma2);
        }
    }
}

TEST_CASE("thresholds are finite and separated below the two-boson threshold", "[thresholds][property]") {
    const auto atlas = crossing_atlas();
    std::vector<ThresholdReport> reports;
    for (double s : {0.0, 0.5, 1.0, 1.5, 2.0}) reports.push_back(full_report(nelson_preset(1, 0.0, 2.0), atlas, Vec(s, 0.0)));
    const auto d = discreteness_check(reports, 0.1);
    REQUIRE(d.passed);
    REQUIRE(d.min_separation > 1e-8);
}

TEST_CASE("two-boson threshold never undercuts the one-boson threshold", "[thresholds][property]") {
    const auto atlas = crossing_atlas();
    for (double s : {0.0, 0.4, 0.8, 1.2, 1.6, 2.0}) {
        const auto r = full_report(nelson_preset(1, 0.0, 2.0), atlas, Vec(s, 0.0));
        REQUIRE(r.sigma2 >= r.sigma1);
    }
}
