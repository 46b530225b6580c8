#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <random>

#include "nelson/eigensolver.hpp"
#include "nelson/fock.hpp"

using namespace nelson;
using Catch::Approx;

namespace {

// Binomial coefficient by the multiplicative formula, independent of the basis ranking.
std::size_t choose(std::size_t n, std::size_t k) {
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return static_cast<std::size_t>(std::llround(r));
}

double max_abs(const SparseC& m) {
    double out = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SparseC::InnerIterator it(m, k); it; ++it) out = std::max(out, std::abs(it.value()));
    return out;
}

std::vector<cplx> random_modes(int G, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<cplx> f(static_cast<std::size_t>(G));
    for (auto& x : f) x = cplx(n(rng), n(rng));
    return f;
}

}  // namespace

TEST_CASE("sector dimensions count multisets", "[fock]") {
    REQUIRE(FockBasis(MomentumGrid(1, 1.0, 3), 2).sector_dimensions() == std::vector<std::size_t>{1, 3, 6});
    REQUIRE(FockBasis(MomentumGrid(1, 1.0, 3), 2).dimension() == 10);
    for (std::uint64_t n = 0; n <= 3; ++n) REQUIRE(multiset_count(1, n) == 1);
    const FockBasis b(MomentumGrid(2, 1.0, 8), 2);
    REQUIRE(b.modes() == 64);
    REQUIRE(b.sector_dimension(2) == choose(65, 2));
    REQUIRE(b.sector_dimension(2) == 2080);
    REQUIRE(multiset_count(64, 3) == choose(66, 3));
}

TEST_CASE("basis ranking round-trips every state", "[fock][property]") {
    const FockBasis b(MomentumGrid(1, 2.0, 7), 3);
    for (std::size_t i = 0; i < b.dimension(); ++i) {
        const auto s = b.state(i);
        REQUIRE(std::is_sorted(s.begin(), s.end()));
        REQUIRE(b.index_of(s) == i);
        REQUIRE(static_cast<std::size_t>(b.sector_of(i)) == s.size());
    }
    const std::vector<int> too_many{0, 1, 2, 3};
    REQUIRE_THROWS_AS(b.index_of(too_many), RangeError);
}

TEST_CASE("dimension cap raises a sizing error", "[fock]") {
    REQUIRE_THROWS_AS(FockBasis(MomentumGrid(2, 1.0, 33), 3, 1000), SizingError);
}

TEST_CASE("dGamma is the sum of one-body values over occupied modes", "[fock]") {
    const MomentumGrid g(1, 2.0, 9);
    const FockBasis b(g, 2);
    const auto omega = OneBodyDispersion::relativistic(1.0);
    std::vector<double> w;
    for (const Vec& k : g.nodes()) w.push_back(omega(k));
    const auto d = build_dGamma(b, w).diagonal_values();
    REQUIRE(d[0] == 0.0);
    const std::vector<int> pair{4, 4};
    REQUIRE(d[b.index_of(pair)] == Approx(2.0 * omega(g.node(4))).epsilon(1e-15));

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> f(static_cast<std::size_t>(g.size()));
    for (auto& x : f) x = u(rng);
    const auto df = build_dGamma(b, f).diagonal_values();
    for (std::size_t i = b.sector_offset(2); i < b.dimension(); ++i) {
        const auto s = b.state(i);
        REQUIRE(df[i] == Approx(f[s[0]] + f[s[1]]).epsilon(1e-15));
    }
}

TEST_CASE("field operator connects the vacuum to single bosons with amplitude g sqrt(w)", "[fock]") {
    const ModelSpec m = nelson_preset(1, 0.4, 2.0);
    const MomentumGrid g(1, 2.0, 9);
    const FockBasis b(g, 2);
    const OperatorMatrix phi = build_field(b, m, g);
    REQUIRE(phi.tag() == BlockTag::AdjacentSector);
    REQUIRE(phi.tag_matches(b));
    for (int p = 0; p < g.size(); ++p) {
        const std::vector<int> one{p};
        const cplx amp = phi.matrix().coeff(static_cast<Eigen::Index>(b.index_of(one)), 0);
        REQUIRE(std::abs(amp) == Approx(coupling_value(m, g.node(p)) * std::sqrt(g.weight())).epsilon(1e-14));
        REQUIRE(phi.matrix().coeff(0, static_cast<Eigen::Index>(b.index_of(one))) == std::conj(amp));
    }
    const ModelSpec free = nelson_preset(1, 0.0, 2.0);
    REQUIRE(max_abs(build_field(b, free, g).matrix()) == 0.0);
}

TEST_CASE("canonical commutation relation below the top sector", "[fock]") {
    const MomentumGrid g(1, 1.0, 4);
    const FockBasis b(g, 3);
    std::mt19937_64 rng(5);
    const auto f = random_modes(4, rng), h = random_modes(4, rng);
    cplx inner = 0.0;
    for (int p = 0; p < 4; ++p) inner += std::conj(f[p]) * h[p];
    const SparseC af = annihilation_matrix(b, f), ah_star = creation_matrix(b, h);
    const Eigen::MatrixXcd comm = Eigen::MatrixXcd(af * ah_star) - Eigen::MatrixXcd(ah_star * af);
    const auto top = static_cast<Eigen::Index>(b.sector_offset(3));
    const Eigen::MatrixXcd expected = inner * Eigen::MatrixXcd::Identity(top, top);
    REQUIRE((comm.topLeftCorner(top, top) - expected).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("Hamiltonian is the free diagonal plus the field", "[fock]") {
    const ModelSpec m = nelson_preset(1, 0.3, 2.0);
    const MomentumGrid g(1, 2.0, 11);
    const FockBasis b(g, 2);
    const Vec xi(0.7, 0.0);
    const OperatorMatrix H = assemble_H(m, g, b, xi);
    REQUIRE(H.exactly_hermitian());
    REQUIRE(H.tag_matches(b));
    const auto d = free_diagonal(m, g, b, xi);
    REQUIRE(d[0] == m.Omega(xi));
    for (int p = 0; p < g.size(); ++p) {
        const std::vector<int> one{p};
        REQUIRE(d[b.index_of(one)] == Approx(m.Omega(xi - g.node(p)) + m.omega(g.node(p))).epsilon(1e-15));
    }
    const SparseC diff = H.matrix() - OperatorMatrix::diagonal(d, "H0").matrix() - build_field(b, m, g).matrix();
    REQUIRE(max_abs(diff) < 1e-15);

    const ModelSpec free = nelson_preset(1, 0.0, 2.0);
    REQUIRE(assemble_H(free, g, b, xi).tag() == BlockTag::Diagonal);
}

TEST_CASE("extended fiber at the origin is the fiber shifted by the mass", "[fock]") {
    const ModelSpec m = nelson_preset(1, 0.3, 2.0);
    const MomentumGrid g(1, 2.0, 11);
    const FockBasis b(g, 2);
    const Vec xi(0.4, 0.0);
    const int origin = g.nearest(Vec::Zero());
    const SparseC diff = assemble_H1(m, g, b, xi, origin).matrix() - assemble_H(m, g, b, xi).shifted(1.0).matrix();
    REQUIRE(max_abs(diff) < 1e-14);

    const int p = origin + 3;
    const auto e1 = dense_eigs(assemble_H1(m, g, b, xi, p)).values;
    const auto e0 = dense_eigs(assemble_H(m, g, b, xi - g.node(p))).values;
    REQUIRE((e1 - e0 - Eigen::VectorXd::Constant(e0.size(), m.omega(g.node(p)))).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("binary operator files round-trip bit for bit", "[fock]") {
    const ModelSpec m = nelson_preset(2, 0.3, 1.0);
    const MomentumGrid g(2, 1.0, 5);
    const FockBasis b(g, 2);
    const OperatorMatrix H = assemble_H(m, g, b, Vec(0.2, 0.1));
    const std::string path = "test_fock_roundtrip.bin";
    write_binary(H, path);
    const OperatorMatrix R = read_binary(path);
    std::remove(path.c_str());
    REQUIRE(R.dim() == H.dim());
    REQUIRE(max_abs(R.matrix() - H.matrix()) == 0.0);
}

TEST_CASE("assembled operators are Hermitian with declared sparsity", "[fock][property]") {
    std::mt19937_64 rng(21);
    for (int nu : {1, 2}) {
        const MomentumGrid g(nu, 1.5, nu == 1 ? 13 : 5);
        const FockBasis b(g, 3);
        const ModelSpec m = nelson_preset(nu, 0.5, 1.5);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const Vec xi(u(rng), nu == 2 ? u(rng) : 0.0);
        for (const OperatorMatrix& op : {assemble_H0(m, g, b, xi), assemble_H(m, g, b, xi), build_field(b, m, g),
                                         build_field_modes(b, random_modes(g.size(), rng))}) {
            REQUIRE(op.exactly_hermitian());
            REQUIRE(op.tag_matches(b));
        }
    }
}
