#include <algorithm>
#include <cmath>

#include "nelson/fock.hpp"

namespace nelson {

namespace {

int occupancy(std::span<const int> modes, int p) {
    return static_cast<int>(std::count(modes.begin(), modes.end(), p));
}

// Sorted multiset with one copy of p inserted.
void insert_mode(std::span<const int> modes, int p, std::vector<int>& out) {
    out.assign(modes.begin(), modes.end());
    out.insert(std::upper_bound(out.begin(), out.end(), p), p);
}

// Sorted multiset with one copy of p replaced by q.
void move_mode(std::span<const int> modes, int p, int q, std::vector<int>& out) {
    out.assign(modes.begin(), modes.end());
    out.erase(std::find(out.begin(), out.end(), p));
    out.insert(std::upper_bound(out.begin(), out.end(), q), q);
}

}  // namespace

OperatorMatrix build_dGamma(const FockBasis& basis, const std::vector<double>& f, std::string label) {
    if (static_cast<int>(f.size()) != basis.modes()) throw std::invalid_argument("build_dGamma: size mismatch");
    std::vector<double> diag(basis.dimension(), 0.0);
    for (std::size_t i = 0; i < diag.size(); ++i) {
        double acc = 0.0;
        for (int p : basis.state(i)) acc += f[static_cast<std::size_t>(p)];
        diag[i] = acc;
    }
    return OperatorMatrix::diagonal(diag, std::move(label));
}

std::vector<OperatorMatrix> build_dGamma_vector(const FockBasis& basis, const std::vector<Vec>& f, int nu,
                                                std::string label) {
    std::vector<OperatorMatrix> out;
    for (int c = 0; c < nu; ++c) {
        std::vector<double> comp(f.size());
        for (std::size_t p = 0; p < f.size(); ++p) comp[p] = f[p][c];
        out.push_back(build_dGamma(basis, comp, label + "[" + std::to_string(c) + "]"));
    }
    return out;
}

SparseC creation_matrix(const FockBasis& basis, const std::vector<cplx>& f) {
    std::vector<Eigen::Triplet<cplx>> trip;
    std::vector<int> buf;
    const std::size_t top = basis.sector_offset(basis.n_max());
    for (std::size_t col = 0; col < top; ++col) {
        const auto s = basis.state(col);
        for (int p = 0; p < basis.modes(); ++p) {
            const cplx fp = f[static_cast<std::size_t>(p)];
            if (fp == cplx(0.0)) continue;
            insert_mode(s, p, buf);
            const double amp = std::sqrt(static_cast<double>(occupancy(s, p) + 1));
            trip.emplace_back(static_cast<Eigen::Index>(basis.index_of(buf)), static_cast<Eigen::Index>(col), amp * fp);
        }
    }
    const auto dim = static_cast<Eigen::Index>(basis.dimension());
    SparseC m(dim, dim);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

SparseC annihilation_matrix(const FockBasis& basis, const std::vector<cplx>& f) {
    SparseC a = creation_matrix(basis, f).adjoint();
    return a;
}

OperatorMatrix build_field_modes(const FockBasis& basis, const std::vector<cplx>& modes, std::string label) {
    std::vector<Entry> upper;
    std::vector<int> buf;
    const std::size_t top = basis.sector_offset(basis.n_max());
    for (std::size_t col = 0; col < top; ++col) {
        const auto s = basis.state(col);
        for (int p = 0; p < basis.modes(); ++p) {
            const cplx fp = modes[static_cast<std::size_t>(p)];
            if (fp == cplx(0.0)) continue;
            insert_mode(s, p, buf);
            const double amp = std::sqrt(static_cast<double>(occupancy(s, p) + 1));
            // Upper triangle holds the annihilation element <s| a(f) |s + p>.
            upper.push_back({col, basis.index_of(buf), std::conj(amp * fp)});
        }
    }
    return OperatorMatrix::from_upper(basis.dimension(), std::move(upper), BlockTag::AdjacentSector, std::move(label));
}

std::vector<cplx> coupling_modes(const ModelSpec& model, const MomentumGrid& grid) {
    const double sw = std::sqrt(grid.weight());
    std::vector<cplx> g(static_cast<std::size_t>(grid.size()));
    for (int p = 0; p < grid.size(); ++p) g[static_cast<std::size_t>(p)] = coupling_value(model, grid.node(p)) * sw;
    return g;
}

OperatorMatrix build_field(const FockBasis& basis, const ModelSpec& model, const MomentumGrid& grid) {
    return build_field_modes(basis, coupling_modes(model, grid), "phi(g)");
}

OperatorMatrix second_quantize(const FockBasis& basis, const SparseC& one_body, std::string label) {
    if (one_body.rows() != basis.modes()) throw std::invalid_argument("second_quantize: size mismatch");
    std::vector<Entry> upper;
    std::vector<int> buf;
    for (std::size_t col = 0; col < basis.dimension(); ++col) {
        const auto s = basis.state(col);
        double diag = 0.0;
        for (std::size_t j = 0; j < s.size(); ++j) {
            const int p = s[j];
            if (j > 0 && s[j - 1] == p) continue;
            const int np = occupancy(s, p);
            // Row p of a Hermitian matrix gives a_qp = conj(a_pq).
            for (SparseC::InnerIterator it(one_body, p); it; ++it) {
                const int q = static_cast<int>(it.col());
                const cplx a_qp = std::conj(it.value());
                if (q == p) {
                    diag += a_qp.real() * np;
                    continue;
                }
                move_mode(s, p, q, buf);
                const std::size_t row = basis.index_of(buf);
                if (row > col) continue;
                const int nq = occupancy(s, q);
                upper.push_back({row, col, a_qp * std::sqrt(static_cast<double>(np) * (nq + 1))});
            }
        }
        if (diag != 0.0) upper.push_back({col, col, diag});
    }
    return OperatorMatrix::from_upper(basis.dimension(), std::move(upper), BlockTag::SectorPreserving, std::move(label));
}

std::vector<Vec> total_momenta(const MomentumGrid& grid, const FockBasis& basis) {
    std::vector<Vec> P(basis.dimension(), Vec::Zero());
    for (std::size_t i = 0; i < P.size(); ++i)
        for (int p : basis.state(i)) P[i] += grid.node(p);
    return P;
}

std::vector<double> free_diagonal(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis,
                                  const Vec& xi) {
    std::vector<double> w(static_cast<std::size_t>(grid.size()));
    for (int p = 0; p < grid.size(); ++p) w[static_cast<std::size_t>(p)] = model.omega(grid.node(p));
    std::vector<double> diag(basis.dimension());
    for (std::size_t i = 0; i < diag.size(); ++i) {
        double acc = 0.0;
        Vec P = Vec::Zero();
        for (int p : basis.state(i)) {
            acc += w[static_cast<std::size_t>(p)];
            P += grid.node(p);
        }
        diag[i] = acc + model.Omega(xi - P);
    }
    return diag;
}

OperatorMatrix assemble_H0(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis, const Vec& xi) {
    return OperatorMatrix::diagonal(free_diagonal(model, grid, basis, xi), "H0");
}

OperatorMatrix assemble_H(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis, const Vec& xi) {
    grid.require_resolves(model);
    OperatorMatrix H0 = assemble_H0(model, grid, basis, xi);
    if (!model.coupled()) {
        H0.set_label("H");
        return H0;
    }
    OperatorMatrix H = H0 + build_field(basis, model, grid);
    H.set_label("H");
    return H;
}

OperatorMatrix assemble_H1(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis, const Vec& xi,
                           int node) {
    if (node < 0 || node >= grid.size()) throw RangeError("assemble_H1: node outside the grid");
    const Vec k = grid.node(node);
    OperatorMatrix H = assemble_H(model, grid, basis, xi - k).shifted(model.omega(k));
    H.set_label("H1");
    return H;
}

}  // namespace nelson
