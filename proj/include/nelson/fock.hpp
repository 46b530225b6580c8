#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "nelson/model.hpp"
#include "nelson/types.hpp"

namespace nelson {

class MomentumGrid {
public:
    // Regular tensor grid on [-K, K]^nu with M points per axis (M odd keeps k = 0 a node).
    MomentumGrid(int nu, double half_width, int points_per_axis);

    int nu() const { return nu_; }
    double half_width() const { return K_; }
    int points_per_axis() const { return M_; }
    double spacing() const { return h_; }
    double weight() const { return w_; }
    int size() const { return static_cast<int>(nodes_.size()); }
    const Vec& node(int p) const { return nodes_[static_cast<std::size_t>(p)]; }
    const std::vector<Vec>& nodes() const { return nodes_; }

    int index(int ix, int iy = 0) const { return iy * M_ + ix; }
    int axis_index(int p, int axis) const { return axis == 0 ? p % M_ : p / M_; }
    // Neighbour along an axis, or -1 outside the box.
    int neighbor(int p, int axis, int step) const;
    int mirror(int p) const;
    int nearest(const Vec& k) const;
    // Distance in stencil steps from the box boundary (0 on the boundary).
    int boundary_distance(int p) const;

    // Throws PreconditionError when the box does not contain the coupling support.
    void require_resolves(const ModelSpec& model) const;

private:
    int nu_;
    double K_;
    int M_;
    double h_;
    double w_;
    std::vector<Vec> nodes_;
};

// Canonically sorted multisets of grid-node indices, sector by sector.
class FockBasis {
public:
    static constexpr std::size_t kDefaultCap = 5'000'000;

    FockBasis(const MomentumGrid& grid, int n_max, std::size_t dimension_cap = kDefaultCap);

    int n_max() const { return n_max_; }
    int modes() const { return G_; }
    std::size_t dimension() const { return offsets_.back(); }
    std::size_t sector_offset(int n) const { return offsets_[static_cast<std::size_t>(n)]; }
    std::size_t sector_dimension(int n) const { return offsets_[n + 1] - offsets_[n]; }
    std::vector<std::size_t> sector_dimensions() const;

    int sector_of(std::size_t index) const;
    std::span<const int> state(std::size_t index) const;
    // Index of a sorted multiset; throws RangeError if outside the basis.
    std::size_t index_of(std::span<const int> sorted_modes) const;

private:
    std::uint64_t rank(std::span<const int> sorted_modes) const;
    int n_max_;
    int G_;
    std::vector<std::size_t> offsets_;
    std::vector<std::vector<int>> flat_;  // per sector, dim_n * n entries
};

// Number of multisets of size n drawn from G labels; throws SizingError on overflow.
std::uint64_t multiset_count(std::uint64_t G, std::uint64_t n);

// Sparsity class relative to the boson-number grading.
enum class BlockTag { Diagonal, SectorPreserving, AdjacentSector, BlockTridiagonal, General };
std::string to_string(BlockTag tag);

using SparseC = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using SparseR = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Entry {
    std::size_t row;
    std::size_t col;
    cplx value;
};

// Hermitian sparse operator; both triangles are stored and mirror each other bit for bit.
class OperatorMatrix {
public:
    OperatorMatrix() = default;
    // Entries must satisfy row <= col; diagonal imaginary parts are dropped; duplicates are summed.
    static OperatorMatrix from_upper(std::size_t dim, std::vector<Entry> upper, BlockTag tag, std::string label);
    static OperatorMatrix diagonal(const std::vector<double>& values, std::string label);
    static OperatorMatrix zero(std::size_t dim, std::string label);
    // Averages with the adjoint, which restores exact conjugate symmetry.
    static OperatorMatrix hermitian_part(const SparseC& m, BlockTag tag, std::string label);

    std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
    const SparseC& matrix() const { return m_; }
    BlockTag tag() const { return tag_; }
    const std::string& label() const { return label_; }
    void set_label(std::string label) { label_ = std::move(label); }

    bool is_real() const;
    SparseR real_matrix() const;
    bool exactly_hermitian() const;
    // Checks the declared tag against the actual sparsity on a basis.
    bool tag_matches(const FockBasis& basis) const;
    std::vector<double> diagonal_values() const;

    OperatorMatrix operator+(const OperatorMatrix& other) const;
    OperatorMatrix operator-(const OperatorMatrix& other) const;
    OperatorMatrix scaled(double factor) const;
    OperatorMatrix shifted(double value) const;
    // Restriction to sectors 0..n_top (other rows and columns zeroed).
    OperatorMatrix restricted(const FockBasis& basis, int n_top) const;

    Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const { return m_ * x; }

private:
    SparseC m_;
    BlockTag tag_ = BlockTag::General;
    std::string label_;
};

BlockTag combine(BlockTag a, BlockTag b);

// Diagonal second quantization of a one-body multiplication operator.
OperatorMatrix build_dGamma(const FockBasis& basis, const std::vector<double>& f, std::string label = "dGamma");
std::vector<OperatorMatrix> build_dGamma_vector(const FockBasis& basis, const std::vector<Vec>& f, int nu,
                                                std::string label = "dGamma");

// Non-Hermitian creation operator a*(f) for f given on the grid as l2 mode amplitudes.
SparseC creation_matrix(const FockBasis& basis, const std::vector<cplx>& f);
SparseC annihilation_matrix(const FockBasis& basis, const std::vector<cplx>& f);

// Field operator a*(f) + a(f) with f given as mode amplitudes.
OperatorMatrix build_field_modes(const FockBasis& basis, const std::vector<cplx>& modes, std::string label = "field");
// Field operator with g_p = g(k_p) sqrt(w).
OperatorMatrix build_field(const FockBasis& basis, const ModelSpec& model, const MomentumGrid& grid);
std::vector<cplx> coupling_modes(const ModelSpec& model, const MomentumGrid& grid);

// Second quantization dGamma(a) of a Hermitian one-body matrix on the grid.
OperatorMatrix second_quantize(const FockBasis& basis, const SparseC& one_body, std::string label = "dGamma(a)");

// Free part dGamma(omega) + Omega(xi - dGamma(k)) as a diagonal.
std::vector<double> free_diagonal(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis,
                                  const Vec& xi);
// Total boson momentum of every basis state.
std::vector<Vec> total_momenta(const MomentumGrid& grid, const FockBasis& basis);

OperatorMatrix assemble_H0(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis, const Vec& xi);
OperatorMatrix assemble_H(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis, const Vec& xi);
OperatorMatrix assemble_H1(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis, const Vec& xi,
                           int node);

// Little-endian layout: u64 dimension, u64 entry count, then (u64 row, u64 col, f64 re, f64 im) per stored entry.
void write_binary(const OperatorMatrix& op, const std::string& path);
OperatorMatrix read_binary(const std::string& path, std::string label = "loaded");

}  // namespace nelson
