#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "nelson/fock.hpp"

namespace nelson {

std::string to_string(BlockTag tag) {
    switch (tag) {
        case BlockTag::Diagonal: return "diagonal";
        case BlockTag::SectorPreserving: return "sector-preserving";
        case BlockTag::AdjacentSector: return "adjacent-sector";
        case BlockTag::BlockTridiagonal: return "block-tridiagonal";
        case BlockTag::General: return "general";
    }
    return "general";
}

BlockTag combine(BlockTag a, BlockTag b) {
    if (a == b) return a;
    if (a == BlockTag::General || b == BlockTag::General) return BlockTag::General;
    auto preserving = [](BlockTag t) { return t == BlockTag::Diagonal || t == BlockTag::SectorPreserving; };
    if (preserving(a) && preserving(b)) return BlockTag::SectorPreserving;
    return BlockTag::BlockTridiagonal;
}

OperatorMatrix OperatorMatrix::from_upper(std::size_t dim, std::vector<Entry> upper, BlockTag tag, std::string label) {
    std::sort(upper.begin(), upper.end(),
              [](const Entry& a, const Entry& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(2 * upper.size());
    for (std::size_t i = 0; i < upper.size();) {
        const Entry& e = upper[i];
        if (e.row > e.col) throw std::invalid_argument("from_upper: entry below the diagonal");
        cplx sum = 0.0;
        std::size_t j = i;
        for (; j < upper.size() && upper[j].row == e.row && upper[j].col == e.col; ++j) sum += upper[j].value;
        const auto r = static_cast<Eigen::Index>(e.row), c = static_cast<Eigen::Index>(e.col);
        if (r == c) {
            if (sum.real() != 0.0) trip.emplace_back(r, c, cplx(sum.real(), 0.0));
        } else if (sum != cplx(0.0)) {
            trip.emplace_back(r, c, sum);
            trip.emplace_back(c, r, std::conj(sum));
        }
        i = j;
    }
    OperatorMatrix op;
    op.m_.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    op.m_.setFromTriplets(trip.begin(), trip.end());
    op.m_.makeCompressed();
    op.tag_ = tag;
    op.label_ = std::move(label);
    return op;
}

OperatorMatrix OperatorMatrix::diagonal(const std::vector<double>& values, std::string label) {
    std::vector<Entry> e;
    e.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) e.push_back({i, i, values[i]});
    return from_upper(values.size(), std::move(e), BlockTag::Diagonal, std::move(label));
}

OperatorMatrix OperatorMatrix::zero(std::size_t dim, std::string label) {
    return from_upper(dim, {}, BlockTag::Diagonal, std::move(label));
}

OperatorMatrix OperatorMatrix::hermitian_part(const SparseC& m, BlockTag tag, std::string label) {
    SparseC adj = m.adjoint();
    OperatorMatrix op;
    op.m_ = (m + adj) * cplx(0.5, 0.0);
    op.m_.prune(cplx(0.0));
    op.m_.makeCompressed();
    op.tag_ = tag;
    op.label_ = std::move(label);
    return op;
}

bool OperatorMatrix::is_real() const {
    for (Eigen::Index k = 0; k < m_.nonZeros(); ++k)
        if (m_.valuePtr()[k].imag() != 0.0) return false;
    return true;
}

SparseR OperatorMatrix::real_matrix() const {
    SparseR r = m_.real();
    r.makeCompressed();
    return r;
}

bool OperatorMatrix::exactly_hermitian() const {
    SparseC adj = m_.adjoint();
    SparseC diff = m_ - adj;
    for (Eigen::Index k = 0; k < diff.nonZeros(); ++k)
        if (diff.valuePtr()[k] != cplx(0.0)) return false;
    return true;
}

bool OperatorMatrix::tag_matches(const FockBasis& basis) const {
    for (Eigen::Index r = 0; r < m_.outerSize(); ++r) {
        const int nr = basis.sector_of(static_cast<std::size_t>(r));
        for (SparseC::InnerIterator it(m_, r); it; ++it) {
            if (it.value() == cplx(0.0)) continue;
            const int nc = basis.sector_of(static_cast<std::size_t>(it.col()));
            const int gap = std::abs(nr - nc);
            switch (tag_) {
                case BlockTag::Diagonal:
                    if (it.col() != r) return false;
                    break;
                case BlockTag::SectorPreserving:
                    if (gap != 0) return false;
                    break;
                case BlockTag::AdjacentSector:
                    if (gap != 1) return false;
                    break;
                case BlockTag::BlockTridiagonal:
                    if (gap > 1) return false;
                    break;
                case BlockTag::General: break;
            }
        }
    }
    return true;
}

std::vector<double> OperatorMatrix::diagonal_values() const {
    std::vector<double> d(dim(), 0.0);
    for (Eigen::Index r = 0; r < m_.outerSize(); ++r)
        for (SparseC::InnerIterator it(m_, r); it; ++it)
            if (it.col() == r) d[static_cast<std::size_t>(r)] = it.value().real();
    return d;
}

OperatorMatrix OperatorMatrix::operator+(const OperatorMatrix& other) const {
    OperatorMatrix op;
    op.m_ = m_ + other.m_;
    op.m_.makeCompressed();
    op.tag_ = combine(tag_, other.tag_);
    op.label_ = label_ + "+" + other.label_;
    return op;
}

OperatorMatrix OperatorMatrix::operator-(const OperatorMatrix& other) const {
    OperatorMatrix op;
    op.m_ = m_ - other.m_;
    op.m_.makeCompressed();
    op.tag_ = combine(tag_, other.tag_);
    op.label_ = label_ + "-" + other.label_;
    return op;
}

OperatorMatrix OperatorMatrix::scaled(double factor) const {
    OperatorMatrix op = *this;
    op.m_ *= cplx(factor, 0.0);
    return op;
}

OperatorMatrix OperatorMatrix::shifted(double value) const {
    SparseC id(m_.rows(), m_.cols());
    id.setIdentity();
    OperatorMatrix op;
    op.m_ = m_ + id * cplx(value, 0.0);
    op.m_.makeCompressed();
    op.tag_ = combine(tag_, BlockTag::Diagonal);
    op.label_ = label_;
    return op;
}

OperatorMatrix OperatorMatrix::restricted(const FockBasis& basis, int n_top) const {
    const auto limit = static_cast<Eigen::Index>(basis.sector_offset(n_top) + basis.sector_dimension(n_top));
    OperatorMatrix op = *this;
    op.m_.prune([limit](Eigen::Index r, Eigen::Index c, const cplx&) { return r < limit && c < limit; });
    op.m_.makeCompressed();
    return op;
}

namespace {

template <class T>
void put_le(std::ostream& os, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
    unsigned char bytes[sizeof(T)];
    is.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!is) throw RangeError("binary operator dump truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace

void write_binary(const OperatorMatrix& op, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw RangeError("cannot open " + path + " for writing");
    const SparseC& m = op.matrix();
    put_le<std::uint64_t>(os, op.dim());
    put_le<std::uint64_t>(os, static_cast<std::uint64_t>(m.nonZeros()));
    for (Eigen::Index r = 0; r < m.outerSize(); ++r)
        for (SparseC::InnerIterator it(m, r); it; ++it) {
            put_le<std::uint64_t>(os, static_cast<std::uint64_t>(r));
            put_le<std::uint64_t>(os, static_cast<std::uint64_t>(it.col()));
            put_le<double>(os, it.value().real());
            put_le<double>(os, it.value().imag());
        }
}

OperatorMatrix read_binary(const std::string& path, std::string label) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw RangeError("cannot open " + path);
    const auto dim = get_le<std::uint64_t>(is);
    const auto count = get_le<std::uint64_t>(is);
    std::vector<Entry> upper;
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto r = get_le<std::uint64_t>(is);
        const auto c = get_le<std::uint64_t>(is);
        const double re = get_le<double>(is);
        const double im = get_le<double>(is);
        if (r <= c) upper.push_back({r, c, cplx(re, im)});
    }
    return OperatorMatrix::from_upper(dim, std::move(upper), BlockTag::General, std::move(label));
}

}  // namespace nelson
