#include <cmath>
#include <sstream>

#include "nelson/conjugate.hpp"

namespace nelson {

SparseC central_difference(const MomentumGrid& grid, int axis) {
    const int n = grid.size();
    const double inv = 1.0 / (2.0 * grid.spacing());
    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(static_cast<std::size_t>(2 * n));
    for (int p = 0; p < n; ++p) {
        const int fwd = grid.neighbor(p, axis, 1), bwd = grid.neighbor(p, axis, -1);
        if (fwd >= 0) trip.emplace_back(p, fwd, cplx(inv, 0.0));
        if (bwd >= 0) trip.emplace_back(p, bwd, cplx(-inv, 0.0));
    }
    SparseC D(n, n);
    D.setFromTriplets(trip.begin(), trip.end());
    return D;
}

SparseC one_body_conjugate(const MomentumGrid& grid, const std::vector<Vec>& v) {
    const int n = grid.size();
    if (static_cast<int>(v.size()) != n) throw PreconditionError("vector field samples do not match the grid size");
    for (int p = 0; p < n; ++p) {
        if (grid.boundary_distance(p) < 2 && v[static_cast<std::size_t>(p)].norm() > 0.0) {
            std::ostringstream os;
            os << "vector field does not vanish near the box boundary at node " << p << " (k = "
               << grid.node(p).transpose() << "); enlarge the momentum box";
            throw SupportError(os.str());
        }
    }
    std::vector<Eigen::Triplet<cplx>> trip;
    for (int axis = 0; axis < grid.nu(); ++axis) {
        const SparseC D = central_difference(grid, axis);
        for (int p = 0; p < n; ++p) {
            for (SparseC::InnerIterator it(D, p); it; ++it) {
                const int q = static_cast<int>(it.col());
                const double vs = v[static_cast<std::size_t>(p)][axis] + v[static_cast<std::size_t>(q)][axis];
                if (vs == 0.0) continue;
                trip.emplace_back(p, q, cplx(0.0, 0.5) * vs * it.value());
            }
        }
    }
    SparseC a(n, n);
    a.setFromTriplets(trip.begin(), trip.end());
    return a;
}

ConjugateOperators build_conjugate(const FockBasis& basis, const MomentumGrid& grid, const std::vector<Vec>& v) {
    ConjugateOperators out;
    out.a = one_body_conjugate(grid, v);
    out.A = second_quantize(basis, out.a, "A");
    return out;
}

ConjugateOperators build_conjugate(const FockBasis& basis, const MomentumGrid& grid, const VectorFieldBundle& bundle) {
    if (static_cast<int>(bundle.sampled.size()) != grid.size())
        throw PreconditionError("vector field has not been sampled on this grid");
    return build_conjugate(basis, grid, bundle.sampled);
}

}  // namespace nelson
