#include <algorithm>
#include <cmath>
#include <sstream>

#include "nelson/fock.hpp"

namespace nelson {

MomentumGrid::MomentumGrid(int nu, double half_width, int points_per_axis)
    : nu_(nu), K_(half_width), M_(points_per_axis) {
    if (nu != 1 && nu != 2) throw ConfigError("grid: nu must be 1 or 2");
    if (!(half_width > 0.0)) throw ConfigError("grid.half_width must be positive");
    if (points_per_axis < 3) throw ConfigError("grid.points_per_axis must be at least 3");
    h_ = 2.0 * K_ / (M_ - 1);
    w_ = nu_ == 1 ? h_ : h_ * h_;
    // Integer offsets times a common step keep the node set exactly symmetric under k -> -k.
    const double step = K_ / (M_ - 1);
    auto coord = [&](int i) { return static_cast<double>(2 * i - (M_ - 1)) * step; };
    const int rows = nu_ == 1 ? 1 : M_;
    nodes_.reserve(static_cast<std::size_t>(rows * M_));
    for (int iy = 0; iy < rows; ++iy)
        for (int ix = 0; ix < M_; ++ix) nodes_.push_back(make_vec(coord(ix), nu_ == 1 ? 0.0 : coord(iy)));
}

int MomentumGrid::neighbor(int p, int axis, int step) const {
    if (axis >= nu_) return -1;
    const int i = axis_index(p, axis) + step;
    if (i < 0 || i >= M_) return -1;
    return axis == 0 ? p + step : p + step * M_;
}

int MomentumGrid::mirror(int p) const {
    const int ix = M_ - 1 - axis_index(p, 0);
    const int iy = nu_ == 1 ? 0 : M_ - 1 - axis_index(p, 1);
    return index(ix, iy);
}

int MomentumGrid::nearest(const Vec& k) const {
    auto snap = [&](double x) { return std::clamp(static_cast<int>(std::lround((x + K_) / h_)), 0, M_ - 1); };
    return index(snap(k.x()), nu_ == 1 ? 0 : snap(k.y()));
}

int MomentumGrid::boundary_distance(int p) const {
    int d = std::min(axis_index(p, 0), M_ - 1 - axis_index(p, 0));
    if (nu_ == 2) d = std::min({d, axis_index(p, 1), M_ - 1 - axis_index(p, 1)});
    return d;
}

void MomentumGrid::require_resolves(const ModelSpec& model) const {
    if (model.nu != nu_) throw PreconditionError("grid dimension differs from model dimension");
    if (model.coupled() && K_ < model.coupling.uv_cutoff) {
        std::ostringstream os;
        os << "grid half-width " << K_ << " is below the UV cutoff " << model.coupling.uv_cutoff;
        throw PreconditionError(os.str());
    }
}

}  // namespace nelson
