#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "nelson/spectra.hpp"

namespace nelson {

FreeGroundTable::FreeGroundTable(const ModelSpec& model, const MomentumGrid& grid, int n_max) : model_(model) {
    momenta_.push_back(Vec::Zero());
    cost_.push_back(0.0);
    const int G = grid.size();
    std::vector<double> w(static_cast<std::size_t>(G));
    for (int p = 0; p < G; ++p) {
        w[static_cast<std::size_t>(p)] = model.omega(grid.node(p));
        momenta_.push_back(grid.node(p));
        cost_.push_back(w[static_cast<std::size_t>(p)]);
    }
    if (n_max >= 2) {
        // Pair sums live on a lattice of the same spacing; keep the cheapest pair per lattice point.
        const int M = grid.points_per_axis();
        const int L = 2 * M - 1;
        const int cells = grid.nu() == 1 ? L : L * L;
        std::vector<double> best(static_cast<std::size_t>(cells), std::numeric_limits<double>::infinity());
        std::vector<Vec> where(static_cast<std::size_t>(cells), Vec::Zero());
        for (int p = 0; p < G; ++p) {
            for (int q = p; q < G; ++q) {
                const int ix = grid.axis_index(p, 0) + grid.axis_index(q, 0);
                const int iy = grid.nu() == 1 ? 0 : grid.axis_index(p, 1) + grid.axis_index(q, 1);
                const std::size_t c = static_cast<std::size_t>(iy * L + ix);
                const double e = w[static_cast<std::size_t>(p)] + w[static_cast<std::size_t>(q)];
                if (e < best[c]) {
                    best[c] = e;
                    where[c] = grid.node(p) + grid.node(q);
                }
            }
        }
        for (std::size_t c = 0; c < best.size(); ++c) {
            if (std::isfinite(best[c])) {
                momenta_.push_back(where[c]);
                cost_.push_back(best[c]);
            }
        }
    }
}

double FreeGroundTable::operator()(const Vec& eta) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < momenta_.size(); ++i) best = std::min(best, model_.Omega(eta - momenta_[i]) + cost_[i]);
    return best;
}

GroundEnergy GroundEnergy::analytic(RadialProfile profile) {
    GroundEnergy g;
    g.analytic_ = true;
    g.profile_ = std::move(profile);
    g.traced_max_ = std::numeric_limits<double>::infinity();
    g.limit_ = std::numeric_limits<double>::infinity();
    return g;
}

GroundEnergy GroundEnergy::sampled(CubicSpline spline, std::function<double(double)> fallback, double limit) {
    GroundEnergy g;
    g.spline_ = std::move(spline);
    g.traced_max_ = g.spline_.x_max();
    g.limit_ = std::max(limit, g.traced_max_);
    g.fallback_ = std::move(fallback);
    if (g.fallback_) g.shift_ = g.spline_.value(g.traced_max_) - g.fallback_(g.traced_max_);
    return g;
}

double GroundEnergy::value(double r, bool* extrapolated) const {
    if (extrapolated) *extrapolated = false;
    if (analytic_) return profile_.value(r);
    if (r < 0.0) r = -r;
    if (r <= traced_max_) return spline_.value(r);
    if (r > limit_ || !fallback_) {
        std::ostringstream os;
        os << "ground energy requested at |xi| = " << r << " beyond the extrapolation limit " << limit_;
        throw RangeError(os.str());
    }
    if (extrapolated) *extrapolated = true;
    return fallback_(r) + shift_;
}

double GroundEnergy::d1(double r) const {
    if (analytic_) return profile_.d1(r);
    if (r <= traced_max_) return spline_.d1(r);
    const double h = 1e-5;
    return (value(r + h) - value(r - h)) / (2.0 * h);
}

double GroundEnergy::d2(double r) const {
    if (analytic_) return profile_.d2(r);
    if (r <= traced_max_) return spline_.d2(r);
    const double h = 1e-4;
    return (value(r + h) - 2.0 * value(r) + value(r - h)) / (h * h);
}

std::string to_string(AtlasSource source) {
    return source == AtlasSource::Eigensolver ? "eigensolver" : "analytic-synthetic";
}

const ShellBranch& MassShellAtlas::branch(int id) const {
    for (const auto& b : branches)
        if (b.id == id) return b;
    throw std::out_of_range("no branch with id " + std::to_string(id));
}

const ShellBranch* MassShellAtlas::ground_branch() const {
    for (const auto& b : branches)
        if (b.ground) return &b;
    return nullptr;
}

std::vector<const ShellBranch*> MassShellAtlas::branches_at(double r) const {
    std::vector<const ShellBranch*> out;
    for (const auto& b : branches)
        if (b.covers(r)) out.push_back(&b);
    return out;
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (int i = t; i < count; i += threads) fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace nelson
