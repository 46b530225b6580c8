#include <cmath>

#include "nelson/conjugate.hpp"

namespace nelson {

FlowResult flow(const Field& v, const Divergence& div, const Vec& k0, double t, double dt) {
    if (!(dt > 0.0)) throw DomainError("flow step must be positive");
    const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(t) / dt)));
    const double h = t / steps;
    Vec k = k0;
    double logJ = 0.0;
    for (int i = 0; i < steps; ++i) {
        const Vec a1 = v(k);
        const double b1 = div(k);
        const Vec k2 = k + 0.5 * h * a1;
        const Vec a2 = v(k2);
        const double b2 = div(k2);
        const Vec k3 = k + 0.5 * h * a2;
        const Vec a3 = v(k3);
        const double b3 = div(k3);
        const Vec k4 = k + h * a3;
        const Vec a4 = v(k4);
        const double b4 = div(k4);
        k += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        logJ += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    }
    return {k, std::exp(logJ)};
}

FlowResult flow_map(const VectorFieldBundle& bundle, const Vec& k0, double t, double dt) {
    const int nu = bundle.model().nu;
    auto v = [&](const Vec& k) {
        Vec out = bundle.v(k);
        if (nu == 1) out.y() = 0.0;
        return out;
    };
    auto div = [&](const Vec& k) { return bundle.divergence(k); };
    return flow(v, div, k0, t, dt);
}

}  // namespace nelson
