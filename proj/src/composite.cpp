#include "nelson/composite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

namespace nelson {

CompositeValue sigma_n_value(const ModelSpec& model, const GroundEnergy& ground, const Vec& xi,
                             std::span<const Vec> ks) {
    Vec eta = xi;
    double bosons = 0.0;
    for (const auto& k : ks) {
        eta -= k;
        bosons += model.omega(k);
    }
    CompositeValue v;
    v.value = ground.value(eta.norm(), &v.extrapolated) + bosons;
    return v;
}

namespace {

struct Objective {
    const ModelSpec* model;
    const GroundEnergy* ground;
    Vec xi;
    int n;
    int evaluations = 0;

    std::vector<Vec> unpack(const double* x) const {
        std::vector<Vec> ks(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j)
            ks[static_cast<std::size_t>(j)] = model->nu == 1 ? Vec(x[j], 0.0) : Vec(x[2 * j], x[2 * j + 1]);
        return ks;
    }

    double operator()(const double* x) {
        ++evaluations;
        const auto ks = unpack(x);
        try {
            return sigma_n_value(*model, *ground, xi, ks).value;
        } catch (const RangeError&) {
            return std::numeric_limits<double>::infinity();
        }
    }
};

double gsl_objective(const gsl_vector* x, void* params) {
    auto* obj = static_cast<Objective*>(params);
    const double v = (*obj)(x->data);
    return std::isfinite(v) ? v : GSL_POSINF;
}

}  // namespace

CompositeMin sigma_n_min(const ModelSpec& model, const GroundEnergy& ground, const Vec& xi, int n,
                         const CompositeOptions& opt) {
    if (n != 1 && n != 2) throw std::invalid_argument("sigma_n_min: n must be 1 or 2");
    const int dim = n * model.nu;
    int pts = std::max(3, opt.scan_points);
    // Scan budget of about 2e6 points; descent recovers the resolution.
    while (dim > 2 && std::pow(static_cast<double>(pts), dim) > 2e6) pts = (pts + 1) / 2;
    if (pts % 2 == 0) ++pts;
    const double Kb = opt.scan_half_width;
    const double step = 2.0 * Kb / (pts - 1);
    Objective obj{&model, &ground, xi, n};

    // Coarse tensor scan; keep the best few distinct starts.
    std::size_t total = 1;
    for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(pts);
    std::vector<std::pair<double, std::size_t>> best;
    const std::size_t keep = static_cast<std::size_t>(std::max(1, opt.starts));
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rem = idx;
        for (int d = 0; d < dim; ++d) {
            x[static_cast<std::size_t>(d)] = -Kb + step * static_cast<double>(rem % static_cast<std::size_t>(pts));
            rem /= static_cast<std::size_t>(pts);
        }
        const double v = obj(x.data());
        if (!std::isfinite(v)) continue;
        if (best.size() < keep || v < best.back().first) {
            best.emplace_back(v, idx);
            std::sort(best.begin(), best.end());
            if (best.size() > keep) best.pop_back();
        }
    }
    if (best.empty()) throw RangeError("composite energy undefined on the whole scan box");
    auto decode = [&](std::size_t idx) {
        std::vector<double> y(static_cast<std::size_t>(dim));
        for (int d = 0; d < dim; ++d) {
            y[static_cast<std::size_t>(d)] = -Kb + step * static_cast<double>(idx % static_cast<std::size_t>(pts));
            idx /= static_cast<std::size_t>(pts);
        }
        return y;
    };
    const double scan_value = best.front().first;
    std::vector<double> arg = decode(best.front().second);
    double value = scan_value;
    bool descent_ok = true;

    gsl_set_error_handler_off();
    gsl_multimin_function fn{&gsl_objective, static_cast<std::size_t>(dim), &obj};
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim);
    gsl_vector* x0 = gsl_vector_alloc(static_cast<std::size_t>(dim));
    gsl_vector* ss = gsl_vector_alloc(static_cast<std::size_t>(dim));
    for (const auto& [v0, idx] : best) {
        const auto start = decode(idx);
        for (int d = 0; d < dim; ++d) gsl_vector_set(x0, static_cast<std::size_t>(d), start[static_cast<std::size_t>(d)]);
        gsl_vector_set_all(ss, 0.5 * step);
        gsl_multimin_fminimizer_set(s, &fn, x0, ss);
        int status = GSL_CONTINUE;
        for (int it = 0; it < opt.max_iter && status == GSL_CONTINUE; ++it) {
            if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
            status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), opt.tol);
        }
        const double fv = s->fval;
        if (!std::isfinite(fv) || fv > v0) {
            descent_ok = false;
            continue;
        }
        if (fv < value) {
            value = fv;
            for (int d = 0; d < dim; ++d) arg[static_cast<std::size_t>(d)] = gsl_vector_get(s->x, static_cast<std::size_t>(d));
        }
    }
    gsl_vector_free(x0);
    gsl_vector_free(ss);
    gsl_multimin_fminimizer_free(s);

    CompositeMin out;
    out.minimizer = obj.unpack(arg.data());
    const CompositeValue check = sigma_n_value(model, ground, xi, out.minimizer);
    out.value = check.value;
    out.extrapolated = check.extrapolated;
    out.fallback = !descent_ok && value == scan_value;
    out.evaluations = obj.evaluations;
    return out;
}

}  // namespace nelson
