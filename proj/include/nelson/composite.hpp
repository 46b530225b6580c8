#pragma once

#include <span>
#include <vector>

#include "nelson/model.hpp"
#include "nelson/spectra.hpp"

namespace nelson {

struct CompositeOptions {
    int scan_points = 65;        // per axis and per boson; forced odd so that k = 0 is a node
    double scan_half_width = 2.0;
    int starts = 8;
    double tol = 1e-12;
    int max_iter = 4000;
};

struct CompositeValue {
    double value = 0.0;
    bool extrapolated = false;
};

// Ground energy of the residual system plus the free boson energies.
CompositeValue sigma_n_value(const ModelSpec& model, const GroundEnergy& ground, const Vec& xi,
                             std::span<const Vec> ks);

struct CompositeMin {
    double value = 0.0;
    std::vector<Vec> minimizer;
    bool extrapolated = false;
    bool fallback = false;  // local descent failed; grid-scan value returned
    int evaluations = 0;
};

// Global minimum over n boson momenta (n in {1, 2}).
CompositeMin sigma_n_min(const ModelSpec& model, const GroundEnergy& ground, const Vec& xi, int n,
                         const CompositeOptions& options = {});

}  // namespace nelson
