#pragma once

#include <cstdint>
#include <string>

#include "nelson/fock.hpp"

namespace nelson {

struct SolverOptions {
    double tol = 1e-10;
    std::size_t dense_threshold = 600;
    int max_basis = 0;  // 0 picks a size from the requested count
    int max_restarts = 2000;
    std::uint64_t seed = 20240611;
};

struct EigenResult {
    Eigen::VectorXd values;    // ascending
    Eigen::MatrixXcd vectors;  // columns
    Eigen::VectorXd residuals; // ||H v - lambda v||
    std::string method;
    int iterations = 0;
    int matvecs = 0;
};

// Smallest eigenpairs; every returned pair satisfies ||Hv - lv|| <= tol (1 + |l|).
EigenResult lowest_eigs(const OperatorMatrix& H, int count, const SolverOptions& options = {});

// Full dense decomposition.
EigenResult dense_eigs(const OperatorMatrix& H);
EigenResult dense_eigs(const Eigen::MatrixXcd& H);

// Dense eigenpairs with eigenvalues in (lo, hi].
EigenResult window_eigs(const OperatorMatrix& H, double lo, double hi);

}  // namespace nelson
