#pragma once

#include <string>
#include <vector>

#include "nelson/composite.hpp"
#include "nelson/spectra.hpp"

namespace nelson {

struct ThresholdOptions {
    double dedup_tol = 1e-8;
    double newton_tol = 1e-10;
    int collinear_scan = 4000;  // scan points per collinear interval
    int net_seeds = 48;         // two-dimensional safety-net seeds (nu = 2)
    int newton_iters = 60;
    std::uint64_t seed = 7;
    CompositeOptions composite;
};

struct ShellThreshold {
    double energy = 0.0;
    Vec witness = Vec::Zero();
    int shell_id = 0;
    double residual = 0.0;  // |grad S(xi - k) - grad omega(k)|
};

struct ParallelThreshold {
    double energy = 0.0;
    double r = 0.0;  // witness k = r u along the ray through xi
    int crossing = 0;
    double residual = 0.0;  // | |xi - r u| - R_c |
};

struct HashThreshold {
    double energy = 0.0;
    Vec witness = Vec::Zero();
    double rho = 0.0;
    int crossing = 0;
    double residual = 0.0;  // max(|grad omega(k)|, | |xi - k| - R_c |)
};

struct ThresholdReport {
    Vec xi = Vec::Zero();
    double sigma1 = 0.0;
    double sigma2 = 0.0;
    CompositeMin min1, min2;
    std::vector<ShellThreshold> t_shell;
    std::vector<ParallelThreshold> t_parallel;
    std::vector<HashThreshold> t_hash;
    std::vector<double> exc;
    std::vector<std::string> log;

    bool in_window(double E) const { return E >= sigma1 && E < sigma2; }
    // Union of all families, sorted and deduplicated.
    std::vector<double> energies(double dedup_tol = 1e-8) const;
    // Thresholds together with the exceptional energies.
    std::vector<double> obstructions(double dedup_tol = 1e-8) const;
};

double essential_bottom(const ModelSpec& model, const MassShellAtlas& atlas, const Vec& xi,
                        const ThresholdOptions& options = {});

// Bottom of the dense eigenvalue cluster in an ascending list: first value followed by
// `run` consecutive gaps below `spacing`.
double cluster_bottom(const Eigen::VectorXd& ascending, double spacing, int run = 3);

// Radii where the radial derivative of omega vanishes, up to r_max.
std::vector<double> omega_critical_radii(const OneBodyDispersion& omega, double r_max);

std::vector<ShellThreshold> threshold_shell(const ModelSpec& model, const MassShellAtlas& atlas, const Vec& xi,
                                            const ThresholdOptions& options = {},
                                            std::vector<std::string>* log = nullptr);
std::vector<ParallelThreshold> threshold_parallel(const ModelSpec& model, const MassShellAtlas& atlas, const Vec& xi);
std::vector<HashThreshold> threshold_hash(const ModelSpec& model, const MassShellAtlas& atlas, const Vec& xi,
                                          const ThresholdOptions& options = {});
// Extra isolated eigenvalues from a direct scan at xi may be supplied.
std::vector<double> exc_set(const ModelSpec& model, const MassShellAtlas& atlas, const Vec& xi,
                            const std::vector<double>& extra_isolated = {}, double dedup_tol = 1e-8);

ThresholdReport full_report(const ModelSpec& model, const MassShellAtlas& atlas, const Vec& xi,
                            const ThresholdOptions& options = {});

struct DiscretenessResult {
    bool passed = true;
    std::size_t worst_count = 0;
    double min_separation = 0.0;
    std::string detail;
};

// Every report lists finitely many, separated energies in [sigma1, sigma2 - eps].
DiscretenessResult discreteness_check(const std::vector<ThresholdReport>& reports, double eps,
                                      std::size_t max_count = 1000, double dedup_tol = 1e-8);

}  // namespace nelson
