#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nelson/eigensolver.hpp"
#include "nelson/fock.hpp"
#include "nelson/model.hpp"
#include "nelson/numerics.hpp"

namespace nelson {

// Lowest non-interacting energy at total momentum eta over sectors with at most two bosons.
class FreeGroundTable {
public:
    FreeGroundTable(const ModelSpec& model, const MomentumGrid& grid, int n_max);
    double operator()(const Vec& eta) const;

private:
    ModelSpec model_;
    std::vector<Vec> momenta_;  // total boson momentum
    std::vector<double> cost_;  // least boson energy carrying that momentum
};

// Ground energy as a function of |xi| on all of [0, limit].
class GroundEnergy {
public:
    GroundEnergy() = default;
    static GroundEnergy analytic(RadialProfile profile);
    // Spline inside the traced range; beyond it the fallback, shifted to match at the traced edge.
    static GroundEnergy sampled(CubicSpline spline, std::function<double(double)> fallback, double limit);

    double value(double r, bool* extrapolated = nullptr) const;
    double d1(double r) const;
    double d2(double r) const;
    double traced_max() const { return traced_max_; }
    double limit() const { return limit_; }
    bool is_analytic() const { return analytic_; }

private:
    bool analytic_ = false;
    RadialProfile profile_;
    CubicSpline spline_;
    std::function<double(double)> fallback_;
    double shift_ = 0.0;
    double traced_max_ = 0.0;
    double limit_ = 0.0;
};

enum class AtlasSource { Eigensolver, AnalyticSynthetic };
std::string to_string(AtlasSource source);

struct ShellBranch {
    int id = 0;
    double r_min = 0.0;
    double r_max = 0.0;
    int multiplicity = 1;
    bool ground = false;
    std::vector<double> radii;
    std::vector<double> energies;
    RadialProfile fn;  // value, slope and curvature in |xi|

    bool covers(double r, double slack = 0.0) const { return r >= r_min - slack && r <= r_max + slack; }
};

struct Crossing {
    double radius = 0.0;
    double energy = 0.0;
    int multiplicity = 2;
    int branch_a = -1;
    int branch_b = -1;
    bool candidate = false;  // unresolved tie in overlap continuation
};

struct Tangency {
    double radius = 0.0;
    double energy = 0.0;
    int branch_a = -1;
    int branch_b = -1;
};

struct MassShellAtlas {
    AtlasSource source = AtlasSource::Eigensolver;
    std::vector<double> xi_grid;
    std::vector<ShellBranch> branches;
    std::vector<Crossing> crossings;  // confirmed crossings only
    std::vector<Crossing> candidates; // ambiguous continuation events
    std::vector<Tangency> tangencies;
    std::vector<double> ess_bottom;   // per xi_grid sample, eigensolver source only
    GroundEnergy ground;
    std::vector<double> ground_samples;  // lowest eigenvalue per xi_grid sample, eigensolver source only
    double L_shell = 0.0;
    double gap_tol = 0.0;
    double cross_tol = 0.0;

    const ShellBranch& branch(int id) const;
    const ShellBranch* ground_branch() const;
    // Branches whose domain contains r.
    std::vector<const ShellBranch*> branches_at(double r) const;
};

// Eigen-data at one radius, fed to the continuation.
struct SpectralSample {
    double radius = 0.0;
    Eigen::VectorXd values;
    Eigen::MatrixXcd vectors;
    double ess_bottom = 0.0;
};

struct ContinuationOptions {
    double gap_tol = 0.0;
    double cross_tol = 1e-9;
    double overlap_tol = 0.1;
    double min_overlap = 0.5;  // below this a branch is considered lost
};

// Continues isolated eigenvalue groups across the samples by subspace overlap.
MassShellAtlas continue_branches(const std::vector<SpectralSample>& samples, const ContinuationOptions& options);

// Closed-form shell definition for the synthetic source.
struct ShellDefinition {
    std::string name;
    RadialProfile fn;
    double r_min = 0.0;
    double r_max = 0.0;
    int multiplicity = 1;
    bool ground = false;
};

struct AnalyticSourceOptions {
    int scan_points = 4000;
    double tangency_tol = 1e-10;
};

MassShellAtlas analytic_shell_source(const std::vector<ShellDefinition>& defs, const std::vector<double>& xi_grid,
                                     const AnalyticSourceOptions& options = {});

struct CompositeOptions;

struct TraceOptions {
    SolverOptions solver;
    int threads = 1;
    double gap_tol = 0.0;    // <= 0 selects twice the one-boson spacing
    double cross_tol = 0.0;  // <= 0 selects ten times the solver tolerance
    double overlap_tol = 0.1;
    int extra_eigs = 2;
    double extrapolation_factor = 4.0;  // ground energy defined up to this multiple of the traced range
    int composite_scan_points = 0;      // 0 ties the scan to the Fock grid
};

double ground_energy(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis, const Vec& xi,
                     const SolverOptions& solver = {});

// Second-smallest minus smallest distinct one-boson free energy at xi = 0.
double one_boson_spacing(const ModelSpec& model, const MomentumGrid& grid);

MassShellAtlas trace_shells(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis,
                            const std::vector<double>& xi_grid, int n_branches, const TraceOptions& options = {});

// Spline profile through sampled energies, with zero slope at r = 0 when sampled there.
RadialProfile spline_profile(const std::vector<double>& r, const std::vector<double>& e);
// Ground energy from traced samples, continued by the free table up to limit.
GroundEnergy traced_ground(const ModelSpec& model, const MomentumGrid& grid, int n_max,
                           const std::vector<double>& xi_grid, const std::vector<double>& e0, double limit);

// Evaluates fn on every index in [0, count) over the given number of threads; order of results is fixed.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace nelson
