#pragma once

#include <string>
#include <vector>

#include "nelson/conjugate.hpp"
#include "nelson/eigensolver.hpp"

namespace nelson {

struct CommutatorBundle {
    OperatorMatrix kinetic;    // dGamma(v . grad omega)
    OperatorMatrix recoil;     // dGamma(v) . grad Omega(xi - dGamma(k))
    OperatorMatrix field;      // phi(v . grad g + (div v) g / 2), equal to -phi(i a g)
    OperatorMatrix formula;    // kinetic - recoil + field
    OperatorMatrix direct;     // i(HA - AH)
    double discrepancy = 0.0;  // largest ||(F - D) psi|| over smooth test states below the top sector
};

// Field samples on the grid nodes, with their divergence.
struct SampledField {
    std::vector<Vec> v;
    std::vector<double> div;
};

SampledField sample_field(const VectorFieldBundle& bundle, const MomentumGrid& grid);

// Both the closed-form and the matrix commutator of H(xi) with dGamma(a).
CommutatorBundle commutator_matrix(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis,
                                   const Vec& xi, const SampledField& field, const ConjugateOperators& conj);
CommutatorBundle commutator_matrix(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis,
                                   const Vec& xi, const VectorFieldBundle& bundle);
// Closed-form commutator only.
OperatorMatrix commutator_formula(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis,
                                  const Vec& xi, const SampledField& field);

// Symmetric powers f^(n), n = 0..n_top, of a normalized Gaussian with the given width.
std::vector<Eigen::VectorXcd> gaussian_test_states(const MomentumGrid& grid, const FockBasis& basis,
                                                   const std::vector<Vec>& centers, double width, int n_top);
double discrepancy_norm(const OperatorMatrix& F, const OperatorMatrix& D, const std::vector<Eigen::VectorXcd>& states);

// i(HA - AH), made exactly Hermitian.
OperatorMatrix direct_commutator(const OperatorMatrix& H, const OperatorMatrix& A);

// Fiber of the commutator with H1(xi; k) at the grid node k. The inner commutator at xi - k is the matrix
// commutator with A when given, the closed form otherwise.
OperatorMatrix extended_commutator(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis,
                                   const Vec& xi, int node, const VectorFieldBundle& bundle);
OperatorMatrix extended_commutator(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis,
                                   const Vec& xi, int node, const SampledField& field,
                                   const OperatorMatrix* A = nullptr);

struct VirialSample {
    int node = 0;
    Vec k = Vec::Zero();
    double lhs = 0.0;  // <psi, i[H1, A1] psi>
    double rhs = 0.0;  // v(k) . grad_k S1(xi; k)
    double error = 0.0;
    double formula_error = 0.0;  // same with the closed-form inner commutator
};

struct VirialOptions {
    int samples = 20;
    int branch = 0;           // eigenvalue index of the fiber branch
    double fd_step = 1e-3;    // step of the central difference for grad S
    double support_fraction = 0.1;
    // Uncoupled fibers are diagonal: use the minimizing basis state and its exact gradient.
    bool exact_diagonal = true;
    SolverOptions solver;
};

struct VirialResult {
    double max_error = 0.0;
    double max_formula_error = 0.0;
    std::vector<VirialSample> samples;
    std::vector<std::string> log;
};

// Relative error |lhs - rhs| / (|v(k)| |grad_k S1|) over nodes with |v| >= support_fraction sup |v|.
VirialResult virial_check(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis, const Vec& xi,
                          const VectorFieldBundle& bundle, const VirialOptions& options = {});
VirialResult virial_check(const ModelSpec& model, const MomentumGrid& grid, const FockBasis& basis, const Vec& xi,
                          const SampledField& field, const VirialOptions& options = {});

enum class Verdict { Positive, DegradedNearThreshold, Fails };
std::string to_string(Verdict v);

struct MourreOptions {
    std::vector<double> kappa_ladder{0.2, 0.1, 0.05};
    double stabilization = 0.8;   // c(kappa_min) >= stabilization * c(kappa_mid)
    double positive_floor = 0.0;
    double near_threshold = 0.0;  // 0 uses the largest kappa
    double channel_weight = 0.5;  // in-window states below this weight on supp v count as compact
    int level_set_angles = 720;
    int level_set_radii = 4000;
    CalibrationOptions calibration;
};

struct KappaEntry {
    double kappa = 0.0;
    int window_dim = 0;
    int n_compact = 0;
    double c_value = 0.0;   // min eigenvalue of P F P on the non-compact part (NaN if empty)
    double c_all = 0.0;     // same including compact states
    Eigen::VectorXd spectrum;
};

struct MourreReport {
    Vec xi = Vec::Zero();
    double lambda = 0.0;
    std::vector<KappaEntry> ladder;
    double c_fiber = 0.0;
    double threshold_distance = 0.0;
    Verdict verdict = Verdict::Fails;
    std::string note;
};

// Fiberwise lower bound: min of v . grad S1 on the exact level set outside the tori, and min c_ij.
double fiber_constant(const VectorFieldBundle& bundle, int angles = 720, int radii = 4000);

std::vector<MourreReport> mourre_scan(const ModelSpec& model, const MassShellAtlas& atlas, const MomentumGrid& grid,
                                      const FockBasis& basis, const Vec& xi, const std::vector<double>& lambdas,
                                      const MourreOptions& options = {});

// Deterministic verdict from a filled ladder.
Verdict decide(const MourreReport& report, const MourreOptions& options, std::string* note = nullptr);

}  // namespace nelson
