#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nelson/fock.hpp"
#include "nelson/spectra.hpp"
#include "nelson/thresholds.hpp"

namespace nelson {

// Coordinates k(s, theta, w) = xi - s cos(theta) u + s sin(theta) w u_perp around xi.
class PolarFrame {
public:
    explicit PolarFrame(const Vec& xi);

    const Vec& xi() const { return xi_; }
    const Vec& u() const { return u_; }
    const Vec& u_perp() const { return perp_; }

    Vec k(double s, double theta, int w) const;
    // Angular derivative of k.
    Vec v(double r, double theta, int w) const;
    Vec dk_dr(double theta, int w) const;

    struct Coords {
        double s = 0.0;
        double theta = 0.0;  // in [0, pi]
        int w = 1;
    };
    Coords coords(const Vec& k) const;

private:
    Vec xi_, u_, perp_;
};

struct CrossingMomentum {
    int crossing = 0;
    double R = 0.0;
    double E_c = 0.0;
    double theta = 0.0;
    Vec witness_plus = Vec::Zero();
    Vec witness_minus = Vec::Zero();
    double residual = 0.0;  // |omega(k) - (E - E_c)|
};

// Momenta in the angular interior (0, pi) landing on a crossing at energy E.
std::vector<CrossingMomentum> crossing_momenta(const ModelSpec& model, const MassShellAtlas& atlas, const Vec& xi,
                                               double E, int scan_points = 2000, double collinear_tol = 1e-9);

struct TorusSpec {
    int i = 0;  // radius index
    int j = 0;  // angle index within the radius
    int crossing = 0;
    double R = 0.0;
    double theta = 0.0;
    int sigma = 1;
    double eps_theta = 0.0;
    double eps_r = 0.0;
    double c_ij = 0.0;

    double rho_theta(double theta) const;  // 1 on the angular window, 0 beyond twice its width
    double rho_r(double r) const;          // 1 on [R - eps_r, R + eps_r], 0 beyond 2 eps_r
    bool contains(double r, double theta, double eps_r_override = -1.0) const;
};

struct EmissionSets {
    double delta_prime = 0.0;
    std::vector<int> shells;                    // indices of reachable shell pieces
    std::vector<std::pair<Vec, int>> K_J;       // sampled emission momenta with the piece reached
    std::vector<Vec> K_J_X;                     // sampled crossing-landing momenta
    double radial_spacing = 0.0;
    bool clipped = false;                       // emission momenta found outside the box
};

struct CalibrationRecord {
    double delta_prime0 = 0.0;
    double delta_prime = 0.0;
    double eps_r4 = 0.0, eps_r3 = 0.0, eps_r2 = 0.0, eps_r1 = 0.0, eps_r = 0.0;
    double eps_theta2 = 0.0, eps_theta1 = 0.0, eps_theta = 0.0;
    double d = 0.0;
    double C = 0.0;
    double L = 0.0;
    double c_double_prime = 0.0;
    double c_prime = 0.0;
    std::vector<double> r_i;
    std::vector<double> r_prime;
    double r_exc = 0.0;
    double grad_min = 0.0;
    double band_margin = 0.0;
    int delta_halvings = 0;
    int torus_halvings = 0;
    std::vector<std::string> log;
};

struct CalibrationOptions {
    double dedup_tol = 1e-8;
    double grad_floor = 1e-6;
    int radial_samples = 4000;
    int angular_samples = 720;
    int torus_samples = 16;
    int theta_samples = 64;
    int lipschitz_radii = 5;
    double box_half_width = 0.0;  // 0 disables the box
    double resolution = 0.0;      // 0 uses the radial sample spacing
    int max_halvings = 60;
    ThresholdOptions thresholds;
};

// Shell channel glued into the field: annulus domain plus the branch profile.
struct ShellPiece {
    int shell_id = 0;
    double r_min = 0.0;
    double r_max = 0.0;
    bool inner_edge = false;  // r_min is a true boundary of the annulus
    bool outer_edge = false;
    RadialProfile fn;

    bool covers(double r) const { return r >= r_min && r <= r_max; }
};

struct CalibrationResult {
    double energy = 0.0;
    double grad_floor = 1e-6;
    CalibrationRecord record;
    std::vector<TorusSpec> tori;
    EmissionSets emission;
    ThresholdReport report;
    std::vector<ShellPiece> pieces;  // shells split at crossing radii, restricted to reachable ones
};

// Atlas branches split at the radii of crossings they take part in.
std::vector<ShellPiece> split_shells(const MassShellAtlas& atlas);

CalibrationResult calibrate(const ModelSpec& model, const MassShellAtlas& atlas, const Vec& xi, double E,
                            const CalibrationOptions& options = {});
// Same, reusing a threshold report computed at xi.
CalibrationResult calibrate(const ModelSpec& model, const MassShellAtlas& atlas, const ThresholdReport& report,
                            double E, const CalibrationOptions& options = {});

class VectorFieldBundle {
public:
    VectorFieldBundle() = default;
    VectorFieldBundle(ModelSpec model, const CalibrationResult& cal, std::vector<ShellPiece> shells, double E);

    struct Pieces {
        std::vector<double> torus;  // phi_ij
        std::vector<double> shell;  // phi_(A,S), normalized
        Vec v = Vec::Zero();
        std::vector<Vec> torus_v;
        std::vector<Vec> shell_v;
    };

    Pieces evaluate(const Vec& k) const;
    Vec v(const Vec& k) const { return evaluate(k).v; }
    double partition_sum(const Vec& k) const;
    // h <= 0 picks a step below the narrowest cutoff transition.
    double divergence(const Vec& k, double h = 0.0) const;
    // k belongs to the emission set of the validated window.
    bool in_emission_set(const Vec& k) const;
    Vec shell_gradient(const ShellPiece& s, const Vec& k) const;  // grad_k S1(xi; k)

    const Vec& xi() const { return frame_.xi(); }
    double energy() const { return E_; }
    const ModelSpec& model() const { return model_; }
    const PolarFrame& frame() const { return frame_; }
    const std::vector<TorusSpec>& tori() const { return tori_; }
    const std::vector<ShellPiece>& shells() const { return shells_; }
    const CalibrationRecord& record() const { return record_; }
    const EmissionSets& emission() const { return emission_; }
    double sup_bound() const;  // 2 + max R_i

    // Values on the grid nodes, filled by build_vector_field.
    std::vector<Vec> sampled;
    std::vector<int> piece_id;  // -1 none, t for torus t, tori.size() + s for shell s
    double sup_norm = 0.0;

private:
    double shell_raw(const ShellPiece& s, const Vec& k) const;
    double band(double e) const;
    double annulus_cutoff(const ShellPiece& s, double r) const;

    ModelSpec model_;
    PolarFrame frame_{Vec::Zero()};
    double E_ = 0.0;
    std::vector<TorusSpec> tori_;
    std::vector<ShellPiece> shells_;
    CalibrationRecord record_;
    EmissionSets emission_;
};

VectorFieldBundle build_vector_field(const ModelSpec& model, const MassShellAtlas& atlas, const Vec& xi, double E,
                                     const MomentumGrid& grid, const CalibrationOptions& options = {});
VectorFieldBundle build_vector_field(const ModelSpec& model, const MassShellAtlas& atlas,
                                     const CalibrationResult& cal, const MomentumGrid& grid);
// Fills sampled values on the grid nodes.
void sample_on_grid(VectorFieldBundle& bundle, const MomentumGrid& grid);

nlohmann::json to_json(const CalibrationRecord& record, const std::vector<TorusSpec>& tori);

struct ConjugateOperators {
    SparseC a;       // one-body, on the momentum grid
    OperatorMatrix A;
};

// One-body central-difference matrix along an axis, zero outside the box.
SparseC central_difference(const MomentumGrid& grid, int axis);
// a = (V iD + iD V) / 2 for sampled field values.
SparseC one_body_conjugate(const MomentumGrid& grid, const std::vector<Vec>& v);
ConjugateOperators build_conjugate(const FockBasis& basis, const MomentumGrid& grid, const VectorFieldBundle& bundle);
ConjugateOperators build_conjugate(const FockBasis& basis, const MomentumGrid& grid, const std::vector<Vec>& v);

struct FlowResult {
    Vec k = Vec::Zero();
    double J = 1.0;
};

using Field = std::function<Vec(const Vec&)>;
using Divergence = std::function<double(const Vec&)>;

// RK4 for dk/dt = v(k) together with d(log J)/dt = div v(k).
FlowResult flow(const Field& v, const Divergence& div, const Vec& k0, double t, double dt);
FlowResult flow_map(const VectorFieldBundle& bundle, const Vec& k0, double t, double dt);

}  // namespace nelson
