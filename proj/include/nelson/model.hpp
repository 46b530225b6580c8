#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nelson/types.hpp"

namespace nelson {

// Radial profile f(r) with first and second derivatives.
struct RadialProfile {
    std::function<double(double)> value;
    std::function<double(double)> d1;
    std::function<double(double)> d2;
};

// Gradient and Hessian of x -> f(|x|).
Vec radial_gradient(double d1, const Vec& x);
Mat2 radial_hessian(double d1, double d2, const Vec& x);

enum class OmegaKind { Relativistic, Constant, Custom };

class OneBodyDispersion {
public:
    static OneBodyDispersion relativistic(double mass);
    static OneBodyDispersion constant(double level);
    // Singular radii are rejected with a DomainError on evaluation.
    static OneBodyDispersion custom(std::string name, RadialProfile profile,
                                    std::vector<double> singular_radii = {});

    OmegaKind kind() const { return kind_; }
    double mass() const { return mass_; }
    double level() const { return level_; }
    const std::string& name() const { return name_; }
    bool is_constant() const { return kind_ == OmegaKind::Constant; }

    double radial(double r) const;
    double radial_d1(double r) const;
    double radial_d2(double r) const;

    double operator()(const Vec& k) const { return radial(k.norm()); }
    Vec gradient(const Vec& k) const;
    Mat2 hessian(const Vec& k) const;

private:
    void check_domain(double r) const;
    OmegaKind kind_ = OmegaKind::Relativistic;
    double mass_ = 1.0;
    double level_ = 1.0;
    std::string name_ = "relativistic";
    RadialProfile custom_;
    std::vector<double> singular_;
};

enum class ParticleKind { Nonrelativistic, Relativistic, Polynomial };

class ParticleDispersion {
public:
    static ParticleDispersion nonrelativistic();
    // sqrt(eta^2 + M^2) shifted so that the minimum is 0.
    static ParticleDispersion relativistic(double mass);
    // sum_j c_j |eta|^{2j}, shifted so that the sampled minimum is 0.
    static ParticleDispersion polynomial(std::vector<double> coefficients);

    ParticleKind kind() const { return kind_; }
    double mass() const { return mass_; }
    const std::vector<double>& coefficients() const { return coeffs_; }
    double offset() const { return offset_; }
    // Growth exponent implied by the kind.
    double natural_growth() const;

    double radial(double r) const;
    double radial_d1(double r) const;
    double radial_d2(double r) const;

    double operator()(const Vec& eta) const { return radial(eta.norm()); }
    Vec gradient(const Vec& eta) const;
    Mat2 hessian(const Vec& eta) const;

private:
    ParticleKind kind_ = ParticleKind::Nonrelativistic;
    double mass_ = 1.0;
    std::vector<double> coeffs_;
    double offset_ = 0.0;
};

enum class CouplingKind { Nelson, Polaron, Gaussian, Zero };

struct CouplingSpec {
    CouplingKind kind = CouplingKind::Nelson;
    double lambda = 0.0;
    double uv_cutoff = 1.0;
    double width = 1.0;

    // Derivative of g fails local square integrability at k = 0.
    bool ir_singular() const { return kind == CouplingKind::Polaron; }
};

struct ModelSpec {
    int nu = 1;
    OneBodyDispersion omega = OneBodyDispersion::relativistic(1.0);
    ParticleDispersion Omega = ParticleDispersion::nonrelativistic();
    CouplingSpec coupling;
    double s_Omega = 2.0;

    void validate() const;
    bool coupled() const { return coupling.kind != CouplingKind::Zero && coupling.lambda != 0.0; }
};

double coupling_value(const ModelSpec& model, const Vec& k);
Vec coupling_gradient(const ModelSpec& model, const Vec& k);

struct PointEvaluation {
    double omega;
    Vec grad_omega;
    double Omega;
    Vec grad_Omega;
    double g;
};

PointEvaluation evaluate(const ModelSpec& model, const Vec& k, const Vec& eta);

struct ConditionResult {
    std::string name;
    bool passed = false;
    double value = 0.0;
    std::string detail;
};

struct ConditionReport {
    std::vector<ConditionResult> results;
    double subadditivity_margin = 0.0;
    std::string growth_branch;

    bool passed() const;
    const ConditionResult& get(const std::string& name) const;
};

// Samples momenta in a box of the given half-width.
ConditionReport check_minimal_conditions(const ModelSpec& model, std::size_t sample_budget,
                                         double box_half_width = 10.0, std::uint64_t seed = 1);

// Throws PreconditionError listing failed conditions unless allow_flagged.
void require_admissible(const ConditionReport& report, bool allow_flagged);

nlohmann::json to_json(const ConditionReport& report);

// Presets used by tests and shipped configs.
ModelSpec nelson_preset(int nu, double lambda, double uv_cutoff, double mass = 1.0);
ModelSpec polaron_preset(int nu, double lambda, double uv_cutoff, double level = 1.0);

}  // namespace nelson
