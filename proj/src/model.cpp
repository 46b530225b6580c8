#include "nelson/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace nelson {

namespace {

constexpr double kRadialEps = 1e-12;

double japanese(double r) { return std::sqrt(1.0 + r * r); }

}  // namespace

Vec radial_gradient(double d1, const Vec& x) {
    const double r = x.norm();
    if (r < kRadialEps) return Vec::Zero();
    return (d1 / r) * x;
}

Mat2 radial_hessian(double d1, double d2, const Vec& x) {
    const double r = x.norm();
    if (r < kRadialEps) return d2 * Mat2::Identity();
    const Vec u = x / r;
    const Mat2 uu = u * u.transpose();
    return d2 * uu + (d1 / r) * (Mat2::Identity() - uu);
}

OneBodyDispersion OneBodyDispersion::relativistic(double mass) {
    if (!(mass > 0.0)) throw ConfigError("omega.m must be positive");
    OneBodyDispersion d;
    d.kind_ = OmegaKind::Relativistic;
    d.mass_ = mass;
    d.name_ = "relativistic";
    return d;
}

OneBodyDispersion OneBodyDispersion::constant(double level) {
    if (!(level > 0.0)) throw ConfigError("omega.c0 must be positive");
    OneBodyDispersion d;
    d.kind_ = OmegaKind::Constant;
    d.level_ = level;
    d.name_ = "constant";
    return d;
}

OneBodyDispersion OneBodyDispersion::custom(std::string name, RadialProfile profile,
                                            std::vector<double> singular_radii) {
    if (!profile.value || !profile.d1 || !profile.d2)
        throw ConfigError("custom dispersion needs value, d1 and d2");
    OneBodyDispersion d;
    d.kind_ = OmegaKind::Custom;
    d.name_ = std::move(name);
    d.custom_ = std::move(profile);
    d.singular_ = std::move(singular_radii);
    return d;
}

void OneBodyDispersion::check_domain(double r) const {
    for (double s : singular_)
        if (std::abs(r - s) < kRadialEps)
            throw DomainError("dispersion '" + name_ + "' is singular at radius " + std::to_string(s));
}

double OneBodyDispersion::radial(double r) const {
    switch (kind_) {
        case OmegaKind::Relativistic: return std::sqrt(r * r + mass_ * mass_);
        case OmegaKind::Constant: return level_;
        case OmegaKind::Custom: check_domain(r); return custom_.value(r);
    }
    return 0.0;
}

double OneBodyDispersion::radial_d1(double r) const {
    switch (kind_) {
        case OmegaKind::Relativistic: return r / std::sqrt(r * r + mass_ * mass_);
        case OmegaKind::Constant: return 0.0;
        case OmegaKind::Custom: check_domain(r); return custom_.d1(r);
    }
    return 0.0;
}

double OneBodyDispersion::radial_d2(double r) const {
    switch (kind_) {
        case OmegaKind::Relativistic: {
            const double q = r * r + mass_ * mass_;
            return mass_ * mass_ / (q * std::sqrt(q));
        }
        case OmegaKind::Constant: return 0.0;
        case OmegaKind::Custom: check_domain(r); return custom_.d2(r);
    }
    return 0.0;
}

Vec OneBodyDispersion::gradient(const Vec& k) const {
    if (kind_ == OmegaKind::Constant) return Vec::Zero();
    return radial_gradient(radial_d1(k.norm()), k);
}

Mat2 OneBodyDispersion::hessian(const Vec& k) const {
    const double r = k.norm();
    return radial_hessian(radial_d1(r), radial_d2(r), k);
}

ParticleDispersion ParticleDispersion::nonrelativistic() {
    ParticleDispersion d;
    d.kind_ = ParticleKind::Nonrelativistic;
    return d;
}

ParticleDispersion ParticleDispersion::relativistic(double mass) {
    if (!(mass > 0.0)) throw ConfigError("Omega.M must be positive");
    ParticleDispersion d;
    d.kind_ = ParticleKind::Relativistic;
    d.mass_ = mass;
    d.offset_ = -mass;
    return d;
}

ParticleDispersion ParticleDispersion::polynomial(std::vector<double> coefficients) {
    while (coefficients.size() > 1 && coefficients.back() == 0.0) coefficients.pop_back();
    if (coefficients.empty()) throw ConfigError("Omega.coefficients must be nonempty");
    if (coefficients.size() > 1 && !(coefficients.back() > 0.0))
        throw ConfigError("Omega.coefficients: leading coefficient must be positive");
    ParticleDispersion d;
    d.kind_ = ParticleKind::Polynomial;
    d.coeffs_ = std::move(coefficients);
    // Additive normalization: subtract the sampled minimum over [0, 100].
    double lo = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 100000; ++i) lo = std::min(lo, d.radial(1e-3 * i));
    d.offset_ = -lo;
    return d;
}

double ParticleDispersion::natural_growth() const {
    switch (kind_) {
        case ParticleKind::Nonrelativistic: return 2.0;
        case ParticleKind::Relativistic: return 1.0;
        case ParticleKind::Polynomial: return 2.0 * static_cast<double>(coeffs_.size() - 1);
    }
    return 2.0;
}

double ParticleDispersion::radial(double r) const {
    switch (kind_) {
        case ParticleKind::Nonrelativistic: return r * r;
        case ParticleKind::Relativistic: return std::sqrt(r * r + mass_ * mass_) + offset_;
        case ParticleKind::Polynomial: {
            const double q = r * r;
            double acc = 0.0;
            for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * q + *it;
            return acc + offset_;
        }
    }
    return 0.0;
}

double ParticleDispersion::radial_d1(double r) const {
    switch (kind_) {
        case ParticleKind::Nonrelativistic: return 2.0 * r;
        case ParticleKind::Relativistic: return r / std::sqrt(r * r + mass_ * mass_);
        case ParticleKind::Polynomial: {
            double acc = 0.0;
            for (std::size_t j = 1; j < coeffs_.size(); ++j)
                acc += 2.0 * static_cast<double>(j) * coeffs_[j] * std::pow(r, 2.0 * j - 1.0);
            return acc;
        }
    }
    return 0.0;
}

double ParticleDispersion::radial_d2(double r) const {
    switch (kind_) {
        case ParticleKind::Nonrelativistic: return 2.0;
        case ParticleKind::Relativistic: {
            const double q = r * r + mass_ * mass_;
            return mass_ * mass_ / (q * std::sqrt(q));
        }
        case ParticleKind::Polynomial: {
            double acc = 0.0;
            for (std::size_t j = 1; j < coeffs_.size(); ++j) {
                const double e = 2.0 * static_cast<double>(j);
                acc += e * (e - 1.0) * coeffs_[j] * (j == 1 ? 1.0 : std::pow(r, e - 2.0));
            }
            return acc;
        }
    }
    return 0.0;
}

Vec ParticleDispersion::gradient(const Vec& eta) const {
    return radial_gradient(radial_d1(eta.norm()), eta);
}

Mat2 ParticleDispersion::hessian(const Vec& eta) const {
    const double r = eta.norm();
    return radial_hessian(radial_d1(r), radial_d2(r), eta);
}

void ModelSpec::validate() const {
    if (nu != 1 && nu != 2) throw ConfigError("nu must be 1 or 2");
    if (!(s_Omega >= 0.0 && s_Omega <= 2.0)) throw ConfigError("s_Omega must lie in [0, 2]");
    const double expected = Omega.natural_growth();
    if (expected <= 2.0 && s_Omega != expected) {
        std::ostringstream os;
        os << "s_Omega = " << s_Omega << " inconsistent with Omega kind (expected " << expected << ")";
        throw ConfigError(os.str());
    }
    if (!(coupling.lambda >= 0.0)) throw ConfigError("coupling.lambda must be nonnegative");
    if (!(coupling.uv_cutoff > 0.0)) throw ConfigError("coupling.uv_cutoff must be positive");
    if (!(coupling.width > 0.0)) throw ConfigError("coupling.width must be positive");
}

double coupling_value(const ModelSpec& model, const Vec& k) {
    const auto& c = model.coupling;
    const double r = k.norm();
    if (r > c.uv_cutoff) return 0.0;
    switch (c.kind) {
        case CouplingKind::Zero: return 0.0;
        case CouplingKind::Nelson: return c.lambda / std::sqrt(model.omega(k));
        case CouplingKind::Polaron: return r < kRadialEps ? 0.0 : c.lambda / r;
        case CouplingKind::Gaussian: return c.lambda * std::exp(-r * r / (2.0 * c.width * c.width));
    }
    return 0.0;
}

Vec coupling_gradient(const ModelSpec& model, const Vec& k) {
    const auto& c = model.coupling;
    const double r = k.norm();
    if (r > c.uv_cutoff) return Vec::Zero();
    switch (c.kind) {
        case CouplingKind::Zero: return Vec::Zero();
        case CouplingKind::Nelson: {
            const double w = model.omega(k);
            return (-0.5 * c.lambda / (w * std::sqrt(w))) * model.omega.gradient(k);
        }
        case CouplingKind::Polaron:
            if (r < kRadialEps) return Vec::Zero();
            return (-c.lambda / (r * r * r)) * k;
        case CouplingKind::Gaussian:
            return (-coupling_value(model, k) / (c.width * c.width)) * k;
    }
    return Vec::Zero();
}

PointEvaluation evaluate(const ModelSpec& model, const Vec& k, const Vec& eta) {
    if (!k.allFinite() || !eta.allFinite()) throw DomainError("evaluate: non-finite momentum");
    PointEvaluation e;
    e.omega = model.omega(k);
    e.grad_omega = model.omega.gradient(k);
    e.Omega = model.Omega(eta);
    e.grad_Omega = model.Omega.gradient(eta);
    e.g = coupling_value(model, k);
    return e;
}

bool ConditionReport::passed() const {
    return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
}

const ConditionResult& ConditionReport::get(const std::string& name) const {
    for (const auto& r : results)
        if (r.name == name) return r;
    throw std::out_of_range("no condition named " + name);
}

namespace {

class Sampler {
public:
    Sampler(int nu, double half_width, std::uint64_t seed) : nu_(nu), K_(half_width), rng_(seed) {}
    Vec point() {
        std::uniform_real_distribution<double> u(-K_, K_);
        const double x = u(rng_);
        return nu_ == 1 ? make_vec(x) : make_vec(x, u(rng_));
    }
    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
    Vec rotate(const Vec& k, double angle) const {
        const double c = std::cos(angle), s = std::sin(angle);
        return make_vec(c * k.x() - s * k.y(), s * k.x() + c * k.y());
    }

private:
    int nu_;
    double K_;
    std::mt19937_64 rng_;
};

// Largest ratio on [0,R] vs [0,2R]; growth beyond the declared exponent shows up as a rising tail.
struct GrowthFit {
    double constant = 0.0;
    bool stable = true;
};

template <class F>
GrowthFit fit_growth(F&& ratio, double R) {
    double inner = 0.0, outer = 0.0;
    const int n = 400;
    for (int i = 0; i <= n; ++i) {
        const double r = R * i / n;
        inner = std::max(inner, ratio(r));
        outer = std::max(outer, ratio(2.0 * R * i / n));
    }
    GrowthFit fit;
    fit.constant = outer;
    fit.stable = std::isfinite(outer) && outer <= 1.5 * inner + 1e-12;
    return fit;
}

}  // namespace

ConditionReport check_minimal_conditions(const ModelSpec& model, std::size_t sample_budget,
                                         double box_half_width, std::uint64_t seed) {
    if (sample_budget < 100) throw PreconditionError("sample_budget must be at least 100");
    model.validate();
    ConditionReport report;
    Sampler sampler(model.nu, box_half_width, seed);
    const double Rmax = box_half_width * std::sqrt(static_cast<double>(model.nu));

    {
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i <= sample_budget; ++i) {
            const double r = Rmax * static_cast<double>(i) / static_cast<double>(sample_budget);
            lo = std::min(lo, model.omega.radial(r));
        }
        report.results.push_back({"MC2", lo > 0.0, lo, "sampled infimum of omega"});
    }

    {
        double margin = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < sample_budget; ++i) {
            Vec k1 = sampler.point(), k2;
            if (i % 2 == 0) {
                k2 = sampler.point();
            } else {
                // Nearly collinear pairs are the hardest case for subadditivity.
                k2 = sampler.uniform(0.05, 2.0) * k1;
                if (model.nu == 2) k2 += sampler.uniform(-1e-3, 1e-3) * make_vec(-k1.y(), k1.x());
            }
            const double gap = model.omega(k1) + model.omega(k2) - model.omega(k1 + k2);
            margin = std::min(margin, gap);
        }
        report.subadditivity_margin = std::max(0.0, margin);
        report.results.push_back({"MC5", margin > 0.0, margin, "worst sampled subadditivity margin"});
    }

    {
        double c_omega = 0.0;
        for (int i = 0; i <= 400; ++i) {
            const double r = 2.0 * Rmax * i / 400.0;
            c_omega = std::max(c_omega, model.omega.radial(r) / japanese(r));
        }
        const double s = model.s_Omega;
        double c_fit = std::numeric_limits<double>::infinity();
        for (double C = 1.0; C < 1e6; C *= 1.05) {
            bool ok = true;
            for (int i = 0; i <= 400 && ok; ++i) {
                const double r = 2.0 * Rmax * i / 400.0;
                ok = model.Omega.radial(r) >= std::pow(japanese(r), s) / C - C;
            }
            if (ok) {
                c_fit = C;
                break;
            }
        }
        const bool pass = std::isfinite(c_omega) && std::isfinite(c_fit);
        std::ostringstream os;
        os << "omega <= " << c_omega << " <k>; Omega >= <eta>^s/" << c_fit << " - " << c_fit;
        report.results.push_back({"MC3", pass, std::max(c_omega, c_fit), os.str()});
    }

    {
        const double s = model.s_Omega;
        const auto& W = model.Omega;
        auto ratio = [&](double r) {
            const double j = japanese(r);
            const double a0 = std::abs(W.radial(r)) / std::pow(j, s);
            const double a1 = std::abs(W.radial_d1(r)) / std::pow(j, s - 1.0);
            const double a2 = W.hessian(make_vec(r)).norm() / std::pow(j, s - 2.0);
            return std::max({a0, a1, a2});
        };
        const GrowthFit fit = fit_growth(ratio, Rmax);
        report.results.push_back({"MC4", fit.stable, fit.constant, "derivative growth constant of Omega"});
    }

    {
        const double far = 1e3;
        const bool omega_unbounded = model.omega.radial(far) > 10.0 * model.omega.radial(0.0);
        const bool Omega_unbounded = model.Omega.radial(far) > 1e2 * (1.0 + model.Omega.radial(0.0));
        bool pass = true;
        if (omega_unbounded)
            report.growth_branch = "omega-unbounded";
        else if (Omega_unbounded)
            report.growth_branch = "omega-bounded-Omega-unbounded";
        else {
            report.growth_branch = "none";
            pass = false;
        }
        report.results.push_back({"MC6", pass, 0.0, report.growth_branch});
    }

    {
        double worst = 0.0;
        for (std::size_t i = 0; i < sample_budget; ++i) {
            const Vec k = sampler.point();
            const Vec Ok = model.nu == 2 ? sampler.rotate(k, sampler.uniform(0.0, 2.0 * M_PI)) : Vec(-k);
            const double dw = std::abs(model.omega(Ok) - model.omega(k)) / (1.0 + std::abs(model.omega(k)));
            const double dW = std::abs(model.Omega(Ok) - model.Omega(k)) / (1.0 + std::abs(model.Omega(k)));
            worst = std::max({worst, dw, dW});
        }
        const double tol = 16.0 * std::numeric_limits<double>::epsilon();
        report.results.push_back({"ST3", worst <= tol, worst, "sampled relative rotation defect"});
    }

    {
        auto grad_ratio = [&](double r) {
            return std::max(std::abs(model.omega.radial_d1(r)), model.omega.hessian(make_vec(r)).norm());
        };
        auto hess_ratio = [&](double r) { return model.Omega.hessian(make_vec(r)).norm(); };
        const GrowthFit a = fit_growth(grad_ratio, Rmax);
        const GrowthFit b = fit_growth(hess_ratio, Rmax);
        std::ostringstream os;
        os << "sup|d omega| " << a.constant << ", sup|d2 Omega| " << b.constant;
        report.results.push_back({"ST4", a.stable && b.stable, std::max(a.constant, b.constant), os.str()});
    }
    return report;
}

void require_admissible(const ConditionReport& report, bool allow_flagged) {
    if (allow_flagged || report.passed()) return;
    std::string failed;
    for (const auto& r : report.results)
        if (!r.passed) failed += (failed.empty() ? "" : ", ") + r.name;
    throw PreconditionError("model fails standing conditions: " + failed);
}

nlohmann::json to_json(const ConditionReport& report) {
    nlohmann::json j;
    j["passed"] = report.passed();
    j["subadditivity_margin"] = report.subadditivity_margin;
    j["growth_branch"] = report.growth_branch;
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : report.results)
        list.push_back({{"name", r.name}, {"passed", r.passed}, {"value", r.value}, {"detail", r.detail}});
    j["conditions"] = list;
    return j;
}

ModelSpec nelson_preset(int nu, double lambda, double uv_cutoff, double mass) {
    ModelSpec m;
    m.nu = nu;
    m.omega = OneBodyDispersion::relativistic(mass);
    m.Omega = ParticleDispersion::nonrelativistic();
    m.s_Omega = 2.0;
    m.coupling = {lambda == 0.0 ? CouplingKind::Zero : CouplingKind::Nelson, lambda, uv_cutoff, 1.0};
    return m;
}

ModelSpec polaron_preset(int nu, double lambda, double uv_cutoff, double level) {
    ModelSpec m;
    m.nu = nu;
    m.omega = OneBodyDispersion::constant(level);
    m.Omega = ParticleDispersion::nonrelativistic();
    m.s_Omega = 2.0;
    m.coupling = {CouplingKind::Polaron, lambda, uv_cutoff, 1.0};
    return m;
}

}  // namespace nelson
