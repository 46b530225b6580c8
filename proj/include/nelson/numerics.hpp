#pragma once

#include <functional>
#include <vector>

namespace nelson {

// C2 cubic spline on strictly increasing knots; clamped slope at the left end when requested, natural otherwise.
class CubicSpline {
public:
    CubicSpline() = default;
    CubicSpline(std::vector<double> x, std::vector<double> y, bool clamp_left_zero_slope);

    double value(double t) const;
    double d1(double t) const;
    double d2(double t) const;
    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }
    bool empty() const { return x_.empty(); }

private:
    std::size_t segment(double t) const;
    std::vector<double> x_, y_, m_;  // m_ holds second derivatives at knots
};

// All roots of f on [a, b] bracketed by sign changes on a uniform scan, refined to tolerance.
std::vector<double> scan_roots(const std::function<double(double)>& f, double a, double b, int scan_points,
                               double tol = 1e-15);

// Root of f in [a, b] with f(a) f(b) <= 0.
double refine_root(const std::function<double(double)>& f, double a, double b, double tol = 1e-15);

// Plain bisection to an absolute width; independent of the bracketing solver above.
double bisect(const std::function<double(double)>& f, double a, double b, double width = 1e-14);

// Smooth step: 0 for x <= 0, 1 for x >= 1, built from exp(-1/x).
double smooth_step(double x);
// Plateau bump: 1 for |x| <= inner, 0 for |x| >= outer, smooth in between.
double plateau(double x, double inner, double outer);
// Indicator-like window on [lo, hi] with transitions of the given width outside it.
double window(double x, double lo, double hi, double margin);

}  // namespace nelson
