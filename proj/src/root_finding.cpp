#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "nelson/numerics.hpp"

namespace nelson {

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y, bool clamp_left_zero_slope)
    : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n != y_.size() || n < 2) throw std::invalid_argument("CubicSpline: need at least two knots");
    for (std::size_t i = 1; i < n; ++i)
        if (!(x_[i] > x_[i - 1])) throw std::invalid_argument("CubicSpline: knots must increase");
    m_.assign(n, 0.0);
    if (n == 2 && !clamp_left_zero_slope) return;
    // Tridiagonal system for knot second derivatives (Thomas algorithm).
    std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), d(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
        a[i] = h0 / 6.0;
        b[i] = (h0 + h1) / 3.0;
        c[i] = h1 / 6.0;
        d[i] = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
    }
    if (clamp_left_zero_slope) {
        const double h0 = x_[1] - x_[0];
        b[0] = h0 / 3.0;
        c[0] = h0 / 6.0;
        d[0] = (y_[1] - y_[0]) / h0;
    } else {
        b[0] = 1.0;
    }
    b[n - 1] = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double w = a[i] / b[i - 1];
        b[i] -= w * c[i - 1];
        d[i] -= w * d[i - 1];
    }
    m_[n - 1] = d[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
}

std::size_t CubicSpline::segment(double t) const {
    if (t <= x_.front()) return 0;
    if (t >= x_.back()) return x_.size() - 2;
    return static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), t) - x_.begin()) - 1;
}

double CubicSpline::value(double t) const {
    const std::size_t i = segment(t);
    const double h = x_[i + 1] - x_[i];
    const double A = (x_[i + 1] - t) / h, B = (t - x_[i]) / h;
    return A * y_[i] + B * y_[i + 1] + ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
}

double CubicSpline::d1(double t) const {
    const std::size_t i = segment(t);
    const double h = x_[i + 1] - x_[i];
    const double A = (x_[i + 1] - t) / h, B = (t - x_[i]) / h;
    return (y_[i + 1] - y_[i]) / h - (3.0 * A * A - 1.0) * h * m_[i] / 6.0 + (3.0 * B * B - 1.0) * h * m_[i + 1] / 6.0;
}

double CubicSpline::d2(double t) const {
    const std::size_t i = segment(t);
    const double h = x_[i + 1] - x_[i];
    const double A = (x_[i + 1] - t) / h, B = (t - x_[i]) / h;
    return A * m_[i] + B * m_[i + 1];
}

double refine_root(const std::function<double(double)>& f, double a, double b, double tol) {
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (fa * fb > 0.0) throw std::invalid_argument("refine_root: interval does not bracket a root");
    std::uintmax_t iters = 200;
    auto stop = [tol](double lo, double hi) { return std::abs(hi - lo) <= tol * (1.0 + std::abs(lo)); };
    const auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, stop, iters);
    return 0.5 * (r.first + r.second);
}

std::vector<double> scan_roots(const std::function<double(double)>& f, double a, double b, int scan_points,
                               double tol) {
    std::vector<double> roots;
    if (scan_points < 2 || !(b > a)) return roots;
    double x0 = a, f0 = f(a);
    if (f0 == 0.0) roots.push_back(a);
    for (int i = 1; i <= scan_points; ++i) {
        const double x1 = a + (b - a) * i / scan_points;
        const double f1 = f(x1);
        if (f1 == 0.0) {
            roots.push_back(x1);
        } else if (f0 != 0.0 && (f0 < 0.0) != (f1 < 0.0)) {
            roots.push_back(refine_root(f, x0, x1, tol));
        }
        x0 = x1;
        f0 = f1;
    }
    return roots;
}

double bisect(const std::function<double(double)>& f, double a, double b, double width) {
    double fa = f(a);
    if (fa == 0.0) return a;
    if (fa * f(b) > 0.0) throw std::invalid_argument("bisect: interval does not bracket a root");
    while (b - a > width) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if (fm == 0.0) return m;
        if ((fm < 0.0) == (fa < 0.0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if (m == a && m == b) break;
    }
    return 0.5 * (a + b);
}

double smooth_step(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double p = std::exp(-1.0 / x), q = std::exp(-1.0 / (1.0 - x));
    return p / (p + q);
}

double plateau(double x, double inner, double outer) {
    const double a = std::abs(x);
    if (a <= inner) return 1.0;
    if (a >= outer) return 0.0;
    return 1.0 - smooth_step((a - inner) / (outer - inner));
}

double window(double x, double lo, double hi, double margin) {
    if (x >= lo && x <= hi) return 1.0;
    if (x < lo) return 1.0 - smooth_step((lo - x) / margin);
    return 1.0 - smooth_step((x - hi) / margin);
}

}  // namespace nelson
