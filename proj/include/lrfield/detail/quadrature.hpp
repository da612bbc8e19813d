#pragma once

#include <cmath>
#include <functional>

#include "lrfield/errors.hpp"

namespace lrf::detail {

// Double-exponential (tanh-sinh) quadrature on [a, b]. Handles integrable
// endpoint singularities such as z^{alpha-1}; refinement halves the step
// until two consecutive levels agree.
template <typename F>
double tanh_sinh(F&& f, double a, double b, double rel_tol = 1e-12, int max_level = 12) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    const double u_max = 6.5; // tanh(pi/2 sinh 6.5) is 1 to double precision
    const double pi_half = 1.57079632679489661923132169163975144;

    auto node_sum = [&](double h, bool odd_only) {
        double s = 0.0;
        const int step = odd_only ? 2 : 1;
        const int start = odd_only ? 1 : 0;
        const int kmax = static_cast<int>(u_max / h);
        for (int k = start; k <= kmax; k += step) {
            const double u = k * h;
            const double sh = pi_half * std::sinh(u);
            const double ch = std::cosh(sh);
            const double w = pi_half * std::cosh(u) / (ch * ch);
            const double t = std::tanh(sh);
            double v = 0.0;
            const double xp = mid + half * t;
            const double xm = mid - half * t;
            if (xp > a && xp < b) v += f(xp);
            if (k > 0 && xm > a && xm < b) v += f(xm);
            s += w * v;
        }
        return s;
    };

    double h = 1.0;
    double sum = node_sum(h, false);
    double integral = half * h * sum;
    for (int level = 1; level <= max_level; ++level) {
        h *= 0.5;
        sum += node_sum(h, true);
        const double next = half * h * sum;
        if (level >= 3 && std::fabs(next - integral) <= rel_tol * (1.0 + std::fabs(next))) {
            return next;
        }
        integral = next;
    }
    throw numeric_error("tanh_sinh: failed to converge");
}

// Fixed 16-point Gauss-Legendre panel on [a, b].
template <typename F>
double gauss_legendre_16(F&& f, double a, double b) {
    static constexpr double x[8] = {
        0.0950125098376374401853193, 0.2816035507792589132304605,
        0.4580167776572273863424194, 0.6178762444026437484466718,
        0.7554044083550030338951012, 0.8656312023878317438804679,
        0.9445750230732325760779884, 0.9894009349916499325961542,
    };
    static constexpr double w[8] = {
        0.1894506104550684962853967, 0.1826034150449235888667637,
        0.1691565193950025381893121, 0.1495959888165767320815017,
        0.1246289712555338720524763, 0.0951585116824927848099251,
        0.0622535239386478928628438, 0.0271524594117540948517806,
    };
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double s = 0.0;
    for (int i = 0; i < 8; ++i) {
        s += w[i] * (f(mid + half * x[i]) + f(mid - half * x[i]));
    }
    return half * s;
}

} // namespace lrf::detail
