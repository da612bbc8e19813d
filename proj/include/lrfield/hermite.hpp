#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "lrfield/errors.hpp"
#include "lrfield/special_functions.hpp"

namespace lrf {

// Probabilists' Hermite polynomial H_k via H_{k+1} = x H_k - k H_{k-1}.
// Parity is bit-exact: H_k(-x) == (-1)^k H_k(x).
inline double hermite_poly(int k, double x) {
    if (k < 0) throw domain_error("hermite_poly: order must be nonnegative");
    if (k > 30) throw config_error("hermite_poly: order capped at 30, got " + std::to_string(k));
    double prev = 0.0;
    double cur = 1.0;
    for (int j = 0; j < k; ++j) {
        const double next = x * cur - j * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

enum class g_kind { hermite_k, square, abs_value, indicator, custom };

struct GFunction {
    g_kind kind = g_kind::hermite_k;
    int order = 2;          // hermite_k
    double threshold = 0.0; // indicator
    std::function<double(double)> fn; // custom
    // second moment against phi for custom functions; NaN = integrate numerically
    double fn_second_moment = std::numeric_limits<double>::quiet_NaN();
};

inline GFunction g_hermite(int k) {
    if (k < 1 || k > 6) throw config_error("g_hermite: built-in orders are 1..6");
    GFunction g;
    g.kind = g_kind::hermite_k;
    g.order = k;
    return g;
}

inline GFunction g_square() {
    GFunction g;
    g.kind = g_kind::square;
    return g;
}

inline GFunction g_abs() {
    GFunction g;
    g.kind = g_kind::abs_value;
    return g;
}

inline GFunction g_indicator(double threshold) {
    GFunction g;
    g.kind = g_kind::indicator;
    g.threshold = threshold;
    return g;
}

inline GFunction g_custom(std::function<double(double)> fn,
                          double second_moment = std::numeric_limits<double>::quiet_NaN()) {
    GFunction g;
    g.kind = g_kind::custom;
    g.fn = std::move(fn);
    g.fn_second_moment = second_moment;
    return g;
}

inline double g_eval(const GFunction& g, double w) {
    switch (g.kind) {
        case g_kind::hermite_k:
            return hermite_poly(g.order, w);
        case g_kind::square:
            return w * w;
        case g_kind::abs_value:
            return std::fabs(w);
        case g_kind::indicator:
            return w > g.threshold ? 1.0 : 0.0;
        case g_kind::custom:
            if (!g.fn) throw config_error("g_eval: custom function not set");
            return g.fn(w);
    }
    throw config_error("g_eval: unknown function kind");
}

namespace detail {

// integrates f against phi with symmetric node pairing, so odd integrands
// cancel bit-exactly; paired weights are bit-equal by construction, and the
// values are added before the weight multiply so FP contraction cannot
// break the cancellation
template <typename F>
double gauss_hermite_symmetric(const QuadratureRule& rule, F&& f) {
    const std::size_t n = rule.nodes.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < n / 2; ++i) {
        const std::size_t m = n - 1 - i;
        const double pair = f(rule.nodes[i]) + f(rule.nodes[m]);
        sum += rule.weights[i] * pair;
    }
    if (n % 2) {
        const std::size_t mid = n / 2;
        sum += rule.weights[mid] * f(rule.nodes[mid]);
    }
    return sum;
}

} // namespace detail

// E G(w)^2 for w standard normal
inline double g_second_moment(const GFunction& g) {
    switch (g.kind) {
        case g_kind::hermite_k: {
            double fact = 1.0;
            for (int j = 2; j <= g.order; ++j) fact *= j;
            return fact;
        }
        case g_kind::square:
            return 3.0;
        case g_kind::abs_value:
            return 1.0;
        case g_kind::indicator:
            return 1.0 - normal_cdf(g.threshold);
        case g_kind::custom: {
            if (std::isfinite(g.fn_second_moment)) return g.fn_second_moment;
            const auto& rule = gauss_hermite_rule(512);
            return detail::gauss_hermite_symmetric(rule, [&](double w) {
                const double v = g_eval(g, w);
                return v * v;
            });
        }
    }
    throw config_error("g_second_moment: unknown function kind");
}

struct HermiteSpec {
    GFunction g;
    std::vector<double> coeffs; // C_0 .. C_jmax
    int rank = 0;               // smallest j >= 1 with C_j significantly nonzero
    int jmax = 0;
};

// C_j = E G(w) H_j(w) by Gauss-Hermite quadrature. The constant term C_0
// only shifts the mean, so rank detection starts at j = 1.
inline HermiteSpec hermite_coeffs(const GFunction& g, int jmax, int rule_order) {
    if (jmax < 1 || jmax > 20)
        throw config_error("hermite_coeffs: jmax must lie in [1, 20], got " + std::to_string(jmax));
    if (rule_order < jmax + 2)
        throw config_error("hermite_coeffs: rule order " + std::to_string(rule_order) +
                           " too small for jmax " + std::to_string(jmax) +
                           "; need at least jmax + 2");
    const auto& rule = gauss_hermite_rule(rule_order);
    HermiteSpec spec;
    spec.g = g;
    spec.jmax = jmax;
    spec.coeffs.assign(static_cast<std::size_t>(jmax) + 1, 0.0);
    for (int j = 0; j <= jmax; ++j) {
        spec.coeffs[static_cast<std::size_t>(j)] = detail::gauss_hermite_symmetric(
            rule, [&](double w) { return g_eval(g, w) * hermite_poly(j, w); });
    }
    double fact = 1.0;
    for (int j = 1; j <= jmax; ++j) {
        fact *= j;
        if (std::fabs(spec.coeffs[static_cast<std::size_t>(j)]) > 1e-9 * std::sqrt(fact)) {
            spec.rank = j;
            break;
        }
    }
    if (spec.rank == 0)
        throw config_error(
            "hermite_coeffs: no coefficient with 1 <= j <= jmax clears the rank threshold");
    return spec;
}

// E G^2 - sum_{j <= jmax} C_j^2 / j!; nonnegative up to quadrature noise.
inline double parseval_gap(const HermiteSpec& spec) {
    double partial = 0.0;
    double fact = 1.0;
    for (int j = 0; j <= spec.jmax; ++j) {
        if (j > 0) fact *= j;
        const double c = spec.coeffs[static_cast<std::size_t>(j)];
        partial += c * c / fact;
    }
    return g_second_moment(spec.g) - partial;
}

} // namespace lrf
