#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrfield/errors.hpp"

namespace lrf {

namespace detail {

inline constexpr double pi = 3.14159265358979323846264338327950288;

// Lanczos approximation, g = 7, 9 terms. Relative error below 1e-13 over
// the positive real axis in double precision.
inline double lanczos_sum(double x) {
    static constexpr double coef[9] = {
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    };
    double s = coef[0];
    for (int k = 1; k < 9; ++k) s += coef[k] / (x + k - 1);
    return s;
}

inline double gamma_positive(double x) {
    // valid for x >= 0.5
    const double g = 7.0;
    const double t = x + g - 0.5;
    return std::sqrt(2.0 * pi) * std::pow(t, x - 0.5) * std::exp(-t) * lanczos_sum(x);
}

} // namespace detail

inline double gamma_fn(double x) {
    if (!(x > 0.0)) throw domain_error("gamma_fn: requires x > 0, got " + std::to_string(x));
    if (x < 0.5) {
        // reflection keeps the Lanczos kernel on x >= 0.5
        return detail::pi / (std::sin(detail::pi * x) * detail::gamma_positive(1.0 - x));
    }
    return detail::gamma_positive(x);
}

namespace detail {

// Reciprocal-gamma combinations used by the Temme series. gam1 has a
// removable 0/0 at mu = 0; the Taylor branch covers |mu| <= 0.01.
struct temme_gammas {
    double gam1, gam2, gampl, gammi;
};

inline temme_gammas temme_gamma_terms(double mu) {
    temme_gammas t;
    t.gampl = 1.0 / gamma_fn(1.0 + mu);
    t.gammi = 1.0 / gamma_fn(1.0 - mu);
    if (std::fabs(mu) <= 0.01) {
        // coefficients of the Taylor expansion of 1/Gamma(1+t) at t=0
        const double a1 = 0.5772156649015328606065;
        const double a3 = -0.042002635034095235529;
        const double a5 = -0.04219773455554433674821;
        const double a7 = 0.007218943246663099542395;
        const double m2 = mu * mu;
        t.gam1 = -(a1 + m2 * (a3 + m2 * (a5 + m2 * a7)));
    } else {
        t.gam1 = (t.gammi - t.gampl) / (2.0 * mu);
    }
    t.gam2 = (t.gammi + t.gampl) / 2.0;
    return t;
}

} // namespace detail

// Modified Bessel function of the second kind, fractional order.
// Temme's series for z <= 2, Steed's continued fraction CF2 for z > 2,
// upward recurrence from mu in [-1/2, 1/2] to the requested order.
inline double bessel_k(double nu, double z) {
    if (!(z > 0.0)) throw domain_error("bessel_k: requires z > 0, got " + std::to_string(z));
    nu = std::fabs(nu); // K_{-nu} = K_nu
    if (nu > 10.0) throw domain_error("bessel_k: order out of validated range |nu| <= 10");

    constexpr double eps = 1e-16;
    constexpr int maxit = 10000;
    const int nl = static_cast<int>(nu + 0.5);
    const double mu = nu - nl;
    const double mu2 = mu * mu;
    const double xi = 1.0 / z;
    double kmu, kmu1;

    if (z <= 2.0) {
        const double x2 = 0.5 * z;
        const double pimu = detail::pi * mu;
        const double fact = (std::fabs(pimu) < eps) ? 1.0 : pimu / std::sin(pimu);
        double d = -std::log(x2);
        double e = mu * d;
        const double fact2 = (std::fabs(e) < eps) ? 1.0 : std::sinh(e) / e;
        const auto g = detail::temme_gamma_terms(mu);
        double ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
        double sum = ff;
        e = std::exp(e);
        double p = 0.5 * e / g.gampl;
        double q = 0.5 / (e * g.gammi);
        double c = 1.0;
        d = x2 * x2;
        double sum1 = p;
        int i = 1;
        for (; i <= maxit; ++i) {
            ff = (i * ff + p + q) / (i * i - mu2);
            c *= d / i;
            p /= (i - mu);
            q /= (i + mu);
            const double del = c * ff;
            sum += del;
            sum1 += c * (p - i * ff);
            if (std::fabs(del) < std::fabs(sum) * eps) break;
        }
        if (i > maxit) throw numeric_error("bessel_k: Temme series failed to converge");
        kmu = sum;
        kmu1 = sum1 * 2.0 * xi;
    } else {
        double b = 2.0 * (1.0 + z);
        double d = 1.0 / b;
        double h = d, delh = d;
        double q1 = 0.0, q2 = 1.0;
        const double a1 = 0.25 - mu2;
        double q = a1, c = a1, a = -a1;
        double s = 1.0 + q * delh;
        int i = 2;
        for (; i <= maxit; ++i) {
            a -= 2 * (i - 1);
            c = -a * c / i;
            const double qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            const double dels = q * delh;
            s += dels;
            if (std::fabs(dels / s) < eps) break;
        }
        if (i > maxit) throw numeric_error("bessel_k: CF2 failed to converge");
        h = a1 * h;
        kmu = std::sqrt(detail::pi / (2.0 * z)) * std::exp(-z) / s;
        kmu1 = kmu * (mu + z + 0.5 - h) * xi;
    }
    for (int i = 1; i <= nl; ++i) {
        const double ktemp = (mu + i) * 2.0 * xi * kmu1 + kmu;
        kmu = kmu1;
        kmu1 = ktemp;
    }
    return kmu;
}

// Bessel function of the first kind, nonnegative fractional order.
// Steed's method: CF1 with downward recurrence, normalized through the
// Wronskian with Y (series for z < 2, CF2 otherwise).
inline double bessel_j(double nu, double z) {
    if (nu < 0.0) throw domain_error("bessel_j: requires nu >= 0");
    if (z < 0.0) throw domain_error("bessel_j: requires z >= 0");
    if (z == 0.0) return nu == 0.0 ? 1.0 : 0.0;

    constexpr double eps = 1e-16;
    constexpr double fpmin = 1e-300;
    constexpr int maxit = 100000;
    const double xmin = 2.0;
    const int nl = (z < xmin) ? static_cast<int>(nu + 0.5)
                              : std::max(0, static_cast<int>(nu - z + 1.5));
    const double mu = nu - nl;
    const double mu2 = mu * mu;
    const double xi = 1.0 / z;
    const double xi2 = 2.0 * xi;
    const double w = xi2 / detail::pi;

    // CF1 for J'/J at order nu
    int isign = 1;
    double h = nu * xi;
    if (h < fpmin) h = fpmin;
    double b = xi2 * nu;
    double d = 0.0, c = h;
    int it = 1;
    for (; it <= maxit; ++it) {
        b += xi2;
        d = b - d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = b - 1.0 / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = c * d;
        h *= del;
        if (d < 0.0) isign = -isign;
        if (std::fabs(del - 1.0) < eps) break;
    }
    if (it > maxit) throw numeric_error("bessel_j: CF1 failed to converge");

    double rjl = isign * fpmin;
    double rjpl = h * rjl;
    const double rjl1 = rjl;
    double fact = nu * xi;
    for (int l = nl; l >= 1; --l) {
        const double rjtemp = fact * rjl + rjpl;
        fact -= xi;
        rjpl = fact * rjtemp - rjl;
        rjl = rjtemp;
    }
    if (rjl == 0.0) rjl = eps;
    const double f = rjpl / rjl; // J'/J at order mu

    double rjmu;
    if (z < xmin) {
        // Temme's series for Y_mu, Y_{mu+1}, then the Wronskian
        const double x2 = 0.5 * z;
        const double pimu = detail::pi * mu;
        const double factm = (std::fabs(pimu) < eps) ? 1.0 : pimu / std::sin(pimu);
        double dd = -std::log(x2);
        double e = mu * dd;
        const double fact2 = (std::fabs(e) < eps) ? 1.0 : std::sinh(e) / e;
        const auto g = detail::temme_gamma_terms(mu);
        double ff = 2.0 / detail::pi * factm * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * dd);
        e = std::exp(e);
        double p = e / (g.gampl * detail::pi);
        double q = 1.0 / (e * detail::pi * g.gammi);
        const double pimu2 = 0.5 * pimu;
        const double fact3 = (std::fabs(pimu2) < eps) ? 1.0 : std::sin(pimu2) / pimu2;
        const double r = detail::pi * pimu2 * fact3 * fact3;
        double cc = 1.0;
        dd = -x2 * x2;
        double sum = ff + r * q;
        double sum1 = p;
        int i = 1;
        for (; i <= maxit; ++i) {
            ff = (i * ff + p + q) / (i * i - mu2);
            cc *= dd / i;
            p /= (i - mu);
            q /= (i + mu);
            const double del = cc * (ff + r * q);
            sum += del;
            sum1 += cc * p - i * del;
            if (std::fabs(del) < (1.0 + std::fabs(sum)) * eps) break;
        }
        if (i > maxit) throw numeric_error("bessel_j: Temme series failed to converge");
        const double rymu = -sum;
        const double ry1 = -sum1 * xi2;
        const double rymup = mu * xi * rymu - ry1;
        rjmu = w / (rymup - f * rymu);
    } else {
        // CF2 (complex Lentz) for p + iq = (J' + iY')/(J + iY) at order mu:
        // p + iq = -1/(2z) + i + (i/z) * a1/(b1 + a2/(b2 + ...)),
        // a_n = (n - 1/2)^2 - mu^2, b_n = 2(z + n i).
        const std::complex<double> ii(0.0, 1.0);
        std::complex<double> cf(fpmin, 0.0);
        std::complex<double> cc = cf;
        std::complex<double> dd(0.0, 0.0);
        int i = 1;
        for (; i <= maxit; ++i) {
            const double an = (i - 0.5) * (i - 0.5) - mu2;
            const std::complex<double> bn = 2.0 * (z + static_cast<double>(i) * ii);
            dd = bn + an * dd;
            if (std::abs(dd) < fpmin) dd = fpmin;
            cc = bn + an / cc;
            if (std::abs(cc) < fpmin) cc = fpmin;
            dd = 1.0 / dd;
            const std::complex<double> delta = cc * dd;
            cf *= delta;
            if (std::abs(delta - 1.0) < eps) break;
        }
        if (i > maxit) throw numeric_error("bessel_j: CF2 failed to converge");
        const std::complex<double> pq = -0.5 * xi + ii + ii * xi * cf;
        const double p = pq.real();
        const double q = pq.imag();
        const double gam = (p - f) / q;
        rjmu = std::sqrt(w / ((p - f) * gam + q));
        if (std::signbit(rjl) != std::signbit(rjmu)) rjmu = -rjmu;
    }
    return rjmu * (rjl1 / rjl); // scale the unnormalized downward recurrence
}

// Gauss-Hermite quadrature under the standard normal weight phi(w).
struct QuadratureRule {
    std::vector<double> nodes;   // strictly increasing, symmetric about 0
    std::vector<double> weights; // nonnegative, sum to 1
    int order = 0;
};

namespace detail {

inline QuadratureRule make_gauss_hermite(int n) {
    QuadratureRule rule;
    rule.order = n;
    if (n == 1) {
        rule.nodes = {0.0};
        rule.weights = {1.0};
        return rule;
    }
    // Golub-Welsch: probabilists' Hermite recurrence has zero diagonal and
    // off-diagonal sqrt(k); weights are squared first eigenvector entries.
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(n - 1);
    for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success)
        throw numeric_error("gauss_hermite_rule: eigen decomposition failed");
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = solver.eigenvalues()[i];
        const double v0 = solver.eigenvectors()(0, i);
        rule.weights[i] = v0 * v0;
    }
    // enforce the exact symmetry of the rule
    for (int i = 0, j = n - 1; i < j; ++i, --j) {
        const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        const double wgt = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.weights[i] = wgt;
        rule.weights[j] = wgt;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

} // namespace detail

inline const QuadratureRule& gauss_hermite_rule(int n) {
    if (n < 1 || n > 512)
        throw config_error("gauss_hermite_rule: order must lie in [1, 512], got " + std::to_string(n));
    static std::map<int, QuadratureRule> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, detail::make_gauss_hermite(n)).first;
    return it->second;
}

inline double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * detail::pi);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

} // namespace lrf
