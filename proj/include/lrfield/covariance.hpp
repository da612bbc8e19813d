#pragma once

#include <cmath>
#include <string>

#include "lrfield/detail/quadrature.hpp"
#include "lrfield/errors.hpp"
#include "lrfield/special_functions.hpp"

namespace lrf {

enum class covariance_family { cauchy };

struct CovarianceModel {
    covariance_family family = covariance_family::cauchy;
    double alpha = 2.0 / 3.0;
    int d = 3;
};

inline void validate(const CovarianceModel& model) {
    if (model.d < 2) throw domain_error("CovarianceModel: requires d >= 2");
    if (!(model.alpha > 0.0 && model.alpha < model.d))
        throw domain_error("CovarianceModel: requires 0 < alpha < d, got alpha = " +
                           std::to_string(model.alpha));
}

// B(x) = (1 + ||x||^2)^{-alpha/2}
inline double cov(const CovarianceModel& model, double dist) {
    if (dist < 0.0) throw domain_error("cov: distance must be nonnegative");
    return std::pow(1.0 + dist * dist, -0.5 * model.alpha);
}

// c_2(d, alpha) = Gamma((d-alpha)/2) / (2^alpha pi^{d/2} Gamma(alpha/2))
inline double c2_const(int d, double alpha) {
    validate(CovarianceModel{covariance_family::cauchy, alpha, d});
    return gamma_fn(0.5 * (d - alpha)) /
           (std::pow(2.0, alpha) * std::pow(detail::pi, 0.5 * d) * gamma_fn(0.5 * alpha));
}

// L_c(x) = 2^{(d+alpha)/2} Gamma((d-alpha)/2)^{-1} x^{-(d-alpha)/2} K_{(d-alpha)/2}(1/x),
// slowly varying with limit 2^{d-1} at infinity.
inline double slowly_varying_L(const CovarianceModel& model, double x) {
    validate(model);
    if (!(x > 0.0)) throw domain_error("slowly_varying_L: requires x > 0");
    const double nu = 0.5 * (model.d - model.alpha);
    return std::pow(2.0, 0.5 * (model.d + model.alpha)) / gamma_fn(nu) * std::pow(x, -nu) *
           bessel_k(nu, 1.0 / x);
}

// f_c(lambda) = lambda^{(alpha-d)/2} K_{(d-alpha)/2}(lambda) / (pi^{d/2} 2^{(alpha-d)/2} Gamma(alpha/2)),
// equivalently c_2(d, alpha) lambda^{alpha-d} L_c(1/lambda). Valid for lambda
// in (0, ~50]; beyond that the Bessel factor underflows.
inline double spectral_density(const CovarianceModel& model, double lam) {
    validate(model);
    if (!(lam > 0.0)) throw domain_error("spectral_density: requires lam > 0");
    const double nu = 0.5 * (model.d - model.alpha);
    return std::pow(lam, 0.5 * (model.alpha - model.d)) * bessel_k(nu, lam) /
           (std::pow(detail::pi, 0.5 * model.d) * std::pow(2.0, 0.5 * (model.alpha - model.d)) *
            gamma_fn(0.5 * model.alpha));
}

// Y_d(z) = 2^{(d-2)/2} Gamma(d/2) J_{(d-2)/2}(z) z^{(2-d)/2}, normalized so Y_d(0) = 1.
inline double isotropic_kernel_Y(int d, double z) {
    if (d < 2) throw domain_error("isotropic_kernel_Y: requires d >= 2");
    if (z < 0.0) throw domain_error("isotropic_kernel_Y: requires z >= 0");
    if (z < 1e-4) {
        // series around 0 avoids the 0/0 in the closed form
        const double z2 = z * z;
        return 1.0 - z2 / (2.0 * d) + z2 * z2 / (8.0 * d * (d + 2.0));
    }
    const double nu = 0.5 * (d - 2.0);
    return std::pow(2.0, nu) * gamma_fn(0.5 * d) * bessel_j(nu, z) * std::pow(z, -nu);
}

// B(r) = integral of Y_d(rz) against the spectral measure
// dPhi(z) = 2 pi^{d/2} Gamma(d/2)^{-1} z^{d-1} f(z) dz. The density used here
// is normalized to unit total mass (B(0) = 1): 2^{1-d} spectral_density.
inline double cov_from_spectrum(const CovarianceModel& model, double r) {
    validate(model);
    if (r < 0.0) throw domain_error("cov_from_spectrum: requires r >= 0");
    const int d = model.d;
    const double alpha = model.alpha;
    const double nu = 0.5 * (d - alpha);
    const double measure = 2.0 * std::pow(detail::pi, 0.5 * d) / gamma_fn(0.5 * d);
    const double density_const =
        std::pow(2.0, 1.0 - d) /
        (std::pow(detail::pi, 0.5 * d) * std::pow(2.0, 0.5 * (alpha - d)) * gamma_fn(0.5 * alpha));
    const double scale = measure * density_const;
    const double p = 0.5 * (alpha + d) - 1.0; // z^{d-1} z^{(alpha-d)/2} = z^p
    const double small_lead = gamma_fn(nu) * std::pow(2.0, nu - 1.0); // K_nu(z) z^nu -> this

    auto integrand = [&](double z) {
        const double y = isotropic_kernel_Y(d, r * z);
        if (z < 1e-8) return scale * y * small_lead * std::pow(z, alpha - 1.0);
        return scale * y * std::pow(z, p) * bessel_k(nu, z);
    };

    const double z_max = 60.0; // K_nu(60) ~ 1e-27, beyond any 1e-9 tolerance
    const double z1 = std::min(1.0, r > 1.0 ? detail::pi / (2.0 * r) : 1.0);
    const double head = detail::tanh_sinh(integrand, 0.0, z1, 1e-13);

    auto tail_sum = [&](double width) {
        double total = 0.0;
        for (double a = z1; a < z_max; a += width) {
            total += detail::gauss_legendre_16(integrand, a, std::min(a + width, z_max));
        }
        return total;
    };
    const double width = detail::pi / std::max(r, 1.0); // half the oscillation period
    const double tail = tail_sum(width);
    const double tail_check = tail_sum(0.5 * width);
    if (std::fabs(tail - tail_check) > 1e-9 * (1.0 + std::fabs(tail)))
        throw numeric_error("cov_from_spectrum: oscillatory tail did not converge at r = " +
                            std::to_string(r));
    return head + tail_check;
}

} // namespace lrf
