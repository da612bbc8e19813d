#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "lrfield/covariance.hpp"
#include "lrfield/errors.hpp"
#include "lrfield/field_sim.hpp"
#include "lrfield/hermite.hpp"
#include "lrfield/surface.hpp"

namespace lrf {

enum class weight_kind { constant_one, sphere_weight, cube_weight, custom_harmonic };

// Angular weight h_sp on the unit sphere plus an optional radial factor
// (null means identically 1). Angles: theta polar from +z in [0, pi],
// phi azimuth from +x in [0, 2 pi).
struct WeightFunction {
    weight_kind kind = weight_kind::constant_one;
    double base = 1.2; // custom_harmonic: base + amp sin(k_theta theta) sin(k_phi phi)
    double amp = 0.2;
    int k_theta = 5;
    int k_phi = 5;
    std::function<double(double)> h_rad;
};

inline double radial_factor(const WeightFunction& w, double r) {
    return w.h_rad ? w.h_rad(r) : 1.0;
}

inline double weight_eval(const WeightFunction& w, const vec3& p) {
    const double norm = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    if (norm == 0.0) throw domain_error("weight_eval: zero vector has no direction");
    if (w.kind == weight_kind::constant_one) return 1.0;
    double cosz = p[2] / norm;
    if (cosz > 1.0) cosz = 1.0;
    if (cosz < -1.0) cosz = -1.0;
    const double theta = std::acos(cosz);
    double phi = std::atan2(p[1], p[0]);
    if (phi < 0.0) phi += 2.0 * detail::pi;
    switch (w.kind) {
        case weight_kind::sphere_weight:
            return 1.2 + 0.2 * std::sin(5.0 * theta) * std::sin(5.0 * phi);
        case weight_kind::cube_weight:
            return 2.0 + std::cos(3.0 * theta);
        case weight_kind::custom_harmonic:
            return w.base + w.amp * std::sin(w.k_theta * theta) * std::sin(w.k_phi * phi);
        case weight_kind::constant_one:
            break;
    }
    return 1.0;
}

struct FunctionalConfig {
    CovarianceModel model;
    int kappa = 2;
    double c_kappa = 2.0; // hermite.coeffs[kappa]
    WeightFunction weight;
    HermiteSpec hermite;
};

inline double factorial(int k) {
    double fact = 1.0;
    for (int j = 2; j <= k; ++j) fact *= j;
    return fact;
}

inline void validate_functional(const FunctionalConfig& cfg) {
    validate(cfg.model);
    if (cfg.kappa < 1) throw config_error("FunctionalConfig: kappa must be >= 1");
    if (!(cfg.kappa * cfg.model.alpha < cfg.model.d - 1))
        throw config_error("FunctionalConfig: requires kappa * alpha < d - 1; got " +
                           std::to_string(cfg.kappa * cfg.model.alpha) + " vs " +
                           std::to_string(cfg.model.d - 1));
    if (std::fabs(cfg.c_kappa) <= 1e-9 * std::sqrt(factorial(cfg.kappa)))
        throw config_error("FunctionalConfig: C_kappa vanishes; rank does not match kappa");
}

inline FunctionalConfig make_functional_config(const CovarianceModel& model,
                                               const WeightFunction& weight,
                                               const HermiteSpec& hermite) {
    FunctionalConfig cfg;
    cfg.model = model;
    cfg.kappa = hermite.rank;
    cfg.c_kappa = hermite.coeffs[static_cast<std::size_t>(hermite.rank)];
    cfg.weight = weight;
    cfg.hermite = hermite;
    validate_functional(cfg);
    return cfg;
}

// c_r = kappa! c_2^{-kappa/2} / (C_kappa r^{d-1-kappa alpha/2} L^{kappa/2}(r))
inline double c_r_norm(const FunctionalConfig& cfg, double r) {
    validate_functional(cfg);
    if (!(r > 0.0)) throw domain_error("c_r_norm: requires r > 0");
    const double kfact = factorial(cfg.kappa);
    const double c2 = c2_const(cfg.model.d, cfg.model.alpha);
    const double ell = slowly_varying_L(cfg.model, r);
    const double exponent = cfg.model.d - 1.0 - 0.5 * cfg.kappa * cfg.model.alpha;
    return kfact * std::pow(c2, -0.5 * cfg.kappa) /
           (cfg.c_kappa * std::pow(r, exponent) * std::pow(ell, 0.5 * cfg.kappa));
}

// discrete c_h(r) = h_rad(r) cell_weight sum_p h_sp^2(p/|p|)
inline double c_h_norm(const FunctionalConfig& cfg, const SurfaceCloud& cloud) {
    double sum = 0.0;
    for (const auto& p : cloud.points) {
        const double h = weight_eval(cfg.weight, p);
        sum += h * h;
    }
    if (sum == 0.0) throw config_error("c_h_norm: weight vanishes on the whole cloud");
    return radial_factor(cfg.weight, cloud.spec.radius) * cloud.cell_weight * sum;
}

enum class functional_mode {
    full_g,     // X_{r,G}: apply the configured G
    kappa_term, // leading term: G replaced by (C_kappa / kappa!) H_kappa
};

// X_{r,G} = c_r (|S(r)|/n) sum_p G(eta(p)) h_sp(p/|p|)
inline double functional_X(const FunctionalConfig& cfg, const SurfaceCloud& cloud,
                           const std::vector<double>& field, double r,
                           functional_mode mode = functional_mode::full_g) {
    if (field.size() != cloud.size())
        throw domain_error("functional_X: field length " + std::to_string(field.size()) +
                           " does not match cloud size " + std::to_string(cloud.size()));
    const double lead = cfg.c_kappa / factorial(cfg.kappa);
    double sum = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double g = mode == functional_mode::full_g
                             ? g_eval(cfg.hermite.g, field[i])
                             : lead * hermite_poly(cfg.kappa, field[i]);
        sum += g * weight_eval(cfg.weight, cloud.points[i]);
    }
    return c_r_norm(cfg, r) * cloud.cell_weight * sum;
}

inline double functional_X(const FunctionalConfig& cfg, const SurfaceCloud& cloud,
                           const FieldRealization& field, double r,
                           functional_mode mode = functional_mode::full_g) {
    if (field.cloud != nullptr && field.cloud != &cloud)
        throw domain_error("functional_X: field was simulated on a different cloud");
    return functional_X(cfg, cloud, field.values, r, mode);
}

// least squares slope of observations against h: sum xi h / sum h^2
inline double lse_estimate(const std::vector<double>& observations, const FunctionalConfig& cfg,
                           const SurfaceCloud& cloud) {
    if (observations.size() != cloud.size())
        throw domain_error("lse_estimate: observations length " +
                           std::to_string(observations.size()) + " does not match cloud size " +
                           std::to_string(cloud.size()));
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto& p = cloud.points[i];
        const double norm = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
        const double h = radial_factor(cfg.weight, norm) * weight_eval(cfg.weight, p);
        num += observations[i] * h;
        den += h * h;
    }
    if (den == 0.0) throw config_error("lse_estimate: weight vanishes on the whole cloud");
    return num / den;
}

// Var(sum_p H_kappa(eta(p)) h_p) = kappa! sum_{p,q} B^kappa(|p-q|) h_p h_q
inline double hermite_sum_variance(const CovarianceModel& model, int kappa,
                                   const std::vector<vec3>& points,
                                   const std::vector<double>& h) {
    if (points.size() != h.size())
        throw domain_error("hermite_sum_variance: points and weights differ in length");
    if (points.size() > 5000)
        throw resource_error("hermite_sum_variance: cloud of " + std::to_string(points.size()) +
                             " points exceeds the 5000-point quadratic-cost cap");
    if (kappa < 1) throw config_error("hermite_sum_variance: kappa must be >= 1");
    double sum = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) sum += h[i] * h[i];
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            const double dx = points[i][0] - points[j][0];
            const double dy = points[i][1] - points[j][1];
            const double dz = points[i][2] - points[j][2];
            const double b = cov(model, std::sqrt(dx * dx + dy * dy + dz * dz));
            sum += 2.0 * std::pow(b, kappa) * h[i] * h[j];
        }
    }
    return factorial(kappa) * sum;
}

// exact variance of functional_X in kappa_term mode
inline double exact_variance(const FunctionalConfig& cfg, const SurfaceCloud& cloud, double r) {
    std::vector<double> h(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) h[i] = weight_eval(cfg.weight, cloud.points[i]);
    const double pref =
        c_r_norm(cfg, r) * cloud.cell_weight * cfg.c_kappa / factorial(cfg.kappa);
    return pref * pref * hermite_sum_variance(cfg.model, cfg.kappa, cloud.points, h);
}

struct FourierResult {
    std::complex<double> value;
    bool accuracy_warning = false;
    std::string note;
};

// K(x) = integral over S(1) of e^{i<x,u>} h_sp(u); spiral-node quadrature,
// trustworthy for |x| <= quad_n / 10
inline FourierResult fourier_K(const vec3& x, const WeightFunction& w, int quad_n) {
    if (quad_n < 500)
        throw config_error("fourier_K: quad_n must be >= 500, got " + std::to_string(quad_n));
    const SurfaceCloud nodes = sphere_points(1.0, quad_n);
    std::complex<double> sum = 0.0;
    for (const auto& u : nodes.points) {
        const double dot = x[0] * u[0] + x[1] * u[1] + x[2] * u[2];
        sum += std::complex<double>(std::cos(dot), std::sin(dot)) * weight_eval(w, u);
    }
    FourierResult result;
    result.value = sum * (4.0 * detail::pi / quad_n);
    const double len = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    if (len > quad_n / 10.0) {
        result.accuracy_warning = true;
        result.note = "fourier_K: |x| = " + std::to_string(len) +
                      " exceeds the trusted range quad_n/10 = " + std::to_string(quad_n / 10.0);
    }
    return result;
}

} // namespace lrf
