#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "lrfield/errors.hpp"
#include "lrfield/special_functions.hpp"

namespace lrf {

using vec3 = std::array<double, 3>;

enum class surface_kind { sphere, cube };

struct SurfaceSpec {
    surface_kind kind = surface_kind::sphere;
    double radius = 1.0;
    int dimension = 3;
};

struct SurfaceCloud {
    SurfaceSpec spec;
    std::vector<vec3> points;
    double area = 0.0;        // |S(r)| = 4 pi r^2 or |SQ(r)| = 24 r^2
    double cell_weight = 0.0; // area / n

    std::size_t size() const { return points.size(); }
};

inline double surface_area(const SurfaceSpec& spec) {
    if (!(spec.radius > 0.0)) throw domain_error("surface_area: radius must be positive");
    const double r2 = spec.radius * spec.radius;
    return spec.kind == surface_kind::sphere ? 4.0 * detail::pi * r2 : 24.0 * r2;
}

// Equal-area spiral: n latitude bands of equal area sampled at their
// mid-height, azimuth advanced by the golden angle pi(3 - sqrt 5) per point.
inline SurfaceCloud sphere_points(double r, int n) {
    if (!(r > 0.0)) throw domain_error("sphere_points: radius must be positive");
    if (n < 4) throw config_error("sphere_points: need n >= 4, got " + std::to_string(n));
    SurfaceCloud cloud;
    cloud.spec = {surface_kind::sphere, r, 3};
    cloud.points.reserve(n);
    const double golden = detail::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double z = -1.0 + (2.0 * i + 1.0) / n;
        const double rho = std::sqrt(1.0 - z * z);
        const double phi = golden * i;
        cloud.points.push_back({r * (rho * std::cos(phi)), r * (rho * std::sin(phi)), r * z});
    }
    cloud.area = surface_area(cloud.spec);
    cloud.cell_weight = cloud.area / n;
    return cloud;
}

// Six per-face k x k grids of cell centers on the cube shell of side 2r,
// k chosen so 6k^2 is closest to n_target. Faces are emitted in the order
// +x, -x, +y, -y, +z, -z, each row-major over its local (u, v) grid.
inline SurfaceCloud cube_points(double r, int n_target) {
    if (!(r > 0.0)) throw domain_error("cube_points: radius must be positive");
    if (n_target < 24) throw config_error("cube_points: need n_target >= 24, got " + std::to_string(n_target));
    const int k = std::max(2, static_cast<int>(std::lround(std::sqrt(n_target / 6.0))));
    SurfaceCloud cloud;
    cloud.spec = {surface_kind::cube, r, 3};
    cloud.points.reserve(6 * k * k);
    std::vector<double> c(k);
    for (int i = 0; i < k; ++i) c[i] = r * (-1.0 + (2.0 * i + 1.0) / k);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) cloud.points.push_back({r, c[i], c[j]});
    }
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) cloud.points.push_back({-r, c[i], c[j]});
    }
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) cloud.points.push_back({c[i], r, c[j]});
    }
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) cloud.points.push_back({c[i], -r, c[j]});
    }
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) cloud.points.push_back({c[i], c[j], r});
    }
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) cloud.points.push_back({c[i], c[j], -r});
    }
    cloud.area = surface_area(cloud.spec);
    cloud.cell_weight = cloud.area / cloud.points.size();
    return cloud;
}

// Density of the distance between two independent uniform points on S(r):
// (1/sqrt(pi)) Gamma(d/2) / Gamma((d-1)/2) r^{1-d} rho^{d-2} (1 - rho^2/(4r^2))^{(d-3)/2}.
inline double pair_distance_density(int d, double r, double rho) {
    if (d < 2) throw domain_error("pair_distance_density: requires d >= 2");
    if (!(r > 0.0)) throw domain_error("pair_distance_density: requires r > 0");
    if (rho <= 0.0 || rho >= 2.0 * r) return 0.0;
    const double constant =
        gamma_fn(0.5 * d) / (std::sqrt(detail::pi) * gamma_fn(0.5 * (d - 1)));
    // factored form keeps accuracy near the rho = 2r edge where d = 2 diverges
    const double shape = (2.0 * r - rho) * (2.0 * r + rho) / (4.0 * r * r);
    return constant * std::pow(r, 1.0 - d) * std::pow(rho, d - 2.0) *
           std::pow(shape, 0.5 * (d - 3.0));
}

inline void write_cloud_csv(const SurfaceCloud& cloud, std::ostream& out) {
    out << "x,y,z\n";
    char buf[128];
    for (const auto& p : cloud.points) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p[0], p[1], p[2]);
        out << buf;
    }
}

} // namespace lrf
