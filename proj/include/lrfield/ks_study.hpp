#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrfield/detail/thread_pool.hpp"
#include "lrfield/errors.hpp"
#include "lrfield/field_sim.hpp"
#include "lrfield/functionals.hpp"
#include "lrfield/stats.hpp"
#include "lrfield/version.hpp"

namespace lrf {

inline const char* surface_name(surface_kind s) {
    return s == surface_kind::sphere ? "sphere" : "cube";
}

inline const char* weight_name(weight_kind w) {
    switch (w) {
        case weight_kind::constant_one: return "constant_one";
        case weight_kind::sphere_weight: return "sphere_weight";
        case weight_kind::cube_weight: return "cube_weight";
        case weight_kind::custom_harmonic: return "custom_harmonic";
    }
    return "constant_one";
}

// "hermite<k>", "square", "abs", or "indicator:<threshold>"
inline GFunction g_from_id(const std::string& id) {
    if (id.rfind("hermite", 0) == 0 && id.size() > 7) {
        try {
            return g_hermite(std::stoi(id.substr(7)));
        } catch (const std::invalid_argument&) {
        } catch (const std::out_of_range&) {
        }
    }
    if (id == "square") return g_square();
    if (id == "abs") return g_abs();
    if (id.rfind("indicator:", 0) == 0) {
        try {
            return g_indicator(std::stod(id.substr(10)));
        } catch (const std::invalid_argument&) {
        } catch (const std::out_of_range&) {
        }
    }
    throw config_error("unknown g id '" + id +
                       "'; expected hermite<k>, square, abs, or indicator:<threshold>");
}

struct StudyConfig {
    surface_kind surface = surface_kind::sphere;
    weight_kind weight = weight_kind::constant_one;
    int d = 3;
    double alpha = 2.0 / 3.0;
    int kappa = 2;
    std::string g_id = "hermite2";
    std::vector<double> radii;
    double reference_radius = 0.0;
    int replicates = 500; // N: fresh fields per sample, per (repeat, radius)
    int repeats = 20;     // M: independent studies feeding the box plots
    double points_density = 0.005;
    std::uint64_t master_seed = 1;
    int workers = 1;
    bool share_fields = false; // reuse field streams across weight choices
    bool self_test = false;    // reference sample reuses the scale streams
    std::int64_t mem_budget_bytes = std::int64_t{2} << 30;
};

inline void validate_study(const StudyConfig& cfg) {
    if (cfg.d != 3) throw config_error("StudyConfig: only d = 3 surfaces are implemented");
    if (cfg.radii.empty()) throw config_error("StudyConfig: radius grid is empty");
    for (std::size_t i = 0; i < cfg.radii.size(); ++i) {
        if (!(cfg.radii[i] > 0.0)) throw config_error("StudyConfig: radii must be positive");
        if (i > 0 && !(cfg.radii[i] > cfg.radii[i - 1]))
            throw config_error("StudyConfig: radii must be strictly increasing");
    }
    if (cfg.self_test) {
        if (cfg.radii.size() != 1 || cfg.reference_radius != cfg.radii[0])
            throw config_error(
                "StudyConfig: self-test mode requires a single radius equal to the reference");
    } else if (!(cfg.reference_radius > cfg.radii.back())) {
        throw config_error("StudyConfig: reference_radius must exceed the largest grid radius");
    }
    if (cfg.replicates < 50) throw config_error("StudyConfig: need replicates >= 50");
    if (cfg.repeats < 1) throw config_error("StudyConfig: need repeats >= 1");
    if (!(cfg.points_density > 0.0)) throw config_error("StudyConfig: points_density must be positive");
}

inline int study_point_count(surface_kind s, double density, double r) {
    const double area = s == surface_kind::sphere ? 4.0 * detail::pi * r * r : 24.0 * r * r;
    const long n = std::lround(density * area);
    const long floor_n = s == surface_kind::sphere ? 4 : 24;
    return static_cast<int>(std::max(n, floor_n));
}

// First component of every stream path; 0 when field realizations are shared
// across weight choices, otherwise one value per weight kind.
inline std::uint64_t study_weight_component(const StudyConfig& cfg) {
    return cfg.share_fields ? 0 : 1 + static_cast<std::uint64_t>(cfg.weight);
}

struct StudyResult {
    std::vector<double> radii;
    std::vector<std::vector<double>> distances; // repeats rows x radii columns
    std::vector<BoxSummary> boxes;              // per radius, over repeats
    std::vector<BoxSummary> log_boxes;          // same, of log distances
    RateFit fit;
    bool fit_valid = false;
    std::vector<int> point_counts; // grid order, reference cloud last
    std::vector<double> jitters;   // same layout
    double wall_seconds = 0.0;
};

namespace detail {

struct RadiusData {
    SurfaceCloud cloud;
    CloudFactor factor;
    std::vector<double> h; // angular weight at each point
    double c_r = 0.0;
};

inline SurfaceCloud make_study_cloud(surface_kind s, double density, double r) {
    const int n = study_point_count(s, density, r);
    return s == surface_kind::sphere ? sphere_points(r, n) : cube_points(r, n);
}

inline RadiusData make_radius_data(const FunctionalConfig& fcfg, const StudyConfig& cfg,
                                   double r) {
    RadiusData rd;
    rd.cloud = make_study_cloud(cfg.surface, cfg.points_density, r);
    try {
        rd.factor = factor_covariance(fcfg.model, rd.cloud);
    } catch (const numeric_error& e) {
        char head[96];
        std::snprintf(head, sizeof head, "run_study: factorization failed for %s r = %.17g: ",
                      surface_name(cfg.surface), r);
        throw numeric_error(std::string(head) + e.what());
    }
    rd.h.resize(rd.cloud.size());
    for (std::size_t i = 0; i < rd.cloud.size(); ++i)
        rd.h[i] = weight_eval(fcfg.weight, rd.cloud.points[i]);
    rd.c_r = c_r_norm(fcfg, r);
    return rd;
}

// N values of the functional at one (repeat, radius, role); stream path is
// (weight component, repeat, radius index, role, replicate).
inline std::vector<double> draw_x_sample(const RadiusData& rd, const GFunction& g,
                                         std::uint64_t master,
                                         const std::array<std::uint64_t, 4>& prefix, int n_reps) {
    const Eigen::Index n = rd.factor.chol.rows();
    Eigen::VectorXd z(n), v(n);
    std::vector<double> xs(static_cast<std::size_t>(n_reps));
    for (int k = 0; k < n_reps; ++k) {
        NormalStream stream(derive_stream_key(
            master, {prefix[0], prefix[1], prefix[2], prefix[3], static_cast<std::uint64_t>(k)}));
        for (Eigen::Index i = 0; i < n; ++i) z[i] = stream.next();
        v.noalias() = rd.factor.chol.triangularView<Eigen::Lower>() * z;
        double sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            sum += g_eval(g, v[i]) * rd.h[static_cast<std::size_t>(i)];
        xs[static_cast<std::size_t>(k)] = rd.c_r * rd.cloud.cell_weight * sum;
    }
    return xs;
}

} // namespace detail

// Validates grid semantics, the g/kappa pairing, and the model regime, and
// returns the functional configuration the study will run with.
inline FunctionalConfig study_functional_config(const StudyConfig& cfg) {
    validate_study(cfg);
    const GFunction g = g_from_id(cfg.g_id);
    const HermiteSpec spec = hermite_coeffs(g, std::max(cfg.kappa + 2, 8), 64);
    if (spec.rank != cfg.kappa)
        throw config_error("StudyConfig: kappa = " + std::to_string(cfg.kappa) +
                           " does not match the Hermite rank " + std::to_string(spec.rank) +
                           " of g = " + cfg.g_id);
    WeightFunction weight;
    weight.kind = cfg.weight;
    const CovarianceModel model{covariance_family::cauchy, cfg.alpha, cfg.d};
    return make_functional_config(model, weight, spec);
}

// Feasibility before any simulation: factor storage scales as n^2.
inline void check_study_feasibility(const StudyConfig& cfg) {
    std::int64_t n_max = 0;
    for (double r : cfg.radii)
        n_max = std::max<std::int64_t>(n_max, study_point_count(cfg.surface, cfg.points_density, r));
    n_max = std::max<std::int64_t>(
        n_max, study_point_count(cfg.surface, cfg.points_density, cfg.reference_radius));
    const std::int64_t need = 24 * n_max * n_max + 16 * n_max * cfg.replicates;
    if (need > cfg.mem_budget_bytes) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "run_study: largest cloud of %lld points needs ~%lld MiB, budget %lld MiB; "
                      "reduce points_density or radii",
                      static_cast<long long>(n_max), static_cast<long long>(need >> 20),
                      static_cast<long long>(cfg.mem_budget_bytes >> 20));
        throw resource_error(buf);
    }
}

// Full experiment driver: for every (repeat, radius) cell, N fresh functional
// values at the grid radius and N fresh values at the reference radius, and
// their two-sample Kolmogorov distance. Deterministic given the master seed,
// whatever the worker count.
inline StudyResult run_study(const StudyConfig& cfg,
                             const std::function<void(int, int)>& progress = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    const FunctionalConfig fcfg = study_functional_config(cfg);
    const GFunction& g = fcfg.hermite.g;
    check_study_feasibility(cfg);

    const int n_radii = static_cast<int>(cfg.radii.size());
    std::vector<detail::RadiusData> cache;
    cache.reserve(static_cast<std::size_t>(n_radii) + 1);
    for (double r : cfg.radii) cache.push_back(detail::make_radius_data(fcfg, cfg, r));
    const bool reuse_reference = cfg.self_test; // reference radius equals the grid radius
    if (!reuse_reference) cache.push_back(detail::make_radius_data(fcfg, cfg, cfg.reference_radius));
    const detail::RadiusData& reference = reuse_reference ? cache[0] : cache.back();

    StudyResult result;
    result.radii = cfg.radii;
    result.distances.assign(static_cast<std::size_t>(cfg.repeats),
                            std::vector<double>(static_cast<std::size_t>(n_radii), 0.0));
    for (const auto& rd : cache) {
        result.point_counts.push_back(static_cast<int>(rd.cloud.size()));
        result.jitters.push_back(rd.factor.jitter);
    }

    const std::uint64_t wc = study_weight_component(cfg);
    const int n_tasks = cfg.repeats * n_radii;
    int done = 0;
    detail::run_task_grid(
        n_tasks, cfg.workers,
        [&](int t) {
            const auto m = static_cast<std::uint64_t>(t / n_radii);
            const int i = t % n_radii;
            const auto xs_scale = detail::draw_x_sample(
                cache[static_cast<std::size_t>(i)], g, cfg.master_seed,
                {wc, m, static_cast<std::uint64_t>(i), 0}, cfg.replicates);
            const std::uint64_t proxy_role = cfg.self_test ? 0 : 1;
            const auto xs_ref = detail::draw_x_sample(
                reference, g, cfg.master_seed, {wc, m, static_cast<std::uint64_t>(i), proxy_role},
                cfg.replicates);
            result.distances[m][static_cast<std::size_t>(i)] = ks_statistic(xs_scale, xs_ref);
        },
        [&](int) {
            ++done;
            if (progress) progress(done, n_tasks);
        });

    for (int i = 0; i < n_radii; ++i) {
        std::vector<double> column, log_column;
        column.reserve(static_cast<std::size_t>(cfg.repeats));
        for (int m = 0; m < cfg.repeats; ++m) {
            const double d = result.distances[static_cast<std::size_t>(m)][static_cast<std::size_t>(i)];
            column.push_back(d);
            if (d > 0.0) log_column.push_back(std::log(d));
        }
        result.boxes.push_back(boxplot_summary(column));
        const double nan = std::nan("");
        result.log_boxes.push_back(log_column.empty() ? BoxSummary{nan, nan, nan, nan, nan}
                                                      : boxplot_summary(log_column));
    }

    std::vector<double> xs, ys;
    xs.reserve(static_cast<std::size_t>(n_tasks));
    ys.reserve(static_cast<std::size_t>(n_tasks));
    for (int m = 0; m < cfg.repeats; ++m) {
        for (int i = 0; i < n_radii; ++i) {
            xs.push_back(cfg.radii[static_cast<std::size_t>(i)]);
            ys.push_back(result.distances[static_cast<std::size_t>(m)][static_cast<std::size_t>(i)]);
        }
    }
    try {
        result.fit = fit_log_rate(xs, ys);
        result.fit_valid = true;
    } catch (const domain_error&) {
        result.fit_valid = false; // degenerate studies (all-zero distances)
    }

    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

namespace detail {

inline void write_g17(std::ostream& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

} // namespace detail

inline void write_distances_csv(std::ostream& out, const StudyConfig& cfg,
                                const StudyResult& result) {
    out << "surface,weight,r,repeat,ks_distance\n";
    for (std::size_t m = 0; m < result.distances.size(); ++m) {
        for (std::size_t i = 0; i < result.radii.size(); ++i) {
            out << surface_name(cfg.surface) << ',' << weight_name(cfg.weight) << ',';
            detail::write_g17(out, result.radii[i]);
            out << ',' << m << ',';
            detail::write_g17(out, result.distances[m][i]);
            out << '\n';
        }
    }
}

inline void write_boxes_csv(std::ostream& out, const StudyResult& result) {
    out << "r,min,q1,median,q3,max,log_median\n";
    for (std::size_t i = 0; i < result.radii.size(); ++i) {
        const BoxSummary& b = result.boxes[i];
        detail::write_g17(out, result.radii[i]);
        for (double v : {b.min, b.q1, b.median, b.q3, b.max}) {
            out << ',';
            detail::write_g17(out, v);
        }
        out << ',';
        detail::write_g17(out, b.median > 0.0 ? std::log(b.median) : std::nan(""));
        out << '\n';
    }
}

inline void write_rate_fit_csv(std::ostream& out, const StudyResult& result) {
    out << "intercept,slope,slope_se,n_points,excluded_zeros\n";
    if (!result.fit_valid) {
        out << "nan,nan,nan,0," << result.fit.excluded_zeros << '\n';
        return;
    }
    detail::write_g17(out, result.fit.intercept);
    out << ',';
    detail::write_g17(out, result.fit.slope);
    out << ',';
    detail::write_g17(out, result.fit.slope_se);
    out << ',' << result.fit.n_points << ',' << result.fit.excluded_zeros << '\n';
}

inline void write_study_meta(std::ostream& out, const StudyConfig& cfg, const StudyResult& result) {
    out << "tool_version = " << version_string << '\n';
    out << "master_seed = " << cfg.master_seed << '\n';
    out << "surface = " << surface_name(cfg.surface) << '\n';
    out << "weight = " << weight_name(cfg.weight) << '\n';
    out << "alpha = ";
    detail::write_g17(out, cfg.alpha);
    out << '\n';
    out << "kappa = " << cfg.kappa << '\n';
    out << "g = " << cfg.g_id << '\n';
    out << "radii =";
    for (double r : cfg.radii) {
        out << ' ';
        detail::write_g17(out, r);
    }
    out << '\n';
    out << "reference_radius = ";
    detail::write_g17(out, cfg.reference_radius);
    out << '\n';
    out << "replicates = " << cfg.replicates << '\n';
    out << "repeats = " << cfg.repeats << '\n';
    out << "points_density = ";
    detail::write_g17(out, cfg.points_density);
    out << '\n';
    out << "share_fields = " << (cfg.share_fields ? 1 : 0) << '\n';
    out << "self_test = " << (cfg.self_test ? 1 : 0) << '\n';
    out << "workers_hint = " << cfg.workers << '\n';
    for (std::size_t i = 0; i < result.point_counts.size(); ++i) {
        const bool is_ref = !cfg.self_test && i + 1 == result.point_counts.size();
        const double r = is_ref ? cfg.reference_radius : cfg.radii[i];
        out << "point_count[";
        detail::write_g17(out, r);
        out << "] = " << result.point_counts[i] << '\n';
        out << "jitter[";
        detail::write_g17(out, r);
        out << "] = ";
        detail::write_g17(out, result.jitters[i]);
        out << '\n';
    }
    out << "wall_seconds = ";
    detail::write_g17(out, result.wall_seconds);
    out << '\n';
}

// Static box-plot rendering: one box per radius on a categorical x axis.
inline std::string render_box_svg(const std::vector<double>& radii,
                                  const std::vector<BoxSummary>& boxes,
                                  const std::string& y_label) {
    if (radii.size() != boxes.size())
        throw domain_error("render_box_svg: radii and boxes differ in length");
    const double width = 720.0, height = 480.0, left = 70.0, right = 20.0, top = 20.0,
                 bottom = 50.0;
    double lo = 0.0, hi = 1.0;
    bool any = false;
    for (const auto& b : boxes) {
        if (std::isnan(b.min)) continue;
        lo = any ? std::min(lo, b.min) : b.min;
        hi = any ? std::max(hi, b.max) : b.max;
        any = true;
    }
    if (!any) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi == lo) hi = lo + 1.0;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    const double plot_w = width - left - right, plot_h = height - top - bottom;
    auto ypix = [&](double v) { return top + plot_h * (hi - v) / (hi - lo); };

    char buf[256];
    std::string svg;
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" "
                  "viewBox=\"0 0 %g %g\">\n",
                  width, height, width, height);
    svg += buf;
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", left,
                  top, left, top + plot_h);
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", left,
                  top + plot_h, left + plot_w, top + plot_h);
    svg += buf;
    for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4.0;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%g\" y=\"%g\" font-size=\"12\" text-anchor=\"end\">%.4g</text>\n",
                      left - 6.0, ypix(v) + 4.0, v);
        svg += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%g\" y=\"%g\" font-size=\"13\" text-anchor=\"middle\" "
                  "transform=\"rotate(-90 16 %g)\">%s</text>\n",
                  16.0, top + plot_h / 2.0, top + plot_h / 2.0, y_label.c_str());
    svg += buf;

    const double slot = plot_w / static_cast<double>(radii.size());
    for (std::size_t i = 0; i < radii.size(); ++i) {
        const double cx = left + slot * (static_cast<double>(i) + 0.5);
        const BoxSummary& b = boxes[i];
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%g\" y=\"%g\" font-size=\"12\" text-anchor=\"middle\">%g</text>\n",
                      cx, height - 18.0, radii[i]);
        svg += buf;
        if (std::isnan(b.min)) continue;
        const double bw = 0.5 * slot;
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", cx,
                      ypix(b.min), cx, ypix(b.max));
        svg += buf;
        for (double w : {b.min, b.max}) {
            std::snprintf(buf, sizeof buf,
                          "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
                          cx - bw / 4.0, ypix(w), cx + bw / 4.0, ypix(w));
            svg += buf;
        }
        std::snprintf(buf, sizeof buf,
                      "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"#cfe2f3\" "
                      "stroke=\"black\"/>\n",
                      cx - bw / 2.0, ypix(b.q3), bw, ypix(b.q1) - ypix(b.q3));
        svg += buf;
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\" "
                      "stroke-width=\"2\"/>\n",
                      cx - bw / 2.0, ypix(b.median), cx + bw / 2.0, ypix(b.median));
        svg += buf;
    }
    svg += "</svg>\n";
    return svg;
}

} // namespace lrf
